//! Emotion recognition from masked faces and bodies in video.
//!
//! The crate is organised around the processing stages of the pipeline:
//!
//! - [`geometry`]: synthetic face-mask rendering from a 468-vertex face mesh,
//!   body and face boxes from keypoints, face blackout.
//! - [`dataset`]: manifests, frame-directory videos, segment partitioning,
//!   snippet sampling and a deterministic synthetic corpus.
//! - [`model`]: residual backbones with optional temporal channel shift,
//!   segmental consensus, multi-label BCE and momentum SGD training.
//! - [`fusion`]: two-stream (face / blacked-out body) late score fusion.
//! - [`metrics`]: pooled ("unbalanced") and per-label ROC AUC, best-epoch selection.
//! - [`explain`]: Grad-CAM maps and heat overlays.
//! - [`harness`]: experiment configuration, training runs, mask-effect study and timing bench.

pub mod dataset;
pub mod error;
pub mod explain;
pub mod fusion;
pub mod geometry;
pub mod harness;
pub mod labels;
pub mod metrics;
pub mod model;
pub mod util;

pub use error::{Error, Result};
pub use labels::{Emotion, LabelVector, NUM_LABELS};

pub use dataset::{SamplerConfig, SamplingMode, Snippet, VideoClip};
pub use fusion::{Aggregator, FusionConfig};
pub use geometry::{BoundingBox, LandmarkSet, MaskConfig, MaskPolygon, YawBin};
pub use harness::{ExperimentReport, Modality, RunConfig};
pub use metrics::EvalRecord;
pub use model::{Architecture, Backbone, EmotionScores, ScoreKind, ShiftConfig};
