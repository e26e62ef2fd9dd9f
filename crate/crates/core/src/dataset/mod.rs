//! Clips, manifests, segment partitioning and snippet sampling.

mod manifest;
mod prepare;
mod sampler;
mod segments;
pub mod synthetic;
mod video;

use std::path::PathBuf;

use thiserror::Error;

pub use manifest::{load_clip, load_manifest, write_manifest, Manifest, ManifestEntry, Split, VideoClip};
pub use prepare::{crop_stream, prepare_stream, GeometryConfig, PreparedStream, StreamKind};
pub use sampler::{sample_clip, sample_snippet, SamplerConfig, SamplingMode, Snippet};
pub use segments::{divide_into_segments, Segment};
pub use synthetic::{generate_synthetic_corpus, CorpusSpec, SyntheticCorpus};
pub use video::{read_video, write_video};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("video '{0}' referenced by the manifest does not exist")]
    MissingVideo(PathBuf),
    #[error("video '{0}' contains no frames")]
    EmptyVideo(PathBuf),
    #[error("frame {index} of '{path}' is {got:?}, expected {expected:?}")]
    FrameSize { path: PathBuf, index: usize, got: (u32, u32), expected: (u32, u32) },
    #[error("invalid sampler configuration: {0}")]
    Sampler(String),
}
