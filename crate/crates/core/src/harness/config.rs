use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{GeometryConfig, Split, StreamKind};
use crate::error::{Error, Result};
use crate::fusion::FusionConfig;
use crate::model::{shifted_channels, Architecture, Normalization, OptimizerConfig, ShiftConfig};
use crate::util;

/// Which crops the model is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    #[default]
    Face,
    /// Body crop with the face blacked out.
    Body,
    /// Body crop including the face.
    FullBody,
    /// Face and blacked-out body networks with late fusion.
    Fusion,
}

impl Modality {
    pub const ALL: [Modality; 4] = [Modality::Face, Modality::Body, Modality::FullBody, Modality::Fusion];

    pub fn streams(&self) -> Vec<StreamKind> {
        match self {
            Modality::Face => vec![StreamKind::Face],
            Modality::Body => vec![StreamKind::Body],
            Modality::FullBody => vec![StreamKind::FullBody],
            Modality::Fusion => vec![StreamKind::Face, StreamKind::Body],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Modality::Face => "face",
            Modality::Body => "body",
            Modality::FullBody => "full_body",
            Modality::Fusion => "fusion",
        }
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Modality::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| format!("unknown modality '{s}' (face, body, full_body, fusion)"))
    }
}

pub fn stream_name(kind: StreamKind) -> &'static str {
    match kind {
        StreamKind::Face => "face",
        StreamKind::Body => "body",
        StreamKind::FullBody => "full_body",
    }
}

/// Full description of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    /// Manifest file; relative paths resolve against the config file's directory.
    pub manifest: PathBuf,
    /// Output directory; relative paths resolve against the output root.
    pub output_dir: PathBuf,
    pub segments: usize,
    pub snippet_frames: usize,
    pub modality: Modality,
    pub mask: bool,
    /// Total shifted channel share; absent disables the temporal shift.
    pub shift_fraction: Option<f64>,
    pub fusion: FusionConfig,
    pub architecture: Architecture,
    pub input_size: u32,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    /// Input statistics; absent means per-channel mean/std of the training split.
    pub normalization: Option<Normalization>,
    pub geometry: GeometryConfig,
    pub eval_split: Split,
    /// Also evaluate the training split after every epoch.
    pub track_train_auc: bool,
    pub save_checkpoint: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            name: "run".into(),
            manifest: PathBuf::from("manifest.jsonl"),
            output_dir: PathBuf::from("runs/run"),
            segments: 3,
            snippet_frames: 3,
            modality: Modality::Face,
            mask: false,
            shift_fraction: None,
            fusion: FusionConfig::default(),
            architecture: Architecture::Resnet50,
            input_size: 224,
            optimizer: OptimizerConfig::default(),
            seed: 0,
            normalization: None,
            geometry: GeometryConfig::default(),
            eval_split: Split::Test,
            track_train_auc: false,
            save_checkpoint: true,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a TOML config and resolves a relative manifest against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&util::read_to_string(path)?).map_err(|e| e.context(format!("config {}", path.display())))?;
        if cfg.manifest.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.manifest = dir.join(&cfg.manifest);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn shift(&self) -> Option<ShiftConfig> {
        self.shift_fraction.map(ShiftConfig::new)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.segments == 0 {
            return bad("segments must be at least 1".into());
        }
        if self.snippet_frames == 0 {
            return bad("snippet_frames must be at least 1".into());
        }
        if self.input_size == 0 {
            return bad("input_size must be positive".into());
        }
        if let Some(shift) = self.shift() {
            shift.validate().map_err(|e| Error::Config(e.to_string()))?;
            for c in self.architecture.branch_input_channels() {
                shifted_channels(c, shift.fraction).map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        if let Some(n) = &self.normalization {
            if n.std.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                return bad(format!("normalization std must be positive, got {:?}", n.std));
            }
        }
        self.fusion.validate().map_err(Error::Config)?;
        self.optimizer.validate().map_err(Error::Config)?;
        let g = &self.geometry;
        if !(g.body_expansion >= 0.0 && g.face_margin >= 0.0) {
            return bad("box expansion and margin must be non-negative".into());
        }
        if !(0.0..=0.5).contains(&g.mask_config.theta) {
            return bad(format!("mask yaw threshold must lie in [0, 0.5], got {}", g.mask_config.theta));
        }
        Ok(())
    }

    /// Hash of every field that influences results; the output location is excluded.
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        util::sha256_hex(serde_json::to_string(&canonical).expect("config serializes").as_bytes())
    }
}
