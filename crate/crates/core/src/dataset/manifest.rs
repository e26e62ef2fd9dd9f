use std::fmt;
use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::video::read_video;
use super::DatasetError;
use crate::error::Result;
use crate::geometry::{read_landmark_file, LandmarkTrack};
use crate::labels::{LabelVector, NUM_LABELS};
use crate::util;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

/// One manifest line:
///
/// ```text
/// {"path":"clips/clip_000","split":"train","subject_id":"s01","labels":[0,1,0,0,0,0,0,1]}
/// ```
///
/// `path` is a frame directory relative to the manifest. An optional
/// `landmarks` field names the landmark file; it defaults to
/// `<path>/landmarks.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub split: Split,
    pub subject_id: String,
    pub labels: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmarks: Option<PathBuf>,
}

impl ManifestEntry {
    pub fn label_vector(&self) -> LabelVector {
        let mut out = [0u8; NUM_LABELS];
        out.copy_from_slice(&self.labels);
        out
    }

    pub fn landmarks_path(&self) -> PathBuf {
        self.landmarks.clone().unwrap_or_else(|| self.path.join("landmarks.jsonl"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    /// Directory relative paths resolve against.
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.root.join(path)
        }
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = (usize, &ManifestEntry)> {
        self.entries.iter().enumerate().filter(move |(_, e)| e.split == split)
    }

    /// Positive count per label, over one split or the whole manifest.
    pub fn label_counts(&self, split: Option<Split>) -> [usize; NUM_LABELS] {
        let mut counts = [0usize; NUM_LABELS];
        for e in self.entries.iter().filter(|e| split.is_none_or(|s| e.split == s)) {
            for (c, &l) in counts.iter_mut().zip(&e.labels) {
                *c += l as usize;
            }
        }
        counts
    }
}

/// Parses and validates a manifest. Video directories must exist; frames are decoded lazily.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = util::read_to_string(path)?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |message: String| DatasetError::Parse { path: path.to_path_buf(), line: i + 1, message };
        let entry: ManifestEntry = serde_json::from_str(trimmed).map_err(|e| err(e.to_string()))?;
        if entry.labels.len() != NUM_LABELS {
            return Err(err(format!("expected {NUM_LABELS} labels, found {}", entry.labels.len())).into());
        }
        if entry.labels.iter().any(|&l| l > 1) {
            return Err(err("labels must be 0 or 1".into()).into());
        }
        entries.push(entry);
    }
    let manifest = Manifest { root, entries };
    for e in &manifest.entries {
        let dir = manifest.resolve(&e.path);
        if !dir.is_dir() {
            return Err(DatasetError::MissingVideo(dir).into());
        }
    }
    Ok(manifest)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e)?);
        out.push('\n');
    }
    util::write_file(path, out.as_bytes())
}

/// A decoded clip with its ground truth and landmarks.
#[derive(Debug, Clone)]
pub struct VideoClip {
    pub id: String,
    pub frames: Vec<RgbImage>,
    pub labels: LabelVector,
    pub subject_id: String,
    pub split: Split,
    pub landmarks: LandmarkTrack,
}

pub fn load_clip(manifest: &Manifest, index: usize) -> Result<VideoClip> {
    let entry = &manifest.entries[index];
    let dir = manifest.resolve(&entry.path);
    let frames = read_video(&dir)?;
    let lm_path = manifest.resolve(&entry.landmarks_path());
    let landmarks = if lm_path.exists() { read_landmark_file(&lm_path)? } else { LandmarkTrack::default() };
    Ok(VideoClip {
        id: entry.path.to_string_lossy().into_owned(),
        frames,
        labels: entry.label_vector(),
        subject_id: entry.subject_id.clone(),
        split: entry.split,
        landmarks,
    })
}
