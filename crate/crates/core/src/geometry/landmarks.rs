use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::dataset::DatasetError;
use crate::error::Result;
use crate::util;

/// Vertex count of the dense face mesh topology.
pub const FACE_MESH_VERTICES: usize = 468;

/// Per-frame keypoints. Face points are `[x, y]`, body and hand keypoints are
/// `[x, y, confidence]`, all in pixel units.
///
/// On disk one `LandmarkSet` is one JSON object per line:
///
/// ```text
/// {"frame_index":0,"face":[[x,y],...468],"body":[[x,y,c],...],"hands":[[x,y,c],...]}
/// ```
///
/// `face` and `body` may be `null` or omitted; `hands` may be omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSet {
    pub frame_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hands: Vec<[f64; 3]>,
}

impl LandmarkSet {
    pub fn empty(frame_index: usize) -> Self {
        LandmarkSet { frame_index, face: None, body: None, hands: Vec::new() }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if let Some(face) = &self.face {
            if face.len() != FACE_MESH_VERTICES {
                return Err(GeometryError::WrongVertexCount(face.len()));
            }
            if face.iter().flatten().any(|v| !v.is_finite()) {
                return Err(GeometryError::InvalidLandmarks("non-finite face coordinate".into()));
            }
        }
        let keypoints = self.body.iter().flatten().chain(self.hands.iter());
        for kp in keypoints {
            if !kp[0].is_finite() || !kp[1].is_finite() {
                return Err(GeometryError::InvalidLandmarks("non-finite keypoint coordinate".into()));
            }
            if !(0.0..=1.0).contains(&kp[2]) {
                return Err(GeometryError::InvalidLandmarks(format!("confidence {} outside [0, 1]", kp[2])));
            }
        }
        Ok(())
    }
}

/// Landmarks of a whole video, indexed by frame. Frames without a record have no landmarks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LandmarkTrack {
    frames: BTreeMap<usize, LandmarkSet>,
}

impl LandmarkTrack {
    pub fn new(sets: impl IntoIterator<Item = LandmarkSet>) -> Self {
        LandmarkTrack { frames: sets.into_iter().map(|s| (s.frame_index, s)).collect() }
    }

    pub fn get(&self, frame_index: usize) -> Option<&LandmarkSet> {
        self.frames.get(&frame_index)
    }

    /// The record for `frame_index`, or an empty one.
    pub fn frame(&self, frame_index: usize) -> LandmarkSet {
        self.frames.get(&frame_index).cloned().unwrap_or_else(|| LandmarkSet::empty(frame_index))
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &LandmarkSet> {
        self.frames.values()
    }
}

pub fn read_landmark_file(path: &Path) -> Result<LandmarkTrack> {
    let text = util::read_to_string(path)?;
    let mut sets = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| DatasetError::Parse { path: path.to_path_buf(), line: i + 1, message };
        let set: LandmarkSet = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        set.validate().map_err(|e| parse_err(e.to_string()))?;
        sets.push(set);
    }
    Ok(LandmarkTrack::new(sets))
}

pub fn write_landmark_file(path: &Path, track: &LandmarkTrack) -> Result<()> {
    let mut out = String::new();
    for set in track.iter() {
        out.push_str(&serde_json::to_string(set)?);
        out.push('\n');
    }
    util::write_file(path, out.as_bytes())
}
