use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::raster::{fill_polygon, polygon_area};
use super::{GeometryError, LandmarkSet};

/// Coarse head orientation, judged from where the nose sits between the jaw edges.
///
/// `Right` means the nose is displaced towards larger image `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum YawBin {
    Left,
    Frontal,
    Right,
}

/// Alternative vertex paths for one side of the jaw.
///
/// `frontal` follows the outer face oval. `profile` follows an inner cheek line
/// that becomes the visible silhouette when this side turns away from the camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JawCandidates {
    pub frontal: Vec<usize>,
    pub profile: Vec<usize>,
}

/// Mesh indices and thresholds for mask construction.
///
/// The right jaw is the subject's right, which is on the image left in a
/// frontal view. Right-jaw paths run from just below the eye down to the chin;
/// left-jaw paths run from the chin back up. The defaults index the 468-vertex
/// face mesh topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskConfig {
    pub right_jaw: JawCandidates,
    pub left_jaw: JawCandidates,
    /// Nose vertex closing the top of the polygon.
    pub nose_vertex: usize,
    /// Vertex used to judge yaw (the nose tip).
    pub yaw_reference: usize,
    /// Yaw ratio threshold separating frontal from profile bins.
    pub theta: f64,
    pub fill_color: [u8; 3],
    /// Faces whose polygon is smaller than this (px^2) are rejected.
    pub min_area: f64,
}

pub const FRONTAL_RIGHT_JAW: [usize; 11] = [234, 93, 132, 58, 172, 136, 150, 149, 176, 148, 152];
pub const FRONTAL_LEFT_JAW: [usize; 10] = [377, 400, 378, 379, 365, 397, 288, 361, 323, 454];
pub const PROFILE_RIGHT_JAW: [usize; 11] = [227, 137, 177, 215, 138, 135, 169, 170, 140, 171, 152];
pub const PROFILE_LEFT_JAW: [usize; 10] = [396, 369, 395, 394, 364, 367, 435, 401, 366, 447];
pub const NOSE_BRIDGE: usize = 6;
pub const NOSE_TIP: usize = 1;

impl Default for MaskConfig {
    fn default() -> Self {
        MaskConfig {
            right_jaw: JawCandidates { frontal: FRONTAL_RIGHT_JAW.to_vec(), profile: PROFILE_RIGHT_JAW.to_vec() },
            left_jaw: JawCandidates { frontal: FRONTAL_LEFT_JAW.to_vec(), profile: PROFILE_LEFT_JAW.to_vec() },
            nose_vertex: NOSE_BRIDGE,
            yaw_reference: NOSE_TIP,
            theta: 0.25,
            fill_color: [140, 170, 220],
            min_area: 4.0,
        }
    }
}

impl MaskConfig {
    fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.right_jaw
            .frontal
            .iter()
            .chain(&self.right_jaw.profile)
            .chain(&self.left_jaw.frontal)
            .chain(&self.left_jaw.profile)
            .copied()
            .chain([self.nose_vertex, self.yaw_reference])
    }

    pub fn validate(&self, mesh_len: usize) -> Result<(), GeometryError> {
        if let Some(index) = self.indices().find(|&i| i >= mesh_len) {
            return Err(GeometryError::BadIndex { index, len: mesh_len });
        }
        let jaws = [&self.right_jaw.frontal, &self.right_jaw.profile, &self.left_jaw.frontal, &self.left_jaw.profile];
        if jaws.iter().any(|j| j.is_empty()) || self.right_jaw.frontal.len() + self.left_jaw.frontal.len() < 3 {
            return Err(GeometryError::InvalidLandmarks("jawline candidates need at least 3 vertices in total".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskPolygon {
    pub vertices: Vec<[f64; 2]>,
    pub yaw_bin: YawBin,
    /// Signed yaw ratio `(nose_x - jaw_mid_x) / jaw_width` that selected the bin.
    pub yaw_ratio: f64,
    pub fill_color: [u8; 3],
}

impl MaskPolygon {
    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices).abs()
    }
}

/// Builds the mask polygon: right jaw top to chin, left jaw chin to top, nose vertex.
///
/// The yaw ratio is measured against the horizontal extent of the frontal
/// jawlines. When the nose is displaced past `theta` towards one side, that
/// side's jaw is turning away and its profile candidate is used instead.
pub fn build_mask_polygon(landmarks: &LandmarkSet, config: &MaskConfig) -> Result<MaskPolygon, GeometryError> {
    let face = landmarks.face.as_ref().ok_or(GeometryError::NoFace)?;
    config.validate(face.len())?;

    let frontal = config.right_jaw.frontal.iter().chain(&config.left_jaw.frontal);
    let (min_x, max_x) = frontal.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(face[i][0]), hi.max(face[i][0])));
    let width = max_x - min_x;
    let nose_x = face[config.yaw_reference][0];
    let yaw_ratio = if width > 0.0 { (nose_x - 0.5 * (min_x + max_x)) / width } else { 0.0 };
    let yaw_bin = if yaw_ratio < -config.theta {
        YawBin::Left
    } else if yaw_ratio > config.theta {
        YawBin::Right
    } else {
        YawBin::Frontal
    };

    // subject's right jaw sits at small x; it turns away when the nose moves to small x
    let right = if yaw_bin == YawBin::Left { &config.right_jaw.profile } else { &config.right_jaw.frontal };
    let left = if yaw_bin == YawBin::Right { &config.left_jaw.profile } else { &config.left_jaw.frontal };

    let vertices: Vec<[f64; 2]> = right.iter().chain(left).chain([&config.nose_vertex]).map(|&i| face[i]).collect();
    let area = polygon_area(&vertices).abs();
    if area < config.min_area {
        return Err(GeometryError::DegenerateFace { area, min_area: config.min_area });
    }
    Ok(MaskPolygon { vertices, yaw_bin, yaw_ratio, fill_color: config.fill_color })
}

/// Copy of `frame` with the polygon interior filled. Pixels outside the polygon are untouched.
pub fn apply_mask(frame: &RgbImage, polygon: &MaskPolygon) -> RgbImage {
    let mut out = frame.clone();
    fill_polygon(&mut out, &polygon.vertices, polygon.fill_color);
    out
}
