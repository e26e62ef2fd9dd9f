//! Landmark-driven image geometry: synthetic face masks, body and face boxes,
//! face blackout.
//!
//! All operations are pure functions of their inputs. Pixel coordinates follow
//! the image convention: `x` grows to the right, `y` grows downwards, and pixel
//! `(px, py)` has its center at `(px + 0.5, py + 0.5)` for polygon filling.

mod bbox;
mod landmarks;
mod mask;
mod raster;
pub mod synthetic;
mod track;

use thiserror::Error;

pub use bbox::{blackout_face, body_bounding_box, crop, face_box_from_landmarks, BoundingBox};
pub use landmarks::{read_landmark_file, write_landmark_file, LandmarkSet, LandmarkTrack, FACE_MESH_VERTICES};
pub use mask::{apply_mask, build_mask_polygon, JawCandidates, MaskConfig, MaskPolygon, YawBin};
pub use raster::{fill_polygon, point_in_polygon, polygon_area, polygon_pixel_mask};
pub use track::{carry_forward, FrameStatus};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("frame has no face landmarks")]
    NoFace,
    #[error("mask polygon area {area:.2} px^2 is below the minimum {min_area:.2} px^2")]
    DegenerateFace { area: f64, min_area: f64 },
    #[error("no body or hand keypoint passes the confidence threshold")]
    NoBody,
    #[error("bounding box ({x0}, {y0}, {x1}, {y1}) has no area")]
    DegenerateBox { x0: f64, y0: f64, x1: f64, y1: f64 },
    #[error("face mesh has {0} vertices, expected {FACE_MESH_VERTICES}")]
    WrongVertexCount(usize),
    #[error("mesh index {index} out of range for {len} vertices")]
    BadIndex { index: usize, len: usize },
    #[error("invalid landmarks: {0}")]
    InvalidLandmarks(String),
}
