use image::{imageops, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::{GeometryError, LandmarkSet};

/// Axis-aligned box in pixel-index coordinates: a keypoint at pixel column 10
/// has `x = 10.0`, and a box clipped to a `W x H` image lies in `[0, W-1] x [0, H-1]`.
///
/// The pixels covered by a box are those whose indices fall within the box
/// after snapping its edges to the nearest pixel (see [`BoundingBox::pixel_bounds`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BoundingBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, GeometryError> {
        let finite = [x0, y0, x1, y1].iter().all(|v| v.is_finite());
        if !finite || x0 >= x1 || y0 >= y1 {
            return Err(GeometryError::DegenerateBox { x0, y0, x1, y1 });
        }
        Ok(BoundingBox { x0, y0, x1, y1 })
    }

    /// Extremes of a point set.
    pub fn from_points(points: impl IntoIterator<Item = [f64; 2]>) -> Result<Self, GeometryError> {
        let mut it = points.into_iter().peekable();
        if it.peek().is_none() {
            return Err(GeometryError::NoBody);
        }
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for [x, y] in it {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        BoundingBox::new(x0, y0, x1, y1)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    /// Grows each dimension by `fraction` of its size, half on each side.
    pub fn expand(&self, fraction: f64) -> BoundingBox {
        let dx = 0.5 * fraction * self.width();
        let dy = 0.5 * fraction * self.height();
        BoundingBox { x0: self.x0 - dx, y0: self.y0 - dy, x1: self.x1 + dx, y1: self.y1 + dy }
    }

    pub fn clip(&self, width: u32, height: u32) -> Result<BoundingBox, GeometryError> {
        let max_x = width.saturating_sub(1) as f64;
        let max_y = height.saturating_sub(1) as f64;
        BoundingBox::new(
            self.x0.clamp(0.0, max_x),
            self.y0.clamp(0.0, max_y),
            self.x1.clamp(0.0, max_x),
            self.y1.clamp(0.0, max_y),
        )
    }

    /// Smallest box containing both.
    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox { x0: self.x0.min(other.x0), y0: self.y0.min(other.y0), x1: self.x1.max(other.x1), y1: self.y1.max(other.y1) }
    }

    pub fn contains_box(&self, other: &BoundingBox) -> bool {
        self.x0 <= other.x0 && self.y0 <= other.y0 && self.x1 >= other.x1 && self.y1 >= other.y1
    }

    /// Inclusive pixel ranges `(col0, row0, col1, row1)` covered inside a `width x height` image.
    pub fn pixel_bounds(&self, width: u32, height: u32) -> Option<(u32, u32, u32, u32)> {
        if width == 0 || height == 0 {
            return None;
        }
        let snap = |v: f64, max: u32| v.round().clamp(0.0, max as f64) as u32;
        let (c0, c1) = (snap(self.x0, width - 1), snap(self.x1, width - 1));
        let (r0, r1) = (snap(self.y0, height - 1), snap(self.y1, height - 1));
        let outside = self.x1.round() < 0.0 || self.y1.round() < 0.0 || self.x0.round() > (width - 1) as f64 || self.y0.round() > (height - 1) as f64;
        if outside {
            None
        } else {
            Some((c0, r0, c1, r1))
        }
    }
}

fn keypoint_box(points: impl Iterator<Item = [f64; 3]>, min_confidence: f64) -> Result<BoundingBox, GeometryError> {
    let mut kept = points.filter(|p| p[2] >= min_confidence).map(|p| [p[0], p[1]]).peekable();
    if kept.peek().is_none() {
        return Err(GeometryError::NoBody);
    }
    BoundingBox::from_points(kept)
}

/// Box around the union of body and hand keypoints with confidence at least
/// `min_confidence`, expanded by `expansion` per dimension and clipped to the image.
pub fn body_bounding_box(
    landmarks: &LandmarkSet,
    image_size: (u32, u32),
    expansion: f64,
    min_confidence: f64,
) -> Result<BoundingBox, GeometryError> {
    let body = landmarks.body.iter().flatten().copied();
    let hands = landmarks.hands.iter().copied();
    keypoint_box(body.chain(hands), min_confidence)?.expand(expansion).clip(image_size.0, image_size.1)
}

/// Box around the face mesh extremes, expanded like [`body_bounding_box`] and clipped.
pub fn face_box_from_landmarks(
    landmarks: &LandmarkSet,
    image_size: (u32, u32),
    margin: f64,
) -> Result<BoundingBox, GeometryError> {
    let face = landmarks.face.as_ref().ok_or(GeometryError::NoFace)?;
    let raw = BoundingBox::from_points(face.iter().copied()).map_err(|e| match e {
        GeometryError::NoBody => GeometryError::NoFace,
        other => other,
    })?;
    raw.expand(margin).clip(image_size.0, image_size.1)
}

/// Copy of `frame` with every pixel covered by `face_box` set to zero.
pub fn blackout_face(frame: &RgbImage, face_box: &BoundingBox) -> RgbImage {
    let mut out = frame.clone();
    if let Some((c0, r0, c1, r1)) = face_box.pixel_bounds(frame.width(), frame.height()) {
        for y in r0..=r1 {
            for x in c0..=c1 {
                out.put_pixel(x, y, Rgb([0, 0, 0]));
            }
        }
    }
    out
}

/// Pixels covered by `bbox`; the whole frame if the box misses it entirely.
pub fn crop(frame: &RgbImage, bbox: &BoundingBox) -> RgbImage {
    match bbox.pixel_bounds(frame.width(), frame.height()) {
        Some((c0, r0, c1, r1)) => imageops::crop_imm(frame, c0, r0, c1 - c0 + 1, r1 - r0 + 1).to_image(),
        None => frame.clone(),
    }
}
