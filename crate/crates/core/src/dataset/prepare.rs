use image::{imageops, RgbImage};
use serde::{Deserialize, Serialize};

use super::manifest::VideoClip;
use crate::geometry::{
    apply_mask, blackout_face, body_bounding_box, build_mask_polygon, carry_forward, crop, face_box_from_landmarks, BoundingBox,
    FrameStatus, MaskConfig,
};

/// Which crop a network stream sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    /// Face crop (masked when masking is enabled).
    Face,
    /// Body crop with the face region blacked out.
    Body,
    /// Body crop including the (possibly masked) face.
    FullBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometryConfig {
    /// Apply the synthetic face mask to every frame before cropping.
    pub mask: bool,
    pub mask_config: MaskConfig,
    /// Total growth of the body box per dimension.
    pub body_expansion: f64,
    pub face_margin: f64,
    pub min_keypoint_confidence: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig { mask: false, mask_config: MaskConfig::default(), body_expansion: 0.10, face_margin: 0.10, min_keypoint_confidence: 0.5 }
    }
}

/// Frames of one stream, cropped and resized to the network input size.
#[derive(Debug, Clone)]
pub struct PreparedStream {
    pub frames: Vec<RgbImage>,
    /// Per-frame crop status (box reuse and missing detections).
    pub statuses: Vec<FrameStatus>,
    /// False when no frame of the clip produced the stream's crop.
    pub available: bool,
}

/// Crops every frame of `clip` for one stream and resizes the crops to `input_size` squared.
pub fn prepare_stream(clip: &VideoClip, kind: StreamKind, config: &GeometryConfig, input_size: u32) -> PreparedStream {
    let mut stream = crop_stream(clip, kind, config);
    stream.frames = stream
        .frames
        .iter()
        .map(|f| imageops::resize(f, input_size, input_size, imageops::FilterType::Triangle))
        .collect();
    stream
}

/// Pose keypoints stop at the eyes and ears, so the body box is widened to the face box.
fn with_head(body: Option<BoundingBox>, face: Option<BoundingBox>) -> Option<BoundingBox> {
    match (body, face) {
        (Some(b), Some(f)) => Some(b.union(&f)),
        (b, _) => b,
    }
}

/// Crops every frame of `clip` for one stream at source resolution.
///
/// Frames whose landmarks fail reuse the latest successful polygon or box.
/// Before any success the frame is left unmasked, and crops fall back to the
/// whole frame; such frames are reported as `Missing`.
pub fn crop_stream(clip: &VideoClip, kind: StreamKind, config: &GeometryConfig) -> PreparedStream {
    let n = clip.frames.len();
    let sets: Vec<_> = (0..n).map(|i| clip.landmarks.frame(i)).collect();
    let size = |i: usize| clip.frames[i].dimensions();

    let polygons = if config.mask {
        carry_forward(sets.iter().map(|s| build_mask_polygon(s, &config.mask_config)))
    } else {
        vec![(None, FrameStatus::Fresh); n]
    };
    let face_boxes = carry_forward(sets.iter().enumerate().map(|(i, s)| face_box_from_landmarks(s, size(i), config.face_margin)));
    let body_boxes: Vec<(Option<BoundingBox>, FrameStatus)> = match kind {
        StreamKind::Face => vec![(None, FrameStatus::Fresh); n],
        _ => carry_forward(
            sets.iter().enumerate().map(|(i, s)| body_bounding_box(s, size(i), config.body_expansion, config.min_keypoint_confidence)),
        ),
    };

    let mut frames = Vec::with_capacity(n);
    let mut statuses = Vec::with_capacity(n);
    for i in 0..n {
        let mut frame = match &polygons[i].0 {
            Some(poly) => apply_mask(&clip.frames[i], poly),
            None => clip.frames[i].clone(),
        };
        let (crop_box, status) = match kind {
            StreamKind::Face => (face_boxes[i].0, &face_boxes[i].1),
            StreamKind::Body => {
                if let Some(face) = &face_boxes[i].0 {
                    frame = blackout_face(&frame, face);
                }
                (with_head(body_boxes[i].0, face_boxes[i].0), &body_boxes[i].1)
            }
            StreamKind::FullBody => (with_head(body_boxes[i].0, face_boxes[i].0), &body_boxes[i].1),
        };
        frames.push(match crop_box {
            Some(b) => crop(&frame, &b),
            None => frame,
        });
        let worst = [&polygons[i].1, status].into_iter().find(|s| s.is_warning()).unwrap_or(status).clone();
        statuses.push(worst);
    }
    let available = match kind {
        StreamKind::Face => face_boxes.iter().any(|(b, _)| b.is_some()),
        _ => body_boxes.iter().any(|(b, _)| b.is_some()),
    };
    PreparedStream { frames, statuses, available }
}
