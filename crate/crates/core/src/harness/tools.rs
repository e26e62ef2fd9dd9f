//! Single-video tools behind the `mask-apply`, `crop-body` and `explain` commands.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use image::RgbImage;
use ndarray::Axis;
use serde::{Deserialize, Serialize};

use super::config::{stream_name, RunConfig};
use crate::dataset::{crop_stream, prepare_stream, read_video, sample_clip, write_video, GeometryConfig, SamplerConfig, SamplingMode, Split, StreamKind, VideoClip};
use crate::error::{Error, Result};
use crate::explain::{grad_cam, render_overlay, Palette};
use crate::geometry::{apply_mask, build_mask_polygon, carry_forward, read_landmark_file, FrameStatus, LandmarkTrack, MaskConfig};
use crate::labels::{Emotion, NUM_LABELS};
use crate::model::{image_to_tensor, load_checkpoint, Backbone};
use crate::util;

pub const STATUS_LOG: &str = "status.log";

/// Per-frame outcome of a video tool.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolSummary {
    pub out_dir: PathBuf,
    pub statuses: Vec<FrameStatus>,
}

impl ToolSummary {
    pub fn warnings(&self) -> usize {
        self.statuses.iter().filter(|s| s.is_warning()).count()
    }
}

fn load_track(path: Option<&Path>) -> Result<LandmarkTrack> {
    match path {
        Some(p) => read_landmark_file(p),
        None => Ok(LandmarkTrack::default()),
    }
}

fn write_status_log(out: &Path, statuses: &[FrameStatus]) -> Result<()> {
    let mut log = String::new();
    for (i, s) in statuses.iter().enumerate() {
        writeln!(log, "frame {i:05}: {s}").unwrap();
    }
    util::write_file(&out.join(STATUS_LOG), log.as_bytes())
}

fn bare_clip(video: &Path, landmarks: LandmarkTrack) -> Result<VideoClip> {
    Ok(VideoClip {
        id: video.to_string_lossy().into_owned(),
        frames: read_video(video)?,
        labels: [0; NUM_LABELS],
        subject_id: String::new(),
        split: Split::Test,
        landmarks,
    })
}

/// Draws the synthetic mask on every frame of a frame-directory video.
pub fn mask_video(video: &Path, landmarks: &Path, out: &Path, config: &MaskConfig) -> Result<ToolSummary> {
    let track = read_landmark_file(landmarks)?;
    let frames = read_video(video)?;
    let polygons = carry_forward((0..frames.len()).map(|i| build_mask_polygon(&track.frame(i), config)));
    let masked: Vec<RgbImage> = frames
        .iter()
        .zip(&polygons)
        .map(|(f, (poly, _))| match poly {
            Some(p) => apply_mask(f, p),
            None => f.clone(),
        })
        .collect();
    write_video(out, &masked)?;
    let statuses: Vec<FrameStatus> = polygons.into_iter().map(|(_, s)| s).collect();
    write_status_log(out, &statuses)?;
    Ok(ToolSummary { out_dir: out.to_path_buf(), statuses })
}

/// Crops the body of every frame, blacking out the face unless `keep_face` is set.
pub fn crop_body_video(video: &Path, landmarks: &Path, out: &Path, geometry: &GeometryConfig, keep_face: bool) -> Result<ToolSummary> {
    let clip = bare_clip(video, read_landmark_file(landmarks)?)?;
    let kind = if keep_face { StreamKind::FullBody } else { StreamKind::Body };
    let stream = crop_stream(&clip, kind, geometry);
    write_video(out, &stream.frames)?;
    write_status_log(out, &stream.statuses)?;
    Ok(ToolSummary { out_dir: out.to_path_buf(), statuses: stream.statuses })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainedSnippet {
    pub segment: usize,
    pub frame: usize,
    pub overlay: PathBuf,
    pub map_max: f64,
}

/// Grad-CAM overlays for the middle frame of every evaluation snippet.
pub fn explain_video(checkpoint: &Path, video: &Path, landmarks: Option<&Path>, label: Emotion, stream: Option<&str>, out: &Path) -> Result<Vec<ExplainedSnippet>> {
    let ckpt = load_checkpoint(checkpoint)?;
    let h = &ckpt.header;
    let index = match stream {
        Some(name) => h.streams.iter().position(|s| s.name == name).ok_or_else(|| {
            let names: Vec<&str> = h.streams.iter().map(|s| s.name.as_str()).collect();
            Error::Config(format!("checkpoint has no '{name}' stream (available: {})", names.join(", ")))
        })?,
        None => 0,
    };
    let kind = [StreamKind::Face, StreamKind::Body, StreamKind::FullBody]
        .into_iter()
        .find(|&k| stream_name(k) == h.streams[index].name)
        .ok_or_else(|| Error::Config(format!("unknown stream '{}' in checkpoint", h.streams[index].name)))?;
    let run: Option<RunConfig> = serde_json::from_value(h.run_config.clone()).ok();
    let geometry = run.as_ref().map(|r| GeometryConfig { mask: r.mask, ..r.geometry.clone() }).unwrap_or_default();
    let model = Backbone::from_params(h.architecture.clone(), h.shift, h.input_size, ckpt.params[index].clone())?;

    let clip = bare_clip(video, load_track(landmarks)?)?;
    let prepared = prepare_stream(&clip, kind, &geometry, h.input_size);
    let tensor = image_to_tensor(&prepared.frames, &h.normalization)?;
    let sampler = SamplerConfig { segments: h.segments, snippet_frames: h.snippet_frames, mode: SamplingMode::EvalCenter, seed: h.seed };
    let snippets = sample_clip(prepared.frames.len(), &sampler, &mut util::stream_rng(&[h.seed]));
    let mut results = Vec::with_capacity(snippets.len());
    for s in &snippets {
        let map = grad_cam(&model, &tensor.select(Axis(0), &s.frame_indices), label.index())?;
        let frame = s.middle();
        let name = PathBuf::from(format!("overlay_seg{:02}_frame{frame:05}.png", s.segment_index));
        let path = out.join(&name);
        util::create_dir_all(out)?;
        render_overlay(&prepared.frames[frame], &map, Palette::Jet).save(&path).map_err(|e| Error::Image { path: path.clone(), source: e })?;
        results.push(ExplainedSnippet { segment: s.segment_index, frame, overlay: name, map_max: map.max() });
    }
    util::write_file(&out.join("explain.json"), serde_json::to_string_pretty(&results)?.as_bytes())?;
    Ok(results)
}
