//! Deterministic synthetic corpus: a seated figure with a face, torso and arms,
//! where every emotion label is signalled by its own visual primitive.
//!
//! Signal colors contain a saturated (0 or 255) channel, while every base color
//! (background, skin, shirt, mask) keeps all channels within `[30, 230]`, so a
//! label's signal can be audited by exact color matching.

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::manifest::{write_manifest, ManifestEntry, Split};
use super::video::write_video;
use crate::error::Result;
use crate::geometry::synthetic::{face_mesh, face_outline, FaceParams, EYES, MOUTH};
use crate::geometry::{fill_polygon, write_landmark_file, LandmarkSet, LandmarkTrack};
use crate::labels::{Emotion, LabelVector, NUM_LABELS};
use crate::util::{self, stream_rng};

/// Signal color per label, in canonical label order.
pub const SIGNAL_COLORS: [[u8; 3]; NUM_LABELS] = [
    [255, 255, 0],
    [255, 0, 255],
    [0, 0, 255],
    [255, 0, 0],
    [0, 255, 255],
    [0, 255, 0],
    [255, 128, 0],
    [128, 0, 255],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    pub clips: usize,
    pub frames: usize,
    pub width: u32,
    pub height: u32,
    pub seed: u64,
    pub subjects: usize,
    /// Probability that a label is active on a clip.
    pub positive_rate: f64,
    pub train_fraction: f64,
    pub val_fraction: f64,
    /// Label whose signal is drawn on the mouth, inside the mask region.
    pub mouth_label: Option<Emotion>,
    pub max_yaw_deg: f64,
    /// Probability that a frame's face landmarks are missing from the landmark file.
    pub landmark_dropout: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            clips: 32,
            frames: 24,
            width: 32,
            height: 32,
            seed: 7,
            subjects: 8,
            positive_rate: 0.4,
            train_fraction: 0.625,
            val_fraction: 0.1875,
            mouth_label: None,
            max_yaw_deg: 20.0,
            landmark_dropout: 0.0,
        }
    }
}

impl CorpusSpec {
    pub fn split_of(&self, clip: usize) -> Split {
        let n_train = (self.clips as f64 * self.train_fraction).round() as usize;
        let n_val = (self.clips as f64 * self.val_fraction).round() as usize;
        if clip < n_train {
            Split::Train
        } else if clip < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        }
    }

    /// Ground-truth labels of every clip.
    ///
    /// Labels are Bernoulli draws, then adjusted so that every clip has a label
    /// and, within each split of two or more clips, every label has both classes.
    pub fn labels(&self) -> Vec<LabelVector> {
        let mut labels: Vec<LabelVector> = (0..self.clips)
            .map(|c| {
                let mut rng = stream_rng(&[self.seed, 0x1abe1, c as u64]);
                let mut l = [0u8; NUM_LABELS];
                for v in l.iter_mut() {
                    *v = u8::from(rng.random_bool(self.positive_rate.clamp(0.0, 1.0)));
                }
                if l.iter().all(|&v| v == 0) {
                    l[c % NUM_LABELS] = 1;
                }
                l
            })
            .collect();
        for split in Split::ALL {
            let members: Vec<usize> = (0..self.clips).filter(|&c| self.split_of(c) == split).collect();
            if members.len() < 2 {
                continue;
            }
            for label in 0..NUM_LABELS {
                let positives = members.iter().filter(|&&c| labels[c][label] == 1).count();
                let pick = members[label % members.len()];
                if positives == 0 {
                    labels[pick][label] = 1;
                } else if positives == members.len() {
                    labels[pick][label] = 0;
                    if labels[pick].iter().all(|&v| v == 0) {
                        labels[pick][(label + 1) % NUM_LABELS] = 1;
                    }
                }
            }
        }
        labels
    }
}

#[derive(Debug, Clone, Copy)]
struct Subject {
    skin: [u8; 3],
    shirt: [u8; 3],
}

fn subject(spec: &CorpusSpec, id: usize) -> Subject {
    let mut rng = stream_rng(&[spec.seed, 0x50b_u64, id as u64]);
    let mut ch = |lo: u8, hi: u8| rng.random_range(lo..=hi);
    Subject { skin: [ch(170, 215), ch(120, 160), ch(90, 130)], shirt: [ch(60, 200), ch(60, 200), ch(60, 200)] }
}

/// Fills pixels with centers in `[cx - hw, cx + hw) x [cy - hh, cy + hh)`, or at
/// least the pixel containing the center.
fn fill_rect(img: &mut RgbImage, cx: f64, cy: f64, hw: f64, hh: f64, color: [u8; 3]) {
    let quad = [[cx - hw, cy - hh], [cx + hw, cy - hh], [cx + hw, cy + hh], [cx - hw, cy + hh]];
    if fill_polygon(img, &quad, color) == 0 {
        put_center(img, cx, cy, color);
    }
}

fn put_center(img: &mut RgbImage, x: f64, y: f64, color: [u8; 3]) {
    let (px, py) = (x.floor(), y.floor());
    if px >= 0.0 && py >= 0.0 && (px as u32) < img.width() && (py as u32) < img.height() {
        img.put_pixel(px as u32, py as u32, Rgb(color));
    }
}

fn draw_segment(img: &mut RgbImage, a: [f64; 2], b: [f64; 2], half_thickness: f64, color: [u8; 3]) {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len = (dx * dx + dy * dy).sqrt().max(1e-9);
    let (nx, ny) = (-dy / len * half_thickness, dx / len * half_thickness);
    let quad = [[a[0] + nx, a[1] + ny], [b[0] + nx, b[1] + ny], [b[0] - nx, b[1] - ny], [a[0] - nx, a[1] - ny]];
    fill_polygon(img, &quad, color);
}

/// One rendered clip.
#[derive(Debug, Clone)]
pub struct RenderedClip {
    pub frames: Vec<RgbImage>,
    pub landmarks: LandmarkTrack,
    pub labels: LabelVector,
    pub split: Split,
    pub subject_id: String,
}

pub fn render_clip(spec: &CorpusSpec, clip: usize, labels: LabelVector) -> RenderedClip {
    let (w, h) = (spec.width as f64, spec.height as f64);
    let subject_index = clip % spec.subjects.max(1);
    let person = subject(spec, subject_index);
    let mut rng = stream_rng(&[spec.seed, 0xc11b, clip as u64]);
    let bg = [rng.random_range(30..=70u8), rng.random_range(30..=70u8), rng.random_range(40..=80u8)];
    let sway_phase = rng.random_range(0.0..std::f64::consts::TAU);
    let yaw_phase = rng.random_range(0.0..std::f64::consts::TAU);
    let yaw_amp = rng.random_range(0.0..=spec.max_yaw_deg.max(0.0));
    let fear_offset = rng.random_range(0.0..1.0);
    let active = |e: Emotion| labels[e.index()] == 1;
    let n = spec.frames.max(1);

    let mut frames = Vec::with_capacity(n);
    let mut sets = Vec::with_capacity(n);
    for t in 0..n {
        let phase = std::f64::consts::TAU * t as f64 / n as f64;
        let cx = 0.5 * w + 0.03 * w * (phase + sway_phase).sin();
        let face = FaceParams { yaw_deg: yaw_amp * (phase + yaw_phase).sin(), ..FaceParams::frontal(cx, 0.28 * h, 0.15 * h) };
        let mesh = face_mesh(&face);
        let (a, b) = (face.half_width(), face.half_height);

        let mut img = RgbImage::from_pixel(spec.width, spec.height, Rgb(bg));
        let torso = [cx - 0.2 * w, 0.47 * h, cx + 0.2 * w, 0.97 * h];
        fill_polygon(&mut img, &[[torso[0], torso[1]], [torso[2], torso[1]], [torso[2], torso[3]], [torso[0], torso[3]]], person.shirt);

        let shoulders = [[cx - 0.2 * w, 0.5 * h], [cx + 0.2 * w, 0.5 * h]];
        let raised = active(Emotion::Surprise);
        let wrists = [
            if raised { [cx - 0.32 * w, 0.2 * h + 0.04 * h * (2.0 * phase).sin()] } else { [cx - 0.27 * w, 0.82 * h] },
            [cx + 0.27 * w, 0.82 * h],
        ];
        let elbows = [
            if raised { [cx - 0.31 * w, 0.38 * h] } else { [cx - 0.26 * w, 0.66 * h] },
            [cx + 0.26 * w, 0.66 * h],
        ];
        let arm = (0.03 * w).max(0.6);
        for side in 0..2 {
            draw_segment(&mut img, shoulders[side], elbows[side], arm, person.shirt);
            draw_segment(&mut img, elbows[side], wrists[side], arm, person.shirt);
        }
        let hand = (0.04 * w).max(0.75);
        fill_rect(&mut img, wrists[0][0], wrists[0][1], hand, hand, if raised { SIGNAL_COLORS[Emotion::Surprise.index()] } else { person.skin });
        fill_rect(&mut img, wrists[1][0], wrists[1][1], hand, hand, person.skin);

        fill_polygon(&mut img, &face_outline(&face, 48), person.skin);

        let face_point = |az_deg: f64, v: f64| {
            let rho = (1.0 - v * v).sqrt();
            let az = az_deg.to_radians() + face.yaw_deg.to_radians();
            [face.center_x + a * rho * az.sin(), face.center_y + b * v]
        };
        let patch = (0.2 * a).max(0.75);
        let face_spots = [
            (Emotion::Curiosity, face_point(-25.0, -0.65)),
            (Emotion::Happiness, face_point(25.0, -0.65)),
            (Emotion::Uncertainty, face_point(-60.0, -0.3)),
            (Emotion::Excitement, face_point(60.0, -0.3)),
        ];
        for (emotion, [x, y]) in face_spots {
            if active(emotion) && spec.mouth_label != Some(emotion) {
                fill_rect(&mut img, x, y, patch, patch, SIGNAL_COLORS[emotion.index()]);
            }
        }

        let torso_w = torso[2] - torso[0];
        let body_spots = [
            (Emotion::Disgust, [cx, 0.6 * h], [0.17 * w, (0.025 * h).max(0.5)]),
            (Emotion::Fear, [torso[0] + 0.1 * w + (0.7 * torso_w) * ((t as f64 / n as f64 + fear_offset) % 1.0), 0.75 * h], [(0.04 * w).max(0.75); 2]),
            (Emotion::Frustration, [cx + 0.1 * w, 0.89 * h], [(0.04 * w).max(0.75); 2]),
        ];
        for (emotion, [x, y], [hw, hh]) in body_spots {
            if active(emotion) && spec.mouth_label != Some(emotion) {
                fill_rect(&mut img, x, y, hw, hh, SIGNAL_COLORS[emotion.index()]);
            }
        }

        if let Some(emotion) = spec.mouth_label.filter(|&e| active(e)) {
            let quad: Vec<[f64; 2]> = [MOUTH[0], MOUTH[2], MOUTH[1], MOUTH[3]].iter().map(|&i| mesh[i]).collect();
            let color = SIGNAL_COLORS[emotion.index()];
            fill_polygon(&mut img, &quad, color);
            let [mx, my] = mesh[MOUTH[4]];
            put_center(&mut img, mx, my, color);
        }

        let mut set = LandmarkSet::empty(t);
        let dropped = spec.landmark_dropout > 0.0 && rng.random_bool(spec.landmark_dropout.clamp(0.0, 1.0));
        let eye_mid = |k: usize| {
            let p: Vec<[f64; 2]> = EYES[k * 4..k * 4 + 4].iter().map(|&i| mesh[i]).collect();
            [p.iter().map(|q| q[0]).sum::<f64>() / 4.0, p.iter().map(|q| q[1]).sum::<f64>() / 4.0]
        };
        let ears = [face_point(-90.0, -0.2), face_point(90.0, -0.2)];
        let hips = [[cx - 0.15 * w, 0.95 * h], [cx + 0.15 * w, 0.95 * h]];
        let body_points = [mesh[crate::geometry::synthetic::NOSE[6]], eye_mid(0), eye_mid(1), ears[0], ears[1], shoulders[0], shoulders[1], elbows[0], elbows[1], wrists[0], wrists[1], hips[0], hips[1]];
        set.body = Some(body_points.iter().map(|p| [p[0], p[1], 0.9]).collect());
        set.hands = wrists
            .iter()
            .flat_map(|wr| {
                [[0.0, 0.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0], [1.0, 1.0]].map(|[dx, dy]| [wr[0] + dx * hand, wr[1] + dy * hand, 0.85])
            })
            .collect();
        if !dropped {
            set.face = Some(mesh);
        }
        sets.push(set);
        frames.push(img);
    }
    RenderedClip {
        frames,
        landmarks: LandmarkTrack::new(sets),
        labels,
        split: spec.split_of(clip),
        subject_id: format!("s{subject_index:02}"),
    }
}

/// Bookkeeping of a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpus {
    pub spec: CorpusSpec,
    pub manifest_path: PathBuf,
    pub entries: Vec<ManifestEntry>,
    /// Positive count per label over the whole corpus.
    pub label_counts: [usize; NUM_LABELS],
    /// Positive count per label for train, val and test.
    pub split_label_counts: [[usize; NUM_LABELS]; 3],
}

pub fn clip_dir_name(clip: usize) -> String {
    format!("clip_{clip:03}")
}

/// Writes `manifest.jsonl`, `clips/clip_NNN/frame_*.png`,
/// `clips/clip_NNN/landmarks.jsonl` and `corpus.json` under `out`.
pub fn generate_synthetic_corpus(spec: &CorpusSpec, out: &Path) -> Result<SyntheticCorpus> {
    util::create_dir_all(out)?;
    let labels = spec.labels();
    let mut entries = Vec::with_capacity(spec.clips);
    let mut label_counts = [0usize; NUM_LABELS];
    let mut split_label_counts = [[0usize; NUM_LABELS]; 3];
    for (clip, l) in labels.iter().enumerate() {
        let rendered = render_clip(spec, clip, *l);
        let rel = PathBuf::from("clips").join(clip_dir_name(clip));
        let dir = out.join(&rel);
        write_video(&dir, &rendered.frames)?;
        write_landmark_file(&dir.join("landmarks.jsonl"), &rendered.landmarks)?;
        let split_slot = Split::ALL.iter().position(|&s| s == rendered.split).unwrap_or(0);
        for (i, &v) in l.iter().enumerate() {
            label_counts[i] += v as usize;
            split_label_counts[split_slot][i] += v as usize;
        }
        entries.push(ManifestEntry { path: rel, split: rendered.split, subject_id: rendered.subject_id, labels: l.to_vec(), landmarks: None });
    }
    let manifest_path = out.join("manifest.jsonl");
    write_manifest(&manifest_path, &entries)?;
    let corpus = SyntheticCorpus { spec: spec.clone(), manifest_path: PathBuf::from("manifest.jsonl"), entries, label_counts, split_label_counts };
    util::write_file(&out.join("corpus.json"), serde_json::to_string_pretty(&corpus)?.as_bytes())?;
    Ok(SyntheticCorpus { manifest_path, ..corpus })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{load_manifest, read_video};

    fn small_spec() -> CorpusSpec {
        CorpusSpec { clips: 12, frames: 6, ..CorpusSpec::default() }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn labels_cover_both_classes_per_split() {
        let spec = CorpusSpec::default();
        let labels = spec.labels();
        assert!(labels.iter().all(|l| l.contains(&1)));
        for split in Split::ALL {
            let members: Vec<_> = (0..spec.clips).filter(|&c| spec.split_of(c) == split).collect();
            assert!(members.len() >= 2);
            for label in 0..NUM_LABELS {
                let pos = members.iter().filter(|&&c| labels[c][label] == 1).count();
                assert!(pos > 0 && pos < members.len(), "{split} label {label}");
            }
        }
        assert_eq!((0..32).filter(|&c| spec.split_of(c) == Split::Train).count(), 20);
    }

    #[test]
    fn manifest_counts_match_generator() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = generate_synthetic_corpus(&small_spec(), dir.path()).unwrap();
        let manifest = load_manifest(&corpus.manifest_path).unwrap();
        assert_eq!(manifest.entries.len(), 12);
        assert_eq!(manifest.label_counts(None), corpus.label_counts);
        for (slot, split) in Split::ALL.iter().enumerate() {
            assert_eq!(manifest.label_counts(Some(*split)), corpus.split_label_counts[slot]);
        }
        let frames = read_video(&manifest.resolve(&manifest.entries[0].path)).unwrap();
        assert_eq!(frames.len(), 6);
        assert_eq!(frames[0].dimensions(), (32, 32));
    }

    fn color_count(frames: &[RgbImage], color: [u8; 3]) -> usize {
        frames.iter().flat_map(|f| f.pixels()).filter(|p| p.0 == color).count()
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn label_signals_are_separable() {
        for mouth_label in [None, Some(Emotion::Happiness)] {
            let spec = CorpusSpec { clips: 16, frames: 5, mouth_label, ..CorpusSpec::default() };
            let labels = spec.labels();
            let clips: Vec<_> = labels.iter().enumerate().map(|(c, l)| render_clip(&spec, c, *l)).collect();
            for label in 0..NUM_LABELS {
                let stat = |c: &RenderedClip| color_count(&c.frames, SIGNAL_COLORS[label]);
                let min_pos = clips.iter().filter(|c| c.labels[label] == 1).map(stat).min().unwrap();
                let max_neg = clips.iter().filter(|c| c.labels[label] == 0).map(stat).max().unwrap();
                assert!(min_pos > max_neg, "label {label}: {min_pos} vs {max_neg}");
                // present in every frame of positive clips
                for c in clips.iter().filter(|c| c.labels[label] == 1) {
                    assert!(c.frames.iter().all(|f| f.pixels().any(|p| p.0 == SIGNAL_COLORS[label])), "label {label}");
                }
            }
        }
    }

    #[test]
    fn landmark_dropout_removes_faces() {
        let spec = CorpusSpec { clips: 2, frames: 40, landmark_dropout: 0.5, ..CorpusSpec::default() };
        let clip = render_clip(&spec, 0, [1, 0, 0, 0, 0, 0, 0, 0]);
        let missing = clip.landmarks.iter().filter(|s| s.face.is_none()).count();
        assert!(missing > 5 && missing < 35);
        assert!(clip.landmarks.iter().all(|s| s.body.is_some()));
    }
}
