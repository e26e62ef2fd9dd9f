use rand::Rng;
use serde::{Deserialize, Serialize};

use super::segments::{divide_into_segments, Segment};
use super::DatasetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Uniformly random snippet start within each segment.
    TrainRandom,
    /// Deterministic snippet around each segment's midpoint.
    EvalCenter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Number of segments per video.
    pub segments: usize,
    /// Consecutive frames per snippet.
    pub snippet_frames: usize,
    pub mode: SamplingMode,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(segments: usize, mode: SamplingMode, seed: u64) -> Self {
        SamplerConfig { segments, snippet_frames: 3, mode, seed }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.segments == 0 {
            return Err(DatasetError::Sampler("segment count must be at least 1".into()));
        }
        if self.snippet_frames == 0 {
            return Err(DatasetError::Sampler("snippet length must be at least 1".into()));
        }
        Ok(())
    }
}

/// Frame indices of one snippet drawn from one segment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Snippet {
    pub segment_index: usize,
    pub start_frame: usize,
    /// `n` consecutive indices, padded by repeating the segment's last frame.
    pub frame_indices: Vec<usize>,
}

impl Snippet {
    /// Index of the frame a single-frame model looks at.
    pub fn middle(&self) -> usize {
        self.frame_indices[self.frame_indices.len() / 2]
    }
}

/// Draws `n` consecutive frames from `segment`.
///
/// `EvalCenter` starts at `floor((start + end) / 2) - floor(n / 2)` clamped into
/// the segment and never touches `rng`.
pub fn sample_snippet<R: Rng + ?Sized>(segment: Segment, segment_index: usize, n: usize, mode: SamplingMode, rng: &mut R) -> Snippet {
    let (seg_start, seg_end) = segment;
    let n = n.max(1);
    let last_start = if seg_end + 1 >= seg_start + n { seg_end + 1 - n } else { seg_start };
    let start = match mode {
        SamplingMode::TrainRandom => rng.random_range(seg_start..=last_start),
        SamplingMode::EvalCenter => ((seg_start + seg_end) / 2).saturating_sub(n / 2).clamp(seg_start, last_start),
    };
    let frame_indices = (0..n).map(|i| (start + i).min(seg_end)).collect();
    Snippet { segment_index, start_frame: start, frame_indices }
}

/// One snippet per segment of a `frame_count`-frame video.
pub fn sample_clip<R: Rng + ?Sized>(frame_count: usize, config: &SamplerConfig, rng: &mut R) -> Vec<Snippet> {
    divide_into_segments(frame_count, config.segments)
        .into_iter()
        .enumerate()
        .map(|(i, seg)| sample_snippet(seg, i, config.snippet_frames, config.mode, rng))
        .collect()
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn center_example() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = sample_snippet((0, 9), 0, 3, SamplingMode::EvalCenter, &mut rng);
        assert_eq!(s.frame_indices, vec![3, 4, 5]);
        assert_eq!(s.start_frame, 3);
        assert_eq!(s.middle(), 4);
    }

    #[test]
    fn degenerate_segment_pads() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for mode in [SamplingMode::EvalCenter, SamplingMode::TrainRandom] {
            let s = sample_snippet((0, 0), 0, 3, mode, &mut rng);
            assert_eq!(s.frame_indices, vec![0, 0, 0]);
            let s = sample_snippet((4, 5), 1, 3, mode, &mut rng);
            assert_eq!(s.frame_indices, vec![4, 5, 5]);
        }
    }

    #[test]
    fn eval_center_ignores_rng() {
        let cfg = SamplerConfig::new(5, SamplingMode::EvalCenter, 0);
        let a = sample_clip(97, &cfg, &mut ChaCha8Rng::seed_from_u64(1));
        let b = sample_clip(97, &cfg, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(a, b);
    }

    #[test]
    fn train_random_uniform_chi_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let draws = 10_000;
        let mut counts = [0usize; 8];
        for _ in 0..draws {
            let s = sample_snippet((0, 9), 0, 3, SamplingMode::TrainRandom, &mut rng);
            counts[s.start_frame] += 1;
            assert!(s.frame_indices.iter().all(|&f| f <= 9));
        }
        assert!(counts.iter().all(|&c| c > 0));
        let expected = draws as f64 / 8.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 7 degrees of freedom: mean 7, sd sqrt(14); 3 sd bound
        assert!(chi2 < 7.0 + 3.0 * 14f64.sqrt(), "chi2 = {chi2}");
        let sigma = (draws as f64 * (1.0 / 8.0) * (7.0 / 8.0)).sqrt();
        assert!(counts.iter().all(|&c| (c as f64 - expected).abs() < 3.0 * sigma + 1.0), "{counts:?}");
    }

    #[test]
    fn snippets_stay_in_segment() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for frames in 1..60 {
            for k in 1..8 {
                let cfg = SamplerConfig::new(k, SamplingMode::TrainRandom, 0);
                let segs = divide_into_segments(frames, k);
                for s in sample_clip(frames, &cfg, &mut rng) {
                    let (a, b) = segs[s.segment_index];
                    assert!(s.frame_indices.iter().all(|f| (a..=b).contains(f)));
                    assert!(s.frame_indices.windows(2).all(|w| w[1] == w[0] + 1 || w[1] == w[0]));
                }
            }
        }
    }

    #[test]
    fn seeded_determinism() {
        let cfg = SamplerConfig::new(3, SamplingMode::TrainRandom, 9);
        let a = sample_clip(40, &cfg, &mut ChaCha8Rng::seed_from_u64(9));
        let b = sample_clip(40, &cfg, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }
}
