//! Late fusion of face and body stream scores.

use ndarray::Array4;
use serde::{Deserialize, Serialize};

use crate::labels::{LabelVector, NUM_LABELS};
use crate::model::{bce_multilabel, consensus, Backbone, EmotionScores, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    #[default]
    Average,
    Maximum,
}

impl std::fmt::Display for Aggregator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Aggregator::Average => "average",
            Aggregator::Maximum => "maximum",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub aggregator: Aggregator,
    pub face_weight: f64,
    pub body_weight: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig { aggregator: Aggregator::Average, face_weight: 0.5, body_weight: 0.5 }
    }
}

impl FusionConfig {
    pub fn maximum() -> Self {
        FusionConfig { aggregator: Aggregator::Maximum, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.face_weight >= 0.0 && self.body_weight >= 0.0) {
            return Err(format!("fusion weights must be non-negative, got {} and {}", self.face_weight, self.body_weight));
        }
        if self.aggregator == Aggregator::Average && (self.face_weight + self.body_weight - 1.0).abs() > 1e-9 {
            return Err(format!("average fusion weights must sum to 1, got {}", self.face_weight + self.body_weight));
        }
        Ok(())
    }
}

/// Elementwise weighted mean or maximum of two score vectors of the same kind.
pub fn fuse_scores(face: &EmotionScores, body: &EmotionScores, cfg: &FusionConfig) -> Result<EmotionScores, ModelError> {
    body.expect_kind(face.kind)?;
    let values = std::array::from_fn(|l| {
        let (f, b) = (face.values[l], body.values[l]);
        match cfg.aggregator {
            Aggregator::Maximum => f.max(b),
            Aggregator::Average if f == b => f,
            Aggregator::Average => cfg.face_weight * f + cfg.body_weight * b,
        }
    });
    Ok(EmotionScores { values, kind: face.kind })
}

/// Fusion with missing modalities: a single surviving stream passes through unchanged.
pub fn fuse_available(face: Option<&EmotionScores>, body: Option<&EmotionScores>, cfg: &FusionConfig) -> Result<Option<EmotionScores>, ModelError> {
    match (face, body) {
        (Some(f), Some(b)) => fuse_scores(f, b, cfg).map(Some),
        (Some(s), None) | (None, Some(s)) => Ok(Some(*s)),
        (None, None) => Ok(None),
    }
}

/// Sum of the face and body multi-label losses.
pub fn fused_loss(face_logits: &EmotionScores, body_logits: &EmotionScores, labels: &LabelVector) -> Result<f64, ModelError> {
    Ok(bce_multilabel(face_logits, labels)? + bce_multilabel(body_logits, labels)?)
}

/// Two backbones with separate parameters, one per modality.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionModel {
    pub face: Backbone,
    pub body: Backbone,
    pub config: FusionConfig,
}

/// Post-consensus logits of each stream; `None` marks an unavailable modality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamScores {
    pub face: Option<EmotionScores>,
    pub body: Option<EmotionScores>,
}

impl StreamScores {
    /// Fused probabilities, degrading to whichever stream is present.
    pub fn fused(&self, cfg: &FusionConfig) -> Result<Option<EmotionScores>, ModelError> {
        let face = self.face.map(|s| s.to_probabilities());
        let body = self.body.map(|s| s.to_probabilities());
        fuse_available(face.as_ref(), body.as_ref(), cfg)
    }
}

fn stream_forward(model: &Backbone, snippets: Option<&[Array4<f64>]>) -> Result<Option<EmotionScores>, ModelError> {
    match snippets {
        None => Ok(None),
        Some(snippets) => {
            let scores = snippets.iter().map(|s| model.snippet_forward(s)).collect::<Result<Vec<_>, _>>()?;
            consensus(&scores).map(Some)
        }
    }
}

/// Runs the face and body networks independently on their own crops.
///
/// `face` holds masked face-crop snippets and `body` blacked-out body-crop
/// snippets; `None` for a modality whose geometry failed.
pub fn two_pass_forward(model: &FusionModel, face: Option<&[Array4<f64>]>, body: Option<&[Array4<f64>]>) -> Result<StreamScores, ModelError> {
    let (f, b) = rayon::join(|| stream_forward(&model.face, face), || stream_forward(&model.body, body));
    Ok(StreamScores { face: f?, body: b? })
}

/// Elementwise `max >= average` check used by property tests and reports.
pub fn max_dominates_average(face: &EmotionScores, body: &EmotionScores) -> Result<bool, ModelError> {
    let avg = fuse_scores(face, body, &FusionConfig::default())?;
    let max = fuse_scores(face, body, &FusionConfig::maximum())?;
    Ok((0..NUM_LABELS).all(|l| max.values[l] >= avg.values[l]))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::model::Architecture;

    fn probs(rng: &mut ChaCha8Rng) -> EmotionScores {
        EmotionScores::probabilities(std::array::from_fn(|_| rng.random_range(0.0..=1.0))).unwrap()
    }

    #[test]
    fn idempotent_for_both_aggregators() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = probs(&mut rng);
        assert_eq!(fuse_scores(&v, &v, &FusionConfig::default()).unwrap(), v);
        assert_eq!(fuse_scores(&v, &v, &FusionConfig::maximum()).unwrap(), v);
        let w = FusionConfig { face_weight: 0.3, body_weight: 0.7, ..Default::default() };
        assert_eq!(fuse_scores(&v, &v, &w).unwrap(), v);
    }

    #[test]
    fn equal_weight_average() {
        let f = EmotionScores::probabilities([0.2; 8]).unwrap();
        let b = EmotionScores::probabilities([0.8; 8]).unwrap();
        let got = fuse_scores(&f, &b, &FusionConfig::default()).unwrap();
        assert!(got.values.iter().all(|v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn kinds_must_match() {
        let f = EmotionScores::probabilities([0.2; 8]).unwrap();
        let b = EmotionScores::logits([0.8; 8]);
        assert!(matches!(fuse_scores(&f, &b, &FusionConfig::default()), Err(ModelError::KindMismatch { .. })));
    }

    #[test]
    fn max_dominates_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let (f, b) = (probs(&mut rng), probs(&mut rng));
            assert!(max_dominates_average(&f, &b).unwrap());
        }
    }

    #[test]
    fn loss_adds_up() {
        let z = EmotionScores::logits([0.0; 8]);
        assert!((fused_loss(&z, &z, &[1; 8]).unwrap() - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let f = EmotionScores::logits(std::array::from_fn(|_| rng.random_range(-8.0..8.0)));
            let b = EmotionScores::logits(std::array::from_fn(|_| rng.random_range(-8.0..8.0)));
            let y: LabelVector = std::array::from_fn(|_| rng.random_range(0..=1));
            let sum = bce_multilabel(&f, &y).unwrap() + bce_multilabel(&b, &y).unwrap();
            assert_eq!(fused_loss(&f, &b, &y).unwrap().to_bits(), sum.to_bits());
        }
    }

    #[test]
    fn missing_modality_degrades() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = probs(&mut rng);
        assert_eq!(fuse_available(None, Some(&b), &FusionConfig::default()).unwrap(), Some(b));
        assert_eq!(fuse_available(None, None, &FusionConfig::maximum()).unwrap(), None);
    }

    #[test]
    fn two_pass_streams_are_independent() {
        let model = FusionModel {
            face: Backbone::new(Architecture::tiny(), None, 8, 1).unwrap(),
            body: Backbone::new(Architecture::tiny(), None, 8, 2).unwrap(),
            config: FusionConfig::default(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut snippets = || -> Vec<Array4<f64>> { (0..3).map(|_| Array4::from_shape_fn((3, 3, 8, 8), |_| rng.random_range(0.0..1.0))).collect() };
        let (face, body) = (snippets(), snippets());
        let both = two_pass_forward(&model, Some(&face), Some(&body)).unwrap();
        let body_only = two_pass_forward(&model, None, Some(&body)).unwrap();
        assert_eq!(both.body, body_only.body);
        assert_eq!(body_only.face, None);
        let fused = body_only.fused(&model.config).unwrap().unwrap();
        assert_eq!(fused, body_only.body.unwrap().to_probabilities());
        // separate parameter sets give different scores on the same input
        assert_ne!(two_pass_forward(&model, Some(&body), Some(&body)).unwrap().face, both.body);
    }

    #[test]
    fn weights_validated() {
        assert!(FusionConfig::default().validate().is_ok());
        assert!(FusionConfig { face_weight: 0.7, body_weight: 0.7, ..Default::default() }.validate().is_err());
        assert!(FusionConfig { face_weight: -0.5, body_weight: 1.5, ..Default::default() }.validate().is_err());
    }

    proptest! {
        #[test]
        fn max_ranking_survives_common_scaling(seed in 0u64..1000, c in 0.01f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (f, b) = (probs(&mut rng), probs(&mut rng));
            let scale = |s: &EmotionScores| EmotionScores::probabilities(s.values.map(|v| v * c)).unwrap();
            let base = fuse_scores(&f, &b, &FusionConfig::maximum()).unwrap().values;
            let scaled = fuse_scores(&scale(&f), &scale(&b), &FusionConfig::maximum()).unwrap().values;
            for i in 0..8 {
                for j in 0..8 {
                    if base[i] < base[j] {
                        prop_assert!(scaled[i] <= scaled[j]);
                    }
                }
            }
        }

        #[test]
        fn maximum_is_monotone(seed in 0u64..1000, bump in 0.0f64..0.5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (f, b) = (probs(&mut rng), probs(&mut rng));
            let raised = EmotionScores::probabilities(f.values.map(|v| (v + bump).min(1.0))).unwrap();
            let before = fuse_scores(&f, &b, &FusionConfig::maximum()).unwrap().values;
            let after = fuse_scores(&raised, &b, &FusionConfig::maximum()).unwrap().values;
            prop_assert!(before.iter().zip(&after).all(|(x, y)| y >= x));
        }
    }
}
