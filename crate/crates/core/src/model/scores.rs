use serde::{Deserialize, Serialize};

use super::loss::sigmoid;
use super::ModelError;
use crate::labels::NUM_LABELS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Logits,
    Probabilities,
}

/// One score per emotion label, tagged with whether it is a logit or a probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmotionScores {
    pub values: [f64; NUM_LABELS],
    pub kind: ScoreKind,
}

impl EmotionScores {
    pub fn logits(values: [f64; NUM_LABELS]) -> Self {
        EmotionScores { values, kind: ScoreKind::Logits }
    }

    pub fn probabilities(values: [f64; NUM_LABELS]) -> Result<Self, ModelError> {
        if let Some(&bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ModelError::InvalidProbability(bad));
        }
        Ok(EmotionScores { values, kind: ScoreKind::Probabilities })
    }

    pub fn expect_kind(&self, kind: ScoreKind) -> Result<(), ModelError> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(ModelError::KindMismatch { expected: kind, got: self.kind })
        }
    }

    /// Sigmoid of logits; probabilities pass through unchanged.
    pub fn to_probabilities(&self) -> EmotionScores {
        match self.kind {
            ScoreKind::Probabilities => *self,
            ScoreKind::Logits => EmotionScores { values: self.values.map(sigmoid), kind: ScoreKind::Probabilities },
        }
    }
}

/// Average-pooling consensus over snippet scores.
///
/// Each label's values are sorted before a running mean is taken, so the result
/// is bitwise independent of argument order and `k` copies of `v` give exactly `v`.
pub fn consensus(scores: &[EmotionScores]) -> Result<EmotionScores, ModelError> {
    let first = scores.first().ok_or(ModelError::EmptyList)?;
    for s in scores {
        s.expect_kind(first.kind)?;
    }
    let mut values = [0.0; NUM_LABELS];
    let mut column = Vec::with_capacity(scores.len());
    for (label, out) in values.iter_mut().enumerate() {
        column.clear();
        column.extend(scores.iter().map(|s| s.values[label]));
        column.sort_by(f64::total_cmp);
        let mut mean = 0.0;
        for (i, v) in column.iter().enumerate() {
            mean += (v - mean) / (i + 1) as f64;
        }
        *out = mean;
    }
    Ok(EmotionScores { values, kind: first.kind })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn identical_vectors_are_fixed_points() {
        let v = EmotionScores::logits([0.1, -2.5, 3.3, 0.7, 1e-3, 9.0, -0.3, 0.2]);
        for k in 1..=10 {
            assert_eq!(consensus(&vec![v; k]).unwrap(), v);
        }
    }

    #[test]
    fn zeros_and_ones_average() {
        let a = EmotionScores::logits([0.0; 8]);
        let b = EmotionScores::logits([1.0; 8]);
        assert_eq!(consensus(&[a, b]).unwrap().values, [0.5; 8]);
    }

    #[test]
    fn random_mean_matches_naive_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let scores: Vec<_> = (0..5).map(|_| EmotionScores::logits(std::array::from_fn(|_| rng.random_range(-5.0..5.0)))).collect();
        let got = consensus(&scores).unwrap();
        for label in 0..8 {
            let mut sum = 0.0;
            for s in &scores {
                sum += s.values[label];
            }
            assert!((got.values[label] - sum / 5.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn permutation_invariant_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut scores: Vec<_> = (0..7).map(|_| EmotionScores::logits(std::array::from_fn(|_| rng.random_range(-5.0..5.0)))).collect();
        let reference = consensus(&scores).unwrap();
        for _ in 0..20 {
            let i = rng.random_range(0..7);
            let j = rng.random_range(0..7);
            scores.swap(i, j);
            assert_eq!(consensus(&scores).unwrap(), reference);
        }
    }

    #[test]
    fn errors() {
        assert_eq!(consensus(&[]), Err(ModelError::EmptyList));
        let a = EmotionScores::logits([0.0; 8]);
        let b = EmotionScores::probabilities([0.5; 8]).unwrap();
        assert!(matches!(consensus(&[a, b]), Err(ModelError::KindMismatch { .. })));
        assert!(EmotionScores::probabilities([1.5; 8]).is_err());
        assert_eq!(a.to_probabilities().values, [0.5; 8]);
    }
}
