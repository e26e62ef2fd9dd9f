use super::scores::{EmotionScores, ScoreKind};
use super::ModelError;
use crate::labels::{LabelVector, NUM_LABELS};

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean over labels of `-[y log s(z) + (1 - y) log(1 - s(z))]`, evaluated as
/// `max(z, 0) - z y + ln(1 + e^-|z|)` to stay finite for large logits.
pub fn bce_multilabel(logits: &EmotionScores, labels: &LabelVector) -> Result<f64, ModelError> {
    logits.expect_kind(ScoreKind::Logits)?;
    let mut sum = 0.0;
    for (&z, &y) in logits.values.iter().zip(labels) {
        sum += z.max(0.0) - z * y as f64 + (-z.abs()).exp().ln_1p();
    }
    Ok(sum / NUM_LABELS as f64)
}

/// Gradient of [`bce_multilabel`] with respect to the logits: `(s(z) - y) / 8`.
pub fn bce_multilabel_grad(logits: &EmotionScores, labels: &LabelVector) -> Result<[f64; NUM_LABELS], ModelError> {
    logits.expect_kind(ScoreKind::Logits)?;
    Ok(std::array::from_fn(|i| (sigmoid(logits.values[i]) - labels[i] as f64) / NUM_LABELS as f64))
}
