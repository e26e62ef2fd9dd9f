//! ROC AUC over multi-label predictions and best-epoch selection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labels::{Emotion, LabelVector, NUM_LABELS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("ROC AUC undefined for {0}: labels contain a single class")]
    DegenerateLabels(String),
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("non-finite score {0}")]
    NonFinite(f64),
    #[error("label value {0} is not binary")]
    NonBinary(u8),
    #[error("probability {value} of clip '{clip}' outside [0, 1]")]
    InvalidProbability { clip: String, value: f64 },
    #[error("empty validation history")]
    EmptyHistory,
}

/// Predictions and ground truth for one clip at one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub clip_id: String,
    pub epoch: usize,
    pub probabilities: [f64; NUM_LABELS],
    pub labels: LabelVector,
}

impl EvalRecord {
    pub fn validate(&self) -> Result<(), MetricError> {
        for &p in &self.probabilities {
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                return Err(MetricError::InvalidProbability { clip: self.clip_id.clone(), value: p });
            }
        }
        match self.labels.iter().find(|&&y| y > 1) {
            Some(&y) => Err(MetricError::NonBinary(y)),
            None => Ok(()),
        }
    }
}

/// Probability that a random positive outranks a random negative, ties counting one half.
///
/// Computed from mid-ranks, so the numerator is an exact half-integer count.
pub fn roc_auc_binary(scores: &[f64], labels: &[u8]) -> Result<f64, MetricError> {
    auc_named(scores, labels, "the score column")
}

fn auc_named(scores: &[f64], labels: &[u8], what: &str) -> Result<f64, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    if let Some(&s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(MetricError::NonFinite(s));
    }
    if let Some(&y) = labels.iter().find(|&&y| y > 1) {
        return Err(MetricError::NonBinary(y));
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricError::DegenerateLabels(what.to_string()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum of 2 * rank over positives, kept integral
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j share the mid-rank (i + 1 + j) / 2
        let twice_mid = (i + 1 + j) as u128;
        let group_pos = order[i..j].iter().filter(|&&k| labels[k] == 1).count() as u128;
        twice_rank_sum += twice_mid * group_pos;
        i = j;
    }
    let (p, n) = (pos as u128, neg as u128);
    // U = rank_sum - P(P+1)/2; doubled to stay integral
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(twice_u as f64 / (2.0 * p as f64 * n as f64))
}

fn check_records(records: &[EvalRecord]) -> Result<(), MetricError> {
    records.iter().try_for_each(EvalRecord::validate)
}

fn column(records: &[EvalRecord], label: usize) -> (Vec<f64>, Vec<u8>) {
    records.iter().map(|r| (r.probabilities[label], r.labels[label])).unzip()
}

/// Pooled AUC over every (clip, label) pair, so each pair weighs the same.
pub fn roc_auc_unbalanced(records: &[EvalRecord]) -> Result<f64, MetricError> {
    check_records(records)?;
    let scores: Vec<f64> = records.iter().flat_map(|r| r.probabilities).collect();
    let labels: Vec<u8> = records.iter().flat_map(|r| r.labels).collect();
    auc_named(&scores, &labels, "the pooled label set")
}

/// AUC of one label column.
pub fn roc_auc_label(records: &[EvalRecord], label: Emotion) -> Result<f64, MetricError> {
    check_records(records)?;
    let (scores, labels) = column(records, label.index());
    auc_named(&scores, &labels, &format!("label '{label}'"))
}

/// Unweighted mean of the eight per-label AUCs.
pub fn roc_auc_balanced(records: &[EvalRecord]) -> Result<f64, MetricError> {
    let mut sum = 0.0;
    for e in Emotion::ALL {
        sum += roc_auc_label(records, e)?;
    }
    Ok(sum / NUM_LABELS as f64)
}

/// Per-label AUCs weighted by the number of positives of each label.
pub fn roc_auc_prevalence_weighted(records: &[EvalRecord]) -> Result<f64, MetricError> {
    let mut sum = 0.0;
    let mut weight = 0.0;
    for e in Emotion::ALL {
        let w = records.iter().filter(|r| r.labels[e.index()] == 1).count() as f64;
        sum += w * roc_auc_label(records, e)?;
        weight += w;
    }
    Ok(sum / weight)
}

/// Index of the largest value; the earliest epoch wins ties and NaN never wins.
pub fn select_best_epoch(history: &[f64]) -> Result<usize, MetricError> {
    if history.is_empty() {
        return Err(MetricError::EmptyHistory);
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in history.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    Ok(best.map_or(0, |(i, _)| i))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionAuc {
    pub emotion: Emotion,
    /// `None` when the label column has a single class.
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerEmotionReport {
    pub entries: Vec<EmotionAuc>,
    pub warnings: Vec<String>,
}

impl PerEmotionReport {
    /// Bar-chart source data, one row per emotion; degenerate labels leave the value empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("emotion,roc_auc\n");
        for e in &self.entries {
            let v = e.auc.map(|a| format!("{a:.6}")).unwrap_or_default();
            out.push_str(&format!("{},{v}\n", e.emotion));
        }
        out
    }
}

/// Per-label AUCs in canonical order; single-class labels become `None` with a warning.
pub fn per_emotion_report(records: &[EvalRecord]) -> Result<PerEmotionReport, MetricError> {
    check_records(records)?;
    let mut entries = Vec::with_capacity(NUM_LABELS);
    let mut warnings = Vec::new();
    for emotion in Emotion::ALL {
        let auc = match roc_auc_label(records, emotion) {
            Ok(a) => Some(a),
            Err(MetricError::DegenerateLabels(what)) => {
                let msg = format!("ROC AUC undefined for {what}: single class in evaluation split");
                log::warn!("{msg}");
                warnings.push(msg);
                None
            }
            Err(e) => return Err(e),
        };
        entries.push(EmotionAuc { emotion, auc });
    }
    Ok(PerEmotionReport { entries, warnings })
}
