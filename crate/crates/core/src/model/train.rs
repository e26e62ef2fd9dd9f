use ndarray::Array4;
use rayon::prelude::*;

use super::loss::{bce_multilabel, bce_multilabel_grad};
use super::network::Backbone;
use super::optim::Sgd;
use super::scores::{consensus, EmotionScores};
use super::ModelError;
use crate::labels::{LabelVector, NUM_LABELS};

/// One training clip: `K` snippet tensors `[n, 3, S, S]` and its label vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipInput {
    pub id: String,
    pub snippets: Vec<Array4<f64>>,
    pub labels: LabelVector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Mean clip loss before the update.
    pub loss: f64,
    pub lr: f64,
}

/// Video logits, loss and parameter gradient of one clip.
pub fn clip_gradient(model: &Backbone, clip: &ClipInput) -> Result<(f64, EmotionScores, Vec<f64>), ModelError> {
    let mut traces = Vec::with_capacity(clip.snippets.len());
    let mut scores = Vec::with_capacity(clip.snippets.len());
    for snippet in &clip.snippets {
        let (s, t) = model.snippet_trace(snippet)?;
        scores.push(s);
        traces.push(t);
    }
    let video = consensus(&scores)?;
    let loss = bce_multilabel(&video, &clip.labels)?;
    let d_video = bce_multilabel_grad(&video, &clip.labels)?;
    let k = traces.len() as f64;
    let d_snippet: [f64; NUM_LABELS] = d_video.map(|d| d / k);
    let mut grad = vec![0.0; model.num_params()];
    for trace in &traces {
        model.snippet_backward(trace, &d_snippet, &mut grad);
    }
    Ok((loss, video, grad))
}

/// One momentum step on the mean loss of `batch`.
///
/// Clip gradients are computed in parallel and summed in batch order, so the
/// update does not depend on thread scheduling.
pub fn train_step(model: &mut Backbone, opt: &mut Sgd, batch: &[ClipInput], lr: f64) -> Result<StepOutcome, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::ShapeMismatch { expected: "non-empty batch".into(), got: "0 clips".into() });
    }
    let results: Vec<_> = batch.par_iter().map(|clip| clip_gradient(model, clip)).collect();
    let n = batch.len() as f64;
    let mut grad = vec![0.0; model.num_params()];
    let mut loss = 0.0;
    for (clip, result) in batch.iter().zip(results) {
        let (l, _, g) = result?;
        if !l.is_finite() {
            return Err(ModelError::NonFiniteLoss { loss: l, context: format!("clip {}", clip.id) });
        }
        loss += l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b / n;
        }
    }
    loss /= n;
    if !loss.is_finite() {
        return Err(ModelError::NonFiniteLoss { loss, context: "batch mean".into() });
    }
    opt.step(&mut model.params, &grad, lr)?;
    Ok(StepOutcome { loss, lr })
}
