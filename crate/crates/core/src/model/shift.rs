use ndarray::{s, Array4, ArrayView4};
use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ShiftPlacement {
    /// Shift at the entry of each residual branch; the identity path stays unshifted.
    #[default]
    ResidualBranch,
}

/// Temporal shift settings. `fraction` is the total share of shifted
/// channels, half moved forward in time and half backward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftConfig {
    pub fraction: f64,
    #[serde(default)]
    pub placement: ShiftPlacement,
}

impl ShiftConfig {
    pub fn new(fraction: f64) -> Self {
        ShiftConfig { fraction, placement: ShiftPlacement::ResidualBranch }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.fraction > 0.0 && self.fraction <= 0.5) {
            return Err(ModelError::InvalidFraction { fraction: self.fraction, channels: 0, reason: "must lie in (0, 1/2]".into() });
        }
        Ok(())
    }
}

/// Total number of shifted channels for `channels` input channels.
///
/// Fails unless `channels * fraction` is an even integer and `fraction` lies in `[0, 1/2]`.
pub fn shifted_channels(channels: usize, fraction: f64) -> Result<usize, ModelError> {
    let err = |reason: &str| ModelError::InvalidFraction { fraction, channels, reason: reason.into() };
    if !(0.0..=0.5).contains(&fraction) {
        return Err(err("must lie in [0, 1/2]"));
    }
    let exact = channels as f64 * fraction;
    let count = exact.round();
    if (exact - count).abs() > 1e-9 {
        return Err(err("channels * fraction is not an integer"));
    }
    let count = count as usize;
    if count % 2 != 0 {
        return Err(err("shifted channel count must be even"));
    }
    Ok(count)
}

fn shift_impl(x: ArrayView4<f64>, fraction: f64, reverse: bool) -> Result<Array4<f64>, ModelError> {
    let (t, c, _, _) = x.dim();
    let half = shifted_channels(c, fraction)? / 2;
    let mut out = x.to_owned();
    if half == 0 || t == 0 {
        return Ok(out);
    }
    out.slice_mut(s![.., 0..2 * half, .., ..]).fill(0.0);
    // forward block: frame i reads frame i - 1; backward block: frame i reads i + 1
    let (fwd, bwd) = if reverse { (0..half, half..2 * half) } else { (half..2 * half, 0..half) };
    if t > 1 {
        out.slice_mut(s![1.., bwd.clone(), .., ..]).assign(&x.slice(s![..t - 1, bwd, .., ..]));
        out.slice_mut(s![..t - 1, fwd.clone(), .., ..]).assign(&x.slice(s![1.., fwd, .., ..]));
    }
    Ok(out)
}

/// Shifts the first `C * fraction / 2` channels forward in time (frame `t`
/// takes frame `t - 1`, frame 0 gets zeros) and the next `C * fraction / 2`
/// backward (frame `t` takes frame `t + 1`, the last frame gets zeros).
/// Remaining channels are copied.
pub fn temporal_shift(x: &Array4<f64>, fraction: f64) -> Result<Array4<f64>, ModelError> {
    shift_impl(x.view(), fraction, false)
}

/// Adjoint of [`temporal_shift`]: moves gradients back to the frames they came from.
pub fn temporal_shift_adjoint(grad: &Array4<f64>, fraction: f64) -> Result<Array4<f64>, ModelError> {
    shift_impl(grad.view(), fraction, true)
}
