use std::fmt;

use serde::{Deserialize, Serialize};

/// Outcome of per-frame geometry within a video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum FrameStatus {
    /// Geometry computed from this frame's own landmarks.
    Fresh,
    /// This frame failed; the result of an earlier frame was reused.
    Reused { from_frame: usize, reason: String },
    /// No usable result yet; the frame passes through untouched.
    Missing { reason: String },
}

impl FrameStatus {
    pub fn is_warning(&self) -> bool {
        !matches!(self, FrameStatus::Fresh)
    }
}

impl fmt::Display for FrameStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameStatus::Fresh => f.write_str("ok"),
            FrameStatus::Reused { from_frame, reason } => write!(f, "reused frame {from_frame} ({reason})"),
            FrameStatus::Missing { reason } => write!(f, "WARNING unprocessed ({reason})"),
        }
    }
}

/// Carries the most recent successful result over frames that fail.
///
/// Frames before the first success yield `None` with a `Missing` status.
pub fn carry_forward<T: Clone, E: fmt::Display>(results: impl IntoIterator<Item = Result<T, E>>) -> Vec<(Option<T>, FrameStatus)> {
    let mut last: Option<(usize, T)> = None;
    results
        .into_iter()
        .enumerate()
        .map(|(i, r)| match r {
            Ok(v) => {
                last = Some((i, v.clone()));
                (Some(v), FrameStatus::Fresh)
            }
            Err(e) => match &last {
                Some((from, v)) => (Some(v.clone()), FrameStatus::Reused { from_frame: *from, reason: e.to_string() }),
                None => (None, FrameStatus::Missing { reason: e.to_string() }),
            },
        })
        .collect()
}
