use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Number of emotion labels predicted per clip.
pub const NUM_LABELS: usize = 8;

/// Ground truth for one clip: one binary flag per emotion, in [`Emotion::ALL`] order.
pub type LabelVector = [u8; NUM_LABELS];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Curiosity,
    Uncertainty,
    Excitement,
    Happiness,
    Surprise,
    Disgust,
    Fear,
    Frustration,
}

impl Emotion {
    /// Canonical label order used by manifests, score vectors and reports.
    pub const ALL: [Emotion; NUM_LABELS] = [
        Emotion::Curiosity,
        Emotion::Uncertainty,
        Emotion::Excitement,
        Emotion::Happiness,
        Emotion::Surprise,
        Emotion::Disgust,
        Emotion::Fear,
        Emotion::Frustration,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Emotion> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Curiosity => "curiosity",
            Emotion::Uncertainty => "uncertainty",
            Emotion::Excitement => "excitement",
            Emotion::Happiness => "happiness",
            Emotion::Surprise => "surprise",
            Emotion::Disgust => "disgust",
            Emotion::Fear => "fear",
            Emotion::Frustration => "frustration",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Emotion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        if let Ok(index) = lower.parse::<usize>() {
            return Emotion::from_index(index).ok_or_else(|| format!("label index {index} out of range"));
        }
        Emotion::ALL
            .iter()
            .copied()
            .find(|e| e.name() == lower)
            .ok_or_else(|| format!("unknown emotion label '{s}'"))
    }
}
