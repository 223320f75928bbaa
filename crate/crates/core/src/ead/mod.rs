//! Environment-awareness discriminator: per-frame danger classification and the
//! windowed policy that decides when a reminder fires.
//!
//! The frame scorer is pluggable ([`FrameScorer`]); [`MlpClassifier`] is a
//! small feed-forward reference scorer trained with a blend of cross-entropy
//! and focal loss over precomputed feature vectors.

mod classifier;
mod loss;
mod policy;
mod train;

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use classifier::{Layer, MlpClassifier};
pub use loss::{
    cross_entropy, focal_loss, loss_gradients, BlendedLoss, FocalLossConfig, Gradients,
    LossEvaluation,
};
pub use policy::{
    decide_trigger, simulate_stream, FrameScorer, TriggerDecision, TriggerPolicyConfig, TriggerRule,
};
pub use train::{accuracy, train_classifier, EpochStats, TrainConfig, TrainedClassifier};

/// Three-grade danger label, ordered `A < B < C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DangerLevel {
    A,
    B,
    C,
}

impl DangerLevel {
    pub const ALL: [DangerLevel; 3] = [DangerLevel::A, DangerLevel::B, DangerLevel::C];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Index of the largest probability, ties resolved toward the higher
    /// danger level.
    pub fn argmax(dist: &[f64; 3]) -> Self {
        let mut best = 0;
        for i in 1..3 {
            if dist[i] >= dist[best] {
                best = i;
            }
        }
        Self::ALL[best]
    }
}

impl fmt::Display for DangerLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DangerLevel::A => "A",
            DangerLevel::B => "B",
            DangerLevel::C => "C",
        })
    }
}

impl FromStr for DangerLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" => Ok(DangerLevel::A),
            "B" => Ok(DangerLevel::B),
            "C" => Ok(DangerLevel::C),
            other => Err(Error::invalid(format!(
                "danger level must be A, B or C, got {other:?}"
            ))),
        }
    }
}

/// One frame of a danger stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<f64>>,
    #[serde(
        rename = "danger_true",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub true_level: Option<DangerLevel>,
    #[serde(
        rename = "danger_pred",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub predicted_level: Option<DangerLevel>,
    /// Scorer output for this frame, when one was produced.
    #[serde(skip)]
    pub score_distribution: Option<[f64; 3]>,
}

impl FrameRecord {
    pub fn new(frame_id: impl Into<String>) -> Self {
        Self {
            frame_id: frame_id.into(),
            features: None,
            true_level: None,
            predicted_level: None,
            score_distribution: None,
        }
    }

    pub fn with_prediction(mut self, level: DangerLevel) -> Self {
        self.predicted_level = Some(level);
        self
    }

    pub fn with_truth(mut self, level: DangerLevel) -> Self {
        self.true_level = Some(level);
        self
    }

    pub fn with_features(mut self, features: Vec<f64>) -> Self {
        self.features = Some(features);
        self
    }

    /// Attaches a score distribution after checking it is a probability
    /// vector (non-negative, sums to 1 within 1e-6).
    pub fn with_scores(mut self, dist: [f64; 3]) -> Result<Self> {
        check_distribution(&dist)?;
        self.score_distribution = Some(dist);
        Ok(self)
    }
}

pub(crate) fn check_distribution(dist: &[f64; 3]) -> Result<()> {
    let sum: f64 = dist.iter().sum();
    if dist.iter().any(|p| p.is_nan() || *p < 0.0) || (sum - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(format!(
            "{dist:?} is not a probability distribution"
        )));
    }
    Ok(())
}

/// Reads a JSON Lines danger stream. Blank lines are skipped; malformed lines
/// fail with their line number.
pub fn read_stream<R: BufRead>(reader: R) -> Result<Vec<FrameRecord>> {
    let mut frames = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let frame: FrameRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(idx + 1, e.to_string()))?;
        frames.push(frame);
    }
    Ok(frames)
}

/// Writes one `{"frame_id", "danger_pred", "trigger"}` object per line.
pub fn write_decisions<W: Write>(mut out: W, decisions: &[TriggerDecision]) -> Result<()> {
    for d in decisions {
        serde_json::to_writer(&mut out, d).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
