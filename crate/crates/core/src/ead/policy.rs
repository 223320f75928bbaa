use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{check_distribution, DangerLevel, FrameRecord};

/// Per-frame danger scorer: feature vector in, distribution over A/B/C out.
pub trait FrameScorer {
    fn score(&self, features: &[f64]) -> Result<[f64; 3]>;
}

/// Rule mapping a window of danger levels to a fire/hold decision. No rule
/// ever fires when the current frame is `A`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TriggerRule {
    /// Fire iff the current frame is `C`.
    CurrentHigh,
    /// Fire iff the current frame is `C`, or it is at least `B` and a strict
    /// majority of the window is at least `B`.
    Majority,
    /// Fire iff the current frame is at least `B` and the window's mean
    /// severity (`A = 0`, `B = 0.5`, `C = 1`) reaches `threshold`.
    ThresholdScore { threshold: f64 },
}

impl TriggerRule {
    pub const NAMES: [&'static str; 3] = ["current_high", "majority", "threshold_score"];
    pub const DEFAULT_SCORE_THRESHOLD: f64 = 0.5;

    pub fn name(&self) -> &'static str {
        match self {
            TriggerRule::CurrentHigh => "current_high",
            TriggerRule::Majority => "majority",
            TriggerRule::ThresholdScore { .. } => "threshold_score",
        }
    }

    /// Parses a rule name; `threshold` is used only by `threshold_score`.
    pub fn from_name(name: &str, threshold: f64) -> Result<Self> {
        match name {
            "current_high" => Ok(TriggerRule::CurrentHigh),
            "majority" => Ok(TriggerRule::Majority),
            "threshold_score" => Ok(TriggerRule::ThresholdScore { threshold }),
            other => Err(Error::invalid(format!(
                "unknown trigger rule {other:?}; expected one of {:?}",
                Self::NAMES
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriggerPolicyConfig {
    /// History frames considered besides the current one.
    pub window: usize,
    pub rule: TriggerRule,
}

impl Default for TriggerPolicyConfig {
    fn default() -> Self {
        Self {
            window: 3,
            rule: TriggerRule::Majority,
        }
    }
}

impl TriggerPolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if let TriggerRule::ThresholdScore { threshold } = self.rule {
            if !(threshold > 0.0 && threshold <= 1.0) {
                return Err(Error::invalid(format!(
                    "threshold_score threshold must lie in (0, 1], got {threshold}"
                )));
            }
        }
        Ok(())
    }
}

fn severity(level: DangerLevel) -> f64 {
    level.ordinal() as f64 / 2.0
}

/// Decides whether to fire for `window`, which holds the `N` history levels
/// oldest first followed by the current level.
pub fn decide_trigger(window: &[DangerLevel], policy: &TriggerPolicyConfig) -> Result<bool> {
    let Some(&current) = window.last() else {
        return Err(Error::invalid("trigger window is empty"));
    };
    if window.len() != policy.window + 1 {
        return Err(Error::invalid(format!(
            "trigger window has {} levels, policy expects {}",
            window.len(),
            policy.window + 1
        )));
    }
    if current == DangerLevel::A {
        return Ok(false);
    }
    Ok(match policy.rule {
        TriggerRule::CurrentHigh => current == DangerLevel::C,
        TriggerRule::Majority => {
            let elevated = window.iter().filter(|l| **l >= DangerLevel::B).count();
            current == DangerLevel::C || 2 * elevated > window.len()
        }
        TriggerRule::ThresholdScore { threshold } => {
            let mean = window.iter().copied().map(severity).sum::<f64>() / window.len() as f64;
            mean >= threshold
        }
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerDecision {
    pub frame_id: String,
    pub danger_pred: DangerLevel,
    pub trigger: bool,
}

fn frame_level(
    frame: &FrameRecord,
    scorer: Option<&dyn FrameScorer>,
) -> Result<Option<DangerLevel>> {
    if let (Some(scorer), Some(features)) = (scorer, frame.features.as_deref()) {
        let dist = scorer
            .score(features)
            .map_err(|e| Error::invalid(format!("frame {:?}: {e}", frame.frame_id)))?;
        check_distribution(&dist)?;
        return Ok(Some(DangerLevel::argmax(&dist)));
    }
    if let Some(dist) = &frame.score_distribution {
        return Ok(Some(DangerLevel::argmax(dist)));
    }
    Ok(frame.predicted_level)
}

/// Classifies each frame and runs the trigger policy over a sliding window.
///
/// A frame's level comes from `scorer` when both a scorer and features are
/// available, then from an attached score distribution, then from its
/// precomputed prediction. The window is padded with `A` at stream start.
pub fn simulate_stream(
    frames: &[FrameRecord],
    scorer: Option<&dyn FrameScorer>,
    policy: &TriggerPolicyConfig,
) -> Result<Vec<TriggerDecision>> {
    policy.validate()?;
    let mut levels = Vec::with_capacity(frames.len());
    let mut missing = Vec::new();
    for frame in frames {
        match frame_level(frame, scorer)? {
            Some(l) => levels.push(l),
            None => missing.push(frame.frame_id.as_str()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::invalid(format!(
            "frames without features or danger_pred: {}",
            missing.join(", ")
        )));
    }

    let mut window: VecDeque<DangerLevel> =
        std::iter::repeat_n(DangerLevel::A, policy.window + 1).collect();
    let mut buf = Vec::with_capacity(policy.window + 1);
    frames
        .iter()
        .zip(levels)
        .map(|(frame, level)| {
            window.pop_front();
            window.push_back(level);
            buf.clear();
            buf.extend(window.iter().copied());
            Ok(TriggerDecision {
                frame_id: frame.frame_id.clone(),
                danger_pred: level,
                trigger: decide_trigger(&buf, policy)?,
            })
        })
        .collect()
}
