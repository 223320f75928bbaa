//! Flat `key = value` run configuration.
//!
//! Every tunable has a default, so an empty file is a valid config. Unknown
//! and repeated keys are rejected: a mistyped weight name must not silently
//! fall back to its default.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use walkguard_core::grpo::DEFAULT_EPSILON;
use walkguard_core::rewards::IdealLength;
use walkguard_core::{
    BlendedLoss, FocalLossConfig, RewardConfig, TrainConfig, TriggerPolicyConfig, TriggerRule,
};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub rewards: RewardConfig,
    pub smoothing_alpha: f64,
    pub advantage_epsilon: f64,
    pub policy: TriggerPolicyConfig,
    /// Kept separately from `policy` so that switching rules on the command
    /// line does not lose a configured threshold.
    pub trigger_threshold: f64,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            rewards: RewardConfig::default(),
            smoothing_alpha: 1.0,
            advantage_epsilon: DEFAULT_EPSILON,
            policy: TriggerPolicyConfig::default(),
            trigger_threshold: TriggerRule::DEFAULT_SCORE_THRESHOLD,
            train: TrainConfig::default(),
        }
    }
}

const KEYS: &[&str] = &[
    "ideal_length",
    "r_max",
    "simplicity_floor",
    "fluency_ngram_order",
    "synonym_threshold",
    "w_simplicity",
    "w_fluency",
    "w_accuracy",
    "w_keywords",
    "clip_keyword_count",
    "smoothing_alpha",
    "advantage_epsilon",
    "window",
    "trigger_rule",
    "trigger_threshold",
    "focal_gamma",
    "focal_alpha",
    "loss_blend",
    "hidden_dims",
    "learning_rate",
    "epochs",
    "batch_size",
    "init_scale",
    "seed",
];

fn num<T>(key: &str, value: &str) -> anyhow::Result<T>
where
    T: FromStr,
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("{key}: cannot parse {value:?}: {e}"))
}

fn list<T>(key: &str, value: &str) -> anyhow::Result<Vec<T>>
where
    T: FromStr,
    T::Err: fmt::Display,
{
    if value.is_empty() || value == "none" {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| num(key, v.trim())).collect()
}

fn join<T: fmt::Display>(values: &[T]) -> String {
    if values.is_empty() {
        return "none".to_owned();
    }
    values
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let mut cfg = Self::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", i + 1))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key) {
                bail!("line {}: key {key:?} given twice", i + 1);
            }
            cfg.set(key, value)
                .with_context(|| format!("line {}", i + 1))?;
            seen.push(key);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> anyhow::Result<()> {
        let r = &mut self.rewards;
        let t = &mut self.train;
        match key {
            "ideal_length" => {
                r.ideal_length = match value {
                    "reference" => IdealLength::Reference,
                    n => IdealLength::Fixed(num(key, n)?),
                }
            }
            "r_max" => r.r_max = num(key, value)?,
            "simplicity_floor" => {
                r.simplicity_floor = match value {
                    "none" => None,
                    v => Some(num(key, v)?),
                }
            }
            "fluency_ngram_order" => r.fluency_ngram_order = num(key, value)?,
            "synonym_threshold" => r.synonym_threshold = num(key, value)?,
            "w_simplicity" => r.weights.simplicity = num(key, value)?,
            "w_fluency" => r.weights.fluency = num(key, value)?,
            "w_accuracy" => r.weights.accuracy = num(key, value)?,
            "w_keywords" => r.weights.keywords = num(key, value)?,
            "clip_keyword_count" => r.clip_keyword_count = num(key, value)?,
            "smoothing_alpha" => self.smoothing_alpha = num(key, value)?,
            "advantage_epsilon" => self.advantage_epsilon = num(key, value)?,
            "window" => self.policy.window = num(key, value)?,
            "trigger_rule" => {
                self.policy.rule = TriggerRule::from_name(value, self.trigger_threshold)?
            }
            "trigger_threshold" => self.trigger_threshold = num(key, value)?,
            "focal_gamma" => t.loss.focal.gamma = num(key, value)?,
            "focal_alpha" => {
                let a: Vec<f64> = list(key, value)?;
                t.loss.focal.alpha = a
                    .try_into()
                    .map_err(|_| anyhow!("{key}: expected three comma-separated reals"))?;
            }
            "loss_blend" => t.loss.lambda = num(key, value)?,
            "hidden_dims" => t.hidden_dims = list(key, value)?,
            "learning_rate" => t.learning_rate = num(key, value)?,
            "epochs" => t.epochs = num(key, value)?,
            "batch_size" => t.batch_size = num(key, value)?,
            "init_scale" => t.init_scale = num(key, value)?,
            "seed" => t.seed = num(key, value)?,
            other => bail!("unknown key {other:?}; known keys: {}", KEYS.join(", ")),
        }
        Ok(())
    }

    /// Re-applies the threshold to a `threshold_score` rule, then checks every
    /// value against the range its owning component accepts.
    pub fn validate(&mut self) -> anyhow::Result<()> {
        if let TriggerRule::ThresholdScore { .. } = self.policy.rule {
            self.policy.rule = TriggerRule::ThresholdScore {
                threshold: self.trigger_threshold,
            };
        }
        if !(self.smoothing_alpha > 0.0 && self.smoothing_alpha.is_finite()) {
            bail!("smoothing_alpha must be positive and finite");
        }
        if !(self.advantage_epsilon > 0.0 && self.advantage_epsilon.is_finite()) {
            bail!("advantage_epsilon must be positive and finite");
        }
        if !(self.trigger_threshold > 0.0 && self.trigger_threshold <= 1.0) {
            bail!("trigger_threshold must lie in (0, 1]");
        }
        self.rewards.validate()?;
        self.policy.validate()?;
        self.train.validate()?;
        Ok(())
    }

    pub fn set_policy(&mut self, name: &str) -> anyhow::Result<()> {
        self.policy.rule = TriggerRule::from_name(name, self.trigger_threshold)?;
        Ok(())
    }

    /// Every key with its current value, in a form [`RunConfig::parse`]
    /// reads back to an equal config.
    pub fn to_text(&self) -> String {
        let r = &self.rewards;
        let t = &self.train;
        let FocalLossConfig { gamma, alpha } = t.loss.focal;
        let BlendedLoss { lambda, .. } = t.loss;
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put(
            "ideal_length",
            match r.ideal_length {
                IdealLength::Reference => "reference".to_owned(),
                IdealLength::Fixed(n) => n.to_string(),
            },
        );
        put("r_max", r.r_max.to_string());
        put(
            "simplicity_floor",
            r.simplicity_floor
                .map_or("none".to_owned(), |f| f.to_string()),
        );
        put("fluency_ngram_order", r.fluency_ngram_order.to_string());
        put("synonym_threshold", r.synonym_threshold.to_string());
        put("w_simplicity", r.weights.simplicity.to_string());
        put("w_fluency", r.weights.fluency.to_string());
        put("w_accuracy", r.weights.accuracy.to_string());
        put("w_keywords", r.weights.keywords.to_string());
        put("clip_keyword_count", r.clip_keyword_count.to_string());
        put("smoothing_alpha", self.smoothing_alpha.to_string());
        put("advantage_epsilon", self.advantage_epsilon.to_string());
        put("window", self.policy.window.to_string());
        put("trigger_rule", self.policy.rule.name().to_owned());
        put("trigger_threshold", self.trigger_threshold.to_string());
        put("focal_gamma", gamma.to_string());
        put("focal_alpha", join(&alpha));
        put("loss_blend", lambda.to_string());
        put("hidden_dims", join(&t.hidden_dims));
        put("learning_rate", t.learning_rate.to_string());
        put("epochs", t.epochs.to_string());
        put("batch_size", t.batch_size.to_string());
        put("init_scale", t.init_scale.to_string());
        put("seed", t.seed.to_string());
        s
    }
}
