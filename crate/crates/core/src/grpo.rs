//! Group-relative advantages and per-step reward telemetry.
//!
//! Each candidate's composite reward is normalized against the other
//! candidates sampled for the same prompt:
//!
//! ```text
//! a_i = (r_i - mean(r)) / max(std(r), epsilon)
//! ```
//!
//! with the population standard deviation. A group whose rewards are all
//! equal gets all-zero advantages.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rewards::RewardVector;

pub const DEFAULT_EPSILON: f64 = 1e-8;

/// One prompt's sampled candidates with their rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGroup {
    pub prompt_id: String,
    pub candidates: Vec<(String, RewardVector)>,
}

impl CandidateGroup {
    pub fn new(prompt_id: impl Into<String>) -> Self {
        Self {
            prompt_id: prompt_id.into(),
            candidates: Vec::new(),
        }
    }

    pub fn push(&mut self, text: impl Into<String>, reward: RewardVector) {
        self.candidates.push((text.into(), reward));
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn composites(&self) -> Vec<f64> {
        self.candidates.iter().map(|(_, r)| r.composite).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageVector {
    pub advantages: Vec<f64>,
    pub group_mean: f64,
    pub group_std: f64,
}

fn mean_and_population_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Normalizes raw scalar rewards within one group.
pub fn normalize_rewards(rewards: &[f64], epsilon: f64) -> Result<AdvantageVector> {
    if rewards.is_empty() {
        return Err(Error::invalid(
            "cannot compute advantages of an empty group",
        ));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::invalid("epsilon must be positive"));
    }
    if let Some(r) = rewards.iter().find(|r| !r.is_finite()) {
        return Err(Error::invalid(format!("reward {r} is not finite")));
    }
    let (group_mean, group_std) = mean_and_population_std(rewards);
    let advantages = if group_std == 0.0 || rewards.iter().all(|r| *r == rewards[0]) {
        vec![0.0; rewards.len()]
    } else {
        let denom = group_std.max(epsilon);
        rewards.iter().map(|r| (r - group_mean) / denom).collect()
    };
    Ok(AdvantageVector {
        advantages,
        group_mean,
        group_std,
    })
}

/// Advantages of the composite rewards of a group.
pub fn group_advantages(group: &CandidateGroup, epsilon: f64) -> Result<AdvantageVector> {
    normalize_rewards(&group.composites(), epsilon)
}

/// Advantages computed separately for each reward component, in the order
/// simplicity, fluency, accuracy, keywords. Diagnostic only.
pub fn component_advantages(group: &CandidateGroup, epsilon: f64) -> Result<[AdvantageVector; 4]> {
    let column = |i: usize| -> Result<AdvantageVector> {
        let v: Vec<f64> = group
            .candidates
            .iter()
            .map(|(_, r)| r.components()[i])
            .collect();
        normalize_rewards(&v, epsilon)
    };
    Ok([column(0)?, column(1)?, column(2)?, column(3)?])
}

/// Reward statistics for one training step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub step: u64,
    pub reward_mean: f64,
    pub reward_std: f64,
    pub simplicity_mean: f64,
    pub fluency_mean: f64,
    pub accuracy_mean: f64,
    pub keywords_mean: f64,
}

/// Pooled mean and population standard deviation of the composite rewards of
/// every candidate in `groups`, plus per-component means.
pub fn reward_statistics(step: u64, groups: &[CandidateGroup]) -> Result<TelemetryRecord> {
    summarize_rewards(
        step,
        groups.iter().flat_map(|g| {
            g.candidates
                .iter()
                .map(|(_, r)| (r.composite, r.components()))
        }),
    )
}

/// [`reward_statistics`] over bare `(composite, [simplicity, fluency,
/// accuracy, keywords])` pairs, for callers that only have a score table.
pub fn summarize_rewards<I>(step: u64, rewards: I) -> Result<TelemetryRecord>
where
    I: IntoIterator<Item = (f64, [f64; 4])>,
{
    let (composites, components): (Vec<f64>, Vec<[f64; 4]>) = rewards.into_iter().unzip();
    if composites.is_empty() {
        return Err(Error::invalid(
            "reward statistics need at least one candidate",
        ));
    }
    let (reward_mean, reward_std) = mean_and_population_std(&composites);
    let n = components.len() as f64;
    let comp_mean = |i: usize| components.iter().map(|c| c[i]).sum::<f64>() / n;
    Ok(TelemetryRecord {
        step,
        reward_mean,
        reward_std,
        simplicity_mean: comp_mean(0),
        fluency_mean: comp_mean(1),
        accuracy_mean: comp_mean(2),
        keywords_mean: comp_mean(3),
    })
}

pub const TELEMETRY_HEADER: [&str; 7] = [
    "step",
    "reward_mean",
    "reward_std",
    "simplicity_mean",
    "fluency_mean",
    "accuracy_mean",
    "keywords_mean",
];

/// Append-only series of [`TelemetryRecord`]s with strictly increasing steps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TelemetrySeries {
    records: Vec<TelemetryRecord>,
}

impl TelemetrySeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[TelemetryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last_step(&self) -> Option<u64> {
        self.records.last().map(|r| r.step)
    }

    pub fn append(&mut self, record: TelemetryRecord) -> Result<()> {
        if let Some(last) = self.last_step() {
            if record.step <= last {
                return Err(Error::invalid(format!(
                    "telemetry step {} does not follow step {last}",
                    record.step
                )));
            }
        }
        if record.reward_std.is_nan() || record.reward_std < 0.0 {
            return Err(Error::invalid("reward std must be non-negative"));
        }
        self.records.push(record);
        Ok(())
    }

    /// Writes the header and every record. Reals use the shortest decimal
    /// form that parses back to the same value.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TELEMETRY_HEADER)?;
        for r in &self.records {
            w.write_record(telemetry_row(r))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers()?.clone();
        if headers.iter().ne(TELEMETRY_HEADER) {
            return Err(Error::parse(
                1,
                format!("unexpected telemetry header {headers:?}"),
            ));
        }
        let mut series = Self::new();
        for (i, row) in rdr.deserialize::<TelemetryRecord>().enumerate() {
            let row = row.map_err(|e| Error::parse(i + 2, e.to_string()))?;
            series
                .append(row)
                .map_err(|e| Error::parse(i + 2, e.to_string()))?;
        }
        Ok(series)
    }
}

/// Appends a record to `series`, returning the CSV row it adds.
pub fn telemetry_append(series: &mut TelemetrySeries, record: TelemetryRecord) -> Result<String> {
    series.append(record)?;
    Ok(telemetry_row(&record).join(","))
}

fn telemetry_row(r: &TelemetryRecord) -> [String; 7] {
    [
        r.step.to_string(),
        r.reward_mean.to_string(),
        r.reward_std.to_string(),
        r.simplicity_mean.to_string(),
        r.fluency_mean.to_string(),
        r.accuracy_mean.to_string(),
        r.keywords_mean.to_string(),
    ]
}
