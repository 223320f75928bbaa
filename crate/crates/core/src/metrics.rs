//! ROUGE-1/2/L, keyword density, and temporal-redundancy F1 over danger
//! levels.

use std::collections::BTreeSet;

use crate::ead::DangerLevel;
use crate::embed::SynonymMap;
use crate::error::{Error, Result};
use crate::text::{extract_ngrams, KeywordSet, TokenSequence};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    pub fn from_counts(overlap: usize, gen_total: usize, ref_total: usize) -> Self {
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        Self::from_pr(ratio(overlap, gen_total), ratio(overlap, ref_total))
    }

    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

/// Clipped n-gram overlap: each n-gram counts `min(count_gen, count_ref)`.
pub fn rouge_n(gen: &TokenSequence, reference: &TokenSequence, n: usize) -> Result<RougeScore> {
    let g = extract_ngrams(gen, n)?;
    let r = extract_ngrams(reference, n)?;
    let overlap: usize = g
        .counts()
        .iter()
        .map(|(gram, c)| (*c).min(r.count_of(gram)))
        .sum();
    Ok(RougeScore::from_counts(
        overlap,
        g.total_count(),
        r.total_count(),
    ))
}

/// Longest common subsequence length, `O(|a|·|b|)` time, `O(|b|)` space.
pub fn lcs_length<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS-based ROUGE-L with the balanced (`beta = 1`) F-measure.
pub fn rouge_l(gen: &TokenSequence, reference: &TokenSequence) -> RougeScore {
    let l = lcs_length(gen.tokens(), reference.tokens());
    RougeScore::from_counts(l, gen.len(), reference.len())
}

/// Fraction of generated tokens that belong to the synonym set of some
/// keyword. Zero for an empty generation or keyword set.
pub fn keyword_density(gen: &TokenSequence, keywords: &KeywordSet, synonyms: &SynonymMap) -> f64 {
    if gen.is_empty() || keywords.is_empty() {
        return 0.0;
    }
    let union: BTreeSet<String> = keywords
        .keywords()
        .iter()
        .flat_map(|k| synonyms.synonyms_of(k))
        .collect();
    let hits = gen.tokens().iter().filter(|t| union.contains(*t)).count();
    hits as f64 / gen.len() as f64
}

/// Counts indexed `[true][predicted]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionTable3 {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionTable3 {
    pub fn from_pairs(pred: &[DangerLevel], truth: &[DangerLevel]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::invalid(format!(
                "{} predictions for {} ground-truth frames",
                pred.len(),
                truth.len()
            )));
        }
        let mut t = Self::default();
        for (p, y) in pred.iter().zip(truth) {
            t.counts[y.ordinal()][p.ordinal()] += 1;
        }
        Ok(t)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// `(tp, fp, fn)` for one class.
    pub fn class_counts(&self, class: DangerLevel) -> (u64, u64, u64) {
        let c = class.ordinal();
        let tp = self.counts[c][c];
        let predicted: u64 = (0..3).map(|t| self.counts[t][c]).sum();
        let actual: u64 = self.counts[c].iter().sum();
        (tp, predicted - tp, actual - tp)
    }

    /// F1 of one class, or `None` when the class appears in neither
    /// predictions nor ground truth.
    pub fn class_f1(&self, class: DangerLevel) -> Option<f64> {
        let (tp, fp, fn_) = self.class_counts(class);
        if tp + fp + fn_ == 0 {
            return None;
        }
        Some(2.0 * tp as f64 / (2 * tp + fp + fn_) as f64)
    }

    /// Unweighted mean of the per-class F1 over present classes.
    pub fn macro_f1(&self) -> Option<f64> {
        let scores: Vec<f64> = DangerLevel::ALL
            .iter()
            .filter_map(|c| self.class_f1(*c))
            .collect();
        if scores.is_empty() {
            None
        } else {
            Some(scores.iter().sum::<f64>() / scores.len() as f64)
        }
    }
}

/// Temporal redundancy F1: macro-F1 between predicted and true per-frame
/// danger levels, skipping classes absent from both.
pub fn trf_score(pred: &[DangerLevel], truth: &[DangerLevel]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::invalid("TRF needs at least one frame"));
    }
    let table = ConfusionTable3::from_pairs(pred, truth)?;
    Ok(table
        .macro_f1()
        .expect("non-empty table has a present class"))
}
