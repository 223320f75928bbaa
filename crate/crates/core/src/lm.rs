//! Token probability sources and perplexity.
//!
//! Fluency scoring only needs `log2 P(x_i)` for each token, so the source is
//! abstracted behind [`TokenScorer`]. [`BigramModel`] is the deterministic
//! reference implementation: an add-alpha smoothed bigram model whose first
//! token is conditioned on a reserved start symbol.

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::TokenSequence;

/// Per-token base-2 log probabilities, each `<= 0`. `-inf` marks a token the
/// model assigns zero probability.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenLogProbs(Vec<f64>);

impl TokenLogProbs {
    pub fn new(log2_probs: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = log2_probs
            .iter()
            .enumerate()
            .find(|(_, v)| v.is_nan() || **v > 0.0)
        {
            return Err(Error::invalid(format!(
                "log2 probability at position {i} is {v}; entries must be <= 0"
            )));
        }
        Ok(Self(log2_probs))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Anything that can assign a probability to each token of a sequence.
/// Scorers are shared across scoring threads, hence the `Sync` bound.
pub trait TokenScorer: Send + Sync {
    /// One log2 probability per token of `seq`. Implementations may assume
    /// `seq` is non-empty; use [`score_tokens`] for the checked entry point.
    fn log2_probs(&self, seq: &TokenSequence) -> Result<TokenLogProbs>;
}

pub fn score_tokens(scorer: &dyn TokenScorer, seq: &TokenSequence) -> Result<TokenLogProbs> {
    if seq.is_empty() {
        return Err(Error::invalid("cannot score an empty token sequence"));
    }
    let lp = scorer.log2_probs(seq)?;
    if lp.len() != seq.len() {
        return Err(Error::invalid(format!(
            "scorer returned {} log-probs for {} tokens",
            lp.len(),
            seq.len()
        )));
    }
    Ok(lp)
}

/// Perplexity value. Infinite when some token had probability zero.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Perplexity(f64);

impl Perplexity {
    pub fn value(self) -> f64 {
        self.0
    }

    /// True when a zero-probability token drove the perplexity to `+inf`.
    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }
}

/// `2^(-mean(log2 P))`.
pub fn perplexity(lp: &TokenLogProbs) -> Result<Perplexity> {
    if lp.is_empty() {
        return Err(Error::invalid(
            "perplexity of an empty sequence is undefined",
        ));
    }
    let values = lp.as_slice();
    if values.iter().any(|v| v.is_infinite()) {
        return Ok(Perplexity(f64::INFINITY));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    // exp2 of a non-positive mean is >= 1 up to rounding; clamp the rounding.
    Ok(Perplexity((-mean).exp2().max(1.0)))
}

/// Reserved context symbol preceding the first token.
pub const START_SYMBOL: &str = "<s>";
/// Reserved symbol every out-of-vocabulary token maps to.
pub const UNKNOWN_SYMBOL: &str = "<unk>";

/// Add-alpha smoothed bigram model.
///
/// `P(w | prev) = (count(prev, w) + alpha) / (count(prev) + alpha * (V + 1))`
/// where `V` is the number of distinct corpus tokens, the `+1` is the unknown
/// symbol, and `count(prev)` counts `prev` in context position (so the
/// distribution over `vocab ∪ {unk}` sums to one for every context).
#[derive(Debug, Clone)]
pub struct BigramModel {
    vocab: HashMap<String, u32>,
    unigram_counts: Vec<u64>,
    context_counts: HashMap<u32, u64>,
    bigram_counts: HashMap<(u32, u32), u64>,
    smoothing_alpha: f64,
}

const START_ID: u32 = u32::MAX;
const UNKNOWN_ID: u32 = u32::MAX - 1;

impl BigramModel {
    pub fn fit(corpus: &[TokenSequence], smoothing_alpha: f64) -> Result<Self> {
        if !(smoothing_alpha > 0.0 && smoothing_alpha.is_finite()) {
            return Err(Error::invalid(format!(
                "smoothing alpha must be a positive finite number, got {smoothing_alpha}"
            )));
        }
        if corpus.iter().all(TokenSequence::is_empty) {
            return Err(Error::invalid(
                "cannot fit a bigram model on an empty corpus",
            ));
        }

        let mut vocab: HashMap<String, u32> = HashMap::new();
        let mut unigram_counts = Vec::new();
        let mut context_counts: HashMap<u32, u64> = HashMap::new();
        let mut bigram_counts: HashMap<(u32, u32), u64> = HashMap::new();

        for seq in corpus {
            let mut prev = START_ID;
            for token in seq.tokens() {
                let next_id = vocab.len() as u32;
                let id = *vocab.entry(token.clone()).or_insert(next_id);
                if id as usize == unigram_counts.len() {
                    unigram_counts.push(0);
                }
                unigram_counts[id as usize] += 1;
                *context_counts.entry(prev).or_default() += 1;
                *bigram_counts.entry((prev, id)).or_default() += 1;
                prev = id;
            }
        }

        Ok(Self {
            vocab,
            unigram_counts,
            context_counts,
            bigram_counts,
            smoothing_alpha,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn smoothing_alpha(&self) -> f64 {
        self.smoothing_alpha
    }

    pub fn unigram_count(&self, token: &str) -> u64 {
        self.vocab
            .get(token)
            .map_or(0, |&id| self.unigram_counts[id as usize])
    }

    pub fn bigram_count(&self, prev: &str, token: &str) -> u64 {
        self.bigram_counts
            .get(&(self.context_id(prev), self.token_id(token)))
            .copied()
            .unwrap_or(0)
    }

    fn token_id(&self, token: &str) -> u32 {
        self.vocab.get(token).copied().unwrap_or(UNKNOWN_ID)
    }

    fn context_id(&self, token: &str) -> u32 {
        if token == START_SYMBOL {
            START_ID
        } else {
            self.token_id(token)
        }
    }

    fn prob_ids(&self, prev: u32, token: u32) -> f64 {
        let pair = self.bigram_counts.get(&(prev, token)).copied().unwrap_or(0) as f64;
        let ctx = self.context_counts.get(&prev).copied().unwrap_or(0) as f64;
        let outcomes = (self.vocab.len() + 1) as f64;
        (pair + self.smoothing_alpha) / (ctx + self.smoothing_alpha * outcomes)
    }

    /// `P(token | prev)`. Pass [`START_SYMBOL`] as `prev` for the first
    /// position; unseen tokens on either side are treated as [`UNKNOWN_SYMBOL`].
    pub fn prob(&self, prev: &str, token: &str) -> f64 {
        self.prob_ids(self.context_id(prev), self.token_id(token))
    }

    /// Vocabulary tokens in insertion order followed by [`UNKNOWN_SYMBOL`]:
    /// the full outcome space of every conditional distribution.
    pub fn outcomes(&self) -> Vec<String> {
        let mut by_id: Vec<(&String, &u32)> = self.vocab.iter().collect();
        by_id.sort_by_key(|(_, id)| **id);
        by_id
            .into_iter()
            .map(|(t, _)| t.clone())
            .chain(std::iter::once(UNKNOWN_SYMBOL.to_owned()))
            .collect()
    }
}

impl TokenScorer for BigramModel {
    fn log2_probs(&self, seq: &TokenSequence) -> Result<TokenLogProbs> {
        let mut prev = START_ID;
        let mut out = Vec::with_capacity(seq.len());
        for token in seq.tokens() {
            let id = self.token_id(token);
            out.push(self.prob_ids(prev, id).log2());
            prev = id;
        }
        TokenLogProbs::new(out)
    }
}

/// Log-probs supplied from outside (for example by a neural LM run offline).
/// Returns the stored values as long as their length matches the sequence.
#[derive(Debug, Clone)]
pub struct FixedLogProbs(pub TokenLogProbs);

impl TokenScorer for FixedLogProbs {
    fn log2_probs(&self, seq: &TokenSequence) -> Result<TokenLogProbs> {
        if self.0.len() != seq.len() {
            return Err(Error::invalid(format!(
                "precomputed log-probs have {} entries but the sequence has {} tokens",
                self.0.len(),
                seq.len()
            )));
        }
        Ok(self.0.clone())
    }
}

/// One line of a precomputed log-prob file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogProbRecord {
    pub id: String,
    pub log2_probs: Vec<f64>,
}

/// Reads a JSON Lines log-prob file into an id-keyed map. Blank lines are
/// skipped; a duplicate id is an error.
pub fn read_logprobs<R: BufRead>(reader: R) -> Result<HashMap<String, TokenLogProbs>> {
    let mut out = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LogProbRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(line_no, e.to_string()))?;
        let lp =
            TokenLogProbs::new(rec.log2_probs).map_err(|e| Error::parse(line_no, e.to_string()))?;
        if out.insert(rec.id.clone(), lp).is_some() {
            return Err(Error::parse(line_no, format!("duplicate id {:?}", rec.id)));
        }
    }
    Ok(out)
}
