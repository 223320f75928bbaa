//! The four reward components (simplicity, fluency, accuracy, keywords) and
//! their weighted composite.

use serde::{Deserialize, Serialize};

use crate::embed::{cosine_similarity, embed_text, EmbeddingTable, SynonymMap};
use crate::error::{Component, Error, Result};
use crate::lm::{perplexity, score_tokens, TokenScorer};
use crate::text::{
    extract_keywords, extract_ngrams, mean_token_accuracy, ngram_diversity, tokenize, KeywordSet,
    StopWords, TokenSequence,
};

/// How the ideal output length `L0` is chosen for a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IdealLength {
    /// Token count of the sample's reference annotation (at least 1).
    Reference,
    Fixed(usize),
}

/// Per-component weights of the composite reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub simplicity: f64,
    pub fluency: f64,
    pub accuracy: f64,
    pub keywords: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            simplicity: 1.0,
            fluency: 1.0,
            accuracy: 1.0,
            keywords: 1.0,
        }
    }
}

impl RewardWeights {
    pub fn as_array(&self) -> [f64; 4] {
        [self.simplicity, self.fluency, self.accuracy, self.keywords]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub ideal_length: IdealLength,
    pub r_max: f64,
    /// Optional lower bound on the simplicity reward. `None` leaves the
    /// quadratic unbounded below.
    pub simplicity_floor: Option<f64>,
    pub fluency_ngram_order: usize,
    pub synonym_threshold: f64,
    pub weights: RewardWeights,
    /// Cap each keyword's synonym-occurrence count at 1.
    pub clip_keyword_count: bool,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            ideal_length: IdealLength::Reference,
            r_max: 1.0,
            simplicity_floor: None,
            fluency_ngram_order: 2,
            synonym_threshold: crate::embed::DEFAULT_SYNONYM_THRESHOLD,
            weights: RewardWeights::default(),
            clip_keyword_count: false,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if let IdealLength::Fixed(0) = self.ideal_length {
            return Err(Error::invalid("ideal length must be at least 1"));
        }
        if !self.r_max.is_finite() {
            return Err(Error::invalid("r_max must be finite"));
        }
        if self.simplicity_floor.is_some_and(|f| !f.is_finite()) {
            return Err(Error::invalid("simplicity floor must be finite"));
        }
        if self.fluency_ngram_order < 1 {
            return Err(Error::invalid("fluency n-gram order must be at least 1"));
        }
        if !(self.synonym_threshold > 0.0 && self.synonym_threshold <= 1.0) {
            return Err(Error::invalid("synonym threshold must lie in (0, 1]"));
        }
        let w = self.weights.as_array();
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::invalid(
                "reward weights must be finite and non-negative",
            ));
        }
        if w.iter().all(|x| *x == 0.0) {
            return Err(Error::invalid(
                "at least one reward weight must be positive",
            ));
        }
        Ok(())
    }

    /// `L0` for a sample whose reference has `reference_len` tokens.
    pub fn ideal_length_for(&self, reference_len: usize) -> usize {
        match self.ideal_length {
            IdealLength::Reference => reference_len.max(1),
            IdealLength::Fixed(n) => n,
        }
    }
}

/// `r_max - ((L - L0) / L0)^2`, optionally floored.
pub fn simplicity_reward(output_length: usize, ideal_length: usize, cfg: &RewardConfig) -> f64 {
    let l0 = ideal_length.max(1) as f64;
    let dev = (output_length as f64 - l0) / l0;
    let r = cfg.r_max - dev * dev;
    match cfg.simplicity_floor {
        Some(floor) => r.max(floor),
        None => r,
    }
}

/// `D / (D + PPL)`; zero when the perplexity is infinite or diversity is zero.
pub fn fluency_from_parts(diversity: f64, ppl: f64) -> f64 {
    if ppl.is_infinite() || diversity == 0.0 {
        return 0.0;
    }
    diversity / (diversity + ppl)
}

/// Intermediate values behind one fluency reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluencyParts {
    pub diversity: f64,
    pub perplexity: f64,
    pub reward: f64,
}

pub fn fluency_reward(
    seq: &TokenSequence,
    scorer: &dyn TokenScorer,
    cfg: &RewardConfig,
) -> Result<FluencyParts> {
    if seq.is_empty() {
        return Err(Error::invalid("fluency needs at least one token"));
    }
    let diversity = ngram_diversity(&extract_ngrams(seq, cfg.fluency_ngram_order)?);
    let ppl = perplexity(&score_tokens(scorer, seq)?)?.value();
    Ok(FluencyParts {
        diversity,
        perplexity: ppl,
        reward: fluency_from_parts(diversity, ppl),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyParts {
    pub cos_sim: f64,
    pub mta: f64,
    pub reward: f64,
}

/// Cosine similarity of the pooled embeddings plus mean token accuracy.
pub fn accuracy_reward(
    gen: &TokenSequence,
    annt: &TokenSequence,
    table: &EmbeddingTable,
) -> Result<AccuracyParts> {
    let mta = mean_token_accuracy(gen, annt)?;
    let cos_sim = cosine_similarity(&embed_text(table, gen)?, &embed_text(table, annt)?)?;
    Ok(AccuracyParts {
        cos_sim,
        mta,
        reward: cos_sim + mta,
    })
}

/// Occurrences in `gen` of the synonyms of one keyword.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KeywordCount {
    pub keyword: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeywordParts {
    pub counts: Vec<KeywordCount>,
    pub reward: f64,
}

/// Mean over keywords of the summed frequencies of each keyword's synonyms
/// in `gen`. With `clip`, each keyword contributes at most 1.
pub fn keywords_reward(
    gen: &TokenSequence,
    keywords: &KeywordSet,
    synonyms: &SynonymMap,
    clip: bool,
) -> KeywordParts {
    if keywords.is_empty() {
        return KeywordParts {
            counts: Vec::new(),
            reward: 0.0,
        };
    }
    let counts: Vec<KeywordCount> = keywords
        .keywords()
        .iter()
        .map(|k| KeywordCount {
            keyword: k.clone(),
            count: synonyms.synonyms_of(k).iter().map(|s| gen.count(s)).sum(),
        })
        .collect();
    let total: f64 = counts
        .iter()
        .map(|c| if clip { c.count.min(1) } else { c.count } as f64)
        .sum();
    KeywordParts {
        reward: total / keywords.len() as f64,
        counts,
    }
}

/// Intermediates recorded alongside a [`RewardVector`].
#[derive(Debug, Clone, PartialEq)]
pub struct RewardDiagnostics {
    pub output_length: usize,
    pub ideal_length: usize,
    pub perplexity: f64,
    pub ngram_diversity: f64,
    pub cos_sim: f64,
    pub mta: f64,
    pub keyword_counts: Vec<KeywordCount>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardVector {
    pub simplicity: f64,
    pub fluency: f64,
    pub accuracy: f64,
    pub keywords: f64,
    pub composite: f64,
    pub diagnostics: RewardDiagnostics,
}

impl RewardVector {
    pub fn components(&self) -> [f64; 4] {
        [self.simplicity, self.fluency, self.accuracy, self.keywords]
    }
}

/// `sum_c w_c * component_c`.
pub fn composite(components: [f64; 4], weights: &RewardWeights) -> f64 {
    components
        .iter()
        .zip(weights.as_array())
        .map(|(c, w)| c * w)
        .sum()
}

/// Everything needed to score a candidate against a reference. Borrowed so a
/// caller can swap the scorer per candidate (precomputed log-probs) without
/// copying the table.
#[derive(Clone, Copy)]
pub struct ScoringContext<'a> {
    pub config: &'a RewardConfig,
    pub table: &'a EmbeddingTable,
    pub scorer: &'a dyn TokenScorer,
    pub stopwords: &'a StopWords,
}

impl<'a> ScoringContext<'a> {
    pub fn with_scorer(self, scorer: &'a dyn TokenScorer) -> Self {
        Self { scorer, ..self }
    }
}

/// Keywords and their synonyms for one reference, reusable across all
/// candidates of that reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceKeywords {
    pub keywords: KeywordSet,
    pub synonyms: SynonymMap,
}

impl ReferenceKeywords {
    /// Uses `explicit` keywords when given, otherwise the non-stopword tokens
    /// of the reference.
    pub fn resolve(
        reference: &TokenSequence,
        explicit: Option<&[String]>,
        ctx: &ScoringContext<'_>,
    ) -> Result<Self> {
        let keywords = match explicit {
            Some(k) => KeywordSet::explicit(k),
            None => extract_keywords(reference, ctx.stopwords),
        };
        let synonyms = SynonymMap::build(ctx.table, &keywords, ctx.config.synonym_threshold)?;
        Ok(Self { keywords, synonyms })
    }
}

/// Scores one candidate text against its reference, extracting keywords from
/// the reference.
pub fn score_candidate(gen: &str, annt: &str, ctx: &ScoringContext<'_>) -> Result<RewardVector> {
    let annt = tokenize(annt);
    let kw = ReferenceKeywords::resolve(&annt, None, ctx)?;
    score_tokens_against(&tokenize(gen), &annt, &kw, ctx)
}

/// Scores an already tokenized candidate. Errors are wrapped with the
/// component that raised them.
pub fn score_tokens_against(
    gen: &TokenSequence,
    annt: &TokenSequence,
    kw: &ReferenceKeywords,
    ctx: &ScoringContext<'_>,
) -> Result<RewardVector> {
    let cfg = ctx.config;
    if gen.is_empty() {
        return Err(Error::invalid(
            "empty generation: fluency and accuracy both need at least one token",
        ));
    }
    let ideal_length = cfg.ideal_length_for(annt.len());
    let simplicity = simplicity_reward(gen.len(), ideal_length, cfg);
    let flu =
        fluency_reward(gen, ctx.scorer, cfg).map_err(|e| e.in_component(Component::Fluency))?;
    let acc =
        accuracy_reward(gen, annt, ctx.table).map_err(|e| e.in_component(Component::Accuracy))?;
    let key = keywords_reward(gen, &kw.keywords, &kw.synonyms, cfg.clip_keyword_count);

    let components = [simplicity, flu.reward, acc.reward, key.reward];
    Ok(RewardVector {
        simplicity,
        fluency: flu.reward,
        accuracy: acc.reward,
        keywords: key.reward,
        composite: composite(components, &cfg.weights),
        diagnostics: RewardDiagnostics {
            output_length: gen.len(),
            ideal_length,
            perplexity: flu.perplexity,
            ngram_diversity: flu.diversity,
            cos_sim: acc.cos_sim,
            mta: acc.mta,
            keyword_counts: key.counts,
        },
    })
}
