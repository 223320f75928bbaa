//! Resources and per-record scoring shared by `score` and `evaluate`.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::Context;
use rayon::prelude::*;
use walkguard_core::lm::{read_logprobs, FixedLogProbs};
use walkguard_core::rewards::{score_tokens_against, ReferenceKeywords};
use walkguard_core::{
    load_embeddings, tokenize, BigramModel, EmbeddingTable, RewardVector, ScoringContext,
    StopWords, TokenLogProbs, TokenSequence,
};

use crate::config::RunConfig;
use crate::samples::{Corpus, RecordError, SampleRecord};

pub struct Resources {
    pub table: EmbeddingTable,
    pub stopwords: StopWords,
    pub logprobs: Option<HashMap<String, TokenLogProbs>>,
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

impl Resources {
    pub fn load(
        embeddings: &Path,
        stopwords: Option<&Path>,
        logprobs: Option<&Path>,
    ) -> anyhow::Result<Self> {
        let table = load_embeddings(open(embeddings)?)
            .with_context(|| format!("loading embeddings {}", embeddings.display()))?;
        let stopwords = match stopwords {
            Some(p) => StopWords::parse(open(p)?)
                .with_context(|| format!("loading stopwords {}", p.display()))?,
            None => StopWords::bundled(),
        };
        let logprobs = logprobs
            .map(|p| {
                read_logprobs(open(p)?)
                    .with_context(|| format!("loading log-probs {}", p.display()))
            })
            .transpose()?;
        Ok(Self {
            table,
            stopwords,
            logprobs,
        })
    }
}

/// Bigram model over the references of every well-formed record, used when
/// no precomputed log-probs are supplied.
pub fn reference_model(corpus: &Corpus, cfg: &RunConfig) -> anyhow::Result<Option<BigramModel>> {
    if corpus.records.is_empty() {
        return Ok(None);
    }
    let refs: Vec<TokenSequence> = corpus
        .records
        .iter()
        .map(|(_, r)| tokenize(&r.reference))
        .collect();
    Ok(Some(BigramModel::fit(&refs, cfg.smoothing_alpha)?))
}

/// Key under which precomputed log-probs for one candidate are looked up.
pub fn logprob_keys(rec: &SampleRecord, candidate: usize) -> Vec<String> {
    let mut keys = vec![format!("{}#{candidate}", rec.id)];
    if rec.candidates.len() == 1 {
        keys.push(rec.id.clone());
    }
    keys
}

pub struct ScoredCandidate {
    pub index: usize,
    pub tokens: TokenSequence,
    pub reward: RewardVector,
}

pub struct ScoredRecord {
    pub line: usize,
    pub reference: TokenSequence,
    pub keywords: ReferenceKeywords,
    pub candidates: Vec<ScoredCandidate>,
}

pub struct Scorer<'a> {
    pub config: &'a RunConfig,
    pub resources: &'a Resources,
    pub model: Option<&'a BigramModel>,
}

impl Scorer<'_> {
    /// Scores every candidate of one record. A failing candidate is reported
    /// on its own; the others are still scored.
    pub fn score(
        &self,
        line: usize,
        rec: &SampleRecord,
    ) -> (Option<ScoredRecord>, Vec<RecordError>) {
        let fail = |candidate: Option<usize>, msg: String| RecordError {
            line,
            id: Some(rec.id.clone()),
            error: match candidate {
                Some(i) => format!("candidate {i}: {msg}"),
                None => msg,
            },
        };
        if rec.candidates.is_empty() {
            return (None, vec![fail(None, "record has no candidates".into())]);
        }
        let res = self.resources;
        let placeholder = FixedLogProbs(TokenLogProbs::new(Vec::new()).expect("empty is valid"));
        let base = ScoringContext {
            config: &self.config.rewards,
            table: &res.table,
            scorer: match self.model {
                Some(m) => m,
                None => &placeholder,
            },
            stopwords: &res.stopwords,
        };
        let reference = tokenize(&rec.reference);
        let keywords = match ReferenceKeywords::resolve(&reference, rec.keywords.as_deref(), &base)
        {
            Ok(k) => k,
            Err(e) => return (None, vec![fail(None, e.to_string())]),
        };

        let mut errors = Vec::new();
        let mut candidates = Vec::new();
        for (index, text) in rec.candidates.iter().enumerate() {
            let tokens = tokenize(text);
            let fixed = match &res.logprobs {
                Some(map) => {
                    let keys = logprob_keys(rec, index);
                    match keys.iter().find_map(|k| map.get(k)) {
                        Some(lp) => Some(FixedLogProbs(lp.clone())),
                        None => {
                            errors
                                .push(fail(Some(index), format!("no log-probs under {}", keys[0])));
                            continue;
                        }
                    }
                }
                None => None,
            };
            let ctx = match &fixed {
                Some(f) => base.with_scorer(f),
                None => base,
            };
            match score_tokens_against(&tokens, &reference, &keywords, &ctx) {
                Ok(reward) => candidates.push(ScoredCandidate {
                    index,
                    tokens,
                    reward,
                }),
                Err(e) => errors.push(fail(Some(index), e.to_string())),
            }
        }
        let scored = (!candidates.is_empty()).then_some(ScoredRecord {
            line,
            reference,
            keywords,
            candidates,
        });
        (scored, errors)
    }

    /// Scores every record in parallel and returns results in input order.
    pub fn score_all<'r>(
        &self,
        records: &'r [(usize, SampleRecord)],
    ) -> Vec<(&'r SampleRecord, Option<ScoredRecord>, Vec<RecordError>)> {
        records
            .par_iter()
            .map(|(line, rec)| {
                let (scored, errors) = self.score(*line, rec);
                (rec, scored, errors)
            })
            .collect()
    }
}
