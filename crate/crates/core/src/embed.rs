//! Word embedding table loaded from a word2vec-style text file, plus cosine
//! similarity, mean-pooled text embeddings and threshold synonym sets.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;

use log::warn;

use crate::error::{Error, Result};
use crate::text::{KeywordSet, TokenSequence};

/// Default cosine threshold above which two words count as synonyms.
pub const DEFAULT_SYNONYM_THRESHOLD: f64 = 0.9;

/// Token → dense vector map. All vectors share one dimension and none is the
/// zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    index: HashMap<String, usize>,
    tokens: Vec<String>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be at least 1"));
        }
        Ok(Self {
            dim,
            index: HashMap::new(),
            tokens: Vec::new(),
            data: Vec::new(),
        })
    }

    /// Inserts or replaces a vector. Returns `true` when `token` was already
    /// present.
    pub fn insert(&mut self, token: impl Into<String>, vector: &[f64]) -> Result<bool> {
        let token = token.into();
        if vector.len() != self.dim {
            return Err(Error::invalid(format!(
                "vector for {token:?} has {} components, expected {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "vector for {token:?} is not finite"
            )));
        }
        if vector.iter().all(|v| *v == 0.0) {
            return Err(Error::invalid(format!("vector for {token:?} is all zeros")));
        }
        match self.index.get(&token) {
            Some(&slot) => {
                self.data[slot * self.dim..(slot + 1) * self.dim].copy_from_slice(vector);
                Ok(true)
            }
            None => {
                self.index.insert(token.clone(), self.tokens.len());
                self.tokens.push(token);
                self.data.extend_from_slice(vector);
                Ok(false)
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index
            .get(token)
            .map(|&slot| &self.data[slot * self.dim..(slot + 1) * self.dim])
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Tokens in first-insertion order.
    pub fn tokens(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.tokens
            .iter()
            .zip(self.data.chunks_exact(self.dim))
            .map(|(t, v)| (t.as_str(), v))
    }
}

/// Parses the text format: a `<count> <dim>` header line, then `count` lines of
/// `<token> <v1> ... <v_dim>`. Blank lines are ignored. A repeated token keeps
/// its last vector and logs a warning.
pub fn load_embeddings<R: BufRead>(source: R) -> Result<EmbeddingTable> {
    let mut lines = source
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));

    let (header_no, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "missing `<count> <dim>` header"))?;
    let header = header?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (count, dim) = match fields.as_slice() {
        [c, d] => (
            c.parse::<usize>()
                .map_err(|e| Error::parse(header_no, format!("bad count {c:?}: {e}")))?,
            d.parse::<usize>()
                .map_err(|e| Error::parse(header_no, format!("bad dimension {d:?}: {e}")))?,
        ),
        _ => return Err(Error::parse(header_no, "header must be `<count> <dim>`")),
    };
    if dim == 0 {
        return Err(Error::parse(header_no, "dimension must be at least 1"));
    }

    let mut table = EmbeddingTable::new(dim)?;
    let mut seen = 0usize;
    let mut last_line = header_no;
    let mut vector = Vec::with_capacity(dim);
    for (line_no, line) in lines {
        let line = line?;
        last_line = line_no;
        seen += 1;
        if seen > count {
            return Err(Error::parse(
                line_no,
                format!("more entries than the {count} declared in the header"),
            ));
        }
        let mut parts = line.split(' ').filter(|p| !p.is_empty());
        let token = parts
            .next()
            .ok_or_else(|| Error::parse(line_no, "missing token"))?;
        vector.clear();
        for p in parts {
            let v: f64 = p
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad component {p:?}")))?;
            vector.push(v);
        }
        if vector.len() != dim {
            return Err(Error::parse(
                line_no,
                format!("{} components, expected {dim}", vector.len()),
            ));
        }
        let replaced = table
            .insert(token, &vector)
            .map_err(|e| Error::parse(line_no, e.to_string()))?;
        if replaced {
            warn!("line {line_no}: duplicate token {token:?}, keeping the later vector");
        }
    }
    if seen != count {
        return Err(Error::parse(
            last_line,
            format!("header declares {count} entries but {seen} were found"),
        ));
    }
    Ok(table)
}

/// Cosine of the angle between two vectors, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::invalid("cosine similarity of a zero vector"));
    }
    // sqrt(na * nb) rather than sqrt(na) * sqrt(nb): identical inputs then give
    // exactly 1.
    Ok((dot / (na * nb).sqrt()).clamp(-1.0, 1.0))
}

/// Mean of the vectors of the in-vocabulary tokens of `seq`.
pub fn embed_text(table: &EmbeddingTable, seq: &TokenSequence) -> Result<Vec<f64>> {
    let mut sum = vec![0.0; table.dim()];
    let mut n = 0usize;
    for v in seq.tokens().iter().filter_map(|t| table.get(t)) {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::OutOfVocabulary(seq.source_text().to_owned()));
    }
    let n = n as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Ok(sum)
}

/// `{keyword} ∪ {s : cosine(s, keyword) >= threshold}`. A keyword missing from
/// the table yields just itself.
pub fn synonym_set(table: &EmbeddingTable, keyword: &str, threshold: f64) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    out.insert(keyword.to_owned());
    let Some(anchor) = table.get(keyword) else {
        return out;
    };
    for (token, v) in table.tokens() {
        if token != keyword && cosine_similarity(anchor, v).is_ok_and(|c| c >= threshold) {
            out.insert(token.to_owned());
        }
    }
    out
}

/// Synonym set for every keyword of a [`KeywordSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynonymMap {
    entries: BTreeMap<String, BTreeSet<String>>,
    threshold: f64,
}

impl SynonymMap {
    pub fn build(table: &EmbeddingTable, keywords: &KeywordSet, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::invalid(format!(
                "synonym threshold must lie in (0, 1], got {threshold}"
            )));
        }
        let entries = keywords
            .keywords()
            .iter()
            .map(|k| (k.clone(), synonym_set(table, k, threshold)))
            .collect();
        Ok(Self { entries, threshold })
    }

    /// Map where each keyword is only its own synonym.
    pub fn singletons(keywords: &KeywordSet) -> Self {
        let entries = keywords
            .keywords()
            .iter()
            .map(|k| (k.clone(), BTreeSet::from([k.clone()])))
            .collect();
        Self {
            entries,
            threshold: 1.0,
        }
    }

    /// Builds a map from explicit sets; each keyword is added to its own set.
    pub fn from_entries<I>(entries: I, threshold: f64) -> Self
    where
        I: IntoIterator<Item = (String, BTreeSet<String>)>,
    {
        let entries = entries
            .into_iter()
            .map(|(k, mut s)| {
                s.insert(k.clone());
                (k, s)
            })
            .collect();
        Self { entries, threshold }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn get(&self, keyword: &str) -> Option<&BTreeSet<String>> {
        self.entries.get(keyword)
    }

    /// Synonyms of `keyword`, falling back to the keyword alone.
    pub fn synonyms_of(&self, keyword: &str) -> BTreeSet<String> {
        self.get(keyword)
            .cloned()
            .unwrap_or_else(|| BTreeSet::from([keyword.to_owned()]))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BTreeSet<String>)> {
        self.entries.iter()
    }
}
