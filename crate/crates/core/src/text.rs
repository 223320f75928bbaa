//! Tokenization, n-gram statistics, keyword extraction and positional token
//! matching. Everything downstream (rewards, metrics) sees text only through
//! [`TokenSequence`].

use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use crate::error::{Error, Result};

/// Lowercased, punctuation-stripped word tokens together with the text they
/// came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    tokens: Vec<String>,
    source_text: String,
}

impl TokenSequence {
    /// Builds a sequence from pre-split tokens. Each one still goes through
    /// [`tokenize`], so tokens that normalize to nothing are dropped.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let tokens: Vec<String> = tokens
            .into_iter()
            .flat_map(|t| tokenize(t.as_ref()).tokens)
            .collect();
        let source_text = tokens.join(" ");
        Self {
            tokens,
            source_text,
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn source_text(&self) -> &str {
        &self.source_text
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Number of occurrences of `token` in the sequence.
    pub fn count(&self, token: &str) -> usize {
        self.tokens.iter().filter(|t| t.as_str() == token).count()
    }

    /// Tokens joined by single spaces.
    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Lowercases a word and strips leading and trailing non-alphanumeric
/// characters. Returns `None` when nothing remains.
fn normalize_token(word: &str) -> Option<String> {
    let lowered = word.to_lowercase();
    let stripped = lowered.trim_matches(|c: char| !c.is_alphanumeric());
    if stripped.is_empty() || stripped.chars().any(char::is_whitespace) {
        None
    } else {
        Some(stripped.to_owned())
    }
}

/// Splits on whitespace, lowercases, and strips punctuation from both ends of
/// each word.
pub fn tokenize(text: &str) -> TokenSequence {
    let tokens = text
        .split_whitespace()
        .filter_map(normalize_token)
        .collect();
    TokenSequence {
        tokens,
        source_text: text.to_owned(),
    }
}

/// Multiset of the n-grams of one order in a token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramProfile {
    order: usize,
    counts: HashMap<Vec<String>, usize>,
    total_count: usize,
}

impl NGramProfile {
    pub fn order(&self) -> usize {
        self.order
    }

    /// `|V_n|`, the number of distinct n-grams.
    pub fn distinct_count(&self) -> usize {
        self.counts.len()
    }

    /// `N_n`, the number of n-gram positions.
    pub fn total_count(&self) -> usize {
        self.total_count
    }

    pub fn counts(&self) -> &HashMap<Vec<String>, usize> {
        &self.counts
    }

    pub fn count_of(&self, gram: &[String]) -> usize {
        self.counts.get(gram).copied().unwrap_or(0)
    }
}

pub fn extract_ngrams(seq: &TokenSequence, order: usize) -> Result<NGramProfile> {
    if order < 1 {
        return Err(Error::invalid("n-gram order must be at least 1"));
    }
    let mut counts: HashMap<Vec<String>, usize> = HashMap::new();
    let mut total_count = 0;
    for window in seq.tokens().windows(order) {
        *counts.entry(window.to_vec()).or_default() += 1;
        total_count += 1;
    }
    Ok(NGramProfile {
        order,
        counts,
        total_count,
    })
}

/// Distinct n-grams over total n-grams; 0 for a profile with no n-grams.
pub fn ngram_diversity(profile: &NGramProfile) -> f64 {
    if profile.total_count == 0 {
        return 0.0;
    }
    profile.distinct_count() as f64 / profile.total_count as f64
}

/// Fraction of generated positions whose token equals the annotation token at
/// the same position. Generated positions past the end of the annotation count
/// as mismatches.
pub fn mean_token_accuracy(gen: &TokenSequence, annt: &TokenSequence) -> Result<f64> {
    if gen.is_empty() {
        return Err(Error::invalid(
            "mean token accuracy needs a non-empty generated sequence",
        ));
    }
    let hits = gen
        .tokens()
        .iter()
        .zip(annt.tokens())
        .filter(|(g, a)| g == a)
        .count();
    Ok(hits as f64 / gen.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeywordOrigin {
    Explicit,
    Extracted,
}

/// Deduplicated keyword tokens, in first-seen order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordSet {
    keywords: Vec<String>,
    origin: KeywordOrigin,
}

impl KeywordSet {
    /// Keywords supplied by the caller. Each entry is tokenized, so a
    /// multi-word keyword contributes each of its words.
    pub fn explicit<I, S>(keywords: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = HashSet::new();
        let keywords = keywords
            .into_iter()
            .flat_map(|k| tokenize(k.as_ref()).tokens)
            .filter(|k| seen.insert(k.clone()))
            .collect();
        Self {
            keywords,
            origin: KeywordOrigin::Explicit,
        }
    }

    pub fn keywords(&self) -> &[String] {
        &self.keywords
    }

    pub fn origin(&self) -> KeywordOrigin {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.keywords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keywords.is_empty()
    }
}

/// Content tokens of the annotation: every token not in `stopwords`,
/// deduplicated, original order kept.
pub fn extract_keywords(annt: &TokenSequence, stopwords: &StopWords) -> KeywordSet {
    let mut seen = HashSet::new();
    let keywords = annt
        .tokens()
        .iter()
        .filter(|t| !stopwords.contains(t))
        .filter(|t| seen.insert(t.as_str()))
        .cloned()
        .collect();
    KeywordSet {
        keywords,
        origin: KeywordOrigin::Extracted,
    }
}

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// Stopword list. File format: UTF-8, one token per line, lines starting with
/// `#` ignored. Entries are normalized with the same rules as [`tokenize`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopWords {
    words: HashSet<String>,
}

impl StopWords {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            words: words
                .into_iter()
                .filter_map(|w| normalize_token(w.as_ref().trim()))
                .collect(),
        }
    }

    /// The English list bundled with the crate.
    pub fn bundled() -> Self {
        Self::parse(DEFAULT_STOPWORDS.as_bytes()).expect("bundled stopword list is valid UTF-8")
    }

    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut words = HashSet::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::parse(idx + 1, e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(w) = normalize_token(line) {
                words.insert(w);
            }
        }
        Ok(Self { words })
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}
