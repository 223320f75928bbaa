//! Samples corpus reading with per-line error isolation.

use std::collections::HashSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub reference: String,
    pub candidates: Vec<String>,
    #[serde(default)]
    pub keywords: Option<Vec<String>>,
    #[serde(default)]
    pub group_id: Option<String>,
}

impl SampleRecord {
    pub fn group(&self) -> &str {
        self.group_id.as_deref().unwrap_or(&self.id)
    }
}

/// A record that could not be parsed or scored. `id` is absent when the line
/// itself was unreadable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordError {
    pub line: usize,
    pub id: Option<String>,
    pub error: String,
}

#[derive(Debug, Default)]
pub struct Corpus {
    /// Well-formed records with their 1-based line numbers, in file order.
    pub records: Vec<(usize, SampleRecord)>,
    pub errors: Vec<RecordError>,
}

/// Reads a JSON Lines samples file. Malformed lines and repeated ids become
/// [`RecordError`]s; the first occurrence of an id wins.
pub fn read_samples<R: BufRead>(reader: R) -> std::io::Result<Corpus> {
    let mut corpus = Corpus::default();
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<SampleRecord>(&line) {
            Ok(rec) if !ids.insert(rec.id.clone()) => corpus.errors.push(RecordError {
                line: n,
                error: format!("duplicate sample id {:?}", rec.id),
                id: Some(rec.id),
            }),
            Ok(rec) => corpus.records.push((n, rec)),
            Err(e) => corpus.errors.push(RecordError {
                line: n,
                id: None,
                error: format!("malformed record: {e}"),
            }),
        }
    }
    Ok(corpus)
}
