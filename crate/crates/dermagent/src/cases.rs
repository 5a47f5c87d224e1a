//! Case retrieval: a vector store of diagnosed cases with exact cosine
//! top-k search.
//!
//! Corpus file: line-delimited JSON records
//! `{id, embedding:[f32...], disease_label, category_path:[...], description}`.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::tools::ToolOutput;

pub const DEFAULT_CASE_DIMENSION: usize = 512;
pub const DEFAULT_CASE_K: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseEntry {
    pub id: String,
    pub embedding: Vec<f32>,
    pub disease_label: String,
    pub category_path: Vec<String>,
    pub description: String,
}

#[derive(Debug, Clone)]
pub struct CaseStore {
    dimension: usize,
    entries: Vec<CaseEntry>,
    norms: Vec<f64>,
}

/// Outcome of corpus ingestion: the queryable store plus the number of
/// duplicate-id records that were overwritten (last write wins).
#[derive(Debug)]
pub struct IngestReport {
    pub store: CaseStore,
    pub duplicates_overwritten: usize,
}

/// Build a store from a record stream. Dimension is taken from the first
/// record; any mismatch fails and names the offending id.
pub fn ingest_cases<I>(records: I) -> Result<IngestReport>
where
    I: IntoIterator<Item = CaseEntry>,
{
    let mut dimension: Option<usize> = None;
    let mut by_id: BTreeMap<String, usize> = BTreeMap::new();
    let mut entries: Vec<CaseEntry> = Vec::new();
    let mut duplicates = 0usize;

    for record in records {
        let dim = *dimension.get_or_insert(record.embedding.len());
        if record.embedding.len() != dim {
            return Err(Error::Ingestion(format!(
                "record '{}' has dimension {} but store dimension is {dim}",
                record.id,
                record.embedding.len()
            )));
        }
        match by_id.get(&record.id) {
            Some(&idx) => {
                entries[idx] = record;
                duplicates += 1;
            }
            None => {
                by_id.insert(record.id.clone(), entries.len());
                entries.push(record);
            }
        }
    }

    let dimension = dimension.unwrap_or(DEFAULT_CASE_DIMENSION);
    Ok(IngestReport {
        store: CaseStore::from_entries(dimension, entries),
        duplicates_overwritten: duplicates,
    })
}

/// Read a line-delimited corpus file into a store.
pub fn load_case_corpus(path: impl AsRef<Path>) -> Result<IngestReport> {
    let file = std::fs::File::open(path.as_ref())?;
    ingest_cases(read_case_records(file)?)
}

pub fn read_case_records(reader: impl Read) -> Result<Vec<CaseEntry>> {
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: CaseEntry = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("case corpus line {}: {e}", lineno + 1)))?;
        out.push(entry);
    }
    Ok(out)
}

impl CaseStore {
    fn from_entries(dimension: usize, entries: Vec<CaseEntry>) -> Self {
        let norms = entries.iter().map(|e| l2_norm(&e.embedding)).collect();
        CaseStore {
            dimension,
            entries,
            norms,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[CaseEntry] {
        &self.entries
    }

    /// Exact cosine top-k. Results sorted by similarity descending, ties by
    /// id lexicographic. Zero-norm vectors score 0 against everything.
    pub fn search(&self, query: &[f32], k: usize) -> Result<Vec<(&CaseEntry, f64)>> {
        if query.len() != self.dimension {
            return Err(Error::Validation(format!(
                "query dimension {} does not match store dimension {}",
                query.len(),
                self.dimension
            )));
        }
        if k == 0 {
            return Err(Error::Validation("k must be >= 1".into()));
        }
        let qnorm = l2_norm(query);
        let mut scored: Vec<(usize, f64)> = self
            .entries
            .iter()
            .enumerate()
            .map(|(idx, entry)| (idx, cosine(query, qnorm, &entry.embedding, self.norms[idx])))
            .collect();
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap()
                .then_with(|| self.entries[a.0].id.cmp(&self.entries[b.0].id))
        });
        scored.truncate(k.min(self.entries.len()));
        Ok(scored
            .into_iter()
            .map(|(idx, sim)| (&self.entries[idx], sim))
            .collect())
    }
}

/// Exact cosine top-k over a store; see `CaseStore::search`.
pub fn search_cases<'a>(
    store: &'a CaseStore,
    query: &[f32],
    k: usize,
) -> Result<Vec<(&'a CaseEntry, f64)>> {
    store.search(query, k)
}

fn l2_norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
}

fn cosine(a: &[f32], a_norm: f64, b: &[f32], b_norm: f64) -> f64 {
    if a_norm == 0.0 || b_norm == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| (x as f64) * (y as f64)).sum();
    dot / (a_norm * b_norm)
}

/// Majority disease label among neighbors: most frequent, ties broken by
/// highest mean similarity, then label lexicographic.
pub fn majority_label(results: &[(&CaseEntry, f64)]) -> Option<String> {
    let mut stats: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    for (entry, sim) in results {
        let slot = stats.entry(entry.disease_label.as_str()).or_insert((0, 0.0));
        slot.0 += 1;
        slot.1 += sim;
    }
    stats
        .into_iter()
        .map(|(label, (count, sum))| (label, count, sum / count as f64))
        .max_by(|a, b| {
            a.1.cmp(&b.1)
                .then_with(|| a.2.partial_cmp(&b.2).unwrap())
                .then_with(|| b.0.cmp(a.0)) // reversed: prefer lexicographically smaller
        })
        .map(|(label, _, _)| label.to_string())
}

/// Package neighbor results as a tool output: confidence is the max
/// similarity, sources are the case ids.
pub fn case_evidence(results: &[(&CaseEntry, f64)]) -> Result<ToolOutput> {
    if results.is_empty() {
        return Err(Error::Validation("case evidence requires at least one neighbor".into()));
    }
    let labels: Vec<&str> = results.iter().map(|(e, _)| e.disease_label.as_str()).collect();
    let similarities: Vec<f64> = results.iter().map(|(_, s)| *s).collect();
    let descriptions: Vec<&str> = results.iter().map(|(e, _)| e.description.as_str()).collect();
    let categories: Vec<&Vec<String>> = results.iter().map(|(e, _)| &e.category_path).collect();
    let majority = majority_label(results).expect("non-empty results");
    let confidence = similarities
        .iter()
        .copied()
        .fold(f64::MIN, f64::max)
        .clamp(-1.0, 1.0)
        .max(0.0);
    Ok(ToolOutput {
        result: json!({
            "labels": labels,
            "similarities": similarities,
            "descriptions": descriptions,
            "category_paths": categories,
            "majority_label": majority,
        }),
        confidence: Some(confidence),
        sources: results.iter().map(|(e, _)| e.id.clone()).collect(),
    })
}
