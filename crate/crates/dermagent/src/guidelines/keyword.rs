//! Inverted index with BM25 scoring (k1 = 1.2, b = 0.75) over guideline
//! chunk text, disease names, and section headings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::text::tokenize;

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct InvertedIndex {
    /// term -> postings of (doc index, term frequency), doc index ascending.
    postings: BTreeMap<String, Vec<(usize, u32)>>,
    doc_lengths: Vec<usize>,
    avg_doc_length: f64,
}

impl InvertedIndex {
    /// Build from one token bag per document.
    pub fn build(docs: &[Vec<String>]) -> Self {
        let mut postings: BTreeMap<String, Vec<(usize, u32)>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(docs.len());
        for (doc_idx, tokens) in docs.iter().enumerate() {
            doc_lengths.push(tokens.len());
            let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
            for token in tokens {
                *counts.entry(token.as_str()).or_insert(0) += 1;
            }
            for (term, tf) in counts {
                postings.entry(term.to_string()).or_default().push((doc_idx, tf));
            }
        }
        let avg_doc_length = if doc_lengths.is_empty() {
            0.0
        } else {
            doc_lengths.iter().sum::<usize>() as f64 / doc_lengths.len() as f64
        };
        InvertedIndex {
            postings,
            doc_lengths,
            avg_doc_length,
        }
    }

    pub fn num_docs(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_length(&self, doc: usize) -> usize {
        self.doc_lengths[doc]
    }

    pub fn doc_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map(|p| p.len()).unwrap_or(0)
    }

    /// BM25 contribution of one (term frequency, doc length) pair given
    /// fixed corpus statistics.
    pub fn bm25_term_score(tf: u32, doc_len: usize, avg_doc_len: f64, idf: f64) -> f64 {
        let tf = tf as f64;
        let norm = 1.0 - BM25_B + BM25_B * doc_len as f64 / avg_doc_len;
        idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * norm)
    }

    /// Robertson/Lucene idf; always positive.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.num_docs() as f64;
        let df = self.doc_frequency(term) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    /// BM25 top-k over the query tokens. Ties broken by ascending doc index
    /// (the caller maps indices to chunk ids, which are in id order).
    pub fn search(&self, query: &str, k: usize) -> Vec<(usize, f64)> {
        let mut scores: BTreeMap<usize, f64> = BTreeMap::new();
        let mut query_tokens = tokenize(query);
        query_tokens.dedup();
        // dedup only removes adjacent repeats; use a sorted unique set so a
        // repeated query term is scored once.
        query_tokens.sort();
        query_tokens.dedup();
        for term in &query_tokens {
            let Some(postings) = self.postings.get(term) else {
                continue;
            };
            let idf = self.idf(term);
            for &(doc, tf) in postings {
                *scores.entry(doc).or_insert(0.0) +=
                    Self::bm25_term_score(tf, self.doc_lengths[doc], self.avg_doc_length, idf);
            }
        }
        let mut ranked: Vec<(usize, f64)> = scores.into_iter().collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(k);
        ranked
    }
}
