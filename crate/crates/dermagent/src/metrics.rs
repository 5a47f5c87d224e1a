//! Evaluation metrics: label accuracy, macro-averaged F1, and ROUGE-L.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::ontology::OntologyIndex;
use crate::text::tokenize;

/// Casefold and trim a predicted label; when a taxonomy is supplied,
/// aliases collapse to the canonical node name first.
pub fn normalize_label(label: &str, ontology: Option<&OntologyIndex>) -> String {
    let trimmed = label.trim();
    ontology
        .and_then(|o| o.canonical(trimmed))
        .map(str::to_lowercase)
        .unwrap_or_else(|| trimmed.to_lowercase())
}

fn check_lengths(pred: &[String], gold: &[String]) -> Result<()> {
    if pred.len() != gold.len() {
        return Err(Error::Validation(format!(
            "prediction count {} does not match gold count {}",
            pred.len(),
            gold.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Validation("cannot score an empty label set".into()));
    }
    Ok(())
}

/// Fraction of exact (normalized) label matches.
pub fn accuracy(pred: &[String], gold: &[String]) -> Result<f64> {
    check_lengths(pred, gold)?;
    let hits = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Macro-averaged F1 over every label that appears in either the
/// predictions or the gold set; labels absent from both contribute nothing.
pub fn f1_macro(pred: &[String], gold: &[String]) -> Result<f64> {
    check_lengths(pred, gold)?;
    let labels: BTreeSet<&String> = pred.iter().chain(gold).collect();
    let mut total = 0.0;
    for label in &labels {
        let tp = pred
            .iter()
            .zip(gold)
            .filter(|(p, g)| p == label && g == label)
            .count() as f64;
        let fp = pred
            .iter()
            .zip(gold)
            .filter(|(p, g)| p == label && g != label)
            .count() as f64;
        let fn_ = pred
            .iter()
            .zip(gold)
            .filter(|(p, g)| p != label && g == label)
            .count() as f64;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        total += if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
    }
    Ok(total / labels.len() as f64)
}

/// Longest common subsequence length over token sequences, two-row DP.
fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for token_a in a {
        for (j, token_b) in b.iter().enumerate() {
            curr[j + 1] = if token_a == token_b {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// ROUGE-L F1 between a candidate and a reference text, over casefolded
/// alphanumeric tokens. Either side empty scores 0.
pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    let cand = tokenize(candidate);
    let refr = tokenize(reference);
    if cand.is_empty() || refr.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(&cand, &refr) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let precision = lcs / cand.len() as f64;
    let recall = lcs / refr.len() as f64;
    2.0 * precision * recall / (precision + recall)
}
