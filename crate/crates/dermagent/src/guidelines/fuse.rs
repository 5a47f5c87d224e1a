//! Reciprocal Rank Fusion: score(d) = sum over lists of 1/(k + rank_d),
//! rank starting at 1.

use std::collections::BTreeMap;

use super::{Origin, RankedList};
use crate::error::{Error, Result};

pub const DEFAULT_RRF_K: u32 = 60;

/// Fuse ranked lists, sort by fused score descending (ties by id), truncate
/// to `top_n`. The fused list carries no meaningful origin.
pub fn rrf_fuse(lists: &[RankedList], k_rrf: u32, top_n: usize) -> Result<RankedList> {
    if lists.is_empty() {
        return Err(Error::Validation("rrf_fuse requires at least one list".into()));
    }
    let mut scores: BTreeMap<&str, f64> = BTreeMap::new();
    for list in lists {
        for (rank, (id, _)) in list.entries.iter().enumerate() {
            *scores.entry(id.as_str()).or_insert(0.0) += 1.0 / (k_rrf as f64 + rank as f64 + 1.0);
        }
    }
    let mut fused: Vec<(String, f64)> = scores
        .into_iter()
        .map(|(id, score)| (id.to_string(), score))
        .collect();
    fused.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    fused.truncate(top_n);
    Ok(RankedList {
        entries: fused,
        origin: Origin::Fused,
    })
}
