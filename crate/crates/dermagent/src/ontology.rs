//! Hierarchical skin-disease taxonomy with fuzzy name matching.
//!
//! Taxonomy file format (JSON):
//! ```json
//! {
//!   "root": "skin",
//!   "nodes": [
//!     {"id": "skin", "name": "skin disease", "aliases": [], "children": ["infl"]},
//!     {"id": "infl", "name": "inflammatory", "aliases": [], "children": []}
//!   ]
//! }
//! ```
//! Every node except the root must be referenced by exactly one parent.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FUZZY_THRESHOLD: f64 = 0.4;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaxonomyFile {
    pub root: String,
    pub nodes: Vec<TaxonomyRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaxonomyRecord {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(default)]
    pub children: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct OntologyNode {
    pub name: String,
    pub aliases: Vec<String>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMode {
    Hierarchy,
    Children,
    Siblings,
    Search,
}

impl std::str::FromStr for QueryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hierarchy" => Ok(QueryMode::Hierarchy),
            "children" => Ok(QueryMode::Children),
            "siblings" => Ok(QueryMode::Siblings),
            "search" => Ok(QueryMode::Search),
            other => Err(Error::Validation(format!("unknown query mode: {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OntologyAnswer {
    /// Root-to-node path for the resolved disease.
    Path { nodes: Vec<String>, resolution_score: f64 },
    /// Direct children or siblings.
    Nodes { nodes: Vec<String>, resolution_score: f64 },
    /// Ranked fuzzy matches.
    Matches { matches: Vec<(String, f64)> },
}

#[derive(Debug)]
pub struct OntologyIndex {
    nodes: Vec<OntologyNode>,
    root: usize,
    by_name: BTreeMap<String, usize>,
    by_alias: BTreeMap<String, usize>,
    trigrams: BTreeMap<String, Vec<usize>>,
}

impl OntologyIndex {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let file: TaxonomyFile = serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("taxonomy file: {e}")))?;
        Self::from_file(file)
    }

    pub fn from_file(file: TaxonomyFile) -> Result<Self> {
        let mut id_to_idx = BTreeMap::new();
        for (idx, record) in file.nodes.iter().enumerate() {
            if id_to_idx.insert(record.id.clone(), idx).is_some() {
                return Err(Error::Structural(format!(
                    "duplicate node id '{}'",
                    record.id
                )));
            }
        }
        let root = *id_to_idx
            .get(&file.root)
            .ok_or_else(|| Error::Structural(format!("root id '{}' not declared", file.root)))?;

        let mut nodes: Vec<OntologyNode> = file
            .nodes
            .iter()
            .map(|r| OntologyNode {
                name: r.name.clone(),
                aliases: r.aliases.clone(),
                parent: None,
                children: Vec::new(),
            })
            .collect();

        for (idx, record) in file.nodes.iter().enumerate() {
            for child_id in &record.children {
                let child = *id_to_idx.get(child_id).ok_or_else(|| {
                    Error::Structural(format!(
                        "node '{}' references unknown child '{child_id}'",
                        record.id
                    ))
                })?;
                if child == root {
                    return Err(Error::Structural(format!(
                        "cycle: root '{}' claimed as child of '{}'",
                        file.root, record.id
                    )));
                }
                if let Some(prev) = nodes[child].parent {
                    return Err(Error::Structural(format!(
                        "node '{child_id}' has two parents: '{}' and '{}'",
                        file.nodes[prev].id, record.id
                    )));
                }
                nodes[child].parent = Some(idx);
                nodes[idx].children.push(child);
            }
        }

        // Every non-root node must be reachable from the root; an orphan set
        // with internal parent links is a cycle.
        let mut visited = vec![false; nodes.len()];
        let mut stack = vec![root];
        while let Some(idx) = stack.pop() {
            if visited[idx] {
                return Err(Error::Structural(format!(
                    "cycle detected at node '{}'",
                    file.nodes[idx].id
                )));
            }
            visited[idx] = true;
            stack.extend(nodes[idx].children.iter().copied());
        }
        if let Some(idx) = visited.iter().position(|v| !v) {
            return Err(Error::Structural(format!(
                "node '{}' unreachable from root (orphan or cycle)",
                file.nodes[idx].id
            )));
        }

        let mut by_name = BTreeMap::new();
        for (idx, node) in nodes.iter().enumerate() {
            if by_name.insert(normalize(&node.name), idx).is_some() {
                return Err(Error::Structural(format!(
                    "duplicate canonical name '{}' (casefold)",
                    node.name
                )));
            }
        }
        let mut by_alias = BTreeMap::new();
        for (idx, node) in nodes.iter().enumerate() {
            for alias in &node.aliases {
                let key = normalize(alias);
                if by_name.contains_key(&key) && by_name[&key] != idx {
                    return Err(Error::Structural(format!(
                        "alias '{alias}' collides with another node's canonical name"
                    )));
                }
                if let Some(prev) = by_alias.insert(key, idx) {
                    if prev != idx {
                        return Err(Error::Structural(format!(
                            "alias '{alias}' maps to more than one node"
                        )));
                    }
                }
            }
        }

        let mut trigrams: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (idx, node) in nodes.iter().enumerate() {
            let mut grams = BTreeSet::new();
            grams.extend(trigram_set(&node.name));
            for alias in &node.aliases {
                grams.extend(trigram_set(alias));
            }
            for gram in grams {
                trigrams.entry(gram).or_default().push(idx);
            }
        }

        Ok(OntologyIndex {
            nodes,
            root,
            by_name,
            by_alias,
            trigrams,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root_name(&self) -> &str {
        &self.nodes[self.root].name
    }

    pub fn node_names(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(|n| n.name.as_str())
    }

    /// Leaf node names; used as the default classifier taxonomy.
    pub fn leaf_names(&self) -> Vec<String> {
        self.nodes
            .iter()
            .filter(|n| n.children.is_empty())
            .map(|n| n.name.clone())
            .collect()
    }

    /// Canonical node name for a label, via exact name or alias lookup.
    pub fn canonical(&self, label: &str) -> Option<&str> {
        let key = normalize(label);
        self.by_name
            .get(&key)
            .or_else(|| self.by_alias.get(&key))
            .map(|&idx| self.nodes[idx].name.as_str())
    }

    /// exact name -> alias -> fuzzy fallback.
    fn resolve(&self, d: &str, threshold: f64) -> Result<(usize, f64)> {
        let key = normalize(d);
        if let Some(&idx) = self.by_name.get(&key).or_else(|| self.by_alias.get(&key)) {
            return Ok((idx, 1.0));
        }
        let matches = self.resolve_fuzzy(d, threshold);
        matches.first().copied().ok_or_else(|| {
            let nearest: Vec<String> = self
                .resolve_fuzzy(d, 0.0)
                .into_iter()
                .take(3)
                .map(|(idx, score)| format!("{} ({score:.2})", self.nodes[idx].name))
                .collect();
            Error::NotFound(format!(
                "no ontology match for '{d}' above threshold {threshold}; nearest: [{}]",
                nearest.join(", ")
            ))
        })
    }

    /// Ranked fuzzy matches: max trigram Jaccard over name and aliases,
    /// casefolded; score >= threshold, ties broken by name.
    pub fn resolve_fuzzy(&self, d: &str, threshold: f64) -> Vec<(usize, f64)> {
        let query_grams = trigram_set(d);
        let mut candidates: BTreeSet<usize> = BTreeSet::new();
        for gram in &query_grams {
            if let Some(ids) = self.trigrams.get(gram) {
                candidates.extend(ids.iter().copied());
            }
        }
        let mut scored: Vec<(usize, f64)> = candidates
            .into_iter()
            .map(|idx| {
                let node = &self.nodes[idx];
                let mut best = trigram_jaccard_sets(&query_grams, &trigram_set(&node.name));
                for alias in &node.aliases {
                    best = best.max(trigram_jaccard_sets(&query_grams, &trigram_set(alias)));
                }
                (idx, best)
            })
            .filter(|(_, score)| *score >= threshold && *score > 0.0)
            .collect();
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap()
                .then_with(|| self.nodes[a.0].name.cmp(&self.nodes[b.0].name))
        });
        scored
    }

    pub fn query(&self, mode: QueryMode, d: &str, fuzzy_threshold: f64) -> Result<OntologyAnswer> {
        match mode {
            QueryMode::Search => {
                let matches = self
                    .resolve_fuzzy(d, fuzzy_threshold)
                    .into_iter()
                    .map(|(idx, score)| (self.nodes[idx].name.clone(), score))
                    .collect();
                Ok(OntologyAnswer::Matches { matches })
            }
            QueryMode::Hierarchy => {
                let (idx, score) = self.resolve(d, fuzzy_threshold)?;
                let mut path = Vec::new();
                let mut cursor = Some(idx);
                while let Some(i) = cursor {
                    path.push(self.nodes[i].name.clone());
                    cursor = self.nodes[i].parent;
                }
                path.reverse();
                Ok(OntologyAnswer::Path {
                    nodes: path,
                    resolution_score: score,
                })
            }
            QueryMode::Children => {
                let (idx, score) = self.resolve(d, fuzzy_threshold)?;
                let nodes = self.nodes[idx]
                    .children
                    .iter()
                    .map(|&c| self.nodes[c].name.clone())
                    .collect();
                Ok(OntologyAnswer::Nodes {
                    nodes,
                    resolution_score: score,
                })
            }
            QueryMode::Siblings => {
                let (idx, score) = self.resolve(d, fuzzy_threshold)?;
                let nodes = match self.nodes[idx].parent {
                    None => Vec::new(),
                    Some(p) => self.nodes[p]
                        .children
                        .iter()
                        .filter(|&&c| c != idx)
                        .map(|&c| self.nodes[c].name.clone())
                        .collect(),
                };
                Ok(OntologyAnswer::Nodes {
                    nodes,
                    resolution_score: score,
                })
            }
        }
    }
}

fn normalize(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Character trigram set over the casefolded string. Strings shorter than
/// three characters contribute themselves as a single gram.
pub fn trigram_set(s: &str) -> BTreeSet<String> {
    let chars: Vec<char> = normalize(s).chars().collect();
    if chars.is_empty() {
        return BTreeSet::new();
    }
    if chars.len() < 3 {
        return [chars.iter().collect::<String>()].into_iter().collect();
    }
    chars
        .windows(3)
        .map(|w| w.iter().collect::<String>())
        .collect()
}

fn trigram_jaccard_sets(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Trigram Jaccard similarity between two strings.
pub fn trigram_jaccard(a: &str, b: &str) -> f64 {
    trigram_jaccard_sets(&trigram_set(a), &trigram_set(b))
}

/// Load a taxonomy from a file path; alias for `OntologyIndex::load`.
pub fn load_ontology(path: impl AsRef<Path>) -> Result<OntologyIndex> {
    OntologyIndex::load(path)
}
