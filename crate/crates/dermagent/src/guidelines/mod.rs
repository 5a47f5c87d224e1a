//! Guideline retrieval: a four-stage hybrid pipeline of stop-word
//! filtering, dense vector search, BM25 keyword search, RRF fusion, and
//! re-ranking.
//!
//! Corpus file: line-delimited JSON
//! `{id, text, disease_names, section, source_url, embedding?}`; missing
//! embeddings are computed at ingestion by the configured provider.

pub mod fuse;
pub mod keyword;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::text::tokenize;
use crate::tools::ToolOutput;

pub use fuse::{rrf_fuse, DEFAULT_RRF_K};
pub use keyword::InvertedIndex;

pub const DEFAULT_GUIDE_DIMENSION: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidelineChunk {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub disease_names: Vec<String>,
    pub section: String,
    pub source_url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f32>>,
}

impl GuidelineChunk {
    pub fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(Error::Validation(format!("chunk '{}' has empty text", self.id)));
        }
        if self.source_url.trim().is_empty() {
            return Err(Error::Validation(format!(
                "chunk '{}' has empty source_url",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Dense,
    Keyword,
    Fused,
}

/// An ordered candidate list of (chunk id, score), scores non-increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub entries: Vec<(String, f64)>,
    pub origin: Origin,
}

#[derive(Debug, Clone)]
pub struct StopWordList {
    terms: BTreeSet<String>,
}

impl StopWordList {
    /// The shipped default list of generic medical and interrogative terms.
    pub fn default_list() -> Self {
        Self::from_text(include_str!("stopwords.txt"))
    }

    pub fn from_text(text: &str) -> Self {
        StopWordList {
            terms: text
                .lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty() && !l.chars().any(char::is_whitespace))
                .collect(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::from_text(&std::fs::read_to_string(path)?))
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.contains(term)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Stage 1: stop-word filtering. If every token is a stop word, the
/// original casefolded query is returned unchanged.
pub fn filter_query(query: &str, stops: &StopWordList) -> String {
    let tokens = tokenize(query);
    let kept: Vec<&String> = tokens.iter().filter(|t| !stops.contains(t)).collect();
    if kept.is_empty() {
        return query.to_lowercase();
    }
    kept.iter()
        .map(|s| s.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Text-to-vector interface; real deployments call a remote model, tests
/// use the deterministic feature-hash embedder.
pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vec<f32>>;
    fn dimension(&self) -> usize;
}

/// Deterministic embedder: tokens hashed into `dim` buckets (FNV-1a),
/// counts L2-normalized.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashEmbedder { dim }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

impl EmbeddingProvider for HashEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f32>> {
        let mut vector = vec![0f32; self.dim];
        for token in tokenize(text) {
            let bucket = (fnv1a(token.as_bytes()) % self.dim as u64) as usize;
            vector[bucket] += 1.0;
        }
        let norm = vector.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut vector {
                *x = (*x as f64 / norm) as f32;
            }
        }
        Ok(vector)
    }

    fn dimension(&self) -> usize {
        self.dim
    }
}

/// Scores one (query, chunk) pair for relevance.
pub trait RerankProvider: Send + Sync {
    fn score(&self, query: &str, chunk: &GuidelineChunk) -> Result<f64>;
}

/// Deterministic test-grade reranker: token-set Jaccard between the query
/// and the chunk's text, disease names, and section.
#[derive(Debug, Clone, Default)]
pub struct JaccardReranker;

impl RerankProvider for JaccardReranker {
    fn score(&self, query: &str, chunk: &GuidelineChunk) -> Result<f64> {
        let q: BTreeSet<String> = tokenize(query).into_iter().collect();
        let mut d: BTreeSet<String> = tokenize(&chunk.text).into_iter().collect();
        d.extend(tokenize(&chunk.section));
        for name in &chunk.disease_names {
            d.extend(tokenize(name));
        }
        if q.is_empty() || d.is_empty() {
            return Ok(0.0);
        }
        let inter = q.intersection(&d).count();
        let union = q.len() + d.len() - inter;
        Ok(inter as f64 / union as f64)
    }
}

/// Stage sizes for the pipeline; every value configurable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageSizes {
    pub dense_k: usize,
    pub keyword_k: usize,
    pub fused_top_n: usize,
    pub rerank_top_m: usize,
    pub rrf_k: u32,
}

impl Default for StageSizes {
    fn default() -> Self {
        StageSizes {
            dense_k: 20,
            keyword_k: 20,
            fused_top_n: 10,
            rerank_top_m: 5,
            rrf_k: DEFAULT_RRF_K,
        }
    }
}

/// Immutable searchable index over a guideline corpus. Chunks are held in
/// id order so inverted-index tie-breaks follow chunk ids.
#[derive(Debug)]
pub struct GuidelineIndex {
    chunks: Vec<GuidelineChunk>,
    dimension: usize,
    norms: Vec<f64>,
    inverted: InvertedIndex,
    by_id: BTreeMap<String, usize>,
}

impl GuidelineIndex {
    /// Build from a chunk collection, embedding any chunk that arrives
    /// without a vector.
    pub fn build(
        mut chunks: Vec<GuidelineChunk>,
        embedder: &dyn EmbeddingProvider,
    ) -> Result<Self> {
        for chunk in &mut chunks {
            chunk.validate()?;
            if chunk.embedding.is_none() {
                chunk.embedding = Some(embedder.embed(&chunk.text)?);
            }
        }
        chunks.sort_by(|a, b| a.id.cmp(&b.id));
        let dimension = chunks
            .first()
            .and_then(|c| c.embedding.as_ref())
            .map(|e| e.len())
            .unwrap_or(embedder.dimension());
        for chunk in &chunks {
            let len = chunk.embedding.as_ref().unwrap().len();
            if len != dimension {
                return Err(Error::Ingestion(format!(
                    "chunk '{}' has dimension {len} but index dimension is {dimension}",
                    chunk.id
                )));
            }
        }
        let norms = chunks
            .iter()
            .map(|c| {
                c.embedding
                    .as_ref()
                    .unwrap()
                    .iter()
                    .map(|&x| (x as f64).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let docs: Vec<Vec<String>> = chunks
            .iter()
            .map(|c| {
                let mut tokens = tokenize(&c.text);
                for name in &c.disease_names {
                    tokens.extend(tokenize(name));
                }
                tokens.extend(tokenize(&c.section));
                tokens
            })
            .collect();
        let inverted = InvertedIndex::build(&docs);
        let by_id = chunks
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id.clone(), i))
            .collect();
        Ok(GuidelineIndex {
            chunks,
            dimension,
            norms,
            inverted,
            by_id,
        })
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn chunk(&self, id: &str) -> Option<&GuidelineChunk> {
        self.by_id.get(id).map(|&i| &self.chunks[i])
    }

    pub fn chunks(&self) -> &[GuidelineChunk] {
        &self.chunks
    }

    /// Stage 2a: cosine top-k over chunk embeddings.
    pub fn dense_search(
        &self,
        query: &str,
        embedder: &dyn EmbeddingProvider,
        k: usize,
    ) -> Result<RankedList> {
        if k == 0 {
            return Err(Error::Validation("k must be >= 1".into()));
        }
        let qvec = embedder.embed(query)?;
        if qvec.len() != self.dimension {
            return Err(Error::Validation(format!(
                "query embedding dimension {} does not match index dimension {}",
                qvec.len(),
                self.dimension
            )));
        }
        let qnorm = qvec.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
        let mut scored: Vec<(usize, f64)> = self
            .chunks
            .iter()
            .enumerate()
            .map(|(idx, chunk)| {
                let emb = chunk.embedding.as_ref().unwrap();
                let norm = self.norms[idx];
                let sim = if qnorm == 0.0 || norm == 0.0 {
                    0.0
                } else {
                    let dot: f64 = qvec
                        .iter()
                        .zip(emb)
                        .map(|(&a, &b)| (a as f64) * (b as f64))
                        .sum();
                    dot / (qnorm * norm)
                };
                (idx, sim)
            })
            .collect();
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap()
                .then_with(|| self.chunks[a.0].id.cmp(&self.chunks[b.0].id))
        });
        scored.truncate(k.min(self.chunks.len()));
        Ok(RankedList {
            entries: scored
                .into_iter()
                .map(|(idx, sim)| (self.chunks[idx].id.clone(), sim))
                .collect(),
            origin: Origin::Dense,
        })
    }

    /// Stage 2b: BM25 top-k over the indexed fields.
    pub fn keyword_search(&self, query: &str, k: usize) -> RankedList {
        let entries = self
            .inverted
            .search(query, k)
            .into_iter()
            .map(|(doc, score)| (self.chunks[doc].id.clone(), score))
            .collect();
        RankedList {
            entries,
            origin: Origin::Keyword,
        }
    }
}

/// Retrieval outcome before evidence packaging.
#[derive(Debug, Clone)]
pub struct GuidelineFindings {
    pub results: Vec<(GuidelineChunk, f64)>,
    /// Top cosine similarity from the dense stage; the critic's 80% gate
    /// reads this.
    pub top_dense_similarity: f64,
    pub filtered_query: String,
    /// Set when the rerank provider failed and fused order was kept.
    pub degraded: bool,
}

/// The full four-stage pipeline over an immutable index.
pub struct GuidelinePipeline {
    pub index: GuidelineIndex,
    pub embedder: std::sync::Arc<dyn EmbeddingProvider>,
    pub reranker: std::sync::Arc<dyn RerankProvider>,
    pub stops: StopWordList,
    pub sizes: StageSizes,
}

impl GuidelinePipeline {
    /// filter -> (dense || keyword) -> rrf_fuse -> rerank.
    pub fn retrieve(&self, query: &str) -> Result<GuidelineFindings> {
        let filtered = filter_query(query, &self.stops);
        let dense = self
            .index
            .dense_search(&filtered, self.embedder.as_ref(), self.sizes.dense_k)?;
        let top_dense_similarity = dense.entries.first().map(|(_, s)| *s).unwrap_or(0.0);
        let keyword = self.index.keyword_search(&filtered, self.sizes.keyword_k);
        let lists = if keyword.entries.is_empty() {
            vec![dense]
        } else {
            vec![dense, keyword]
        };
        let fused = rrf_fuse(&lists, self.sizes.rrf_k, self.sizes.fused_top_n)?;

        let candidates: Vec<&GuidelineChunk> = fused
            .entries
            .iter()
            .filter_map(|(id, _)| self.index.chunk(id))
            .collect();

        let mut degraded = false;
        let mut scored: Vec<(GuidelineChunk, f64)> = Vec::with_capacity(candidates.len());
        let mut rerank_failed = false;
        for chunk in &candidates {
            match self.reranker.score(&filtered, chunk) {
                Ok(score) => scored.push(((*chunk).clone(), score)),
                Err(_) => {
                    rerank_failed = true;
                    break;
                }
            }
        }
        if rerank_failed {
            // Fall back to fused order with the fused scores.
            degraded = true;
            scored = fused
                .entries
                .iter()
                .filter_map(|(id, score)| self.index.chunk(id).map(|c| (c.clone(), *score)))
                .collect();
        } else {
            scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.id.cmp(&b.0.id)));
        }
        scored.truncate(self.sizes.rerank_top_m);

        Ok(GuidelineFindings {
            results: scored,
            top_dense_similarity,
            filtered_query: filtered,
            degraded,
        })
    }
}

/// Package retrieval findings as a tool output: confidence is the top dense
/// cosine similarity, sources are source URLs.
pub fn guideline_evidence(findings: &GuidelineFindings) -> ToolOutput {
    let disease_names: Vec<Vec<String>> = findings
        .results
        .iter()
        .map(|(c, _)| c.disease_names.clone())
        .collect();
    let sections: Vec<&str> = findings.results.iter().map(|(c, _)| c.section.as_str()).collect();
    let passages: Vec<&str> = findings.results.iter().map(|(c, _)| c.text.as_str()).collect();
    let relevance: Vec<f64> = findings.results.iter().map(|(_, r)| *r).collect();
    let mut result = json!({
        "disease_names": disease_names,
        "sections": sections,
        "passages": passages,
        "relevance": relevance,
        "filtered_query": findings.filtered_query,
    });
    if findings.degraded {
        result["degraded"] = json!(true);
    }
    ToolOutput {
        result,
        confidence: Some(findings.top_dense_similarity.clamp(0.0, 1.0)),
        sources: findings
            .results
            .iter()
            .map(|(c, _)| c.source_url.clone())
            .collect(),
    }
}

/// Read a line-delimited guideline corpus file.
pub fn read_guideline_chunks(reader: impl Read) -> Result<Vec<GuidelineChunk>> {
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let chunk: GuidelineChunk = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("guideline corpus line {}: {e}", lineno + 1)))?;
        out.push(chunk);
    }
    Ok(out)
}

pub fn load_guideline_corpus(path: impl AsRef<Path>) -> Result<Vec<GuidelineChunk>> {
    let file = std::fs::File::open(path.as_ref())?;
    read_guideline_chunks(file)
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexManifest {
    dimension: usize,
    n_chunks: usize,
    corpus_sha256: String,
}

/// Persist an index as a directory: `manifest.json`, `chunks.jsonl`
/// (without embeddings), `vectors.bin` (little-endian f32, row-major in
/// chunk id order), and `postings.json`.
pub fn save_index(index: &GuidelineIndex, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;

    let mut chunk_lines = Vec::new();
    for chunk in &index.chunks {
        let mut bare = chunk.clone();
        bare.embedding = None;
        serde_json::to_writer(&mut chunk_lines, &bare)?;
        chunk_lines.push(b'\n');
    }
    std::fs::write(dir.join("chunks.jsonl"), &chunk_lines)?;

    let mut vectors = std::io::BufWriter::new(std::fs::File::create(dir.join("vectors.bin"))?);
    for chunk in &index.chunks {
        for &x in chunk.embedding.as_ref().unwrap() {
            vectors.write_all(&x.to_le_bytes())?;
        }
    }
    vectors.flush()?;

    let postings = serde_json::to_vec_pretty(&index.inverted)?;
    std::fs::write(dir.join("postings.json"), postings)?;

    let manifest = IndexManifest {
        dimension: index.dimension,
        n_chunks: index.chunks.len(),
        corpus_sha256: hex_digest(&chunk_lines),
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}

/// Load a persisted index, verifying the manifest's corpus hash.
pub fn load_index(dir: impl AsRef<Path>) -> Result<GuidelineIndex> {
    let dir = dir.as_ref();
    let manifest: IndexManifest =
        serde_json::from_slice(&std::fs::read(dir.join("manifest.json"))?)?;
    let chunk_bytes = std::fs::read(dir.join("chunks.jsonl"))?;
    if hex_digest(&chunk_bytes) != manifest.corpus_sha256 {
        return Err(Error::Structural(
            "guideline index corpus hash mismatch".into(),
        ));
    }
    let mut chunks = read_guideline_chunks(&chunk_bytes[..])?;
    if chunks.len() != manifest.n_chunks {
        return Err(Error::Structural(format!(
            "manifest declares {} chunks, found {}",
            manifest.n_chunks,
            chunks.len()
        )));
    }
    let vectors = std::fs::read(dir.join("vectors.bin"))?;
    let expected = manifest.n_chunks * manifest.dimension * 4;
    if vectors.len() != expected {
        return Err(Error::Structural(format!(
            "vectors.bin has {} bytes, expected {expected}",
            vectors.len()
        )));
    }
    for (i, chunk) in chunks.iter_mut().enumerate() {
        let start = i * manifest.dimension * 4;
        let emb: Vec<f32> = (0..manifest.dimension)
            .map(|j| {
                let off = start + j * 4;
                f32::from_le_bytes(vectors[off..off + 4].try_into().unwrap())
            })
            .collect();
        chunk.embedding = Some(emb);
    }
    let inverted: InvertedIndex =
        serde_json::from_slice(&std::fs::read(dir.join("postings.json"))?)?;
    let norms = chunks
        .iter()
        .map(|c| {
            c.embedding
                .as_ref()
                .unwrap()
                .iter()
                .map(|&x| (x as f64).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let by_id = chunks
        .iter()
        .enumerate()
        .map(|(i, c)| (c.id.clone(), i))
        .collect();
    Ok(GuidelineIndex {
        dimension: manifest.dimension,
        chunks,
        norms,
        inverted,
        by_id,
    })
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
