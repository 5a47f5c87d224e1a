//! Tools backed by the in-process retrieval and ontology engines.

use std::sync::Arc;

use serde_json::{json, Value};

use super::{ImageEmbedder, Tool, ToolError, ToolInput, ToolOutput};
use crate::cases::{case_evidence, CaseStore, DEFAULT_CASE_K};
use crate::guidelines::{guideline_evidence, GuidelinePipeline};
use crate::ontology::{OntologyIndex, QueryMode};

/// Case RAG: embeds the query image and runs exact cosine top-k over the
/// case store.
pub struct CaseRagTool {
    store: Arc<CaseStore>,
    embedder: Arc<dyn ImageEmbedder>,
    default_k: usize,
}

impl CaseRagTool {
    pub fn new(store: Arc<CaseStore>, embedder: Arc<dyn ImageEmbedder>, default_k: usize) -> Self {
        CaseRagTool {
            store,
            embedder,
            default_k: if default_k == 0 { DEFAULT_CASE_K } else { default_k },
        }
    }
}

impl Tool for CaseRagTool {
    fn invoke(&self, input: &ToolInput<'_>) -> Result<ToolOutput, ToolError> {
        let k = input
            .params
            .get("k")
            .and_then(Value::as_u64)
            .map(|k| k as usize)
            .unwrap_or(self.default_k);
        if k == 0 {
            return Err(ToolError::InvalidParams("k must be >= 1".into()));
        }
        let query = self.embedder.embed(input.image_ref, input.image)?;
        let results = self
            .store
            .search(&query, k)
            .map_err(|e| ToolError::Failed(e.to_string()))?;
        if results.is_empty() {
            return Err(ToolError::Failed("case store is empty".into()));
        }
        case_evidence(&results).map_err(|e| ToolError::Failed(e.to_string()))
    }
}

/// Guideline RAG: the four-stage hybrid pipeline.
pub struct GuidelineRagTool {
    pipeline: Arc<GuidelinePipeline>,
}

impl GuidelineRagTool {
    pub fn new(pipeline: Arc<GuidelinePipeline>) -> Self {
        GuidelineRagTool { pipeline }
    }
}

impl Tool for GuidelineRagTool {
    fn invoke(&self, input: &ToolInput<'_>) -> Result<ToolOutput, ToolError> {
        let query = input
            .params
            .get("query")
            .and_then(Value::as_str)
            .ok_or_else(|| ToolError::InvalidParams("missing 'query'".into()))?;
        let findings = self
            .pipeline
            .retrieve(query)
            .map_err(|e| ToolError::Failed(e.to_string()))?;
        if findings.results.is_empty() {
            return Err(ToolError::Failed("guideline index returned no results".into()));
        }
        Ok(guideline_evidence(&findings))
    }
}

/// Taxonomy queries: hierarchy, children, siblings, search.
pub struct OntologyTool {
    index: Arc<OntologyIndex>,
    fuzzy_threshold: f64,
}

impl OntologyTool {
    pub fn new(index: Arc<OntologyIndex>, fuzzy_threshold: f64) -> Self {
        OntologyTool {
            index,
            fuzzy_threshold,
        }
    }
}

impl Tool for OntologyTool {
    fn invoke(&self, input: &ToolInput<'_>) -> Result<ToolOutput, ToolError> {
        let mode: QueryMode = input
            .params
            .get("mode")
            .and_then(Value::as_str)
            .ok_or_else(|| ToolError::InvalidParams("missing 'mode'".into()))?
            .parse()
            .map_err(|e: crate::error::Error| ToolError::InvalidParams(e.to_string()))?;
        let name = input
            .params
            .get("name")
            .and_then(Value::as_str)
            .ok_or_else(|| ToolError::InvalidParams("missing 'name'".into()))?;
        let answer = self
            .index
            .query(mode, name, self.fuzzy_threshold)
            .map_err(|e| ToolError::UnknownInput(e.to_string()))?;
        Ok(ToolOutput {
            result: json!({ "answer": answer }),
            confidence: None,
            sources: vec![],
        })
    }
}
