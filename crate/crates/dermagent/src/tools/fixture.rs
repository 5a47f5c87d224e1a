//! Fixture-backed tools: deterministic stand-ins for the perception models,
//! keyed on (tool, image, canonicalized params).
//!
//! Fixture file: line-delimited JSON records
//! `{tool_id, image_ref, params, result}`. A record with empty params acts
//! as the default for its (tool, image) pair when no exact params match.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ImageEmbedder, Prediction, Tool, ToolError, ToolInput, ToolOutput};
use crate::error::{Error, Result};
use crate::evidence::{canonicalize_params, ParamMap, ToolId};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub tool_id: ToolId,
    pub image_ref: String,
    #[serde(default)]
    pub params: ParamMap,
    pub result: Value,
}

#[derive(Debug, Default)]
pub struct FixtureStore {
    records: BTreeMap<(ToolId, String, String), Value>,
}

impl FixtureStore {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::read(file)
    }

    pub fn read(reader: impl Read) -> Result<Self> {
        let mut store = FixtureStore::default();
        for (lineno, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: FixtureRecord = serde_json::from_str(&line)
                .map_err(|e| Error::Parse(format!("fixture line {}: {e}", lineno + 1)))?;
            store.insert(record);
        }
        Ok(store)
    }

    pub fn insert(&mut self, record: FixtureRecord) {
        let key = (
            record.tool_id,
            record.image_ref.clone(),
            params_key(&record.params),
        );
        self.records.insert(key, record.result);
    }

    /// Exact (tool, image, params) lookup, falling back to the (tool,
    /// image) default record with empty params.
    pub fn lookup(
        &self,
        tool_id: ToolId,
        image_ref: &str,
        params: &ParamMap,
    ) -> std::result::Result<&Value, ToolError> {
        let exact = (tool_id, image_ref.to_string(), params_key(params));
        if let Some(result) = self.records.get(&exact) {
            return Ok(result);
        }
        let default = (tool_id, image_ref.to_string(), params_key(&ParamMap::new()));
        self.records.get(&default).ok_or_else(|| {
            ToolError::UnknownInput(format!("no fixture for {tool_id} on '{image_ref}'"))
        })
    }
}

fn params_key(params: &ParamMap) -> String {
    serde_json::to_string(&canonicalize_params(params)).expect("params serialize")
}

fn string_list(params: &ParamMap, key: &str) -> std::result::Result<Vec<String>, ToolError> {
    params
        .get(key)
        .and_then(Value::as_array)
        .map(|a| {
            a.iter()
                .filter_map(Value::as_str)
                .map(str::to_string)
                .collect()
        })
        .ok_or_else(|| ToolError::InvalidParams(format!("missing string list '{key}'")))
}

fn score_map(result: &Value) -> std::result::Result<BTreeMap<String, f64>, ToolError> {
    result
        .get("scores")
        .and_then(Value::as_object)
        .map(|m| {
            m.iter()
                .filter_map(|(k, v)| v.as_f64().map(|s| (k.to_lowercase(), s)))
                .collect()
        })
        .ok_or_else(|| ToolError::Failed("fixture record lacks a 'scores' object".into()))
}

/// Fixture-backed zero-shot classifier. The fixture result holds a
/// per-label score map; requested candidates absent from the map score 0.
pub struct FixtureClassifier {
    store: Arc<FixtureStore>,
}

impl FixtureClassifier {
    pub fn new(store: Arc<FixtureStore>) -> Self {
        FixtureClassifier { store }
    }

    pub fn classify(
        &self,
        image_ref: &str,
        params: &ParamMap,
        candidates: &[String],
    ) -> std::result::Result<Vec<Prediction>, ToolError> {
        if candidates.is_empty() {
            return Err(ToolError::InvalidParams("candidates must be non-empty".into()));
        }
        let lookup_params: ParamMap = [(
            "candidates".to_string(),
            params.get("candidates").cloned().unwrap_or(Value::Null),
        )]
        .into_iter()
        .collect();
        let result = self.store.lookup(ToolId::Panderm, image_ref, &lookup_params)?;
        let scores = score_map(result)?;
        let mut predictions: Vec<Prediction> = candidates
            .iter()
            .map(|label| Prediction {
                label: label.clone(),
                score: scores.get(&label.to_lowercase()).copied().unwrap_or(0.0),
            })
            .collect();
        predictions.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap()
                .then_with(|| a.label.cmp(&b.label))
        });
        Ok(predictions)
    }
}

impl Tool for FixtureClassifier {
    fn invoke(&self, input: &ToolInput<'_>) -> std::result::Result<ToolOutput, ToolError> {
        let candidates = string_list(input.params, "candidates")?;
        let predictions = self.classify(input.image_ref, input.params, &candidates)?;
        let confidence = predictions.first().map(|p| p.score.clamp(0.0, 1.0));
        Ok(ToolOutput {
            result: json!({ "predictions": predictions }),
            confidence,
            sources: vec![],
        })
    }
}

/// Fixture-backed concept annotator: present = {f : score_f >= threshold}.
pub struct FixtureAnnotator {
    store: Arc<FixtureStore>,
    threshold: f64,
}

impl FixtureAnnotator {
    pub fn new(store: Arc<FixtureStore>, threshold: f64) -> Self {
        FixtureAnnotator { store, threshold }
    }

    pub fn annotate(
        &self,
        image_ref: &str,
        features: &[String],
    ) -> std::result::Result<super::AnnotationSet, ToolError> {
        if features.is_empty() {
            return Err(ToolError::InvalidParams("features must be non-empty".into()));
        }
        let result = self.store.lookup(ToolId::Make, image_ref, &ParamMap::new())?;
        let known = score_map(result)?;
        let scores: BTreeMap<String, f64> = features
            .iter()
            .map(|f| (f.clone(), known.get(&f.to_lowercase()).copied().unwrap_or(0.0)))
            .collect();
        let present = features
            .iter()
            .filter(|f| scores[*f] >= self.threshold)
            .cloned()
            .collect();
        Ok(super::AnnotationSet { present, scores })
    }
}

impl Tool for FixtureAnnotator {
    fn invoke(&self, input: &ToolInput<'_>) -> std::result::Result<ToolOutput, ToolError> {
        let features = string_list(input.params, "features")?;
        let annotation = self.annotate(input.image_ref, &features)?;
        Ok(ToolOutput {
            result: json!({
                "present": annotation.present,
                "scores": annotation.scores,
            }),
            confidence: None,
            sources: vec![],
        })
    }
}

/// Fixture-backed free-text VQA for either backend.
pub struct FixtureVqa {
    store: Arc<FixtureStore>,
    tool_id: ToolId,
}

impl FixtureVqa {
    pub fn new(store: Arc<FixtureStore>, tool_id: ToolId) -> Self {
        FixtureVqa { store, tool_id }
    }
}

impl Tool for FixtureVqa {
    fn invoke(&self, input: &ToolInput<'_>) -> std::result::Result<ToolOutput, ToolError> {
        let question = input
            .params
            .get("question")
            .and_then(Value::as_str)
            .ok_or_else(|| ToolError::InvalidParams("missing 'question'".into()))?;
        if question.trim().is_empty() {
            return Err(ToolError::InvalidParams("question must be non-empty".into()));
        }
        let lookup_params: ParamMap = [("question".to_string(), json!(question))]
            .into_iter()
            .collect();
        let result = self.store.lookup(self.tool_id, input.image_ref, &lookup_params)?;
        let text = result
            .get("text")
            .and_then(Value::as_str)
            .ok_or_else(|| ToolError::Failed("fixture record lacks 'text'".into()))?;
        Ok(ToolOutput {
            result: json!({"text": text}),
            confidence: None,
            sources: vec![],
        })
    }
}

/// Image embeddings from a line-delimited file `{image_ref, embedding}`.
#[derive(Debug, Default)]
pub struct FixtureImageEmbedder {
    embeddings: BTreeMap<String, Vec<f32>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EmbeddingRecord {
    image_ref: String,
    embedding: Vec<f32>,
}

impl FixtureImageEmbedder {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        let mut embeddings = BTreeMap::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: EmbeddingRecord = serde_json::from_str(&line)
                .map_err(|e| Error::Parse(format!("embedding line {}: {e}", lineno + 1)))?;
            embeddings.insert(record.image_ref, record.embedding);
        }
        Ok(FixtureImageEmbedder { embeddings })
    }

    pub fn from_map(embeddings: BTreeMap<String, Vec<f32>>) -> Self {
        FixtureImageEmbedder { embeddings }
    }
}

impl ImageEmbedder for FixtureImageEmbedder {
    fn embed(&self, image_ref: &str, _image: Option<&[u8]>) -> std::result::Result<Vec<f32>, ToolError> {
        self.embeddings
            .get(image_ref)
            .cloned()
            .ok_or_else(|| ToolError::UnknownInput(format!("no embedding for '{image_ref}'")))
    }
}
