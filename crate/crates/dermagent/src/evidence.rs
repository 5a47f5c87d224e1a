//! Shared domain types: queries, task scopes, plans, evidence items, the
//! append-only evidence chain, critic feedback, and final responses.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Tool parameters. A `BTreeMap` keeps serialization key order stable.
pub type ParamMap = BTreeMap<String, Value>;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum ToolId {
    Panderm,
    Make,
    DermoGpt,
    QwenVl,
    CaseRag,
    GuidelineRag,
    Ontology,
}

impl ToolId {
    pub const ALL: [ToolId; 7] = [
        ToolId::Panderm,
        ToolId::Make,
        ToolId::DermoGpt,
        ToolId::QwenVl,
        ToolId::CaseRag,
        ToolId::GuidelineRag,
        ToolId::Ontology,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ToolId::Panderm => "panderm",
            ToolId::Make => "make",
            ToolId::DermoGpt => "dermo_gpt",
            ToolId::QwenVl => "qwen_vl",
            ToolId::CaseRag => "case_rag",
            ToolId::GuidelineRag => "guideline_rag",
            ToolId::Ontology => "ontology",
        }
    }

    /// Tools whose evidence carries a calibrated unit-interval confidence.
    pub fn produces_confidence(&self) -> bool {
        matches!(self, ToolId::Panderm | ToolId::CaseRag | ToolId::GuidelineRag)
    }

    /// Tools whose evidence must carry non-empty provenance.
    pub fn is_retrieval(&self) -> bool {
        matches!(self, ToolId::CaseRag | ToolId::GuidelineRag)
    }
}

impl fmt::Display for ToolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ToolId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "panderm" => Ok(ToolId::Panderm),
            "make" => Ok(ToolId::Make),
            "dermo_gpt" => Ok(ToolId::DermoGpt),
            "qwen_vl" => Ok(ToolId::QwenVl),
            "case_rag" => Ok(ToolId::CaseRag),
            "guideline_rag" => Ok(ToolId::GuidelineRag),
            "ontology" => Ok(ToolId::Ontology),
            other => Err(Error::Validation(format!("unknown tool id: {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskType {
    Diagnosis,
    ConceptAnnotation,
    Captioning,
    GeneralVqa,
}

impl TaskType {
    pub fn as_str(&self) -> &'static str {
        match self {
            TaskType::Diagnosis => "diagnosis",
            TaskType::ConceptAnnotation => "concept_annotation",
            TaskType::Captioning => "captioning",
            TaskType::GeneralVqa => "general_vqa",
        }
    }
}

/// The user's query tuple: an image reference plus a clinical question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub image_ref: String,
    pub question: String,
    /// Whether raw image bytes accompany planner context this round.
    #[serde(default)]
    pub attach_image: bool,
}

impl Query {
    pub fn new(image_ref: impl Into<String>, question: impl Into<String>) -> Result<Self> {
        let query = Query {
            image_ref: image_ref.into(),
            question: question.into(),
            attach_image: false,
        };
        query.validate()?;
        Ok(query)
    }

    pub fn validate(&self) -> Result<()> {
        if self.question.trim().is_empty() {
            return Err(Error::Validation("question must be non-empty".into()));
        }
        if self.attach_image && std::fs::metadata(&self.image_ref).is_err() {
            return Err(Error::Validation(format!(
                "attach_image set but image_ref is not readable: {}",
                self.image_ref
            )));
        }
        Ok(())
    }
}

/// The analyzed problem scope: task type plus which tools matter for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskScope {
    pub task_type: TaskType,
    pub required_tools: BTreeSet<ToolId>,
    pub actionable_tools: Vec<ToolId>,
}

impl TaskScope {
    pub fn validate(&self) -> Result<()> {
        for tool in &self.required_tools {
            if !self.actionable_tools.contains(tool) {
                return Err(Error::Validation(format!(
                    "required tool {tool} is not actionable for {}",
                    self.task_type.as_str()
                )));
            }
        }
        Ok(())
    }

    /// Drops ablated tools from both tool sets. Disabled tools are excluded
    /// from coverage requirements.
    pub fn restrict_to(&self, enabled: &BTreeSet<ToolId>) -> TaskScope {
        TaskScope {
            task_type: self.task_type,
            required_tools: self
                .required_tools
                .iter()
                .copied()
                .filter(|t| enabled.contains(t))
                .collect(),
            actionable_tools: self
                .actionable_tools
                .iter()
                .copied()
                .filter(|t| enabled.contains(t))
                .collect(),
        }
    }
}

/// One planned tool invocation with its tool-specific parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool_id: ToolId,
    #[serde(default)]
    pub params: ParamMap,
}

impl ToolCall {
    pub fn new(tool_id: ToolId, params: ParamMap) -> Self {
        ToolCall { tool_id, params }
    }

    /// Canonical key for exact-duplicate detection and fixture lookup:
    /// sorted keys, casefolded string values, sorted list values.
    pub fn canonical_key(&self) -> String {
        format!(
            "{}\u{1f}{}",
            self.tool_id.as_str(),
            serde_json::to_string(&canonicalize_params(&self.params)).expect("params serialize")
        )
    }
}

/// Canonical form of a param map: strings casefolded, lists sorted by their
/// canonical JSON text, nested maps canonicalized recursively.
pub fn canonicalize_params(params: &ParamMap) -> ParamMap {
    params
        .iter()
        .map(|(k, v)| (k.clone(), canonicalize_value(v)))
        .collect()
}

fn canonicalize_value(value: &Value) -> Value {
    match value {
        Value::String(s) => Value::String(s.to_lowercase()),
        Value::Array(items) => {
            let mut canon: Vec<Value> = items.iter().map(canonicalize_value).collect();
            canon.sort_by_key(|v| serde_json::to_string(v).unwrap_or_default());
            Value::Array(canon)
        }
        Value::Object(map) => {
            let canon: serde_json::Map<String, Value> = map
                .iter()
                .map(|(k, v)| (k.clone(), canonicalize_value(v)))
                .collect();
            Value::Object(canon)
        }
        other => other.clone(),
    }
}

/// One round's coherent set of tool calls.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub round: u32,
    pub calls: Vec<ToolCall>,
}

impl Plan {
    pub fn validate(&self) -> Result<()> {
        if self.calls.is_empty() {
            return Err(Error::Validation("plan must contain at least one call".into()));
        }
        Ok(())
    }
}

/// Result payload marker for a failed tool invocation.
pub const ERROR_KEY: &str = "error";

/// A verified (or failed) finding from one executed tool call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceItem {
    /// Monotonic sequence number across the whole run.
    pub seq: u64,
    pub round: u32,
    pub tool_id: ToolId,
    pub params: ParamMap,
    pub result: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    pub sources: Vec<String>,
}

impl EvidenceItem {
    pub fn is_failed(&self) -> bool {
        self.result
            .as_object()
            .map(|o| o.contains_key(ERROR_KEY))
            .unwrap_or(false)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(conf) = self.confidence {
            if !(0.0..=1.0).contains(&conf) {
                return Err(Error::Validation(format!(
                    "confidence {conf} outside [0,1] for {}",
                    self.tool_id
                )));
            }
        }
        if self.is_failed() {
            return Ok(());
        }
        if self.tool_id.produces_confidence() && self.confidence.is_none() {
            return Err(Error::Validation(format!(
                "missing confidence on scored tool {}",
                self.tool_id
            )));
        }
        if self.tool_id.is_retrieval() && self.sources.is_empty() {
            return Err(Error::Validation(format!(
                "retrieval item from {} has no sources",
                self.tool_id
            )));
        }
        Ok(())
    }
}

/// Append-only, source-attributed log of tool findings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvidenceChain {
    items: Vec<EvidenceItem>,
}

impl EvidenceChain {
    pub fn new() -> Self {
        EvidenceChain::default()
    }

    pub fn from_items(items: Vec<EvidenceItem>) -> Self {
        EvidenceChain { items }
    }

    pub fn items(&self) -> &[EvidenceItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn next_seq(&self) -> u64 {
        self.items.len() as u64
    }

    /// Returns a new chain with `item` appended; prior items are untouched.
    pub fn append(&self, item: EvidenceItem) -> Result<EvidenceChain> {
        item.validate()?;
        let mut items = self.items.clone();
        items.push(item);
        Ok(EvidenceChain { items })
    }

    pub fn has_tool(&self, tool: ToolId) -> bool {
        self.items.iter().any(|i| i.tool_id == tool)
    }

    /// Latest non-failed item produced by `tool`.
    pub fn latest(&self, tool: ToolId) -> Option<&EvidenceItem> {
        self.items
            .iter()
            .rev()
            .find(|i| i.tool_id == tool && !i.is_failed())
    }

    /// Unique provenance strings in chain order.
    pub fn citations(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for item in &self.items {
            for src in &item.sources {
                if seen.insert(src.clone()) {
                    out.push(src.clone());
                }
            }
        }
        out
    }
}

/// Append a validated item, producing the extended chain.
pub fn append_evidence(chain: &EvidenceChain, item: EvidenceItem) -> Result<EvidenceChain> {
    chain.append(item)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    Confidence,
    Coverage,
    Conflict,
}

impl Gate {
    pub fn as_str(&self) -> &'static str {
        match self {
            Gate::Confidence => "confidence",
            Gate::Coverage => "coverage",
            Gate::Conflict => "conflict",
        }
    }
}

/// Directional critique emitted when a gate fires.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    pub gate: Gate,
    pub message: String,
    pub suggested_calls: Vec<ToolCall>,
    pub reinject_image: bool,
}

/// Final answer with its full evidence chain and harvested citations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub answer: String,
    pub evidence: EvidenceChain,
    pub rounds_used: u32,
    pub citations: Vec<String>,
}

impl Response {
    pub fn validate(&self) -> Result<()> {
        for citation in &self.citations {
            let found = self
                .evidence
                .items()
                .iter()
                .any(|i| i.sources.iter().any(|s| s == citation));
            if !found {
                return Err(Error::Validation(format!(
                    "citation '{citation}' not present in any evidence item"
                )));
            }
        }
        Ok(())
    }
}
