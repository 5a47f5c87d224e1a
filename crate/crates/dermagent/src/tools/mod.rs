//! Uniform tool interface, registration, dispatch, and parameter schemas.

pub mod builtin;
pub mod fixture;
pub mod remote;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::TransportError;
use crate::evidence::{ParamMap, ToolCall, ToolId};

/// One ranked classifier prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    pub score: f64,
}

/// Structured dermoscopic concept annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub present: Vec<String>,
    pub scores: BTreeMap<String, f64>,
}

/// What a tool invocation produces before it is wrapped into evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolOutput {
    pub result: Value,
    pub confidence: Option<f64>,
    pub sources: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ToolError {
    #[error("unknown input: {0}")]
    UnknownInput(String),
    #[error("invalid params: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("tool failure: {0}")]
    Failed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamType {
    Text,
    StringList,
    Integer,
    Real,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamSpec {
    pub ty: ParamType,
    pub required: bool,
}

/// Declared metadata for one tool: id, parameter schema, whether it emits
/// calibrated confidence, and a prompt-facing description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToolDescriptor {
    pub tool_id: ToolId,
    pub param_schema: BTreeMap<String, ParamSpec>,
    pub produces_confidence: bool,
    pub description: String,
}

fn schema(entries: &[(&str, ParamType, bool)]) -> BTreeMap<String, ParamSpec> {
    entries
        .iter()
        .map(|(k, ty, required)| {
            (
                k.to_string(),
                ParamSpec {
                    ty: *ty,
                    required: *required,
                },
            )
        })
        .collect()
}

/// The standard descriptor for each tool in the roster.
pub fn descriptor(tool_id: ToolId) -> ToolDescriptor {
    let (param_schema, description) = match tool_id {
        ToolId::Panderm => (
            schema(&[("candidates", ParamType::StringList, true)]),
            "zero-shot skin disease classifier over a candidate label set; \
             returns a ranked prediction list with confidence scores",
        ),
        ToolId::Make => (
            schema(&[("features", ParamType::StringList, true)]),
            "dermoscopic concept annotator; scores a feature vocabulary and \
             returns the detected subset",
        ),
        ToolId::DermoGpt => (
            schema(&[("question", ParamType::Text, true)]),
            "dermatology-specialized visual question answering for \
             morphological description",
        ),
        ToolId::QwenVl => (
            schema(&[("question", ParamType::Text, true)]),
            "general-purpose visual question answering",
        ),
        ToolId::CaseRag => (
            schema(&[("k", ParamType::Integer, false)]),
            "retrieves visually similar diagnosed cases by embedding cosine \
             similarity",
        ),
        ToolId::GuidelineRag => (
            schema(&[("query", ParamType::Text, true)]),
            "hybrid dense+keyword retrieval over clinical guideline chunks \
             with RRF fusion and re-ranking",
        ),
        ToolId::Ontology => (
            schema(&[
                ("mode", ParamType::Text, true),
                ("name", ParamType::Text, true),
            ]),
            "skin disease taxonomy queries: hierarchy, children, siblings, \
             or fuzzy search",
        ),
    };
    ToolDescriptor {
        tool_id,
        param_schema,
        produces_confidence: tool_id.produces_confidence(),
        description: description.to_string(),
    }
}

fn value_matches(value: &Value, ty: ParamType) -> bool {
    match ty {
        ParamType::Text => value.is_string(),
        ParamType::StringList => value
            .as_array()
            .map(|a| a.iter().all(Value::is_string))
            .unwrap_or(false),
        ParamType::Integer => value.is_i64() || value.is_u64(),
        ParamType::Real => value.is_number(),
    }
}

/// Validate a call's params against a descriptor: required keys present and
/// well-typed. Extra keys are permitted (planner refinement markers).
pub fn validate_params(desc: &ToolDescriptor, params: &ParamMap) -> Result<(), ToolError> {
    for (key, spec) in &desc.param_schema {
        match params.get(key) {
            Some(value) => {
                if !value_matches(value, spec.ty) {
                    return Err(ToolError::InvalidParams(format!(
                        "param '{key}' of {} has wrong type",
                        desc.tool_id
                    )));
                }
                if spec.ty == ParamType::StringList
                    && value.as_array().map(|a| a.is_empty()).unwrap_or(false)
                {
                    return Err(ToolError::InvalidParams(format!(
                        "param '{key}' of {} must be non-empty",
                        desc.tool_id
                    )));
                }
            }
            None if spec.required => {
                return Err(ToolError::InvalidParams(format!(
                    "missing required param '{key}' for {}",
                    desc.tool_id
                )));
            }
            None => {}
        }
    }
    Ok(())
}

/// Validate a planned call against the standard descriptor table.
pub fn validate_call(call: &ToolCall) -> Result<(), ToolError> {
    validate_params(&descriptor(call.tool_id), &call.params)
}

pub struct ToolInput<'a> {
    pub image_ref: &'a str,
    pub image: Option<&'a [u8]>,
    pub params: &'a ParamMap,
}

pub trait Tool: Send + Sync {
    fn invoke(&self, input: &ToolInput<'_>) -> Result<ToolOutput, ToolError>;
}

/// Maps an image reference (plus optional bytes) to an embedding vector.
pub trait ImageEmbedder: Send + Sync {
    fn embed(&self, image_ref: &str, image: Option<&[u8]>) -> Result<Vec<f32>, ToolError>;
}

struct Registered {
    descriptor: ToolDescriptor,
    imp: Arc<dyn Tool>,
}

/// Built once, then read-only; dispatch validates params before invoking.
#[derive(Default)]
pub struct ToolRegistry {
    tools: BTreeMap<ToolId, Registered>,
}

impl ToolRegistry {
    pub fn new() -> Self {
        ToolRegistry::default()
    }

    pub fn register(
        &mut self,
        descriptor: ToolDescriptor,
        imp: Arc<dyn Tool>,
    ) -> Result<(), crate::error::Error> {
        let id = descriptor.tool_id;
        if self.tools.contains_key(&id) {
            return Err(crate::error::Error::Registration(format!(
                "tool {id} already registered"
            )));
        }
        self.tools.insert(id, Registered { descriptor, imp });
        Ok(())
    }

    pub fn is_registered(&self, id: ToolId) -> bool {
        self.tools.contains_key(&id)
    }

    pub fn registered_ids(&self) -> Vec<ToolId> {
        self.tools.keys().copied().collect()
    }

    pub fn descriptor_of(&self, id: ToolId) -> Option<&ToolDescriptor> {
        self.tools.get(&id).map(|r| &r.descriptor)
    }

    pub fn dispatch(
        &self,
        call: &ToolCall,
        image_ref: &str,
        image: Option<&[u8]>,
    ) -> Result<ToolOutput, ToolError> {
        let registered = self.tools.get(&call.tool_id).ok_or_else(|| {
            ToolError::Failed(format!("tool {} is not registered", call.tool_id))
        })?;
        validate_params(&registered.descriptor, &call.params)?;
        registered.imp.invoke(&ToolInput {
            image_ref,
            image,
            params: &call.params,
        })
    }
}
