//! Planning: turning a task scope, the evidence so far, and critic feedback
//! into the next round of tool calls, plus final answer synthesis.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::critic::{case_majority_label, panderm_top_label};
use crate::error::{Error, Result};
use crate::evidence::{
    EvidenceChain, EvidenceItem, Feedback, ParamMap, Plan, Query, TaskScope, TaskType, ToolCall,
    ToolId,
};
use crate::ontology::OntologyIndex;
use crate::remote::{ChatMessage, RemoteChat};

/// Default dermoscopic feature checklist for the concept annotator.
pub const DEFAULT_FEATURES: [&str; 8] = [
    "erythema",
    "scale",
    "pigment network",
    "blue-whitish veil",
    "dots and globules",
    "streaks",
    "regression structures",
    "vascular structures",
];

/// Everything a planner may look at when composing the next round.
pub struct PlannerContext<'a> {
    pub query: &'a Query,
    pub scope: &'a TaskScope,
    pub chain: &'a EvidenceChain,
    pub feedback: &'a [Feedback],
    /// Raw image bytes, present when the critic asked for re-injection.
    pub image: Option<&'a [u8]>,
    pub round: u32,
}

pub trait Planner: Send + Sync {
    fn plan(&self, ctx: &PlannerContext<'_>) -> Result<Plan>;
    fn synthesize(&self, ctx: &PlannerContext<'_>) -> Result<String>;
}

/// Deterministic planner: a fixed round-0 policy per task type, then
/// critic-feedback-driven refinement rounds.
pub struct RulePlanner {
    ontology: Arc<OntologyIndex>,
    features: Vec<String>,
}

impl RulePlanner {
    pub fn new(ontology: Arc<OntologyIndex>) -> Self {
        RulePlanner {
            ontology,
            features: DEFAULT_FEATURES.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn with_features(mut self, features: Vec<String>) -> Self {
        self.features = features;
        self
    }

    /// The full-taxonomy candidate list handed to the classifier when no
    /// refinement has narrowed it down.
    fn taxonomy_candidates(&self) -> Vec<String> {
        self.ontology.leaf_names()
    }

    fn round_zero_calls(&self, ctx: &PlannerContext<'_>) -> Vec<ToolCall> {
        let question = || json!(ctx.query.question);
        match ctx.scope.task_type {
            TaskType::Diagnosis => vec![
                ToolCall::new(
                    ToolId::Panderm,
                    [("candidates".to_string(), json!(self.taxonomy_candidates()))]
                        .into_iter()
                        .collect(),
                ),
                ToolCall::new(ToolId::CaseRag, ParamMap::new()),
                ToolCall::new(
                    ToolId::DermoGpt,
                    [("question".to_string(), question())].into_iter().collect(),
                ),
            ],
            TaskType::ConceptAnnotation => vec![
                ToolCall::new(
                    ToolId::Make,
                    [("features".to_string(), json!(self.features))]
                        .into_iter()
                        .collect(),
                ),
                ToolCall::new(
                    ToolId::DermoGpt,
                    [("question".to_string(), question())].into_iter().collect(),
                ),
            ],
            TaskType::Captioning => vec![
                ToolCall::new(
                    ToolId::DermoGpt,
                    [("question".to_string(), question())].into_iter().collect(),
                ),
                ToolCall::new(
                    ToolId::Panderm,
                    [("candidates".to_string(), json!(self.taxonomy_candidates()))]
                        .into_iter()
                        .collect(),
                ),
                ToolCall::new(
                    ToolId::Make,
                    [("features".to_string(), json!(self.features))]
                        .into_iter()
                        .collect(),
                ),
                ToolCall::new(ToolId::CaseRag, ParamMap::new()),
            ],
            TaskType::GeneralVqa => vec![ToolCall::new(
                ToolId::QwenVl,
                [("question".to_string(), question())].into_iter().collect(),
            )],
        }
    }

    /// Fills in params a critic suggestion left open.
    fn complete_params(&self, call: ToolCall, ctx: &PlannerContext<'_>) -> ToolCall {
        let mut params = call.params;
        match call.tool_id {
            ToolId::Panderm => {
                params
                    .entry("candidates".to_string())
                    .or_insert_with(|| json!(self.taxonomy_candidates()));
            }
            ToolId::Make => {
                params
                    .entry("features".to_string())
                    .or_insert_with(|| json!(self.features));
            }
            ToolId::DermoGpt | ToolId::QwenVl => {
                params
                    .entry("question".to_string())
                    .or_insert_with(|| json!(ctx.query.question));
            }
            ToolId::GuidelineRag => {
                params
                    .entry("query".to_string())
                    .or_insert_with(|| json!(ctx.query.question));
            }
            ToolId::Ontology => {
                let name = panderm_top_label(ctx.chain)
                    .unwrap_or_else(|| ctx.query.question.clone());
                params.entry("mode".to_string()).or_insert_with(|| json!("hierarchy"));
                params.entry("name".to_string()).or_insert_with(|| json!(name));
            }
            ToolId::CaseRag => {}
        }
        ToolCall::new(call.tool_id, params)
    }
}

/// Drops calls outside the (possibly ablated) actionable set, exact repeats
/// of already-executed calls, and within-plan duplicates.
fn dedupe_calls(calls: Vec<ToolCall>, ctx: &PlannerContext<'_>) -> Vec<ToolCall> {
    let executed: std::collections::BTreeSet<String> = ctx
        .chain
        .items()
        .iter()
        .map(|item| ToolCall::new(item.tool_id, item.params.clone()).canonical_key())
        .collect();
    let mut seen = executed;
    calls
        .into_iter()
        .filter(|call| ctx.scope.actionable_tools.contains(&call.tool_id))
        .filter(|call| seen.insert(call.canonical_key()))
        .collect()
}

impl Planner for RulePlanner {
    fn plan(&self, ctx: &PlannerContext<'_>) -> Result<Plan> {
        let raw = if ctx.round == 0 {
            self.round_zero_calls(ctx)
        } else {
            ctx.feedback
                .iter()
                .flat_map(|fb| fb.suggested_calls.iter().cloned())
                .map(|call| self.complete_params(call, ctx))
                .collect()
        };
        let mut calls = dedupe_calls(raw, ctx);
        if calls.is_empty() {
            // Every suggestion was a repeat; probe the primary tool with a
            // retry marker so the plan stays non-empty and non-duplicate.
            let tool = ctx.scope.actionable_tools.first().copied().ok_or_else(|| {
                Error::Planner(format!(
                    "no actionable tools for {}",
                    ctx.scope.task_type.as_str()
                ))
            })?;
            let mut probe = self.complete_params(ToolCall::new(tool, ParamMap::new()), ctx);
            probe.params.insert("retry".to_string(), json!(ctx.round));
            calls = vec![probe];
        }
        let plan = Plan {
            round: ctx.round,
            calls,
        };
        plan.validate()?;
        Ok(plan)
    }

    fn synthesize(&self, ctx: &PlannerContext<'_>) -> Result<String> {
        if ctx.chain.is_empty() {
            return Err(Error::Synthesis("no evidence to synthesize from".into()));
        }
        let mut lines = Vec::new();
        for tool in ToolId::ALL {
            if let Some(item) = ctx.chain.latest(tool) {
                lines.push(format!("{tool}: {}", summarize_item(item)));
            }
        }
        if ctx.scope.task_type == TaskType::Diagnosis {
            let label = self.final_diagnosis(ctx.chain).ok_or_else(|| {
                Error::Synthesis("no diagnostic evidence in chain".into())
            })?;
            lines.push(format!("diagnosis: {label}"));
        }
        if lines.is_empty() {
            // Every call failed; say so rather than fabricating findings.
            lines.push("no usable evidence was gathered".to_string());
        }
        Ok(lines.join("\n"))
    }
}

impl RulePlanner {
    /// Final label: the top-1 prediction of the highest-confidence
    /// classifier item, later items winning ties (refinements supersede),
    /// falling back to the case majority.
    fn final_diagnosis(&self, chain: &EvidenceChain) -> Option<String> {
        let best = chain
            .items()
            .iter()
            .filter(|item| item.tool_id == ToolId::Panderm && !item.is_failed())
            .filter_map(|item| {
                let label = item
                    .result
                    .get("predictions")?
                    .as_array()?
                    .first()?
                    .get("label")?
                    .as_str()?
                    .to_string();
                Some((item.confidence.unwrap_or(0.0), item.seq, label))
            })
            .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then_with(|| a.1.cmp(&b.1)));
        let label = match best {
            Some((_, _, label)) => label,
            None => case_majority_label(chain)?,
        };
        Some(
            self.ontology
                .canonical(&label)
                .map(str::to_string)
                .unwrap_or(label),
        )
    }
}

fn summarize_item(item: &EvidenceItem) -> String {
    let conf = item
        .confidence
        .map(|c| format!(" ({c:.2})"))
        .unwrap_or_default();
    let body = match item.tool_id {
        ToolId::Panderm => item
            .result
            .get("predictions")
            .and_then(Value::as_array)
            .and_then(|p| p.first())
            .and_then(|p| p.get("label"))
            .and_then(Value::as_str)
            .unwrap_or("no prediction")
            .to_string(),
        ToolId::Make => item
            .result
            .get("present")
            .and_then(Value::as_array)
            .map(|a| {
                a.iter()
                    .filter_map(Value::as_str)
                    .collect::<Vec<_>>()
                    .join(", ")
            })
            .unwrap_or_else(|| "no features".into()),
        ToolId::DermoGpt | ToolId::QwenVl => item
            .result
            .get("text")
            .and_then(Value::as_str)
            .unwrap_or("no text")
            .to_string(),
        ToolId::CaseRag => item
            .result
            .get("majority_label")
            .and_then(Value::as_str)
            .map(|l| format!("similar cases suggest {l}"))
            .unwrap_or_else(|| "no neighbors".into()),
        ToolId::GuidelineRag => item
            .result
            .get("passages")
            .and_then(Value::as_array)
            .and_then(|p| p.first())
            .and_then(Value::as_str)
            .unwrap_or("no passages")
            .to_string(),
        ToolId::Ontology => serde_json::to_string(&item.result).unwrap_or_default(),
    };
    format!("{body}{conf}")
}

/// Wire form of one planned call in a remote planner's reply.
#[derive(Debug, Serialize, Deserialize)]
struct WireCall {
    tool: ToolId,
    #[serde(default)]
    params: ParamMap,
}

/// Serialize a plan's calls as the canonical wire document: a JSON array of
/// `{tool, params}` objects.
pub fn serialize_plan(plan: &Plan) -> String {
    let wire: Vec<WireCall> = plan
        .calls
        .iter()
        .map(|c| WireCall {
            tool: c.tool_id,
            params: c.params.clone(),
        })
        .collect();
    serde_json::to_string(&wire).expect("plan serializes")
}

/// Parse a planner reply into a plan. Tolerates markdown code fences and
/// surrounding prose; the first balanced JSON array is taken.
pub fn parse_plan_document(text: &str, round: u32) -> Result<Plan> {
    let body = extract_json_array(text)
        .ok_or_else(|| Error::Parse("no JSON array found in plan document".into()))?;
    let wire: Vec<WireCall> =
        serde_json::from_str(body).map_err(|e| Error::Parse(format!("plan document: {e}")))?;
    let plan = Plan {
        round,
        calls: wire
            .into_iter()
            .map(|w| ToolCall::new(w.tool, w.params))
            .collect(),
    };
    plan.validate()?;
    Ok(plan)
}

/// First balanced top-level `[...]` span, ignoring brackets inside strings.
fn extract_json_array(text: &str) -> Option<&str> {
    let bytes = text.as_bytes();
    let start = text.find('[')?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (offset, &byte) in bytes[start..].iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if byte == b'\\' {
                escaped = true;
            } else if byte == b'"' {
                in_string = false;
            }
            continue;
        }
        match byte {
            b'"' => in_string = true,
            b'[' => depth += 1,
            b']' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + offset + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Planner backed by a remote chat model speaking the wire protocol. Param
/// completion and dedupe still run locally so plan invariants hold
/// regardless of what the model emits.
pub struct RemotePlanner {
    chat: RemoteChat,
    rules: RulePlanner,
}

impl RemotePlanner {
    pub fn new(chat: RemoteChat, ontology: Arc<OntologyIndex>) -> Self {
        RemotePlanner {
            chat,
            rules: RulePlanner::new(ontology),
        }
    }

    fn context_block(ctx: &PlannerContext<'_>) -> String {
        json!({
            "question": ctx.query.question,
            "image_ref": ctx.query.image_ref,
            "task_type": ctx.scope.task_type,
            "round": ctx.round,
            "evidence": ctx.chain.items(),
            "feedback": ctx.feedback,
        })
        .to_string()
    }
}

impl Planner for RemotePlanner {
    fn plan(&self, ctx: &PlannerContext<'_>) -> Result<Plan> {
        let messages = vec![
            ChatMessage::system(
                "You plan dermatology tool calls. Reply with only a JSON array of \
                 {\"tool\": string, \"params\": object} entries.",
            ),
            ChatMessage::user(Self::context_block(ctx)),
        ];
        let reply = self.chat.chat(messages, ctx.image)?;
        let parsed = parse_plan_document(&reply, ctx.round)?;
        let completed: Vec<ToolCall> = parsed
            .calls
            .into_iter()
            .map(|call| self.rules.complete_params(call, ctx))
            .collect();
        let calls = dedupe_calls(completed, ctx);
        if calls.is_empty() {
            return self.rules.plan(ctx);
        }
        let plan = Plan {
            round: ctx.round,
            calls,
        };
        plan.validate()?;
        Ok(plan)
    }

    fn synthesize(&self, ctx: &PlannerContext<'_>) -> Result<String> {
        let messages = vec![
            ChatMessage::system(
                "Write a concise clinical answer grounded only in the evidence JSON. \
                 For diagnosis tasks end with a line 'diagnosis: <label>'.",
            ),
            ChatMessage::user(Self::context_block(ctx)),
        ];
        let answer = self.chat.chat(messages, None)?;
        if answer.trim().is_empty() {
            return Err(Error::Synthesis("remote planner returned empty answer".into()));
        }
        Ok(answer)
    }
}
