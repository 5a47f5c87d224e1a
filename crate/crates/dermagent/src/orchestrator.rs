//! The plan-execute-reflect loop: task analysis, bounded retry rounds,
//! round execution with per-call timeouts, and trace emission.

use std::collections::BTreeSet;
use std::io::Write;
use std::sync::mpsc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde_json::json;

use crate::critic::{Critic, CriticThresholds};
use crate::error::{Error, Result};
use crate::evidence::{
    EvidenceChain, EvidenceItem, Feedback, Plan, Query, Response, TaskScope, TaskType, ToolId,
    ERROR_KEY,
};
use crate::planner::{Planner, PlannerContext};
use crate::tools::{ToolError, ToolRegistry};
use crate::trace::{TraceEvent, TraceWriter};

pub const DEFAULT_K_MAX: u32 = 2;
pub const DEFAULT_PARALLELISM: usize = 4;
pub const DEFAULT_CALL_TIMEOUT: Duration = Duration::from_secs(60);

/// Keyword rules mapping a question to its task type; first match wins.
pub fn classify_question(question: &str) -> TaskType {
    let q = question.to_lowercase();
    const DIAGNOSIS: [&str; 4] = ["diagnos", "what disease", "what condition", "identify"];
    const CONCEPT: [&str; 4] = ["concept", "feature", "dermoscopic structure", "annotate"];
    const CAPTION: [&str; 3] = ["caption", "describe", "report"];
    if DIAGNOSIS.iter().any(|kw| q.contains(kw)) {
        TaskType::Diagnosis
    } else if CONCEPT.iter().any(|kw| q.contains(kw)) {
        TaskType::ConceptAnnotation
    } else if CAPTION.iter().any(|kw| q.contains(kw)) {
        TaskType::Captioning
    } else {
        TaskType::GeneralVqa
    }
}

/// Tools worth invoking for a task, in planner preference order.
pub fn actionable_tools(task: TaskType) -> Vec<ToolId> {
    match task {
        TaskType::Diagnosis => vec![
            ToolId::Panderm,
            ToolId::CaseRag,
            ToolId::DermoGpt,
            ToolId::GuidelineRag,
        ],
        TaskType::ConceptAnnotation => {
            vec![ToolId::Make, ToolId::DermoGpt, ToolId::GuidelineRag]
        }
        TaskType::Captioning => vec![
            ToolId::DermoGpt,
            ToolId::Panderm,
            ToolId::Make,
            ToolId::CaseRag,
            ToolId::GuidelineRag,
        ],
        TaskType::GeneralVqa => vec![ToolId::QwenVl, ToolId::DermoGpt],
    }
}

/// Tools whose absence from the chain trips the coverage gate.
pub fn required_tools(task: TaskType) -> BTreeSet<ToolId> {
    match task {
        TaskType::Diagnosis => BTreeSet::from([ToolId::Panderm, ToolId::CaseRag]),
        TaskType::ConceptAnnotation => BTreeSet::from([ToolId::Make]),
        TaskType::Captioning => BTreeSet::from([ToolId::DermoGpt, ToolId::Panderm]),
        TaskType::GeneralVqa => BTreeSet::new(),
    }
}

/// Classify the question and attach the task's tool tables.
pub fn analyze_task(query: &Query) -> TaskScope {
    let task_type = classify_question(&query.question);
    TaskScope {
        task_type,
        required_tools: required_tools(task_type),
        actionable_tools: actionable_tools(task_type),
    }
}

#[derive(Debug, Clone)]
pub struct OrchestratorConfig {
    /// Maximum retry rounds after the initial one; total rounds <= k_max + 1.
    pub k_max: u32,
    /// Ablation switch: tools outside this set are invisible to planning,
    /// coverage, and dispatch.
    pub enabled_tools: BTreeSet<ToolId>,
    pub thresholds: CriticThresholds,
    pub parallelism_limit: usize,
    pub call_timeout: Duration,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        OrchestratorConfig {
            k_max: DEFAULT_K_MAX,
            enabled_tools: ToolId::ALL.into_iter().collect(),
            thresholds: CriticThresholds::default(),
            parallelism_limit: DEFAULT_PARALLELISM,
            call_timeout: DEFAULT_CALL_TIMEOUT,
        }
    }
}

pub struct Orchestrator {
    registry: Arc<ToolRegistry>,
    planner: Box<dyn Planner>,
    critic: Box<dyn Critic>,
    config: OrchestratorConfig,
}

impl Orchestrator {
    pub fn new(
        registry: Arc<ToolRegistry>,
        planner: Box<dyn Planner>,
        critic: Box<dyn Critic>,
        config: OrchestratorConfig,
    ) -> Self {
        Orchestrator {
            registry,
            planner,
            critic,
            config,
        }
    }

    pub fn config(&self) -> &OrchestratorConfig {
        &self.config
    }

    pub fn run(&self, query: &Query) -> Result<Response> {
        self.run_inner(query, None)
    }

    /// Like `run`, but streams evidence items and round/critic events to
    /// `sink` as line-delimited JSON.
    pub fn run_traced(&self, query: &Query, sink: &mut dyn Write) -> Result<Response> {
        self.run_inner(query, Some(sink))
    }

    fn run_inner(&self, query: &Query, sink: Option<&mut dyn Write>) -> Result<Response> {
        query.validate()?;
        let scope = analyze_task(query).restrict_to(&self.config.enabled_tools);
        scope.validate()?;

        let mut trace = sink.map(TraceWriter::new);
        let mut chain = EvidenceChain::new();
        let mut feedback: Vec<Feedback> = Vec::new();
        let mut image_payload: Option<Vec<u8>> = None;
        let mut k = 0u32;

        loop {
            if let Some(t) = trace.as_mut() {
                t.write_event(&TraceEvent::RoundStart { k })?;
            }
            let ctx = PlannerContext {
                query,
                scope: &scope,
                chain: &chain,
                feedback: &feedback,
                image: image_payload.as_deref(),
                round: k,
            };
            let plan = self.planner.plan(&ctx).map_err(|e| Error::Orchestration {
                message: format!("planning failed in round {k}: {e}"),
                partial: chain.clone(),
            })?;
            chain = self.execute_round(&plan, query, image_payload.as_deref(), chain, &mut trace)?;

            let verdict = self.critic.review(&chain, &scope);
            if let Some(t) = trace.as_mut() {
                t.write_event(&TraceEvent::Critic {
                    k,
                    f_conf: verdict.f_conf,
                    f_cov: verdict.f_cov,
                    f_con: verdict.f_con,
                    feedback: verdict.feedback.clone(),
                })?;
                t.write_event(&TraceEvent::RoundEnd { k })?;
            }

            if !verdict.any() || k >= self.config.k_max {
                break;
            }
            feedback = verdict.feedback;
            if feedback.iter().any(|f| f.reinject_image) && image_payload.is_none() {
                // Best effort: references that are not local files stay
                // reference-only.
                image_payload = std::fs::read(&query.image_ref).ok();
            }
            k += 1;
        }

        let ctx = PlannerContext {
            query,
            scope: &scope,
            chain: &chain,
            feedback: &[],
            image: None,
            round: k,
        };
        let answer = self
            .planner
            .synthesize(&ctx)
            .map_err(|e| Error::Orchestration {
                message: format!("synthesis failed: {e}"),
                partial: chain.clone(),
            })?;
        let citations = chain.citations();
        let response = Response {
            answer,
            evidence: chain,
            rounds_used: k + 1,
            citations,
        };
        response.validate()?;
        Ok(response)
    }

    /// Execute one plan. Items are appended in plan order with globally
    /// monotonic sequence numbers; a failed call becomes an error-marked
    /// item rather than aborting the round.
    fn execute_round(
        &self,
        plan: &Plan,
        query: &Query,
        image: Option<&[u8]>,
        mut chain: EvidenceChain,
        trace: &mut Option<TraceWriter<&mut dyn Write>>,
    ) -> Result<EvidenceChain> {
        let outputs = if self.config.parallelism_limit <= 1 || plan.calls.len() == 1 {
            plan.calls
                .iter()
                .map(|call| {
                    self.registry
                        .dispatch(call, &query.image_ref, image)
                        .map_err(|e| e.to_string())
                })
                .collect()
        } else {
            self.execute_parallel(plan, query, image)
        };

        for (call, outcome) in plan.calls.iter().zip(outputs) {
            let item = match outcome {
                Ok(output) => EvidenceItem {
                    seq: chain.next_seq(),
                    round: plan.round,
                    tool_id: call.tool_id,
                    params: call.params.clone(),
                    result: output.result,
                    confidence: output.confidence.map(|c| c.clamp(0.0, 1.0)),
                    sources: output.sources,
                },
                Err(message) => EvidenceItem {
                    seq: chain.next_seq(),
                    round: plan.round,
                    tool_id: call.tool_id,
                    params: call.params.clone(),
                    result: json!({ ERROR_KEY: message }),
                    confidence: None,
                    sources: vec![],
                },
            };
            if let Some(t) = trace.as_mut() {
                t.write_item(&item)?;
            }
            chain = chain.append(item)?;
        }
        Ok(chain)
    }

    /// Runs calls on worker threads, at most `parallelism_limit` at a time,
    /// with a shared per-batch deadline. A call that misses the deadline is
    /// reported as a timeout; its thread is left to finish detached.
    fn execute_parallel(
        &self,
        plan: &Plan,
        query: &Query,
        image: Option<&[u8]>,
    ) -> Vec<std::result::Result<crate::tools::ToolOutput, String>> {
        let image: Option<Arc<Vec<u8>>> = image.map(|b| Arc::new(b.to_vec()));
        let mut results: Vec<std::result::Result<crate::tools::ToolOutput, String>> =
            (0..plan.calls.len())
                .map(|_| Err(ToolError::Failed("not executed".into()).to_string()))
                .collect();

        for (batch_start, batch) in plan
            .calls
            .chunks(self.config.parallelism_limit)
            .enumerate()
            .map(|(i, c)| (i * self.config.parallelism_limit, c))
        {
            let (tx, rx) = mpsc::channel();
            for (offset, call) in batch.iter().enumerate() {
                let tx = tx.clone();
                let registry = Arc::clone(&self.registry);
                let call = call.clone();
                let image_ref = query.image_ref.clone();
                let image = image.clone();
                std::thread::spawn(move || {
                    let out = registry
                        .dispatch(&call, &image_ref, image.as_deref().map(Vec::as_slice))
                        .map_err(|e| e.to_string());
                    let _ = tx.send((offset, out));
                });
            }
            drop(tx);
            let deadline = Instant::now() + self.config.call_timeout;
            let mut received = 0;
            while received < batch.len() {
                let remaining = deadline.saturating_duration_since(Instant::now());
                match rx.recv_timeout(remaining) {
                    Ok((offset, out)) => {
                        results[batch_start + offset] = out;
                        received += 1;
                    }
                    Err(_) => break,
                }
            }
            for (offset, slot) in results[batch_start..batch_start + batch.len()]
                .iter_mut()
                .enumerate()
            {
                let _ = offset;
                if matches!(slot, Err(msg) if msg.contains("not executed")) {
                    *slot = Err(format!(
                        "timed out after {:?}",
                        self.config.call_timeout
                    ));
                }
            }
        }
        results
    }
}
