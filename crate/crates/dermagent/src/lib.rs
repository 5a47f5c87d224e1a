//! Agentic engine for evidence-grounded dermatological image analysis.
//!
//! A plan-execute-reflect loop coordinates a roster of specialist tools
//! (classifier, concept annotator, VQA backends, case and guideline
//! retrieval, a disease taxonomy) under a deterministic three-gate critic,
//! producing answers whose every claim traces back to an evidence item.

pub mod cases;
pub mod config;
pub mod critic;
pub mod error;
pub mod evidence;
pub mod guidelines;
pub mod harness;
pub mod metrics;
pub mod ontology;
pub mod orchestrator;
pub mod planner;
pub mod remote;
pub mod text;
pub mod tools;
pub mod trace;

pub use error::{Error, Result};
pub use evidence::{
    EvidenceChain, EvidenceItem, Feedback, Gate, Plan, Query, Response, TaskScope, TaskType,
    ToolCall, ToolId,
};
pub use orchestrator::{analyze_task, Orchestrator, OrchestratorConfig};
