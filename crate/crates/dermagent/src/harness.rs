//! Evaluation harness: batch runs over a manifest of queries with gold
//! annotations, plus single-tool ablation.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::Runtime;
use crate::error::{Error, Result};
use crate::evidence::{Query, Response, ToolId};
use crate::metrics::{accuracy, f1_macro, normalize_label, rouge_l};

/// One manifest line: a query plus whichever gold annotations the task has.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub image_ref: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_features: Option<Vec<String>>,
}

pub fn read_manifest(reader: impl Read) -> Result<Vec<EvalRecord>> {
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EvalRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("manifest line {}: {e}", lineno + 1)))?;
        out.push(record);
    }
    Ok(out)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<EvalRecord>> {
    read_manifest(std::fs::File::open(path.as_ref())?)
}

/// Final diagnosis from a synthesized answer: the last `diagnosis:` line.
pub fn extract_label(answer: &str) -> Option<String> {
    answer
        .lines()
        .rev()
        .find_map(|line| line.strip_prefix("diagnosis:"))
        .map(|rest| rest.trim().to_string())
        .filter(|s| !s.is_empty())
}

/// Detected concept set: the latest annotator item's `present` list.
pub fn extract_features(response: &Response) -> Vec<String> {
    response
        .evidence
        .latest(ToolId::Make)
        .and_then(|item| item.result.get("present"))
        .and_then(Value::as_array)
        .map(|a| {
            a.iter()
                .filter_map(Value::as_str)
                .map(str::to_string)
                .collect()
        })
        .unwrap_or_default()
}

fn set_f1(pred: &[String], gold: &[String]) -> f64 {
    let p: BTreeSet<String> = pred.iter().map(|s| s.to_lowercase()).collect();
    let g: BTreeSet<String> = gold.iter().map(|s| s.to_lowercase()).collect();
    if p.is_empty() && g.is_empty() {
        return 1.0;
    }
    let inter = p.intersection(&g).count() as f64;
    if inter == 0.0 {
        return 0.0;
    }
    2.0 * inter / (p.len() + g.len()) as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct RecordOutcome {
    pub id: String,
    pub rounds_used: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rouge_l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub concept_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub n: usize,
    pub failures: usize,
    pub mean_rounds: f64,
    /// Diagnosis records with gold labels.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1_macro: Option<f64>,
    /// Mean ROUGE-L over records with gold text.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rouge_l: Option<f64>,
    /// Mean per-record feature-set F1 over records with gold features.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub concept_f1: Option<f64>,
    pub outcomes: Vec<RecordOutcome>,
}

/// Run every manifest record through the orchestrator and aggregate the
/// task-appropriate metrics. `enabled_override`, when given, intersects the
/// configured tool set (the ablation path).
pub fn run_eval(
    runtime: &Runtime,
    records: &[EvalRecord],
    enabled_override: Option<BTreeSet<ToolId>>,
) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(Error::Validation("manifest is empty".into()));
    }
    let orchestrator = runtime.orchestrator(enabled_override);
    let mut outcomes = Vec::with_capacity(records.len());
    let mut pred_labels = Vec::new();
    let mut gold_labels = Vec::new();
    let mut rouges = Vec::new();
    let mut concept_f1s = Vec::new();
    let mut failures = 0usize;
    let mut rounds_total = 0u64;
    let mut rounds_n = 0usize;

    for record in records {
        let query = Query::new(record.image_ref.clone(), record.question.clone())?;
        let response = match orchestrator.run(&query) {
            Ok(r) => r,
            Err(e) => {
                failures += 1;
                outcomes.push(RecordOutcome {
                    id: record.id.clone(),
                    rounds_used: 0,
                    predicted_label: None,
                    correct: None,
                    rouge_l: None,
                    concept_f1: None,
                    error: Some(e.to_string()),
                });
                continue;
            }
        };
        rounds_total += response.rounds_used as u64;
        rounds_n += 1;
        let mut outcome = RecordOutcome {
            id: record.id.clone(),
            rounds_used: response.rounds_used,
            predicted_label: None,
            correct: None,
            rouge_l: None,
            concept_f1: None,
            error: None,
        };
        let ontology = Some(runtime.ontology.as_ref());
        if let Some(gold) = &record.gold_label {
            let predicted = extract_label(&response.answer).unwrap_or_default();
            let p = normalize_label(&predicted, ontology);
            let g = normalize_label(gold, ontology);
            outcome.correct = Some(p == g);
            outcome.predicted_label = Some(predicted);
            pred_labels.push(p);
            gold_labels.push(g);
        }
        if let Some(gold) = &record.gold_text {
            // Caption-style tasks are scored on the whole synthesized answer.
            let score = rouge_l(&response.answer, gold);
            outcome.rouge_l = Some(score);
            rouges.push(score);
        }
        if let Some(gold) = &record.gold_features {
            let predicted = extract_features(&response);
            let score = set_f1(&predicted, gold);
            outcome.concept_f1 = Some(score);
            concept_f1s.push(score);
        }
        outcomes.push(outcome);
    }

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(EvalReport {
        n: records.len(),
        failures,
        mean_rounds: if rounds_n == 0 {
            0.0
        } else {
            rounds_total as f64 / rounds_n as f64
        },
        accuracy: if pred_labels.is_empty() {
            None
        } else {
            Some(accuracy(&pred_labels, &gold_labels)?)
        },
        f1_macro: if pred_labels.is_empty() {
            None
        } else {
            Some(f1_macro(&pred_labels, &gold_labels)?)
        },
        rouge_l: if rouges.is_empty() { None } else { Some(mean(&rouges)) },
        concept_f1: if concept_f1s.is_empty() {
            None
        } else {
            Some(mean(&concept_f1s))
        },
        outcomes,
    })
}

#[derive(Debug, Serialize)]
pub struct AblationReport {
    pub disabled_tool: ToolId,
    pub baseline: EvalReport,
    pub ablated: EvalReport,
}

/// Leave-one-out ablation: the same manifest with and without `tool`.
pub fn run_ablation(
    runtime: &Runtime,
    records: &[EvalRecord],
    tool: ToolId,
) -> Result<AblationReport> {
    let baseline = run_eval(runtime, records, None)?;
    let enabled: BTreeSet<ToolId> = ToolId::ALL.into_iter().filter(|&t| t != tool).collect();
    let ablated = run_eval(runtime, records, Some(enabled))?;
    Ok(AblationReport {
        disabled_tool: tool,
        baseline,
        ablated,
    })
}
