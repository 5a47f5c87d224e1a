//! Deterministic post-hoc auditor: the confidence, coverage, and conflict
//! gates plus directional feedback generation.

use std::sync::Arc;

use serde_json::{json, Value};

use crate::cases::majority_label;
use crate::evidence::{
    EvidenceChain, EvidenceItem, Feedback, Gate, ParamMap, TaskScope, ToolCall, ToolId,
};
use crate::ontology::OntologyIndex;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CriticThresholds {
    /// Classifier predictions strictly below this raise the confidence
    /// gate; a score exactly at the threshold passes.
    pub panderm_min_conf: f64,
    /// Retrieval similarities strictly below this raise the gate.
    pub rag_min_sim: f64,
}

impl Default for CriticThresholds {
    fn default() -> Self {
        CriticThresholds {
            panderm_min_conf: 0.90,
            rag_min_sim: 0.80,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticVerdict {
    pub f_conf: bool,
    pub f_cov: bool,
    pub f_con: bool,
    pub feedback: Vec<Feedback>,
}

impl CriticVerdict {
    pub fn any(&self) -> bool {
        self.f_conf || self.f_cov || self.f_con
    }

    pub fn pass() -> Self {
        CriticVerdict {
            f_conf: false,
            f_cov: false,
            f_con: false,
            feedback: vec![],
        }
    }
}

/// Audits the evidence chain after each execution round.
pub trait Critic: Send + Sync {
    fn review(&self, chain: &EvidenceChain, scope: &TaskScope) -> CriticVerdict;
}

/// The deterministic three-gate critic.
pub struct GateCritic {
    pub thresholds: CriticThresholds,
    pub ontology: Arc<OntologyIndex>,
}

impl GateCritic {
    pub fn new(thresholds: CriticThresholds, ontology: Arc<OntologyIndex>) -> Self {
        GateCritic {
            thresholds,
            ontology,
        }
    }
}

impl Critic for GateCritic {
    fn review(&self, chain: &EvidenceChain, scope: &TaskScope) -> CriticVerdict {
        // All three gates are always evaluated so traces show every flag.
        let f_conf = check_confidence(chain, scope, &self.thresholds);
        let f_cov = check_coverage(scope, chain);
        let f_con = detect_conflicts(chain, &self.ontology);
        let feedback = if f_conf || f_cov || f_con {
            make_feedback((f_conf, f_cov, f_con), chain, scope, &self.ontology)
                .expect("at least one flag raised")
        } else {
            vec![]
        };
        CriticVerdict {
            f_conf,
            f_cov,
            f_con,
            feedback,
        }
    }
}

fn low_confidence_items<'a>(
    chain: &'a EvidenceChain,
    thresholds: &CriticThresholds,
) -> Vec<&'a EvidenceItem> {
    chain
        .items()
        .iter()
        .filter(|item| !item.is_failed())
        .filter(|item| match (item.tool_id, item.confidence) {
            (ToolId::Panderm, Some(conf)) => conf < thresholds.panderm_min_conf,
            (ToolId::CaseRag | ToolId::GuidelineRag, Some(conf)) => conf < thresholds.rag_min_sim,
            _ => false,
        })
        .collect()
}

fn uninvoked_actionable(scope: &TaskScope, chain: &EvidenceChain) -> Option<ToolId> {
    scope
        .actionable_tools
        .iter()
        .copied()
        .find(|&tool| !chain.has_tool(tool))
}

/// Confidence gate: a low-scoring classifier or retrieval item exists AND
/// an uninvoked actionable tool remains available.
pub fn check_confidence(
    chain: &EvidenceChain,
    scope: &TaskScope,
    thresholds: &CriticThresholds,
) -> bool {
    !low_confidence_items(chain, thresholds).is_empty()
        && uninvoked_actionable(scope, chain).is_some()
}

/// Coverage gate: some task-critical tool has not been invoked. Ablated
/// tools were already excluded from `scope.required_tools`.
pub fn check_coverage(scope: &TaskScope, chain: &EvidenceChain) -> bool {
    scope
        .required_tools
        .iter()
        .any(|&tool| !chain.has_tool(tool))
}

fn normalize_label(label: &str, ontology: &OntologyIndex) -> String {
    let trimmed = label.trim();
    ontology
        .canonical(trimmed)
        .map(str::to_lowercase)
        .unwrap_or_else(|| trimmed.to_lowercase())
}

/// Top-1 label of the latest classifier item.
pub fn panderm_top_label(chain: &EvidenceChain) -> Option<String> {
    let item = chain.latest(ToolId::Panderm)?;
    item.result
        .get("predictions")
        .and_then(Value::as_array)
        .and_then(|preds| preds.first())
        .and_then(|p| p.get("label"))
        .and_then(Value::as_str)
        .map(str::to_string)
}

/// Majority label among the latest case retrieval's neighbors: most
/// frequent, ties by mean similarity, then label lexicographic.
pub fn case_majority_label(chain: &EvidenceChain) -> Option<String> {
    let item = chain.latest(ToolId::CaseRag)?;
    let labels = item.result.get("labels").and_then(Value::as_array);
    let sims = item.result.get("similarities").and_then(Value::as_array);
    if let (Some(labels), Some(sims)) = (labels, sims) {
        if labels.len() == sims.len() && !labels.is_empty() {
            // Rebuild the neighbor list and reuse the store's majority rule.
            let entries: Vec<crate::cases::CaseEntry> = labels
                .iter()
                .filter_map(Value::as_str)
                .map(|label| crate::cases::CaseEntry {
                    id: String::new(),
                    embedding: vec![],
                    disease_label: label.to_string(),
                    category_path: vec![],
                    description: String::new(),
                })
                .collect();
            let pairs: Vec<(&crate::cases::CaseEntry, f64)> = entries
                .iter()
                .zip(sims.iter().filter_map(Value::as_f64))
                .collect();
            if pairs.len() == entries.len() {
                return majority_label(&pairs);
            }
        }
    }
    item.result
        .get("majority_label")
        .and_then(Value::as_str)
        .map(str::to_string)
}

/// The two visual diagnoses under comparison, normalized (casefold, trim,
/// ontology-alias canonicalization), when both exist and disagree.
fn conflicting_pair(chain: &EvidenceChain, ontology: &OntologyIndex) -> Option<(String, String)> {
    let p = normalize_label(&panderm_top_label(chain)?, ontology);
    let c = normalize_label(&case_majority_label(chain)?, ontology);
    if p != c {
        Some((p, c))
    } else {
        None
    }
}

/// Conflict gate: the classifier and case retrieval disagree on the
/// diagnosis, and no prior guideline retrieval already addressed either
/// label (normalized substring match on its query text).
pub fn detect_conflicts(chain: &EvidenceChain, ontology: &OntologyIndex) -> bool {
    let Some((p, c)) = conflicting_pair(chain, ontology) else {
        return false;
    };
    let addressed = chain
        .items()
        .iter()
        .filter(|item| item.tool_id == ToolId::GuidelineRag && !item.is_failed())
        .filter_map(|item| item.params.get("query").and_then(Value::as_str))
        .any(|query| {
            let query = query.to_lowercase();
            query.contains(&p) || query.contains(&c)
        });
    !addressed
}

/// One feedback entry per raised flag, in gate order conf, cov, con.
pub fn make_feedback(
    flags: (bool, bool, bool),
    chain: &EvidenceChain,
    scope: &TaskScope,
    ontology: &OntologyIndex,
) -> Option<Vec<Feedback>> {
    let (f_conf, f_cov, f_con) = flags;
    if !(f_conf || f_cov || f_con) {
        return None;
    }
    let mut feedback = Vec::new();

    if f_conf {
        let thresholds = CriticThresholds::default();
        let low: Vec<String> = low_confidence_items(chain, &thresholds)
            .iter()
            .map(|item| {
                format!(
                    "{} (confidence {:.2})",
                    item.tool_id,
                    item.confidence.unwrap_or(0.0)
                )
            })
            .collect();
        let suggested = uninvoked_actionable(scope, chain)
            .map(|tool| vec![ToolCall::new(tool, ParamMap::new())])
            .unwrap_or_default();
        feedback.push(Feedback {
            gate: Gate::Confidence,
            message: format!(
                "low-confidence evidence: [{}]; corroborate with an uninvoked tool",
                low.join(", ")
            ),
            suggested_calls: suggested,
            reinject_image: false,
        });
    }

    if f_cov {
        let missing: Vec<ToolId> = scope
            .required_tools
            .iter()
            .copied()
            .filter(|&tool| !chain.has_tool(tool))
            .collect();
        feedback.push(Feedback {
            gate: Gate::Coverage,
            message: format!(
                "task-critical tools not yet invoked: [{}]",
                missing
                    .iter()
                    .map(|t| t.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
            suggested_calls: missing
                .into_iter()
                .map(|tool| ToolCall::new(tool, ParamMap::new()))
                .collect(),
            reinject_image: false,
        });
    }

    if f_con {
        let (suggested, message) = match conflicting_pair(chain, ontology) {
            Some((p, c)) => {
                let refined_classifier = ToolCall::new(
                    ToolId::Panderm,
                    [("candidates".to_string(), json!([p.clone(), c.clone()]))]
                        .into_iter()
                        .collect(),
                );
                let guideline = ToolCall::new(
                    ToolId::GuidelineRag,
                    [(
                        "query".to_string(),
                        json!(format!("{p} vs {c} differential diagnosis")),
                    )]
                    .into_iter()
                    .collect(),
                );
                (
                    vec![refined_classifier, guideline],
                    format!(
                        "classifier says '{p}' but similar cases say '{c}'; re-examine the \
                         image and consult guidelines for both"
                    ),
                )
            }
            None => (
                vec![],
                "inter-tool disagreement detected; re-examine the image".to_string(),
            ),
        };
        feedback.push(Feedback {
            gate: Gate::Conflict,
            message,
            suggested_calls: suggested,
            reinject_image: true,
        });
    }

    Some(feedback)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidence::TaskType;
    use crate::ontology::{TaxonomyFile, TaxonomyRecord};
    use std::collections::BTreeSet;

    fn ontology() -> Arc<OntologyIndex> {
        let nodes = vec![
            TaxonomyRecord {
                id: "root".into(),
                name: "skin disease".into(),
                aliases: vec![],
                children: vec!["ga".into(), "ecz".into(), "mel".into()],
            },
            TaxonomyRecord {
                id: "ga".into(),
                name: "granuloma annulare".into(),
                aliases: vec!["GA".into()],
                children: vec![],
            },
            TaxonomyRecord {
                id: "ecz".into(),
                name: "eczema".into(),
                aliases: vec![],
                children: vec![],
            },
            TaxonomyRecord {
                id: "mel".into(),
                name: "melanoma".into(),
                aliases: vec![],
                children: vec![],
            },
        ];
        Arc::new(
            OntologyIndex::from_file(TaxonomyFile {
                root: "root".into(),
                nodes,
            })
            .unwrap(),
        )
    }

    fn diagnosis_scope() -> TaskScope {
        TaskScope {
            task_type: TaskType::Diagnosis,
            required_tools: BTreeSet::from([ToolId::Panderm, ToolId::CaseRag]),
            actionable_tools: vec![
                ToolId::Panderm,
                ToolId::CaseRag,
                ToolId::DermoGpt,
                ToolId::GuidelineRag,
            ],
        }
    }

    fn panderm_item(seq: u64, label: &str, conf: f64) -> EvidenceItem {
        EvidenceItem {
            seq,
            round: 0,
            tool_id: ToolId::Panderm,
            params: ParamMap::new(),
            result: json!({"predictions": [{"label": label, "score": conf}]}),
            confidence: Some(conf),
            sources: vec![],
        }
    }

    fn case_item(seq: u64, labels: &[&str], sims: &[f64]) -> EvidenceItem {
        EvidenceItem {
            seq,
            round: 0,
            tool_id: ToolId::CaseRag,
            params: ParamMap::new(),
            result: json!({"labels": labels, "similarities": sims}),
            confidence: Some(sims.iter().copied().fold(0.0, f64::max)),
            sources: labels.iter().map(|l| format!("case-{l}")).collect(),
        }
    }

    fn guideline_item(seq: u64, query: &str) -> EvidenceItem {
        EvidenceItem {
            seq,
            round: 0,
            tool_id: ToolId::GuidelineRag,
            params: [("query".to_string(), json!(query))].into_iter().collect(),
            result: json!({"passages": ["x"]}),
            confidence: Some(0.85),
            sources: vec!["https://example.org".into()],
        }
    }

    fn dermo_item(seq: u64) -> EvidenceItem {
        EvidenceItem {
            seq,
            round: 0,
            tool_id: ToolId::DermoGpt,
            params: ParamMap::new(),
            result: json!({"text": "a lesion"}),
            confidence: None,
            sources: vec![],
        }
    }

    fn chain_of(items: Vec<EvidenceItem>) -> EvidenceChain {
        EvidenceChain::from_items(items)
    }

    #[test]
    fn low_panderm_with_uninvoked_tool_flags() {
        let chain = chain_of(vec![panderm_item(0, "eczema", 0.89)]);
        assert!(check_confidence(
            &chain,
            &diagnosis_scope(),
            &CriticThresholds::default()
        ));
    }

    #[test]
    fn boundary_values_are_strict() {
        let thresholds = CriticThresholds::default();
        let scope = diagnosis_scope();
        // 0.90 passes, 0.89 flags.
        assert!(!check_confidence(
            &chain_of(vec![panderm_item(0, "eczema", 0.90)]),
            &scope,
            &thresholds
        ));
        assert!(check_confidence(
            &chain_of(vec![panderm_item(0, "eczema", 0.89)]),
            &scope,
            &thresholds
        ));
        // 0.80 passes, 0.79 flags.
        assert!(!check_confidence(
            &chain_of(vec![case_item(0, &["eczema"], &[0.80])]),
            &scope,
            &thresholds
        ));
        assert!(check_confidence(
            &chain_of(vec![case_item(0, &["eczema"], &[0.79])]),
            &scope,
            &thresholds
        ));
    }

    #[test]
    fn all_tools_invoked_suppresses_confidence_gate() {
        let chain = chain_of(vec![
            panderm_item(0, "eczema", 0.50),
            case_item(1, &["eczema"], &[0.95]),
            dermo_item(2),
            guideline_item(3, "eczema care"),
        ]);
        assert!(!check_confidence(
            &chain,
            &diagnosis_scope(),
            &CriticThresholds::default()
        ));
    }

    #[test]
    fn coverage_flags_missing_required_tool() {
        let chain = chain_of(vec![dermo_item(0)]);
        assert!(check_coverage(&diagnosis_scope(), &chain));
        let full = chain_of(vec![
            panderm_item(0, "eczema", 0.95),
            case_item(1, &["eczema"], &[0.9]),
        ]);
        assert!(!check_coverage(&diagnosis_scope(), &full));
    }

    #[test]
    fn coverage_respects_ablation() {
        let scope = diagnosis_scope().restrict_to(&BTreeSet::from([
            ToolId::Panderm,
            ToolId::DermoGpt,
            ToolId::GuidelineRag,
        ]));
        let chain = chain_of(vec![panderm_item(0, "eczema", 0.95)]);
        assert!(!check_coverage(&scope, &chain));
    }

    #[test]
    fn disagreement_raises_conflict() {
        let chain = chain_of(vec![
            panderm_item(0, "Eczema", 1.0),
            case_item(
                1,
                &[
                    "Granuloma Annulare",
                    "Granuloma Annulare",
                    "Granuloma Annulare",
                    "Granuloma Annulare",
                ],
                &[0.88, 0.86, 0.85, 0.84],
            ),
        ]);
        assert!(detect_conflicts(&chain, &ontology()));
    }

    #[test]
    fn casefold_agreement_is_no_conflict() {
        let chain = chain_of(vec![
            panderm_item(0, "melanoma", 1.0),
            case_item(1, &["Melanoma"], &[0.9]),
        ]);
        assert!(!detect_conflicts(&chain, &ontology()));
    }

    #[test]
    fn alias_agreement_is_no_conflict() {
        let chain = chain_of(vec![
            panderm_item(0, "GA", 1.0),
            case_item(1, &["granuloma annulare"], &[0.9]),
        ]);
        assert!(!detect_conflicts(&chain, &ontology()));
    }

    #[test]
    fn prior_guideline_query_accepts_conflict() {
        let chain = chain_of(vec![
            panderm_item(0, "eczema", 1.0),
            case_item(1, &["granuloma annulare"], &[0.9]),
            guideline_item(2, "granuloma annulare vs eczema differential"),
        ]);
        assert!(!detect_conflicts(&chain, &ontology()));
    }

    #[test]
    fn acceptance_is_monotone_under_append() {
        let mut chain = chain_of(vec![
            panderm_item(0, "eczema", 1.0),
            case_item(1, &["granuloma annulare"], &[0.9]),
            guideline_item(2, "eczema features"),
        ]);
        assert!(!detect_conflicts(&chain, &ontology()));
        chain = chain.append(dermo_item(3)).unwrap();
        assert!(!detect_conflicts(&chain, &ontology()));
    }

    #[test]
    fn conflict_symmetric_in_tool_roles() {
        let forward = chain_of(vec![
            panderm_item(0, "eczema", 1.0),
            case_item(1, &["granuloma annulare"], &[0.9]),
        ]);
        let swapped = chain_of(vec![
            panderm_item(0, "granuloma annulare", 1.0),
            case_item(1, &["eczema"], &[0.9]),
        ]);
        assert_eq!(
            detect_conflicts(&forward, &ontology()),
            detect_conflicts(&swapped, &ontology())
        );
    }

    #[test]
    fn conflict_feedback_refines_and_reinjects() {
        let chain = chain_of(vec![
            panderm_item(0, "Eczema", 1.0),
            case_item(1, &["Granuloma Annulare"], &[0.9]),
        ]);
        let feedback =
            make_feedback((false, false, true), &chain, &diagnosis_scope(), &ontology()).unwrap();
        assert_eq!(feedback.len(), 1);
        let fb = &feedback[0];
        assert!(fb.reinject_image);
        let classifier = fb
            .suggested_calls
            .iter()
            .find(|c| c.tool_id == ToolId::Panderm)
            .unwrap();
        let candidates: Vec<&str> = classifier.params["candidates"]
            .as_array()
            .unwrap()
            .iter()
            .filter_map(Value::as_str)
            .collect();
        assert!(candidates.contains(&"eczema"));
        assert!(candidates.contains(&"granuloma annulare"));
        let guideline = fb
            .suggested_calls
            .iter()
            .find(|c| c.tool_id == ToolId::GuidelineRag)
            .unwrap();
        assert!(guideline.params["query"]
            .as_str()
            .unwrap()
            .contains("granuloma annulare"));
    }

    #[test]
    fn coverage_feedback_suggests_missing_tools() {
        let scope = TaskScope {
            task_type: TaskType::ConceptAnnotation,
            required_tools: BTreeSet::from([ToolId::Make]),
            actionable_tools: vec![ToolId::Make, ToolId::DermoGpt, ToolId::GuidelineRag],
        };
        let chain = chain_of(vec![dermo_item(0)]);
        let feedback =
            make_feedback((false, true, false), &chain, &scope, &ontology()).unwrap();
        assert_eq!(feedback[0].suggested_calls[0].tool_id, ToolId::Make);
    }

    #[test]
    fn no_flags_yields_no_feedback() {
        let chain = chain_of(vec![dermo_item(0)]);
        assert!(make_feedback((false, false, false), &chain, &diagnosis_scope(), &ontology())
            .is_none());
    }

    #[test]
    fn verdict_feedback_matches_flags() {
        let critic = GateCritic::new(CriticThresholds::default(), ontology());
        let chain = chain_of(vec![
            panderm_item(0, "eczema", 1.0),
            case_item(1, &["granuloma annulare"], &[0.9]),
        ]);
        let verdict = critic.review(&chain, &diagnosis_scope());
        assert!(verdict.f_con);
        assert!(!verdict.feedback.is_empty());
        assert!(verdict
            .feedback
            .iter()
            .all(|f| matches!(f.gate, Gate::Conflict | Gate::Confidence | Gate::Coverage)));
    }
}
