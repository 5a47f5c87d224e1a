//! End-to-end acceptance suite. Each test covers one release criterion and
//! prints a PASS line with the measured evidence.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use dermagent::cases::{ingest_cases, CaseEntry};
use dermagent::config::{Config, Runtime};
use dermagent::critic::{check_confidence, Critic, CriticThresholds, CriticVerdict};
use dermagent::evidence::{
    EvidenceChain, EvidenceItem, ParamMap, Query, TaskScope, ToolId,
};
use dermagent::guidelines::{rrf_fuse, EmbeddingProvider, GuidelineChunk, GuidelineIndex, Origin, RankedList};
use dermagent::harness::{load_manifest, run_eval};
use dermagent::metrics::rouge_l;
use dermagent::ontology::{OntologyIndex, QueryMode};
use dermagent::orchestrator::{Orchestrator, OrchestratorConfig};
use dermagent::planner::RulePlanner;
use dermagent::tools::{descriptor, Tool, ToolError, ToolInput, ToolOutput, ToolRegistry};
use dermagent::trace::{parse_trace, serialize_trace};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn runtime() -> Runtime {
    let config = Config::load(fixtures().join("config.toml")).unwrap();
    Runtime::from_config(&config).unwrap()
}

struct StaticTool(ToolOutput);
impl Tool for StaticTool {
    fn invoke(&self, _input: &ToolInput<'_>) -> std::result::Result<ToolOutput, ToolError> {
        Ok(self.0.clone())
    }
}

fn stub_registry() -> Arc<ToolRegistry> {
    let mut registry = ToolRegistry::new();
    registry
        .register(
            descriptor(ToolId::Panderm),
            Arc::new(StaticTool(ToolOutput {
                result: json!({"predictions": [{"label": "eczema", "score": 0.95}]}),
                confidence: Some(0.95),
                sources: vec![],
            })),
        )
        .unwrap();
    registry
        .register(
            descriptor(ToolId::CaseRag),
            Arc::new(StaticTool(ToolOutput {
                result: json!({"labels": ["eczema"], "similarities": [0.9], "majority_label": "eczema"}),
                confidence: Some(0.9),
                sources: vec!["case-1".into()],
            })),
        )
        .unwrap();
    registry
        .register(
            descriptor(ToolId::DermoGpt),
            Arc::new(StaticTool(ToolOutput {
                result: json!({"text": "an erythematous patch"}),
                confidence: None,
                sources: vec![],
            })),
        )
        .unwrap();
    registry
        .register(
            descriptor(ToolId::GuidelineRag),
            Arc::new(StaticTool(ToolOutput {
                result: json!({"passages": ["emollients help"]}),
                confidence: Some(0.85),
                sources: vec!["https://example.org/ecz".into()],
            })),
        )
        .unwrap();
    Arc::new(registry)
}

fn tiny_ontology() -> Arc<OntologyIndex> {
    let file: dermagent::ontology::TaxonomyFile = serde_json::from_value(json!({
        "root": "root",
        "nodes": [
            {"id": "root", "name": "skin disease", "aliases": [], "children": ["ecz", "pso", "mel"]},
            {"id": "ecz", "name": "eczema", "aliases": [], "children": []},
            {"id": "pso", "name": "psoriasis", "aliases": [], "children": []},
            {"id": "mel", "name": "melanoma", "aliases": [], "children": []}
        ]
    }))
    .unwrap();
    Arc::new(OntologyIndex::from_file(file).unwrap())
}

/// Critic stub whose three gate flags are drawn at random each review.
struct RandomCritic {
    rng: Mutex<ChaCha8Rng>,
}

impl Critic for RandomCritic {
    fn review(&self, _chain: &EvidenceChain, _scope: &TaskScope) -> CriticVerdict {
        let mut rng = self.rng.lock().unwrap();
        CriticVerdict {
            f_conf: rng.gen_bool(0.5),
            f_cov: rng.gen_bool(0.5),
            f_con: rng.gen_bool(0.5),
            feedback: vec![],
        }
    }
}

#[test]
fn criterion_01_loop_termination_under_random_gates() {
    let registry = stub_registry();
    let ontology = tiny_ontology();
    let query = Query::new("img", "What disease is this?").unwrap();
    let mut seed_rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    for run in 0..10_000u64 {
        let k_max = seed_rng.gen_range(0..=5u32);
        let orchestrator = Orchestrator::new(
            Arc::clone(&registry),
            Box::new(RulePlanner::new(Arc::clone(&ontology))),
            Box::new(RandomCritic {
                rng: Mutex::new(ChaCha8Rng::seed_from_u64(run)),
            }),
            OrchestratorConfig {
                k_max,
                parallelism_limit: 1,
                ..OrchestratorConfig::default()
            },
        );
        let response = orchestrator.run(&query).unwrap();
        assert!(
            response.rounds_used <= k_max + 1,
            "run {run}: {} rounds with k_max {k_max}",
            response.rounds_used
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    println!("PASS loop termination: 10000 runs, all <= k_max+1 rounds, {elapsed:?}");
}

#[test]
fn criterion_02_fig2_golden_trace() {
    let query = Query::new("fig2_hand", "What disease is shown in this image?").unwrap();
    let run = || {
        let rt = runtime();
        let orchestrator = rt.orchestrator(None);
        let mut buf = Vec::new();
        let response = orchestrator.run_traced(&query, &mut buf).unwrap();
        (buf, response)
    };
    let (trace_a, response) = run();
    let (trace_b, _) = run();
    assert_eq!(trace_a, trace_b, "trace must be byte-identical across runs");

    assert_eq!(response.rounds_used, 2);
    let lines: Vec<Value> = std::str::from_utf8(&trace_a)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    // Round 0's critic verdict raises the conflict gate and only that gate.
    let critic0 = lines
        .iter()
        .find(|v| v["event"] == "critic" && v["k"] == 0)
        .unwrap();
    assert_eq!(critic0["f_con"], true);
    assert_eq!(critic0["f_conf"], false);
    assert_eq!(critic0["f_cov"], false);
    // Round 1 re-invokes the classifier over exactly the two disputed labels
    // and consults the guidelines.
    let refined = lines
        .iter()
        .find(|v| v["round"] == 1 && v["tool_id"] == "panderm")
        .expect("refined classifier call in round 1");
    let candidates: Vec<&str> = refined["params"]["candidates"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(candidates.contains(&"eczema"), "{candidates:?}");
    assert!(candidates.contains(&"granuloma annulare"), "{candidates:?}");
    assert!(lines
        .iter()
        .any(|v| v["round"] == 1 && v["tool_id"] == "guideline_rag"));
    assert!(
        response.answer.ends_with("diagnosis: granuloma annulare"),
        "{}",
        response.answer
    );
    println!("PASS fig2 golden trace: 2 rounds, f_con in round 0, refined reclassification, byte-identical");
}

#[test]
fn criterion_03_critic_threshold_boundaries() {
    let thresholds = CriticThresholds::default();
    let scope = TaskScope {
        task_type: dermagent::evidence::TaskType::Diagnosis,
        required_tools: BTreeSet::from([ToolId::Panderm, ToolId::CaseRag]),
        actionable_tools: vec![ToolId::Panderm, ToolId::CaseRag, ToolId::DermoGpt],
    };
    let item = |tool: ToolId, conf: f64| {
        EvidenceChain::from_items(vec![EvidenceItem {
            seq: 0,
            round: 0,
            tool_id: tool,
            params: ParamMap::new(),
            result: if tool == ToolId::Panderm {
                json!({"predictions": [{"label": "eczema", "score": conf}]})
            } else {
                json!({"labels": ["eczema"], "similarities": [conf]})
            },
            confidence: Some(conf),
            sources: if tool.is_retrieval() { vec!["s".into()] } else { vec![] },
        }])
    };
    assert!(check_confidence(&item(ToolId::Panderm, 0.89), &scope, &thresholds));
    assert!(!check_confidence(&item(ToolId::Panderm, 0.90), &scope, &thresholds));
    assert!(check_confidence(&item(ToolId::CaseRag, 0.79), &scope, &thresholds));
    assert!(!check_confidence(&item(ToolId::CaseRag, 0.80), &scope, &thresholds));
    assert!(check_confidence(&item(ToolId::GuidelineRag, 0.79), &scope, &thresholds));
    assert!(!check_confidence(&item(ToolId::GuidelineRag, 0.80), &scope, &thresholds));
    println!("PASS critic thresholds: 0.89/0.90 and 0.79/0.80 boundaries exact");
}

fn brute_force_rrf(lists: &[RankedList], k: u32) -> Vec<(String, f64)> {
    // Same accumulation order as the implementation: per document, terms are
    // added list by list.
    let mut ids: Vec<String> = lists
        .iter()
        .flat_map(|l| l.entries.iter().map(|(id, _)| id.clone()))
        .collect();
    ids.sort();
    ids.dedup();
    let mut scored: Vec<(String, f64)> = ids
        .into_iter()
        .map(|id| {
            let mut score = 0.0;
            for list in lists {
                if let Some(rank) = list.entries.iter().position(|(d, _)| *d == id) {
                    score += 1.0 / (k as f64 + rank as f64 + 1.0);
                }
            }
            (id, score)
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    scored
}

#[test]
fn criterion_04_rrf_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..1_000 {
        let n_lists = rng.gen_range(1..=5);
        let lists: Vec<RankedList> = (0..n_lists)
            .map(|_| {
                let n_docs = rng.gen_range(1..=100);
                let mut ids: Vec<usize> = (0..200).collect();
                // random distinct doc ids, random order
                for i in (1..ids.len()).rev() {
                    let j = rng.gen_range(0..=i);
                    ids.swap(i, j);
                }
                RankedList {
                    entries: ids[..n_docs]
                        .iter()
                        .map(|&d| (format!("doc-{d:03}"), rng.gen_range(0.0..1.0)))
                        .collect(),
                    origin: Origin::Dense,
                }
            })
            .collect();
        let fused = rrf_fuse(&lists, 60, usize::MAX).unwrap();
        let oracle = brute_force_rrf(&lists, 60);
        assert_eq!(fused.entries.len(), oracle.len(), "case {case}");
        for ((id_a, s_a), (id_b, s_b)) in fused.entries.iter().zip(&oracle) {
            assert_eq!(id_a, id_b, "case {case}");
            assert!((s_a - s_b).abs() < 1e-12, "case {case}: {s_a} vs {s_b}");
        }
    }
    // Worked value: a document at rank 1 and rank 3 with k = 60.
    let a = RankedList {
        entries: vec![("doc".into(), 0.9), ("p".into(), 0.5), ("q".into(), 0.4)],
        origin: Origin::Dense,
    };
    let b = RankedList {
        entries: vec![("p".into(), 0.9), ("q".into(), 0.8), ("doc".into(), 0.7)],
        origin: Origin::Keyword,
    };
    let fused = rrf_fuse(&[a, b], 60, 10).unwrap();
    let doc = fused.entries.iter().find(|(id, _)| id == "doc").unwrap();
    assert_eq!(doc.1, 1.0 / 61.0 + 1.0 / 63.0);
    println!("PASS rrf oracle: 1000 instances exact, worked value 1/61 + 1/63 reproduced");
}

fn oracle_cosine_order(entries: &[(String, Vec<f32>)], query: &[f32], k: usize) -> Vec<String> {
    let norm = |v: &[f32]| v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
    let qnorm = norm(query);
    let mut scored: Vec<(String, f64)> = entries
        .iter()
        .map(|(id, emb)| {
            let enorm = norm(emb);
            let sim = if qnorm == 0.0 || enorm == 0.0 {
                0.0
            } else {
                let dot: f64 = query
                    .iter()
                    .zip(emb)
                    .map(|(&a, &b)| (a as f64) * (b as f64))
                    .sum();
                dot / (qnorm * enorm)
            };
            (id.clone(), sim)
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    scored.into_iter().map(|(id, _)| id).collect()
}

struct FixedEmbedder(Vec<f32>);
impl EmbeddingProvider for FixedEmbedder {
    fn embed(&self, _text: &str) -> dermagent::Result<Vec<f32>> {
        Ok(self.0.clone())
    }
    fn dimension(&self) -> usize {
        self.0.len()
    }
}

#[test]
fn criterion_05_vector_search_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..1_000usize {
        // Mostly small stores, with a few at the scale limits.
        let (n, dim) = match case {
            0 => (10_000, 512),
            1 => (2_000, 512),
            2 => (300, 4096),
            _ => (
                rng.gen_range(1..=40),
                if rng.gen_bool(0.5) { 512 } else { 4096 },
            ),
        };
        let entries: Vec<(String, Vec<f32>)> = (0..n)
            .map(|i| {
                let emb: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                (format!("e{i:05}"), emb)
            })
            .collect();
        let query: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let k = rng.gen_range(1..=10);

        let report = ingest_cases(entries.iter().map(|(id, emb)| CaseEntry {
            id: id.clone(),
            embedding: emb.clone(),
            disease_label: "x".into(),
            category_path: vec![],
            description: String::new(),
        }))
        .unwrap();
        let hits = report.store.search(&query, k).unwrap();
        let got: Vec<&str> = hits.iter().map(|(e, _)| e.id.as_str()).collect();
        let want = oracle_cosine_order(&entries, &query, k);
        assert_eq!(got, want.iter().map(String::as_str).collect::<Vec<_>>(), "case {case}");

        // Exercise the dense guideline path on the small instances too.
        if case >= 3 && case < 103 {
            let chunks: Vec<GuidelineChunk> = entries
                .iter()
                .map(|(id, emb)| GuidelineChunk {
                    id: id.clone(),
                    text: format!("chunk {id}"),
                    disease_names: vec![],
                    section: "s".into(),
                    source_url: "https://example.org".into(),
                    embedding: Some(emb.clone()),
                })
                .collect();
            let embedder = FixedEmbedder(query.clone());
            let index = GuidelineIndex::build(chunks, &embedder).unwrap();
            let ranked = index.dense_search("q", &embedder, k).unwrap();
            let got: Vec<&str> = ranked.entries.iter().map(|(id, _)| id.as_str()).collect();
            assert_eq!(got, want.iter().map(String::as_str).collect::<Vec<_>>(), "dense case {case}");
        }
    }
    println!("PASS vector-search oracle: 1000 stores (incl. 10k x 512 and 4096-dim), orderings identical");
}

fn oracle_rouge_l(cand: &[&str], refr: &[&str]) -> f64 {
    if cand.is_empty() || refr.is_empty() {
        return 0.0;
    }
    let mut dp = vec![vec![0usize; refr.len() + 1]; cand.len() + 1];
    for i in 1..=cand.len() {
        for j in 1..=refr.len() {
            dp[i][j] = if cand[i - 1] == refr[j - 1] {
                dp[i - 1][j - 1] + 1
            } else {
                dp[i - 1][j].max(dp[i][j - 1])
            };
        }
    }
    let lcs = dp[cand.len()][refr.len()] as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let p = lcs / cand.len() as f64;
    let r = lcs / refr.len() as f64;
    2.0 * p * r / (p + r)
}

#[test]
fn criterion_06_rouge_oracle() {
    let vocab = ["plaque", "scale", "annular", "red", "border", "itch", "dry", "macule"];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..1_000 {
        let draw = |rng: &mut ChaCha8Rng| -> Vec<&str> {
            let n = rng.gen_range(0..=30);
            (0..n).map(|_| vocab[rng.gen_range(0..vocab.len())]).collect()
        };
        let cand = draw(&mut rng);
        let refr = draw(&mut rng);
        let got = rouge_l(&cand.join(" "), &refr.join(" "));
        let want = oracle_rouge_l(&cand, &refr);
        assert_eq!(got, want, "case {case}: {cand:?} vs {refr:?}");
    }
    assert_eq!(rouge_l("annular plaque with scale", "annular plaque with scale"), 1.0);
    assert_eq!(rouge_l("annular plaque", "dry macule"), 0.0);
    println!("PASS rouge-l oracle: 1000 pairs exact, identity 1.0, disjoint 0.0");
}

#[test]
fn criterion_07_ablation_soundness() {
    let rt = runtime();
    let records = load_manifest(fixtures().join("manifest_diagnosis.jsonl")).unwrap();
    let ablated_tools = [
        ToolId::Panderm,
        ToolId::Make,
        ToolId::DermoGpt,
        ToolId::QwenVl,
        ToolId::CaseRag,
        ToolId::GuidelineRag,
    ];
    for tool in ablated_tools {
        let enabled: BTreeSet<ToolId> = ToolId::ALL.into_iter().filter(|&t| t != tool).collect();
        let orchestrator = rt.orchestrator(Some(enabled.clone()));
        for record in &records {
            let query = Query::new(record.image_ref.clone(), record.question.clone()).unwrap();
            let response = orchestrator
                .run(&query)
                .unwrap_or_else(|e| panic!("record {} without {tool}: {e}", record.id));
            assert!(
                !response.evidence.has_tool(tool),
                "record {} contains evidence from disabled tool {tool}",
                record.id
            );
        }
        let report = run_eval(&rt, &records, Some(enabled)).unwrap();
        assert_eq!(report.failures, 0, "failures with {tool} disabled");
    }
    println!("PASS ablation soundness: 6 tools x 10 records, no disabled-tool evidence, no failures");
}

fn random_chain(rng: &mut ChaCha8Rng) -> EvidenceChain {
    let n = rng.gen_range(1..=8);
    let mut items = Vec::new();
    for seq in 0..n {
        let tool = ToolId::ALL[rng.gen_range(0..ToolId::ALL.len())];
        let failed = rng.gen_bool(0.2);
        let mut params = ParamMap::new();
        if rng.gen_bool(0.5) {
            params.insert("question".into(), json!(format!("q{}", rng.gen_range(0..9))));
        }
        if rng.gen_bool(0.3) {
            params.insert("k".into(), json!(rng.gen_range(1..9)));
        }
        let result = if failed {
            json!({"error": "backend unavailable"})
        } else {
            json!({"payload": rng.gen_range(0..100)})
        };
        items.push(EvidenceItem {
            seq: seq as u64,
            round: rng.gen_range(0..3),
            tool_id: tool,
            params,
            result,
            confidence: if !failed && tool.produces_confidence() {
                Some((rng.gen_range(0..=1000) as f64) / 1000.0)
            } else {
                None
            },
            sources: if !failed && tool.is_retrieval() {
                vec![format!("src-{}", rng.gen_range(0..50))]
            } else {
                vec![]
            },
        });
    }
    EvidenceChain::from_items(items)
}

#[test]
fn criterion_08_trace_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in 0..1_000 {
        let chain = random_chain(&mut rng);
        let bytes = serialize_trace(&chain).unwrap();
        let parsed = parse_trace(&bytes).unwrap();
        assert_eq!(parsed, chain, "case {case}");
    }
    println!("PASS trace round-trip: 1000 random chains identical after serialize/parse");
}

#[test]
fn criterion_09_ontology_structure_and_fuzzy() {
    // Crafted bad inputs are rejected outright.
    let bad_cycle = json!({
        "root": "r",
        "nodes": [
            {"id": "r", "name": "root", "aliases": [], "children": ["a"]},
            {"id": "a", "name": "a", "aliases": [], "children": ["b"]},
            {"id": "b", "name": "b", "aliases": [], "children": ["a"]}
        ]
    });
    let bad_dup = json!({
        "root": "r",
        "nodes": [
            {"id": "r", "name": "root", "aliases": [], "children": []},
            {"id": "r", "name": "again", "aliases": [], "children": []}
        ]
    });
    for bad in [bad_cycle, bad_dup] {
        let file: dermagent::ontology::TaxonomyFile = serde_json::from_value(bad).unwrap();
        assert!(OntologyIndex::from_file(file).is_err());
    }

    let index = OntologyIndex::load(fixtures().join("taxonomy.json")).unwrap();
    assert!(index.len() >= 50, "fixture taxonomy has {} nodes", index.len());

    let hierarchy = index
        .query(QueryMode::Hierarchy, "granuloma annulare", 0.4)
        .unwrap();
    match hierarchy {
        dermagent::ontology::OntologyAnswer::Path { nodes, resolution_score } => {
            assert_eq!(
                nodes,
                vec!["skin disease", "inflammatory", "granulomatous", "granuloma annulare"]
            );
            assert_eq!(resolution_score, 1.0);
        }
        other => panic!("unexpected answer {other:?}"),
    }

    let children = index.query(QueryMode::Children, "fungal", 0.4).unwrap();
    match children {
        dermagent::ontology::OntologyAnswer::Nodes { nodes, .. } => assert_eq!(
            nodes,
            vec!["tinea corporis", "tinea pedis", "cutaneous candidiasis", "onychomycosis"]
        ),
        other => panic!("unexpected answer {other:?}"),
    }

    let siblings = index.query(QueryMode::Siblings, "eczema", 0.4).unwrap();
    match siblings {
        dermagent::ontology::OntologyAnswer::Nodes { nodes, .. } => {
            assert_eq!(nodes, vec!["contact dermatitis", "seborrheic dermatitis"])
        }
        other => panic!("unexpected answer {other:?}"),
    }

    // Alias and fuzzy resolution.
    assert_eq!(index.canonical("GA"), Some("granuloma annulare"));
    let typo = index.query(QueryMode::Hierarchy, "granuloma anulare", 0.4).unwrap();
    match typo {
        dermagent::ontology::OntologyAnswer::Path { nodes, resolution_score } => {
            assert_eq!(nodes.last().map(String::as_str), Some("granuloma annulare"));
            assert!(resolution_score < 1.0 && resolution_score >= 0.7);
        }
        other => panic!("unexpected answer {other:?}"),
    }
    let search = index.query(QueryMode::Search, "tinea", 0.2).unwrap();
    match search {
        dermagent::ontology::OntologyAnswer::Matches { matches } => {
            assert!(matches.iter().any(|(name, _)| name == "tinea corporis"));
        }
        other => panic!("unexpected answer {other:?}"),
    }
    println!("PASS ontology: bad inputs rejected, fixture queries match expectations, typo resolves");
}

#[test]
fn criterion_10_fixture_metrics_stand_in() {
    // Published benchmark scores are not reproducible here (closed planner
    // model, unpublished weights, licensed datasets); the fixture corpus
    // stands in. This pins its metrics so the harness itself is exercised
    // end to end and regressions in any stage show up as a metric shift.
    let rt = runtime();
    let diagnosis = load_manifest(fixtures().join("manifest_diagnosis.jsonl")).unwrap();
    let report = run_eval(&rt, &diagnosis, None).unwrap();
    assert_eq!(report.failures, 0);
    assert_eq!(report.accuracy, Some(0.9));
    let f1 = report.f1_macro.unwrap();
    assert!(f1 > 0.0 && f1 <= 1.0, "{f1}");

    let tasks = load_manifest(fixtures().join("manifest_tasks.jsonl")).unwrap();
    let report = run_eval(&rt, &tasks, None).unwrap();
    assert_eq!(report.failures, 0);
    assert_eq!(report.concept_f1, Some(1.0));
    let rouge = report.rouge_l.unwrap();
    assert!(rouge > 0.3 && rouge <= 1.0, "{rouge}");
    println!("PASS fixture metrics: accuracy 0.9, concept F1 1.0, rouge-l {rouge:.3} (paper-scale numbers out of scope)");
}
