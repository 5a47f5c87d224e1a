//! TOML configuration and runtime assembly: loads the corpora and fixture
//! files, registers the tool roster, and produces a ready orchestrator.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::cases::{load_case_corpus, CaseStore, DEFAULT_CASE_K};
use crate::critic::{CriticThresholds, GateCritic};
use crate::error::{Error, Result};
use crate::evidence::ToolId;
use crate::guidelines::{
    load_guideline_corpus, GuidelineIndex, GuidelinePipeline, HashEmbedder, JaccardReranker,
    StageSizes, StopWordList, DEFAULT_GUIDE_DIMENSION,
};
use crate::ontology::{OntologyIndex, DEFAULT_FUZZY_THRESHOLD};
use crate::orchestrator::{Orchestrator, OrchestratorConfig, DEFAULT_K_MAX, DEFAULT_PARALLELISM};
use crate::planner::RulePlanner;
use crate::tools::builtin::{CaseRagTool, GuidelineRagTool, OntologyTool};
use crate::tools::fixture::{FixtureAnnotator, FixtureClassifier, FixtureImageEmbedder, FixtureStore, FixtureVqa};
use crate::tools::{descriptor, ToolRegistry};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathsSection {
    pub taxonomy: PathBuf,
    pub cases: PathBuf,
    pub guidelines: PathBuf,
    pub tool_fixtures: PathBuf,
    pub image_embeddings: PathBuf,
    /// Optional custom stop-word list; the built-in list is used otherwise.
    #[serde(default)]
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OrchestratorSection {
    pub k_max: u32,
    pub parallelism_limit: usize,
    pub call_timeout_secs: u64,
    pub disabled_tools: Vec<ToolId>,
}

impl Default for OrchestratorSection {
    fn default() -> Self {
        OrchestratorSection {
            k_max: DEFAULT_K_MAX,
            parallelism_limit: DEFAULT_PARALLELISM,
            call_timeout_secs: 60,
            disabled_tools: vec![],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalSection {
    pub case_k: usize,
    pub guideline_dimension: usize,
    pub dense_k: usize,
    pub keyword_k: usize,
    pub fused_top_n: usize,
    pub rerank_top_m: usize,
    pub rrf_k: u32,
}

impl Default for RetrievalSection {
    fn default() -> Self {
        let sizes = StageSizes::default();
        RetrievalSection {
            case_k: DEFAULT_CASE_K,
            guideline_dimension: DEFAULT_GUIDE_DIMENSION,
            dense_k: sizes.dense_k,
            keyword_k: sizes.keyword_k,
            fused_top_n: sizes.fused_top_n,
            rerank_top_m: sizes.rerank_top_m,
            rrf_k: sizes.rrf_k,
        }
    }
}

impl RetrievalSection {
    pub fn stage_sizes(&self) -> StageSizes {
        StageSizes {
            dense_k: self.dense_k,
            keyword_k: self.keyword_k,
            fused_top_n: self.fused_top_n,
            rerank_top_m: self.rerank_top_m,
            rrf_k: self.rrf_k,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OntologySection {
    pub fuzzy_threshold: f64,
}

impl Default for OntologySection {
    fn default() -> Self {
        OntologySection {
            fuzzy_threshold: DEFAULT_FUZZY_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnotatorSection {
    pub threshold: f64,
}

impl Default for AnnotatorSection {
    fn default() -> Self {
        AnnotatorSection { threshold: 0.5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Config {
    pub paths: PathsSection,
    #[serde(default)]
    pub orchestrator: OrchestratorSection,
    #[serde(default)]
    pub critic: CriticThresholds,
    #[serde(default)]
    pub retrieval: RetrievalSection,
    #[serde(default)]
    pub ontology: OntologySection,
    #[serde(default)]
    pub annotator: AnnotatorSection,
}

impl Config {
    /// Parse a config file; relative paths are resolved against the config
    /// file's own directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Config> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: Config =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        resolve(&mut self.paths.taxonomy);
        resolve(&mut self.paths.cases);
        resolve(&mut self.paths.guidelines);
        resolve(&mut self.paths.tool_fixtures);
        resolve(&mut self.paths.image_embeddings);
        if let Some(stopwords) = self.paths.stopwords.as_mut() {
            resolve(stopwords);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.orchestrator.parallelism_limit == 0 {
            return Err(Error::Config("parallelism_limit must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.critic.panderm_min_conf)
            || !(0.0..=1.0).contains(&self.critic.rag_min_sim)
        {
            return Err(Error::Config("critic thresholds must lie in [0,1]".into()));
        }
        if self.retrieval.case_k == 0 || self.retrieval.dense_k == 0 || self.retrieval.keyword_k == 0
        {
            return Err(Error::Config("retrieval stage sizes must be >= 1".into()));
        }
        Ok(())
    }

    pub fn orchestrator_config(&self) -> OrchestratorConfig {
        let disabled: BTreeSet<ToolId> = self.orchestrator.disabled_tools.iter().copied().collect();
        OrchestratorConfig {
            k_max: self.orchestrator.k_max,
            enabled_tools: ToolId::ALL
                .into_iter()
                .filter(|t| !disabled.contains(t))
                .collect(),
            thresholds: self.critic,
            parallelism_limit: self.orchestrator.parallelism_limit,
            call_timeout: Duration::from_secs(self.orchestrator.call_timeout_secs),
        }
    }
}

/// Everything assembled and ready to run queries.
pub struct Runtime {
    pub registry: Arc<ToolRegistry>,
    pub ontology: Arc<OntologyIndex>,
    pub case_store: Arc<CaseStore>,
    pub pipeline: Arc<GuidelinePipeline>,
    pub orchestrator_config: OrchestratorConfig,
}

impl Runtime {
    pub fn from_config(config: &Config) -> Result<Runtime> {
        let ontology = Arc::new(OntologyIndex::load(&config.paths.taxonomy)?);
        let case_store = Arc::new(load_case_corpus(&config.paths.cases)?.store);
        let chunks = load_guideline_corpus(&config.paths.guidelines)?;
        let embedder = Arc::new(HashEmbedder::new(config.retrieval.guideline_dimension));
        let index = GuidelineIndex::build(chunks, embedder.as_ref())?;
        let stops = match &config.paths.stopwords {
            Some(path) => StopWordList::load(path)?,
            None => StopWordList::default_list(),
        };
        let pipeline = Arc::new(GuidelinePipeline {
            index,
            embedder,
            reranker: Arc::new(JaccardReranker),
            stops,
            sizes: config.retrieval.stage_sizes(),
        });
        let fixtures = Arc::new(FixtureStore::load(&config.paths.tool_fixtures)?);
        let image_embedder = Arc::new(FixtureImageEmbedder::load(&config.paths.image_embeddings)?);

        let mut registry = ToolRegistry::new();
        registry.register(
            descriptor(ToolId::Panderm),
            Arc::new(FixtureClassifier::new(Arc::clone(&fixtures))),
        )?;
        registry.register(
            descriptor(ToolId::Make),
            Arc::new(FixtureAnnotator::new(
                Arc::clone(&fixtures),
                config.annotator.threshold,
            )),
        )?;
        registry.register(
            descriptor(ToolId::DermoGpt),
            Arc::new(FixtureVqa::new(Arc::clone(&fixtures), ToolId::DermoGpt)),
        )?;
        registry.register(
            descriptor(ToolId::QwenVl),
            Arc::new(FixtureVqa::new(Arc::clone(&fixtures), ToolId::QwenVl)),
        )?;
        registry.register(
            descriptor(ToolId::CaseRag),
            Arc::new(CaseRagTool::new(
                Arc::clone(&case_store),
                image_embedder,
                config.retrieval.case_k,
            )),
        )?;
        registry.register(
            descriptor(ToolId::GuidelineRag),
            Arc::new(GuidelineRagTool::new(Arc::clone(&pipeline))),
        )?;
        registry.register(
            descriptor(ToolId::Ontology),
            Arc::new(OntologyTool::new(
                Arc::clone(&ontology),
                config.ontology.fuzzy_threshold,
            )),
        )?;

        Ok(Runtime {
            registry: Arc::new(registry),
            ontology,
            case_store,
            pipeline,
            orchestrator_config: config.orchestrator_config(),
        })
    }

    /// Build the orchestrator, optionally overriding the enabled-tool set
    /// (used by the ablation harness).
    pub fn orchestrator(&self, enabled_override: Option<BTreeSet<ToolId>>) -> Orchestrator {
        let mut config = self.orchestrator_config.clone();
        if let Some(enabled) = enabled_override {
            config.enabled_tools = config
                .enabled_tools
                .intersection(&enabled)
                .copied()
                .collect();
        }
        Orchestrator::new(
            Arc::clone(&self.registry),
            Box::new(RulePlanner::new(Arc::clone(&self.ontology))),
            Box::new(GateCritic::new(config.thresholds, Arc::clone(&self.ontology))),
            config,
        )
    }
}
