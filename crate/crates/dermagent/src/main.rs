use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use dermagent::config::{Config, Runtime};
use dermagent::evidence::{Query, ToolId};
use dermagent::guidelines::{save_index, GuidelineIndex, HashEmbedder};
use dermagent::harness::{load_manifest, run_ablation, run_eval};
use dermagent::ontology::{OntologyIndex, QueryMode, DEFAULT_FUZZY_THRESHOLD};

#[derive(Parser)]
#[command(name = "dermagent", about = "Evidence-grounded dermatological image analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Answer one clinical question about an image.
    Ask {
        #[arg(long)]
        config: PathBuf,
        /// Image reference (fixture key or file path).
        #[arg(long)]
        image: String,
        #[arg(long)]
        question: String,
        /// Write the full run trace (JSONL) to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Disable a tool for this run; repeatable.
        #[arg(long = "disable")]
        disable: Vec<String>,
    },
    /// Score a manifest of queries against gold annotations.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long = "disable")]
        disable: Vec<String>,
    },
    /// Leave-one-out ablation: run a manifest with and without one tool.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Tool to disable in the ablated pass.
        #[arg(long)]
        tool: String,
    },
    /// Validate a case corpus and report its shape.
    IngestCases {
        #[arg(long)]
        input: PathBuf,
    },
    /// Build a guideline index from a corpus and persist it.
    IngestGuidelines {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = dermagent::guidelines::DEFAULT_GUIDE_DIMENSION)]
        dimension: usize,
    },
    /// Query the disease taxonomy.
    Ontology {
        #[arg(long)]
        taxonomy: PathBuf,
        /// hierarchy | children | siblings | search
        #[arg(long)]
        mode: String,
        #[arg(long)]
        name: String,
        #[arg(long, default_value_t = DEFAULT_FUZZY_THRESHOLD)]
        threshold: f64,
    },
}

fn parse_tools(names: &[String]) -> anyhow::Result<BTreeSet<ToolId>> {
    names
        .iter()
        .map(|n| n.parse::<ToolId>().map_err(anyhow::Error::from))
        .collect()
}

fn enabled_after(disable: &[String]) -> anyhow::Result<Option<BTreeSet<ToolId>>> {
    if disable.is_empty() {
        return Ok(None);
    }
    let disabled = parse_tools(disable)?;
    Ok(Some(
        ToolId::ALL
            .into_iter()
            .filter(|t| !disabled.contains(t))
            .collect(),
    ))
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Ask {
            config,
            image,
            question,
            trace,
            disable,
        } => {
            let config = Config::load(&config)?;
            let runtime = Runtime::from_config(&config)?;
            let orchestrator = runtime.orchestrator(enabled_after(&disable)?);
            let query = Query::new(image, question)?;
            let response = match trace {
                Some(path) => {
                    let mut sink = std::fs::File::create(&path)
                        .with_context(|| format!("cannot create {}", path.display()))?;
                    orchestrator.run_traced(&query, &mut sink)?
                }
                None => orchestrator.run(&query)?,
            };
            println!("{}", response.answer);
            println!();
            println!("rounds: {}", response.rounds_used);
            if !response.citations.is_empty() {
                println!("citations:");
                for citation in &response.citations {
                    println!("  - {citation}");
                }
            }
        }
        Command::Eval {
            config,
            manifest,
            disable,
        } => {
            let config = Config::load(&config)?;
            let runtime = Runtime::from_config(&config)?;
            let records = load_manifest(&manifest)?;
            let report = run_eval(&runtime, &records, enabled_after(&disable)?)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Ablate {
            config,
            manifest,
            tool,
        } => {
            let tool: ToolId = tool.parse()?;
            let config = Config::load(&config)?;
            let runtime = Runtime::from_config(&config)?;
            let records = load_manifest(&manifest)?;
            let report = run_ablation(&runtime, &records, tool)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::IngestCases { input } => {
            let report = dermagent::cases::load_case_corpus(&input)?;
            println!(
                "{}",
                serde_json::json!({
                    "entries": report.store.len(),
                    "dimension": report.store.dimension(),
                    "duplicates_overwritten": report.duplicates_overwritten,
                })
            );
        }
        Command::IngestGuidelines {
            input,
            output,
            dimension,
        } => {
            let chunks = dermagent::guidelines::load_guideline_corpus(&input)?;
            if chunks.is_empty() {
                bail!("guideline corpus is empty");
            }
            let embedder = HashEmbedder::new(dimension);
            let index = GuidelineIndex::build(chunks, &embedder)?;
            save_index(&index, &output)?;
            println!(
                "{}",
                serde_json::json!({
                    "chunks": index.len(),
                    "dimension": index.dimension(),
                    "output": output,
                })
            );
        }
        Command::Ontology {
            taxonomy,
            mode,
            name,
            threshold,
        } => {
            let mode: QueryMode = mode.parse()?;
            let index = OntologyIndex::load(&taxonomy)?;
            let answer = index.query(mode, &name, threshold)?;
            println!("{}", serde_json::to_string_pretty(&answer)?);
        }
    }
    Ok(())
}
