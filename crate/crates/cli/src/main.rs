//! `commrec`: reader communities and communitized OER ranking from the command line.

mod artifact;
mod config;
mod steps;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::artifact::{Outputs, Provenance};
use crate::steps::{RecommendRequest, Run};

#[derive(Parser, Debug)]
#[command(name = "commrec", version, about = "Reader communities and communitized OER ranking")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Pipeline seed; required here or in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for artifacts (also read by later steps).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Corpus directory.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Directory holding vertices.tsv and edges.tsv.
    #[arg(long, global = true)]
    graph: Option<PathBuf>,
    /// Number of communities.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Cross-validation folds.
    #[arg(long, global = true)]
    folds: Option<usize>,
    /// Config override, e.g. `experiment.ranker.min_queries=5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and check the corpus.
    Ingest,
    /// Build the reader feature matrix.
    Featurize,
    /// K-medoids over readers with a profile.
    Cluster,
    /// Train the MaxEnt community classifier on behavior features.
    TrainCommunityClassifier,
    /// Write communities.tsv for every reader.
    Assign,
    /// Load and check the paper/topic/OER graph and the meta-paths.
    GraphBuild,
    /// Extract ranking features for every judged query.
    Rankfeat,
    /// Train the global and per-community rankers.
    TrainRanker,
    /// Rank OERs for a passage.
    Recommend(RecommendArgs),
    /// Cross-validate, simulate missing profiles and score clusters against replies.
    Evaluate,
    /// Generate a synthetic corpus and graph.
    Simulate,
    /// Run every step; simulates a corpus unless one is given.
    Pipeline,
}

#[derive(Args, Debug)]
struct RecommendArgs {
    #[arg(long)]
    paper: String,
    #[arg(long)]
    quote: String,
    /// Reader whose community picks the model.
    #[arg(long, conflicts_with = "community")]
    reader: Option<String>,
    #[arg(long)]
    community: Option<usize>,
    /// Comma-separated OER ids; every OER in the graph when absent.
    #[arg(long, value_delimiter = ',')]
    candidates: Option<Vec<String>>,
    #[arg(long)]
    top: Option<usize>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Featurize => "featurize",
            Command::Cluster => "cluster",
            Command::TrainCommunityClassifier => "train-community-classifier",
            Command::Assign => "assign",
            Command::GraphBuild => "graph-build",
            Command::Rankfeat => "rankfeat",
            Command::TrainRanker => "train-ranker",
            Command::Recommend(_) => "recommend",
            Command::Evaluate => "evaluate",
            Command::Simulate => "simulate",
            Command::Pipeline => "pipeline",
        }
    }
}

fn setup(cli: &Cli) -> Result<Run> {
    let g = &cli.global;
    let mut overrides = Vec::new();
    if let Some(k) = g.k {
        overrides.push(format!("experiment.communities.k={k}"));
    }
    if let Some(f) = g.folds {
        overrides.push(format!("experiment.folds={f}"));
    }
    overrides.extend(g.set.iter().cloned());
    let loaded = config::load(g.config.as_deref(), &overrides)?;
    let seed = g
        .seed
        .or(loaded.config.seed)
        .context("a seed is required: pass --seed or set `seed` in the config")?;
    std::fs::create_dir_all(&g.out).with_context(|| format!("creating {}", g.out.display()))?;
    let corpus_dir = g.corpus.clone().or(loaded.config.corpus.clone()).unwrap_or_else(|| g.out.clone());
    let graph_dir = g.graph.clone().or(loaded.config.graph.clone()).unwrap_or_else(|| g.out.clone());
    let provenance = Provenance {
        tool: format!("commrec {}", env!("CARGO_PKG_VERSION")),
        command: cli.command.name().to_string(),
        config_hash: loaded.hash,
        seed,
        overrides: loaded.overrides,
    };
    Ok(Run {
        cfg: loaded.config,
        seed,
        corpus_dir,
        graph_dir,
        out: Outputs::new(g.out.clone(), provenance),
    })
}

fn dispatch(cli: &Cli, run: &mut Run) -> Result<String> {
    match &cli.command {
        Command::Ingest => steps::ingest(run),
        Command::Featurize => steps::featurize(run),
        Command::Cluster => steps::cluster(run),
        Command::TrainCommunityClassifier => steps::train_classifier(run),
        Command::Assign => steps::assign(run),
        Command::GraphBuild => steps::graph_build(run),
        Command::Rankfeat => steps::rankfeat(run),
        Command::TrainRanker => steps::train_ranker(run),
        Command::Recommend(a) => steps::recommend(
            run,
            &RecommendRequest {
                paper: a.paper.clone(),
                quote: a.quote.clone(),
                reader: a.reader.clone(),
                community: a.community,
                candidates: a.candidates.clone(),
                top: a.top,
            },
        ),
        Command::Evaluate => steps::evaluate(run),
        Command::Simulate => steps::simulate(run),
        Command::Pipeline => {
            let simulate_first = cli.global.corpus.is_none() && run.cfg.corpus.is_none();
            steps::pipeline(run, simulate_first)
        }
    }
}

fn fail(command: &str, err: &anyhow::Error) -> ExitCode {
    let line = serde_json::json!({
        "command": command,
        "error": format!("{err:#}"),
    });
    eprintln!("{line}");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let name = cli.command.name();
    let mut run = match setup(&cli) {
        Ok(r) => r,
        Err(e) => return fail(name, &e),
    };
    match dispatch(&cli, &mut run) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            run.out.discard();
            fail(name, &e)
        }
    }
}
