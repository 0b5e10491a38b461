mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use config::{parse_pair, RunConfig};

/// Susceptibility estimation on dynamic graphs: build graphs, simulate
/// diffusion, generate ground truth, and train and evaluate the estimator.
#[derive(Debug, Parser)]
#[command(name = "dysuse", version)]
struct Cli {
    /// Worker threads for simulation and evaluation.
    #[arg(long, global = true, env = "DYSUSE_WORKERS")]
    workers: Option<usize>,
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", value_parser = parse_pair)]
    set: Vec<(String, String)>,
    /// Master seed (same as `master_seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, short, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a dynamic graph (generate or ingest, split, weight, perturb).
    Graph(GraphArgs),
    /// Monte-Carlo susceptibility table for one seed set.
    Simulate(SimulateArgs),
    /// Ground-truth dataset of random seed sets.
    Truth(TruthArgs),
    /// Train the estimator on a ground-truth dataset.
    Train(TrainArgs),
    /// MAE and Precision@k of a trained checkpoint.
    Eval(EvalArgs),
    /// Time a model forward pass against Monte-Carlo simulation.
    Bench(BenchArgs),
    /// Train and compare the full model against its ablations.
    Ablate(AblateArgs),
    /// Top-k susceptible nodes: model versus simulation.
    CaseStudy(CaseStudyArgs),
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// Generator name (`ba`).
    #[arg(long, conflicts_with = "ingest")]
    pub generate: Option<String>,
    /// Temporal edge list (`src dst time [weight]`).
    #[arg(long)]
    pub ingest: Option<PathBuf>,
    /// Treat the ingested edge list as directed.
    #[arg(long)]
    pub directed: bool,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    /// Number of snapshots.
    #[arg(long)]
    pub t: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Comma-separated seed node ids.
    #[arg(long)]
    pub seeds: String,
    #[arg(long)]
    pub sims: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TruthArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub sims: Option<usize>,
    /// Comma-separated seed-set sizes.
    #[arg(long)]
    pub sizes: Option<String>,
    /// Seed sets per size.
    #[arg(long)]
    pub sets: Option<usize>,
    /// Output file stem (`<name>.csv`, `<name>.meta`).
    #[arg(long, default_value = "truth")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Ground-truth CSV; its `.meta` file must sit next to it.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Fill the seconds column of the training log.
    #[arg(long)]
    pub record_time: bool,
    /// Allow ground truth generated on another graph.
    #[arg(long)]
    pub inductive: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub sims: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Training ground truth.
    #[arg(long)]
    pub truth: PathBuf,
    /// Held-out ground truth.
    #[arg(long)]
    pub test_truth: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CaseStudyArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Comma-separated seed node ids.
    #[arg(long)]
    pub seeds: String,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub sims: Option<usize>,
}

fn overrides(cli: &Cli) -> Vec<(String, String)> {
    let mut o = cli.set.clone();
    let mut put = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            o.push((k.to_string(), v));
        }
    };
    put("master_seed", cli.seed.map(|s| s.to_string()));
    let s = |x: Option<usize>| x.map(|v| v.to_string());
    match &cli.command {
        Command::Graph(a) => {
            if a.ingest.is_some() {
                put("graph.source", Some("ingest".into()));
                put("graph.path", a.ingest.as_ref().map(|p| p.display().to_string()));
            } else if a.generate.is_some() {
                put("graph.source", Some("generate".into()));
                put("graph.generator", a.generate.clone());
            }
            if a.directed {
                put("graph.directed", Some("true".into()));
            }
            put("graph.n", s(a.n));
            put("graph.m", s(a.m));
            put("graph.t", s(a.t));
        }
        Command::Simulate(a) => put("truth.sims", s(a.sims)),
        Command::Truth(a) => {
            put("truth.sims", s(a.sims));
            put("truth.sizes", a.sizes.clone());
            put("truth.sets", s(a.sets));
        }
        Command::Train(a) => {
            put("train.epochs", s(a.epochs));
            put("train.lr", a.lr.map(|x| x.to_string()));
            if a.record_time {
                put("train.record_time", Some("true".into()));
            }
            if a.inductive {
                put("train.inductive", Some("true".into()));
            }
        }
        Command::Eval(a) => put("eval.k", s(a.k)),
        Command::Bench(a) => {
            put("bench.sims", s(a.sims));
            put("bench.runs", s(a.runs));
        }
        Command::Ablate(a) => {
            put("train.epochs", s(a.epochs));
            put("train.lr", a.lr.map(|x| x.to_string()));
        }
        Command::CaseStudy(a) => {
            put("eval.k", s(a.k));
            put("truth.sims", s(a.sims));
        }
    }
    o
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides(&cli))?;
    let out = cli.out.as_path();
    let written = match &cli.command {
        Command::Graph(_) => commands::graph(&cfg, out)?,
        Command::Simulate(a) => commands::simulate(&cfg, out, a)?,
        Command::Truth(a) => commands::truth(&cfg, out, a)?,
        Command::Train(a) => commands::train(&cfg, out, a)?,
        Command::Eval(a) => commands::eval(&cfg, out, a)?,
        Command::Bench(a) => commands::bench(&cfg, out, a)?,
        Command::Ablate(a) => commands::ablate(&cfg, out, a)?,
        Command::CaseStudy(a) => commands::case_study(&cfg, out, a)?,
    };
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() {
    let matches = Cli::command().after_long_help(config::keys_help()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
