//! `brainhgt` command-line interface.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O, 4 bad configuration,
//! 5 disconnected input graph, 6 checkpoint checksum mismatch,
//! 7 missing artifact, 8 training diverged, 9 malformed file, 10 other.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use brainhgt::graph::Sparsifier;
use brainhgt::{Error, Variant};
use clap::{Parser, Subcommand, ValueEnum};

use crate::commands::Ctx;
use crate::config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "brainhgt",
    version,
    about = "Hierarchical graph transformer for brain connectome classification"
)]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Cohort seed for `generate`; single-repeat seed for training commands;
    /// repeat to load for `eval` and `export`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_variant)]
    variant: Option<Variant>,
    #[arg(long, global = true)]
    method: Option<Method>,
    /// Edge density for `--method threshold`.
    #[arg(long, global = true)]
    density: Option<f64>,
    /// Cohort directory written by `generate`.
    #[arg(long, global = true)]
    cohort: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Omst,
    Threshold,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic cohort.
    Generate,
    /// Build sparse subject graphs.
    Graph,
    /// Train with repeated stratified splits.
    Train,
    /// Re-evaluate a run's checkpoints on their test splits.
    Eval {
        #[arg(long)]
        run: PathBuf,
    },
    /// Train every model variant, or only `--variant`.
    Ablate,
    /// Hop-threshold sweep and/or sparsifier comparison.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        hops: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        densities: Vec<f64>,
        /// Let the hop threshold train instead of freezing it.
        #[arg(long)]
        learn_hop: bool,
    },
    /// Write attention, assignment and prior matrices for a run's test
    /// subjects.
    Export {
        #[arg(long)]
        run: PathBuf,
    },
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::parse(s).map_err(|e| e.to_string())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Io(_) => 3,
                Error::BadConfig(_) => 4,
                Error::DisconnectedInput { .. } => 5,
                Error::ChecksumMismatch { .. } => 6,
                Error::MissingArtifact(_) => 7,
                Error::Diverged { .. } => 8,
                Error::Format { .. } | Error::Json(_) => 9,
                _ => 10,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return 9;
        }
    }
    10
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let mut cfg = ExperimentConfig::load(cli.config.as_deref())?;
    if let Some(v) = cli.variant {
        cfg.variant = v;
    }
    match (cli.method, cli.density) {
        (Some(Method::Omst), None) => cfg.sparsifier = Sparsifier::Omst,
        (Some(Method::Threshold), Some(density)) => cfg.sparsifier = Sparsifier::Threshold { density },
        (Some(Method::Threshold), None) => return Err(Error::BadConfig("--method threshold needs --density".into()).into()),
        (_, Some(_)) if !matches!(cli.method, Some(Method::Threshold)) => {
            return Err(Error::BadConfig("--density applies to --method threshold".into()).into())
        }
        _ => {}
    }
    let cohort = cli.cohort.clone();
    let out = |default: PathBuf| cli.out.clone().unwrap_or(default);
    let ctx = |out: PathBuf, cfg: ExperimentConfig| Ctx { cfg, seed: cli.seed, out };
    match cli.command {
        Command::Generate => commands::generate(ctx(out("cohort".into()), cfg)),
        Command::Graph => commands::graph(ctx(out("graphs".into()), cfg), cohort.as_deref()),
        Command::Train => commands::train(ctx(out("run".into()), cfg), cohort.as_deref()),
        Command::Eval { run } => commands::eval(ctx(out(run.join("eval")), cfg), &run, cohort.as_deref()),
        Command::Ablate => commands::ablate(ctx(out("ablation".into()), cfg), cli.variant, cohort.as_deref()),
        Command::Sweep {
            hops,
            densities,
            learn_hop,
        } => {
            if !hops.is_empty() {
                cfg.hops = hops;
            }
            if !densities.is_empty() {
                cfg.densities = densities;
            }
            if learn_hop {
                cfg.freeze_hop = Some(false);
            }
            commands::sweep(ctx(out("sweep".into()), cfg), cohort.as_deref())
        }
        Command::Export { run } => commands::export(ctx(out(run.join("interpretability")), cfg), &run, cohort.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BRAINHGT_LOG", "info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
