//! Subcommand implementations.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use brainhgt::cohort::{generate_synthetic_cohort, Cohort};
use brainhgt::graph::pearson_correlation;
use brainhgt::io::cohort::{read_cohort, write_cohort};
use brainhgt::io::graphs::write_graph;
use brainhgt::io::reports::{export_cohort, write_histories, write_runs, write_summaries};
use brainhgt::io::table::{fmt_real, write_table};
use brainhgt::io::{load_model, save_model};
use brainhgt::metrics::{MetricSummary, Metrics};
use brainhgt::train::{
    evaluate, hop_sweep, prepare_dataset, run_repeats, sparsifier_comparison, Dataset, RepeatReport, Split, SplitProtocol,
};
use brainhgt::{Error, Variant};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::manifest::RunRecorder;

/// Flags shared by every subcommand, already merged into the config where
/// they apply.
pub struct Ctx {
    pub cfg: ExperimentConfig,
    pub seed: Option<u64>,
    pub out: PathBuf,
}

fn load_cohort(cfg: &ExperimentConfig, dir: Option<&Path>) -> anyhow::Result<Cohort<f64>> {
    match dir.or(cfg.cohort_dir.as_deref()) {
        Some(d) => Ok(read_cohort(d)?),
        None => Ok(generate_synthetic_cohort(&cfg.cohort)?),
    }
}

fn protocol_for(cfg: &ExperimentConfig, seed: Option<u64>) -> SplitProtocol {
    match seed {
        Some(s) => SplitProtocol {
            repeats: 1,
            seeds: vec![s],
            ..cfg.protocol.clone()
        },
        None => cfg.protocol.clone(),
    }
}

pub fn generate(ctx: Ctx) -> anyhow::Result<()> {
    let mut cfg = ctx.cfg;
    if let Some(s) = ctx.seed {
        cfg.cohort.seed = s;
    }
    let mut rec = RunRecorder::start(&ctx.out, "generate", Some(cfg.cohort.seed))?;
    let cohort = generate_synthetic_cohort::<f64>(&cfg.cohort)?;
    for p in write_cohort(&ctx.out, &cohort)? {
        rec.record(&p);
    }
    log::info!("wrote {} subjects to {}", cohort.len(), ctx.out.display());
    rec.finish(&cfg)?;
    Ok(())
}

pub fn graph(ctx: Ctx, cohort_dir: Option<&Path>) -> anyhow::Result<()> {
    let cfg = ctx.cfg;
    let cohort = load_cohort(&cfg, cohort_dir)?;
    let mut rec = RunRecorder::start(&ctx.out, "graph", ctx.seed)?;
    std::fs::create_dir_all(ctx.out.join("graphs"))?;
    let mut rows = Vec::new();
    let mut first_err = None;
    for (i, ts) in cohort.subjects.iter().enumerate() {
        let built = pearson_correlation(ts).and_then(|r| cfg.sparsifier.apply(&r));
        match built {
            Ok(g) => {
                let name = format!("graphs/subject_{i:04}.csv");
                let side = write_graph(&rec.path(&name), &g)?;
                rec.record(&ctx.out.join(name.replace(".csv", ".json")));
                rows.push(vec![
                    i.to_string(),
                    fmt_real(side.density),
                    fmt_real(side.ge),
                    fmt_real(side.cost),
                    fmt_real(side.objective),
                    "ok".into(),
                ]);
            }
            Err(e) => {
                log::error!("subject {i}: {e}");
                rows.push(vec![
                    i.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    e.to_string(),
                ]);
                first_err.get_or_insert(e);
            }
        }
    }
    let header: Vec<String> = ["subject", "density", "ge", "cost", "objective", "status"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    write_table(&rec.path("densities.csv"), Some(&header), &rows)?;
    rec.finish(&cfg)?;
    match first_err {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SplitRecord {
    seed: u64,
    #[serde(flatten)]
    split: Split,
}

const SPLITS_FILE: &str = "splits.json";

fn checkpoint_dir(run: &Path, label: &str, seed: u64) -> PathBuf {
    run.join("checkpoints").join(label).join(format!("seed_{seed}"))
}

/// Trains every listed variant and writes metrics, runs, history, splits
/// and checkpoints.
fn train_variants(ctx: Ctx, command: &str, variants: &[Variant], cohort_dir: Option<&Path>) -> anyhow::Result<()> {
    let cfg = ctx.cfg;
    let protocol = protocol_for(&cfg, ctx.seed);
    let cohort = load_cohort(&cfg, cohort_dir)?;
    let data = prepare_dataset(&cohort, cfg.sparsifier)?;
    let mut rec = RunRecorder::start(&ctx.out, command, ctx.seed)?;
    let mut summaries = Vec::new();
    let mut runs = Vec::new();
    let mut splits = Vec::new();
    let mut reports: Vec<(Variant, RepeatReport<f64>)> = Vec::new();
    for &v in variants {
        let report = run_repeats(&cfg.model, v, &data, &protocol, &cfg.train)?;
        summaries.push((vec![v.name().to_string()], report.summary.clone()));
        for r in &report.runs {
            runs.push((v.name().to_string(), r.seed, r.test));
            let dir = checkpoint_dir(&ctx.out, v.name(), r.seed);
            save_model(&r.outcome.model, &dir)?;
            rec.record(&dir.join(brainhgt::io::checkpoint::WEIGHTS_FILE));
            rec.record(&dir.join(brainhgt::io::checkpoint::MANIFEST_FILE));
            if splits.len() < protocol.seeds.len() {
                splits.push(SplitRecord {
                    seed: r.seed,
                    split: r.split.clone(),
                });
            }
        }
        log::info!(
            "{}: test AUC {:.4} ± {:.4}",
            v.name(),
            report.summary.mean.auc,
            report.summary.std.auc
        );
        reports.push((v, report));
    }
    write_summaries(&rec.path("metrics.csv"), &["variant"], &summaries)?;
    write_runs(&rec.path("runs.csv"), &runs)?;
    let (_, first) = &reports[0];
    let histories: Vec<(u64, &[brainhgt::train::EpochRecord])> =
        first.runs.iter().map(|r| (r.seed, r.outcome.history.as_slice())).collect();
    write_histories(&rec.path("history.csv"), &histories)?;
    std::fs::write(rec.path(SPLITS_FILE), serde_json::to_string(&splits)? + "\n")?;
    rec.finish(&ExperimentConfig {
        protocol,
        variant: variants[0],
        ..cfg
    })?;
    Ok(())
}

pub fn train(ctx: Ctx, cohort_dir: Option<&Path>) -> anyhow::Result<()> {
    let v = ctx.cfg.variant;
    train_variants(ctx, "train", &[v], cohort_dir)
}

pub fn ablate(ctx: Ctx, only: Option<Variant>, cohort_dir: Option<&Path>) -> anyhow::Result<()> {
    match only {
        Some(v) => train_variants(ctx, "ablate", &[v], cohort_dir),
        None => train_variants(ctx, "ablate", &Variant::ALL, cohort_dir),
    }
}

/// Loads a finished run: its config, splits and the data it trained on.
struct Run {
    cfg: ExperimentConfig,
    splits: Vec<SplitRecord>,
    data: Dataset<f64>,
    cohort: Cohort<f64>,
}

fn open_run(run: &Path, cohort_dir: Option<&Path>) -> anyhow::Result<Run> {
    let cfg_path = run.join(crate::manifest::CONFIG_FILE);
    let splits_path = run.join(SPLITS_FILE);
    for p in [&cfg_path, &splits_path] {
        if !p.exists() {
            return Err(Error::MissingArtifact(p.display().to_string()).into());
        }
    }
    let cfg = ExperimentConfig::load(Some(&cfg_path))?;
    let splits: Vec<SplitRecord> = serde_json::from_str(&std::fs::read_to_string(&splits_path)?).map_err(Error::from)?;
    let cohort = load_cohort(&cfg, cohort_dir)?;
    let data = prepare_dataset(&cohort, cfg.sparsifier)?;
    Ok(Run { cfg, splits, data, cohort })
}

fn pick<'a>(splits: &'a [SplitRecord], seed: Option<u64>) -> anyhow::Result<&'a SplitRecord> {
    match seed {
        Some(s) => splits
            .iter()
            .find(|r| r.seed == s)
            .with_context(|| format!("run has no repeat with seed {s}")),
        None => splits.first().context("run has no repeats"),
    }
}

pub fn eval(ctx: Ctx, run: &Path, cohort_dir: Option<&Path>) -> anyhow::Result<()> {
    let r = open_run(run, cohort_dir)?;
    let variant = r.cfg.variant;
    let chosen: Vec<&SplitRecord> = match ctx.seed {
        Some(_) => vec![pick(&r.splits, ctx.seed)?],
        None => r.splits.iter().collect(),
    };
    let mut rec = RunRecorder::start(&ctx.out, "eval", ctx.seed)?;
    let mut runs = Vec::new();
    for s in &chosen {
        let model = load_model::<f64>(&checkpoint_dir(run, variant.name(), s.seed))?;
        let m = evaluate(&model, &r.data, &s.split.test)?;
        runs.push((variant.name().to_string(), s.seed, m));
    }
    let metrics: Vec<Metrics> = runs.iter().map(|x| x.2).collect();
    write_summaries(
        &rec.path("metrics.csv"),
        &["variant"],
        &[(vec![variant.name().into()], MetricSummary::from_runs(&metrics))],
    )?;
    write_runs(&rec.path("runs.csv"), &runs)?;
    rec.finish(&r.cfg)?;
    Ok(())
}

pub fn sweep(ctx: Ctx, cohort_dir: Option<&Path>) -> anyhow::Result<()> {
    let cfg = ctx.cfg;
    if cfg.hops.is_empty() && cfg.densities.is_empty() {
        bail!(Error::BadConfig("sweep needs --hops or --densities".into()));
    }
    let protocol = protocol_for(&cfg, ctx.seed);
    let cohort = load_cohort(&cfg, cohort_dir)?;
    let mut rec = RunRecorder::start(&ctx.out, "sweep", ctx.seed)?;
    if !cfg.hops.is_empty() {
        let data = prepare_dataset(&cohort, cfg.sparsifier)?;
        let freeze = cfg.freeze_hop.unwrap_or(true);
        let rows = hop_sweep(&cfg.hops, &cfg.model, cfg.variant, &data, &protocol, &cfg.train, freeze)?;
        let rows: Vec<(Vec<String>, MetricSummary)> = rows.into_iter().map(|r| (vec![fmt_real(r.hop)], r.summary)).collect();
        write_summaries(&rec.path("hop_sweep.csv"), &["hop"], &rows)?;
    }
    if !cfg.densities.is_empty() {
        let rows = sparsifier_comparison(&cohort, &cfg.densities, &cfg.model, cfg.variant, &protocol, &cfg.train)?;
        let rows: Vec<(Vec<String>, MetricSummary)> = rows
            .into_iter()
            .map(|r| {
                (
                    vec![r.method, r.density.map(fmt_real).unwrap_or_default(), fmt_real(r.mean_density)],
                    r.summary,
                )
            })
            .collect();
        write_summaries(&rec.path("sparsifiers.csv"), &["method", "density", "mean_density"], &rows)?;
    }
    rec.finish(&ExperimentConfig { protocol, ..cfg })?;
    Ok(())
}

pub fn export(ctx: Ctx, run: &Path, cohort_dir: Option<&Path>) -> anyhow::Result<()> {
    let r = open_run(run, cohort_dir)?;
    let s = pick(&r.splits, ctx.seed)?;
    let model = load_model::<f64>(&checkpoint_dir(run, r.cfg.variant.name(), s.seed))?;
    let subjects: Vec<_> = s.split.test.iter().map(|&i| (i, &r.data.subjects[i], r.data.labels[i])).collect();
    let mut rec = RunRecorder::start(&ctx.out, "export", Some(s.seed))?;
    let index = export_cohort(&model, &subjects, &ctx.out)?;
    for f in &index.files {
        rec.record(&ctx.out.join(&f.file));
    }
    rec.record(&ctx.out.join("index.json"));
    let planted = r.cohort.communities.clone();
    std::fs::write(rec.path("planted_communities.json"), serde_json::to_string(&planted)? + "\n")?;
    rec.finish(&r.cfg)?;
    Ok(())
}
