//! The `mccrf` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use mccrf_core::crf::{PatternTable, DEFAULT_ITERATIONS, HARD_THRESHOLD};
use mccrf_core::data::{derive_seeds, generate_planted, GeneratorConfig, CALIBRATED_SIGMA};
use mccrf_core::learn::{train_end_to_end, train_unary, EpochStats, Example, TrainConfig, UnaryModel, DEFAULT_HIDDEN};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result, EXIT_OK, EXIT_USAGE};
use crate::instance::{instance_to_json, read_point_cloud, save_instance};
use crate::model::{ModelFile, Stage, TrainingRecord};
use crate::pipeline::{infer_instance, load_dataset, solve_instance, with_jobs, SolveOptions};
use crate::report::{mean_report, metric_definitions, write_trace, Heuristic, RunConfig, RunReport, REPORT_SCHEMA};

/// Default output directory for files whose path is not given.
pub const OUT_DIR_ENV: &str = "MCCRF_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "mccrf-out";

#[derive(Debug, Parser)]
#[command(name = "mccrf", version, about = "Minimum cost multicut with a mean-field CRF layer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate seeded planted-partition instances.
    Gen(GenArgs),
    /// Convert a CSV point cloud (`id, features..., [label]`) into an instance file.
    Import(ImportArgs),
    /// Train the unary network, or the network and pattern table end to end.
    Train(TrainArgs),
    /// Run mean-field inference and repair the marginals into a decomposition.
    Infer(InferArgs),
    /// Solve the multicut problem on explicit or model-derived costs.
    Solve(SolveArgs),
    /// Score a model on labeled instances: per-instance and mean rows.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Number of clusters.
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 5)]
    per_cluster: usize,
    /// Node feature dimension.
    #[arg(long, default_value_t = 4)]
    dim: usize,
    /// Feature noise standard deviation.
    #[arg(long, default_value_t = CALIBRATED_SIGMA)]
    sigma: f64,
    /// Cluster centers are uniform in [-s, s]^dim.
    #[arg(long, default_value_t = 1.0)]
    center_scale: f64,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory [default: $MCCRF_OUT_DIR/data].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace existing instance files.
    #[arg(long)]
    force: bool,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Debug, Args)]
struct ImportArgs {
    csv: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Directory of labeled instances.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    stage: Stage,
    /// Starting model; required for `end2end`.
    #[arg(long)]
    model_in: Option<PathBuf>,
    /// [default: $MCCRF_OUT_DIR/model-<stage>.json]
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Learning curve CSV [default: next to the model, `<stem>.curve.csv`].
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Hidden width of a new unary network (0 = affine).
    #[arg(long, default_value_t = DEFAULT_HIDDEN)]
    hidden: usize,
    /// Learning rate of this stage [default: 0.1 unary, 0.01 end2end].
    #[arg(long)]
    rate: Option<f64>,
    /// Pattern-table rate relative to the network rate.
    #[arg(long)]
    pattern_rate_scale: Option<f64>,
    /// Epochs of this stage [default: 200 unary, 60 end2end].
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Mean-field iterations unrolled during end-to-end training.
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    iterations: usize,
    #[arg(long)]
    validation_fraction: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct RunFlags {
    /// Mean-field iterations; 0 reports unary-only results.
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    iterations: usize,
    #[arg(long, value_enum, default_value_t = Heuristic::Repair)]
    heuristic: Heuristic,
    /// Penalty per violated cycle in the reported cubic objective [default: sum |c| + 1].
    #[arg(long)]
    penalty_c: Option<f64>,
    /// Recorded in the report.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// [default: $MCCRF_OUT_DIR/<command>-report.json]
    #[arg(long)]
    report: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Add wall-clock timings to the report (makes it run-dependent).
    #[arg(long)]
    timings: bool,
}

#[derive(Debug, Args)]
struct InferArgs {
    /// Instance file or directory.
    input: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Write `<instance>.trace.csv` files here.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
    #[command(flatten)]
    flags: RunFlags,
}

#[derive(Debug, Args)]
struct SolveArgs {
    input: PathBuf,
    /// Derive costs from this model's marginals when an instance has none.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Also run the exact solver (at most 12 nodes).
    #[arg(long)]
    exact: bool,
    #[command(flatten)]
    flags: RunFlags,
}

#[derive(Debug, Args)]
struct EvalArgs {
    input: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    flags: RunFlags,
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("mccrf: error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Import(a) => cmd_import(a),
        Command::Train(a) => cmd_train(a),
        Command::Infer(a) => cmd_infer(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Eval(a) => cmd_eval(a),
    }
}

fn out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

fn refuse_overwrite(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::Usage(format!("{} exists; pass --force to overwrite", path.display())));
    }
    Ok(())
}

fn display(path: &Path) -> String {
    path.to_string_lossy().into_owned()
}

#[derive(Serialize)]
struct Manifest<'a> {
    format: &'static str,
    clusters: usize,
    per_cluster: usize,
    dim: usize,
    sigma: f64,
    center_scale: f64,
    seed: u64,
    instances: Vec<ManifestEntry<'a>>,
}

#[derive(Serialize)]
struct ManifestEntry<'a> {
    file: &'a str,
    seed: u64,
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let cfg = GeneratorConfig {
        clusters: a.k,
        per_cluster: a.per_cluster,
        dim: a.dim,
        center_scale: a.center_scale,
        sigma: a.sigma,
        seed: a.seed,
    };
    cfg.validate()?;
    if a.count == 0 {
        return Err(Error::Usage("--count must be positive".into()));
    }
    let out = a.out.unwrap_or_else(|| out_dir().join("data"));
    if out.exists() {
        let mut entries = std::fs::read_dir(&out).map_err(|e| Error::io(&out, e))?;
        if entries.next().is_some() {
            if !a.force {
                return Err(Error::Usage(format!("{} is not empty; pass --force to overwrite", out.display())));
            }
            for entry in std::fs::read_dir(&out).map_err(|e| Error::io(&out, e))?.flatten() {
                let name = entry.file_name().to_string_lossy().into_owned();
                if (name.starts_with("inst-") && name.ends_with(".json")) || name == "manifest.json" {
                    std::fs::remove_file(entry.path()).map_err(|e| Error::io(entry.path(), e))?;
                }
            }
        }
    }
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let seeds = derive_seeds(a.seed, a.count);
    let names: Vec<String> = (0..a.count).map(|i| format!("inst-{i:04}.json")).collect();
    with_jobs(a.jobs, || {
        seeds.par_iter().zip(&names).try_for_each(|(&seed, name)| -> Result<()> {
            let instance = generate_planted(&cfg.with_seed(seed))?;
            save_instance(&out.join(name), &instance)
        })
    })??;
    let manifest = Manifest {
        format: "mccrf-dataset/1",
        clusters: cfg.clusters,
        per_cluster: cfg.per_cluster,
        dim: cfg.dim,
        sigma: cfg.sigma,
        center_scale: cfg.center_scale,
        seed: cfg.seed,
        instances: names.iter().zip(&seeds).map(|(file, &seed)| ManifestEntry { file, seed }).collect(),
    };
    let path = out.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    println!("wrote {} instances to {}", a.count, out.display());
    Ok(())
}

fn cmd_import(a: ImportArgs) -> Result<()> {
    refuse_overwrite(&a.out, a.force)?;
    let file = std::fs::File::open(&a.csv).map_err(|e| Error::io(&a.csv, e))?;
    let instance = read_point_cloud(file).map_err(|e| e.in_file(&a.csv))?;
    create_parent(&a.out)?;
    std::fs::write(&a.out, instance_to_json(&instance)).map_err(|e| Error::io(&a.out, e))?;
    println!(
        "wrote {} ({} nodes, {})",
        a.out.display(),
        instance.graph().node_count(),
        if instance.is_labeled() { "labeled" } else { "unlabeled" }
    );
    Ok(())
}

fn write_curve(path: &Path, curve: &[EpochStats]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let wrap = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    w.write_record(["epoch", "train_loss", "validation_loss", "validation_accuracy", "validation_invalid_ratio"])
        .map_err(wrap)?;
    for s in curve {
        w.write_record([
            s.epoch.to_string(),
            s.train_loss.to_string(),
            s.validation_loss.to_string(),
            s.validation_accuracy.to_string(),
            s.validation_invalid_ratio.map(|r| r.to_string()).unwrap_or_default(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let model_out = a.model_out.clone().unwrap_or_else(|| out_dir().join(format!("model-{}.json", a.stage.name())));
    let curve_path = a.curve.clone().unwrap_or_else(|| crate::report::twin_path(&model_out, "curve"));
    refuse_overwrite(&model_out, a.force)?;
    let start = match (a.stage, &a.model_in) {
        (Stage::End2end, None) => {
            return Err(Error::Usage(
                "--stage end2end needs a pretrained model: run `mccrf train --stage unary` first and pass it with --model-in"
                    .into(),
            ))
        }
        (_, Some(path)) => Some(ModelFile::load(path)?),
        (Stage::Unary, None) => None,
    };

    let base = TrainConfig::default();
    let mut cfg = TrainConfig {
        iterations: a.iterations,
        seed: a.seed,
        batch_size: a.batch_size.unwrap_or(base.batch_size),
        validation_fraction: a.validation_fraction.unwrap_or(base.validation_fraction),
        pattern_rate_scale: a.pattern_rate_scale.unwrap_or(base.pattern_rate_scale),
        ..base
    };
    match a.stage {
        Stage::Unary => {
            cfg.unary_rate = a.rate.unwrap_or(cfg.unary_rate);
            cfg.unary_epochs = a.epochs.unwrap_or(cfg.unary_epochs);
        }
        Stage::End2end => {
            cfg.end_to_end_rate = a.rate.unwrap_or(cfg.end_to_end_rate);
            cfg.end_to_end_epochs = a.epochs.unwrap_or(cfg.end_to_end_epochs);
        }
    }
    cfg.validate()?;

    let dataset = load_dataset(&a.data)?;
    if let Some((name, _)) = dataset.iter().find(|(_, inst)| !inst.is_labeled()) {
        return Err(Error::Data(format!("{name}: training needs ground-truth labels (gt_cluster or gt_label)")));
    }
    let examples: Vec<Example> =
        dataset.par_iter().map(|(_, inst)| Example::from_instance(inst)).collect::<Result<_, _>>()?;
    let dim = examples[0].features.first().map_or(0, Vec::len);
    if let Some((name, _)) = dataset.iter().find(|(_, inst)| inst.edge_feature_dim() != dim) {
        return Err(Error::Data(format!("{name}: edge feature dimension differs from {dim}")));
    }

    let (model, table, mut history) = match start {
        Some(file) => {
            let model = file.unary_model()?;
            if model.input_dim() != dim {
                return Err(Error::Data(format!(
                    "model expects {}-dimensional edge features, dataset has {dim}",
                    model.input_dim()
                )));
            }
            let table = if a.stage == Stage::Unary { PatternTable::neutral() } else { file.table() };
            (model, table, file.history)
        }
        None => (UnaryModel::new(dim, a.hidden, a.seed), PatternTable::neutral(), Vec::new()),
    };
    let outcome = match a.stage {
        Stage::Unary => train_unary(&examples, model, &cfg)?,
        Stage::End2end => train_end_to_end(&examples, model, table, &cfg)?,
    };
    history.push(TrainingRecord {
        stage: a.stage,
        data: display(&a.data),
        instances: examples.len(),
        config: cfg.into(),
        best_epoch: outcome.best_epoch,
        clamped_probabilities: outcome.clamped,
    });
    let file = ModelFile::new(&outcome.model, outcome.table, a.stage, history);
    create_parent(&model_out)?;
    file.save(&model_out)?;
    create_parent(&curve_path)?;
    write_curve(&curve_path, &outcome.curve)?;
    let best = &outcome.curve[outcome.best_epoch];
    println!(
        "wrote {} and {} (best epoch {}, validation loss {:.6}, validation accuracy {:.4})",
        model_out.display(),
        curve_path.display(),
        outcome.best_epoch,
        best.validation_loss,
        best.validation_accuracy
    );
    Ok(())
}

fn solve_options(flags: &RunFlags, exact: bool) -> SolveOptions {
    SolveOptions { heuristic: flags.heuristic, exact, penalty_c: flags.penalty_c, timings: flags.timings }
}

fn run_config(input: &Path, model: Option<(&Path, &ModelFile)>, flags: &RunFlags, exact: bool) -> RunConfig {
    RunConfig {
        input: display(input),
        model: model.map(|(p, _)| display(p)),
        model_stage: model.map(|(_, m)| m.stage),
        iterations: model.map(|_| flags.iterations),
        heuristic: flags.heuristic,
        exact,
        penalty_c: flags.penalty_c,
        threshold: HARD_THRESHOLD,
        seed: flags.seed,
    }
}

fn finish(command: &str, config: RunConfig, instances: Vec<crate::report::InstanceReport>, flags: &RunFlags, start: Instant) -> Result<()> {
    let report = RunReport {
        schema: REPORT_SCHEMA.into(),
        command: command.into(),
        seed: flags.seed,
        config,
        metric_definitions: metric_definitions(),
        mean: mean_report(&instances),
        instances,
        total_seconds: flags.timings.then(|| start.elapsed().as_secs_f64()),
    };
    let path = flags.report.clone().unwrap_or_else(|| out_dir().join(format!("{command}-report.json")));
    create_parent(&path)?;
    let written = report.save(&path)?;
    print_summary(&report);
    println!("wrote {}", written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "));
    Ok(())
}

fn print_summary(report: &RunReport) {
    let rows = report.instances.len();
    let (iterations, solvers, accuracy) = match (&report.mean, report.instances.first()) {
        (Some(m), _) => (&m.iterations, m.solvers.iter().map(|s| (s.method.clone(), s.objective, s.pairwise_accuracy)).collect::<Vec<_>>(), m.thresholded_edge_accuracy),
        (None, Some(r)) => (
            &r.iterations,
            r.solvers
                .iter()
                .map(|s| {
                    let acc = r.metrics.as_ref().and_then(|m| m.solvers.iter().find(|x| x.method == s.method)).map(|x| x.pairwise_accuracy);
                    (s.method.clone(), s.objective, acc)
                })
                .collect(),
            r.metrics.as_ref().map(|m| m.thresholded_edge_accuracy),
        ),
        (None, None) => return,
    };
    println!("{rows} instance(s)");
    for s in iterations {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        println!(
            "  iteration {}: join marginal {}, invalid cycle ratio {}",
            s.iteration,
            fmt(s.join_marginal),
            fmt(s.invalid_cycle_ratio)
        );
    }
    if let Some(acc) = accuracy {
        println!("  thresholded edge accuracy {acc:.4}");
    }
    for (method, objective, acc) in solvers {
        match acc {
            Some(acc) => println!("  {method}: objective {objective:.4}, pairwise accuracy {acc:.4}"),
            None => println!("  {method}: objective {objective:.4}"),
        }
    }
}

fn cmd_infer(a: InferArgs) -> Result<()> {
    let start = Instant::now();
    let file = ModelFile::load(&a.model)?;
    let (model, table) = (file.unary_model()?, file.table());
    let dataset = load_dataset(&a.input)?;
    let opts = solve_options(&a.flags, false);
    let results = with_jobs(a.flags.jobs, || {
        dataset
            .par_iter()
            .map(|(name, inst)| infer_instance(name, inst, &model, &table, a.flags.iterations, opts).map_err(|e| prefix(name, e)))
            .collect::<Result<Vec<_>>>()
    })??;
    if let Some(dir) = &a.trace_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for ((name, _), (_, trace)) in dataset.iter().zip(&results) {
            let stem = name.strip_suffix(".json").unwrap_or(name);
            write_trace(&dir.join(format!("{stem}.trace.csv")), trace)?;
        }
    }
    let instances = results.into_iter().map(|(r, _)| r).collect();
    finish("infer", run_config(&a.input, Some((&a.model, &file)), &a.flags, false), instances, &a.flags, start)
}

fn cmd_solve(a: SolveArgs) -> Result<()> {
    let start = Instant::now();
    let file = a.model.as_deref().map(ModelFile::load).transpose()?;
    let loaded = match &file {
        Some(f) => Some((f.unary_model()?, f.table())),
        None => None,
    };
    let dataset = load_dataset(&a.input)?;
    let opts = solve_options(&a.flags, a.exact);
    let instances = with_jobs(a.flags.jobs, || {
        dataset
            .par_iter()
            .map(|(name, inst)| {
                solve_instance(name, inst, loaded.as_ref().map(|(m, t)| (m, t)), a.flags.iterations, opts)
                    .map_err(|e| prefix(name, e))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let model = a.model.as_deref().zip(file.as_ref());
    finish("solve", run_config(&a.input, model, &a.flags, a.exact), instances, &a.flags, start)
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let start = Instant::now();
    let file = ModelFile::load(&a.model)?;
    let (model, table) = (file.unary_model()?, file.table());
    let dataset = load_dataset(&a.input)?;
    if let Some((name, _)) = dataset.iter().find(|(_, inst)| !inst.is_labeled()) {
        return Err(Error::Data(format!("{name}: eval needs ground-truth labels; use `infer` for unlabeled instances")));
    }
    let opts = solve_options(&a.flags, false);
    let instances = with_jobs(a.flags.jobs, || {
        dataset
            .par_iter()
            .map(|(name, inst)| {
                infer_instance(name, inst, &model, &table, a.flags.iterations, opts)
                    .map(|(r, _)| r)
                    .map_err(|e| prefix(name, e))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    finish("eval", run_config(&a.input, Some((&a.model, &file)), &a.flags, false), instances, &a.flags, start)
}

fn prefix(name: &str, e: Error) -> Error {
    match e {
        Error::Data(m) if m.starts_with(name) => Error::Data(m),
        e => e.in_file(name),
    }
}
