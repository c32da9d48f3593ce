//! Run reports (JSON), their CSV twins, and marginal traces (CSV).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use mccrf_core::crf::MarginalTrace;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Stage;

pub const REPORT_SCHEMA: &str = "mccrf-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Heuristic {
    /// Greedy additive edge contraction.
    Gaec,
    /// Greedy contraction followed by Kernighan-Lin refinement.
    Kl,
    /// Threshold at 0.5, connected components, Kernighan-Lin refinement.
    Repair,
}

/// Everything needed to re-run the command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: String,
    pub model: Option<String>,
    pub model_stage: Option<Stage>,
    pub iterations: Option<usize>,
    pub heuristic: Heuristic,
    pub exact: bool,
    /// `null` means the default `sum |c_e| + 1` per instance.
    pub penalty_c: Option<f64>,
    pub threshold: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    /// Mean cut probability over all edges.
    pub mean_cut_probability: f64,
    /// Mean `Q(join)` over ground-truth join edges.
    pub join_marginal: Option<f64>,
    /// Mean `Q(cut)` over ground-truth cut edges.
    pub cut_marginal: Option<f64>,
    /// Fraction of cliques in the invalid 1-0-0 pattern after thresholding.
    pub invalid_cycle_ratio: Option<f64>,
}

/// The thresholded labeling before any repair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub cut_edges: usize,
    pub violated_cycles: usize,
    pub multicut_cost: f64,
    pub penalty_c: f64,
    pub cubic_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub method: String,
    pub objective: f64,
    pub components: usize,
    pub decomposition: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverMetrics {
    pub method: String,
    pub pairwise_accuracy: f64,
    pub edge_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMetrics {
    /// Edge accuracy of the thresholded final marginals.
    pub thresholded_edge_accuracy: f64,
    pub solvers: Vec<SolverMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub name: String,
    pub nodes: usize,
    pub edges: usize,
    pub cliques: usize,
    /// False when a chordless cycle longer than a triangle exists.
    pub cycles_complete: bool,
    pub labeled: bool,
    /// `marginals` (log-odds of the final marginals) or `instance` (explicit costs).
    pub cost_source: String,
    pub iterations: Vec<IterationStats>,
    pub thresholded: ThresholdReport,
    pub solvers: Vec<SolverReport>,
    pub metrics: Option<InstanceMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanSolver {
    pub method: String,
    pub objective: f64,
    pub components: f64,
    pub pairwise_accuracy: Option<f64>,
    pub edge_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanReport {
    pub instances: usize,
    pub iterations: Vec<IterationStats>,
    pub thresholded_edge_accuracy: Option<f64>,
    pub solvers: Vec<MeanSolver>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub command: String,
    pub config: RunConfig,
    pub seed: u64,
    pub metric_definitions: BTreeMap<String, String>,
    pub instances: Vec<InstanceReport>,
    pub mean: Option<MeanReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_seconds: Option<f64>,
}

pub fn metric_definitions() -> BTreeMap<String, String> {
    [
        ("pairwise_accuracy", "fraction of node pairs whose same/different-cluster relation matches the ground truth (Rand index)"),
        ("edge_accuracy", "fraction of graph edges whose cut/join label matches the ground truth; equals pairwise_accuracy on complete graphs"),
        ("thresholded_edge_accuracy", "edge accuracy of the final marginals thresholded at 0.5, before repair"),
        ("join_marginal", "mean Q(join) over ground-truth join edges"),
        ("invalid_cycle_ratio", "fraction of triangles with exactly one cut edge after thresholding at 0.5"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values.flatten() {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Mean row over instances, in instance order. `None` for fewer than two instances.
pub fn mean_report(instances: &[InstanceReport]) -> Option<MeanReport> {
    if instances.len() < 2 {
        return None;
    }
    let depth = instances.iter().map(|r| r.iterations.len()).max().unwrap_or(0);
    let iterations = (0..depth)
        .map(|t| {
            let at: Vec<&IterationStats> = instances.iter().filter_map(|r| r.iterations.get(t)).collect();
            IterationStats {
                iteration: t,
                mean_cut_probability: at.iter().map(|s| s.mean_cut_probability).sum::<f64>() / at.len() as f64,
                join_marginal: mean_of(at.iter().map(|s| s.join_marginal)),
                cut_marginal: mean_of(at.iter().map(|s| s.cut_marginal)),
                invalid_cycle_ratio: mean_of(at.iter().map(|s| s.invalid_cycle_ratio)),
            }
        })
        .collect();
    let methods: Vec<String> = instances[0].solvers.iter().map(|s| s.method.clone()).collect();
    let solvers = methods
        .into_iter()
        .map(|method| {
            let runs: Vec<&SolverReport> =
                instances.iter().filter_map(|r| r.solvers.iter().find(|s| s.method == method)).collect();
            let metric = |f: fn(&SolverMetrics) -> f64| {
                mean_of(instances.iter().map(|r| {
                    r.metrics.as_ref().and_then(|m| m.solvers.iter().find(|s| s.method == method)).map(f)
                }))
            };
            MeanSolver {
                objective: runs.iter().map(|s| s.objective).sum::<f64>() / runs.len() as f64,
                components: runs.iter().map(|s| s.components as f64).sum::<f64>() / runs.len() as f64,
                pairwise_accuracy: metric(|m| m.pairwise_accuracy),
                edge_accuracy: metric(|m| m.edge_accuracy),
                method,
            }
        })
        .collect();
    Some(MeanReport {
        instances: instances.len(),
        iterations,
        thresholded_edge_accuracy: mean_of(instances.iter().map(|r| r.metrics.as_ref().map(|m| m.thresholded_edge_accuracy))),
        solvers,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let wrap = |e: csv::Error| Error::Data(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `report.json` -> `report.<suffix>.csv`.
pub fn twin_path(report: &Path, suffix: &str) -> PathBuf {
    let stem = report.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    report.with_file_name(format!("{stem}.{suffix}.csv"))
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    /// Writes the JSON report plus `<stem>.marginals.csv` and `<stem>.invalid.csv`.
    pub fn save(&self, path: &Path) -> Result<Vec<PathBuf>> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))?;
        let rows = self
            .instances
            .iter()
            .map(|r| (r.name.as_str(), &r.iterations))
            .chain(self.mean.iter().map(|m| ("mean", &m.iterations)));
        let marginals = twin_path(path, "marginals");
        write_csv(
            &marginals,
            &["instance", "iteration", "mean_cut_probability", "join_marginal", "cut_marginal"],
            rows.clone().flat_map(|(name, its)| {
                its.iter().map(move |s| {
                    vec![
                        name.to_string(),
                        s.iteration.to_string(),
                        s.mean_cut_probability.to_string(),
                        fmt_opt(s.join_marginal),
                        fmt_opt(s.cut_marginal),
                    ]
                })
            }),
        )?;
        let invalid = twin_path(path, "invalid");
        write_csv(
            &invalid,
            &["instance", "iteration", "invalid_cycle_ratio"],
            rows.flat_map(|(name, its)| {
                its.iter().map(move |s| vec![name.to_string(), s.iteration.to_string(), fmt_opt(s.invalid_cycle_ratio)])
            }),
        )?;
        Ok(vec![path.to_path_buf(), marginals, invalid])
    }

    pub fn parse(text: &str) -> Result<Self> {
        crate::instance::from_json(text)
    }
}

/// Columns `iteration, edge_id, q`.
pub fn write_trace(path: &Path, trace: &MarginalTrace) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "iteration,edge_id,q").map_err(io)?;
    for (t, q) in trace.snapshots().iter().enumerate() {
        for (e, v) in q.iter().enumerate() {
            writeln!(out, "{t},{e},{v}").map_err(io)?;
        }
    }
    out.flush().map_err(io)
}
