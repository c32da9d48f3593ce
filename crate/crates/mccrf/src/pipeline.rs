//! Per-instance inference, solving and scoring, and dataset loading.

use std::path::{Path, PathBuf};
use std::time::Instant;

use mccrf_core::crf::{self, hard_labeling, MarginalTrace, PatternTable};
use mccrf_core::data::{clustering_metrics, ClusteringInstance};
use mccrf_core::graph::{enumerate_chordless_cycles, labeling_from_decomposition};
use mccrf_core::learn::{edge_accuracy, predict, Example, UnaryModel};
use mccrf_core::objective::{cubic_objective, multicut_cost, violation_count, ClampCounter, CostVector, PenaltyConstant};
use mccrf_core::solvers::{exact_solve, greedy_join, kl_refine, round_and_repair, CostSource, SolverResult, EXACT_MAX_NODES};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::instance::load_instance;
use crate::report::{
    Heuristic, InstanceMetrics, InstanceReport, IterationStats, SolverMetrics, SolverReport, ThresholdReport,
};

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub heuristic: Heuristic,
    pub exact: bool,
    pub penalty_c: Option<f64>,
    pub timings: bool,
}

/// Instance files of a dataset: a single file, or every `*.json` in a
/// directory except `manifest.json`, sorted by name.
pub fn dataset_files(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        if !path.exists() {
            return Err(Error::Data(format!("{}: no such file or directory", path.display())));
        }
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_name().is_some_and(|n| n != "manifest.json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Data(format!("{}: no instance files (*.json)", path.display())));
    }
    Ok(files)
}

pub fn instance_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Loads every instance in order, in parallel.
pub fn load_dataset(path: &Path) -> Result<Vec<(String, ClusteringInstance)>> {
    dataset_files(path)?
        .par_iter()
        .map(|p| Ok((instance_name(p), load_instance(p)?)))
        .collect()
}

/// Runs `f` on a pool with `jobs` threads (0 = one per core).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Usage(format!("--jobs: {e}")))?;
    Ok(pool.install(f))
}

fn timed<T>(on: bool, f: impl FnOnce() -> T) -> (T, Option<f64>) {
    let start = Instant::now();
    let out = f();
    (out, on.then(|| start.elapsed().as_secs_f64()))
}

fn check_finite(q: &[f64]) -> Result<()> {
    if q.iter().any(|v| !v.is_finite()) {
        return Err(mccrf_core::Error::NonFinite("marginals").into());
    }
    Ok(())
}

fn iteration_stats(trace: &MarginalTrace, example: &Example) -> Result<Vec<IterationStats>> {
    let join = match &example.gt {
        Some(gt) => crf::join_marginal_means(trace, gt)?,
        None => None,
    };
    let invalid = crf::invalid_cycle_ratios(trace, &example.cliques);
    Ok(trace
        .snapshots()
        .iter()
        .enumerate()
        .map(|(t, q)| {
            let cut_marginal = example.gt.as_ref().and_then(|gt| {
                let cut: Vec<f64> = (0..gt.len()).filter(|&e| gt.is_cut(e)).map(|e| q[e]).collect();
                (!cut.is_empty()).then(|| cut.iter().sum::<f64>() / cut.len() as f64)
            });
            IterationStats {
                iteration: t,
                mean_cut_probability: if q.is_empty() { 0.0 } else { q.iter().sum::<f64>() / q.len() as f64 },
                join_marginal: join.as_ref().map(|j| j[t]),
                cut_marginal,
                invalid_cycle_ratio: invalid.as_ref().map(|r| r[t]),
            }
        })
        .collect())
}

struct Solved {
    thresholded: ThresholdReport,
    results: Vec<(SolverResult, Option<f64>)>,
    cycles_complete: bool,
}

/// Thresholds `q`, reports the cubic objective of the result, and runs the
/// chosen heuristic (plus the exact solver on request) on `costs`.
fn solve(
    instance: &ClusteringInstance,
    q: &[f64],
    costs: &CostVector,
    from_marginals: bool,
    opts: SolveOptions,
) -> Result<Solved> {
    let graph = instance.graph();
    let cycles = enumerate_chordless_cycles(graph, 3)?;
    let hard = hard_labeling(q);
    let penalty = match opts.penalty_c {
        Some(c) => PenaltyConstant::new(c)?,
        None => PenaltyConstant::sufficient_for(costs),
    };
    let thresholded = ThresholdReport {
        cut_edges: hard.cut_count(),
        violated_cycles: violation_count(&hard, &cycles),
        multicut_cost: multicut_cost(costs, &hard)?,
        penalty_c: penalty.value(),
        cubic_objective: cubic_objective(costs, &hard, penalty, &cycles)?,
    };
    if opts.exact && graph.node_count() > EXACT_MAX_NODES {
        return Err(Error::Data(format!(
            "--exact: instance has {} nodes; the exact solver enumerates partitions and accepts at most {EXACT_MAX_NODES}",
            graph.node_count()
        )));
    }
    let mut results = Vec::new();
    let (r, t) = timed(opts.timings, || match opts.heuristic {
        Heuristic::Gaec => greedy_join(graph, costs),
        Heuristic::Kl => greedy_join(graph, costs).and_then(|g| kl_refine(graph, costs, &g.decomposition)),
        Heuristic::Repair => {
            let source = if from_marginals { CostSource::Marginals } else { CostSource::Given(costs) };
            round_and_repair(graph, q, source)
        }
    });
    results.push((r?, t));
    if opts.exact {
        let (r, t) = timed(opts.timings, || exact_solve(graph, costs));
        results.push((r?, t));
    }
    Ok(Solved { thresholded, results, cycles_complete: cycles.is_complete() })
}

fn assemble(
    name: &str,
    instance: &ClusteringInstance,
    example: &Example,
    iterations: Vec<IterationStats>,
    q: &[f64],
    cost_source: &str,
    solved: Solved,
) -> Result<InstanceReport> {
    let graph = instance.graph();
    let solvers = solved
        .results
        .iter()
        .map(|(r, t)| SolverReport {
            method: r.method.name().into(),
            objective: r.objective,
            components: r.decomposition.component_count(),
            decomposition: r.decomposition.ids().to_vec(),
            elapsed_seconds: *t,
        })
        .collect();
    let metrics = match (instance.gt_decomposition(), instance.gt_labeling()) {
        (gt_d, Some(gt_y)) => {
            let mut per = Vec::new();
            for (r, _) in &solved.results {
                let labels = labeling_from_decomposition(graph, &r.decomposition)?;
                let pairwise_accuracy = match gt_d {
                    Some(d) => clustering_metrics(graph, &r.decomposition, d)?.pairwise_accuracy,
                    None => clustering_metrics(
                        graph,
                        &r.decomposition,
                        &mccrf_core::graph::decomposition_from_labeling(graph, gt_y)?,
                    )?
                    .pairwise_accuracy,
                };
                per.push(SolverMetrics {
                    method: r.method.name().into(),
                    pairwise_accuracy,
                    edge_accuracy: edge_accuracy(&labels, gt_y),
                });
            }
            Some(InstanceMetrics { thresholded_edge_accuracy: edge_accuracy(&hard_labeling(q), gt_y), solvers: per })
        }
        _ => None,
    };
    Ok(InstanceReport {
        name: name.into(),
        nodes: graph.node_count(),
        edges: graph.edge_count(),
        cliques: example.cliques.len(),
        cycles_complete: solved.cycles_complete,
        labeled: instance.is_labeled(),
        cost_source: cost_source.into(),
        iterations,
        thresholded: solved.thresholded,
        solvers,
        metrics,
        elapsed_seconds: None,
    })
}

/// Mean-field inference with the model, then repair and scoring.
pub fn infer_instance(
    name: &str,
    instance: &ClusteringInstance,
    model: &UnaryModel,
    table: &PatternTable,
    iterations: usize,
    opts: SolveOptions,
) -> Result<(InstanceReport, MarginalTrace)> {
    let start = Instant::now();
    let example = Example::from_instance(instance)?;
    let trace = predict(model, table, &example, iterations)?;
    for q in trace.snapshots() {
        check_finite(q)?;
    }
    let q = trace.last();
    let costs = CostVector::from_probabilities(q, &mut ClampCounter::default());
    let solved = solve(instance, q, &costs, true, opts)?;
    let stats = iteration_stats(&trace, &example)?;
    let mut report = assemble(name, instance, &example, stats, q, "marginals", solved)?;
    report.elapsed_seconds = opts.timings.then(|| start.elapsed().as_secs_f64());
    Ok((report, trace))
}

/// Solves with the instance's own costs, or with costs from the model's
/// marginals when the instance has none.
pub fn solve_instance(
    name: &str,
    instance: &ClusteringInstance,
    model: Option<(&UnaryModel, &PatternTable)>,
    iterations: usize,
    opts: SolveOptions,
) -> Result<InstanceReport> {
    if let Some(costs) = instance.costs() {
        let start = Instant::now();
        let example = Example::from_instance(instance)?;
        // Marginals implied by the costs: c = log((1 - q) / q).
        let q: Vec<f64> = costs.iter().map(|&c| 1.0 / (1.0 + c.exp())).collect();
        let solved = solve(instance, &q, costs, false, opts)?;
        let mut report = assemble(name, instance, &example, Vec::new(), &q, "instance", solved)?;
        report.elapsed_seconds = opts.timings.then(|| start.elapsed().as_secs_f64());
        return Ok(report);
    }
    match model {
        Some((m, t)) => Ok(infer_instance(name, instance, m, t, iterations, opts)?.0),
        None => Err(Error::Data(format!("{name}: instance has no edge costs; pass --model to derive them"))),
    }
}
