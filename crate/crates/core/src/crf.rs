//! CRF over edge variables with pattern-based potentials on 3-cliques, and
//! synchronous mean-field inference unrolled for a fixed number of steps.
//!
//! Label 1 means "cut". A clique is the three edges of a triangle. Its
//! potential depends only on how many of the three edges are cut:
//!
//! | cuts | pattern | potential   |
//! |------|---------|-------------|
//! | 0    | 0-0-0   | `gamma[0]`  |
//! | 1    | 1-0-0   | `gamma_max` |
//! | 2    | 1-1-0   | `gamma[1]`  |
//! | 3    | 1-1-1   | `gamma[2]`  |
//!
//! Marginals are stored as `q = Q(x = 1)`; `Q(x = 0)` is `1 - q`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::graph::{CycleSet, EdgeLabeling};
use crate::objective::CostVector;
use crate::{math, Error, Result};

/// Energies `(psi(x = 0), psi(x = 1))` per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct UnaryPotentials(Vec<[f64; 2]>);

impl UnaryPotentials {
    pub fn new(values: Vec<[f64; 2]>) -> Result<Self> {
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("unary potentials"));
        }
        Ok(Self(values))
    }

    /// `psi = (0, c_e)`, so that the unary energy of a labeling is its multicut cost.
    pub fn from_costs(costs: &CostVector) -> Self {
        Self(costs.iter().map(|&c| [0.0, c]).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, edge: usize) -> [f64; 2] {
        self.0[edge]
    }

    pub fn as_slice(&self) -> &[[f64; 2]] {
        &self.0
    }
}

/// Valid 3-clique patterns, as classes of edge orderings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Pattern {
    /// 0-0-0
    AllJoined = 0,
    /// 1-1-0
    TwoCut = 1,
    /// 1-1-1
    AllCut = 2,
}

impl Pattern {
    pub const ALL: [Pattern; 3] = [Pattern::AllJoined, Pattern::TwoCut, Pattern::AllCut];

    /// The valid pattern with `cuts` cut edges; `None` for the invalid 1-0-0 class.
    pub fn from_cut_count(cuts: usize) -> Option<Pattern> {
        match cuts {
            0 => Some(Pattern::AllJoined),
            2 => Some(Pattern::TwoCut),
            3 => Some(Pattern::AllCut),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Pattern::AllJoined => "0-0-0",
            Pattern::TwoCut => "1-1-0",
            Pattern::AllCut => "1-1-1",
        }
    }
}

/// One parameter per valid pattern class, shared by all cliques, plus `gamma_max`
/// for every other configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternTable {
    pub gamma: [f64; 3],
    pub gamma_max: f64,
}

impl PatternTable {
    /// All parameters zero. Mean-field inference leaves unary marginals unchanged.
    pub fn neutral() -> Self {
        Self::uniform(0.0)
    }

    pub fn uniform(value: f64) -> Self {
        Self { gamma: [value; 3], gamma_max: value }
    }

    /// Zero on valid patterns and `penalty` on the invalid one.
    pub fn cubic_penalty(penalty: f64) -> Self {
        Self { gamma: [0.0; 3], gamma_max: penalty }
    }

    pub fn gamma_of(&self, pattern: Pattern) -> f64 {
        self.gamma[pattern as usize]
    }

    /// Clique potential for a configuration with `cuts` cut edges.
    pub fn potential(&self, cuts: usize) -> f64 {
        match Pattern::from_cut_count(cuts) {
            Some(p) => self.gamma_of(p),
            None => self.gamma_max,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.gamma.iter().all(|g| g.is_finite()) && self.gamma_max.is_finite()
    }
}

/// Triangles over edge ids with per-edge incidence lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cliques {
    triangles: Vec<[usize; 3]>,
    /// Per edge: `(clique index, other edge, other edge)`, in clique order.
    incident: Vec<Vec<(usize, usize, usize)>>,
}

impl Cliques {
    /// Fails if any cycle is not a triangle or references an edge `>= edge_count`.
    pub fn new(cycles: &CycleSet, edge_count: usize) -> Result<Self> {
        Self::from_triangles(cycles.triangles()?, edge_count)
    }

    pub fn from_triangles(triangles: Vec<[usize; 3]>, edge_count: usize) -> Result<Self> {
        let mut incident = vec![Vec::new(); edge_count];
        for (c, &[a, b, d]) in triangles.iter().enumerate() {
            if a.max(b).max(d) >= edge_count {
                return Err(Error::LengthMismatch {
                    what: "clique edge ids",
                    expected: edge_count,
                    actual: a.max(b).max(d) + 1,
                });
            }
            incident[a].push((c, b, d));
            incident[b].push((c, a, d));
            incident[d].push((c, a, b));
        }
        Ok(Self { triangles, incident })
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.incident.len()
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn incident(&self, edge: usize) -> &[(usize, usize, usize)] {
        &self.incident[edge]
    }

    fn cut_count(&self, clique: usize, labels: &EdgeLabeling) -> usize {
        self.triangles[clique].iter().filter(|&&e| labels.is_cut(e)).count()
    }
}

/// `sum_i psi_i(x_i) + sum_c psi_c(x_c)`.
pub fn energy(
    labels: &EdgeLabeling,
    unary: &UnaryPotentials,
    table: &PatternTable,
    cycles: &CycleSet,
) -> Result<f64> {
    if labels.len() != unary.len() {
        return Err(Error::LengthMismatch {
            what: "edge labeling",
            expected: unary.len(),
            actual: labels.len(),
        });
    }
    let cliques = Cliques::new(cycles, unary.len())?;
    let unary_sum: f64 = unary
        .as_slice()
        .iter()
        .zip(labels.as_slice())
        .map(|(psi, &cut)| psi[cut as usize])
        .sum();
    let clique_sum: f64 = (0..cliques.len())
        .map(|c| table.potential(cliques.cut_count(c, labels)))
        .sum();
    Ok(unary_sum + clique_sum)
}

/// Marginals `q_t` for iterations `t = 0..=T`; iteration 0 is the unary softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTrace {
    snapshots: Vec<Vec<f64>>,
}

impl MarginalTrace {
    pub fn from_snapshots(snapshots: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = snapshots.first() else {
            return Err(Error::TraceMismatch("a trace needs at least one snapshot"));
        };
        let width = first.len();
        if snapshots.iter().any(|s| s.len() != width) {
            return Err(Error::TraceMismatch("snapshots differ in length"));
        }
        if snapshots.iter().flatten().any(|q| !(0.0..=1.0).contains(q)) {
            return Err(Error::TraceMismatch("marginal outside [0, 1]"));
        }
        Ok(Self { snapshots })
    }

    /// Number of mean-field steps, `T`.
    pub fn iterations(&self) -> usize {
        self.snapshots.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.snapshots[0].len()
    }

    pub fn snapshot(&self, t: usize) -> &[f64] {
        &self.snapshots[t]
    }

    pub fn last(&self) -> &[f64] {
        self.snapshots.last().unwrap()
    }

    pub fn snapshots(&self) -> &[Vec<f64>] {
        &self.snapshots
    }
}

/// Softmax over `-psi`, reported as `q = Q(x = 1)`.
pub fn init_marginals(unary: &UnaryPotentials) -> Vec<f64> {
    unary
        .as_slice()
        .iter()
        .map(|&[psi0, psi1]| math::logistic(psi0 - psi1))
        .collect()
}

/// Excess of one clique's expected potential over `gamma_max`, for the target
/// edge fixed to `label` and the other two edges distributed as `qj`, `qk`.
#[inline]
fn clique_excess(qj: f64, qk: f64, label: usize, table: &PatternTable) -> f64 {
    let pj = [1.0 - qj, qj];
    let pk = [1.0 - qk, qk];
    let mut excess = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            if let Some(p) = Pattern::from_cut_count(label + a + b) {
                excess += pj[a] * pk[b] * (table.gamma_of(p) - table.gamma_max);
            }
        }
    }
    excess
}

/// Expected high-order energy seen by `edge` when fixed to `label`.
///
/// For each clique containing the edge this is the probability mass of the
/// conditioned valid patterns weighted by their `gamma`, plus `gamma_max` times
/// the remaining mass. It is evaluated as `gamma_max + sum(mass * (gamma - gamma_max))`
/// so that the message is exactly label-independent when all parameters agree.
pub fn high_order_message(
    q: &[f64],
    table: &PatternTable,
    cliques: &Cliques,
    edge: usize,
    label: usize,
) -> f64 {
    let incident = cliques.incident(edge);
    let base = table.gamma_max * incident.len() as f64;
    let excess: f64 = incident
        .iter()
        .map(|&(_, j, k)| clique_excess(q[j], q[k], label, table))
        .sum();
    base + excess
}

/// One synchronous update: every edge reads the previous snapshot only.
pub fn mean_field_step(
    q: &[f64],
    unary: &UnaryPotentials,
    table: &PatternTable,
    cliques: &Cliques,
) -> Vec<f64> {
    (0..q.len())
        .map(|i| {
            let [psi0, psi1] = unary.get(i);
            let m0 = high_order_message(q, table, cliques, i, 0);
            let m1 = high_order_message(q, table, cliques, i, 1);
            math::logistic((psi0 - psi1) + (m0 - m1))
        })
        .collect()
}

/// Default number of mean-field steps.
pub const DEFAULT_ITERATIONS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InferenceConfig {
    pub iterations: usize,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self { iterations: DEFAULT_ITERATIONS }
    }
}

/// Initializes from the unaries and applies `cfg.iterations` synchronous steps.
pub fn run_inference(
    unary: &UnaryPotentials,
    table: &PatternTable,
    cliques: &Cliques,
    cfg: InferenceConfig,
) -> Result<MarginalTrace> {
    if unary.len() != cliques.edge_count() {
        return Err(Error::LengthMismatch {
            what: "unary potentials",
            expected: cliques.edge_count(),
            actual: unary.len(),
        });
    }
    let mut snapshots = Vec::with_capacity(cfg.iterations + 1);
    snapshots.push(init_marginals(unary));
    for _ in 0..cfg.iterations {
        let next = mean_field_step(snapshots.last().unwrap(), unary, table, cliques);
        snapshots.push(next);
    }
    Ok(MarginalTrace { snapshots })
}

/// Marginals at or below this value round to "join".
pub const HARD_THRESHOLD: f64 = 0.5;

pub fn hard_labeling(q: &[f64]) -> EdgeLabeling {
    EdgeLabeling::from_threshold(q, HARD_THRESHOLD)
}

/// Mean of `Q(join) = 1 - q` over edges whose ground truth is join, per iteration.
/// `None` when the ground truth has no join edge.
pub fn join_marginal_means(trace: &MarginalTrace, gt: &EdgeLabeling) -> Result<Option<Vec<f64>>> {
    let mut by_tag = join_marginal_means_by_tag(trace, gt, &vec![0; gt.len()])?;
    Ok(by_tag.remove(&0))
}

/// [`join_marginal_means`] bucketed by a caller-supplied per-edge tag.
pub fn join_marginal_means_by_tag(
    trace: &MarginalTrace,
    gt: &EdgeLabeling,
    tags: &[usize],
) -> Result<BTreeMap<usize, Vec<f64>>> {
    if gt.len() != trace.edge_count() || tags.len() != trace.edge_count() {
        return Err(Error::LengthMismatch {
            what: "ground truth or tags",
            expected: trace.edge_count(),
            actual: if gt.len() != trace.edge_count() { gt.len() } else { tags.len() },
        });
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for e in (0..gt.len()).filter(|&e| !gt.is_cut(e)) {
        *counts.entry(tags[e]).or_default() += 1;
    }
    Ok(counts
        .into_iter()
        .map(|(tag, count)| {
            let means = trace
                .snapshots()
                .iter()
                .map(|q| {
                    let sum: f64 = (0..gt.len())
                        .filter(|&e| !gt.is_cut(e) && tags[e] == tag)
                        .map(|e| 1.0 - q[e])
                        .sum();
                    sum / count as f64
                })
                .collect();
            (tag, means)
        })
        .collect())
}

/// Fraction of cliques in the invalid 1-0-0 pattern. `None` without cliques.
pub fn invalid_cycle_ratio(labels: &EdgeLabeling, cliques: &Cliques) -> Option<f64> {
    if cliques.is_empty() {
        return None;
    }
    let invalid = (0..cliques.len())
        .filter(|&c| cliques.cut_count(c, labels) == 1)
        .count();
    Some(invalid as f64 / cliques.len() as f64)
}

/// [`invalid_cycle_ratio`] of the thresholded marginals at every iteration.
pub fn invalid_cycle_ratios(trace: &MarginalTrace, cliques: &Cliques) -> Option<Vec<f64>> {
    trace
        .snapshots()
        .iter()
        .map(|q| invalid_cycle_ratio(&hard_labeling(q), cliques))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{enumerate_chordless_cycles, Graph};
    use crate::objective::{cubic_objective, violation_count, PenaltyConstant};

    fn k(n: usize) -> (Graph, CycleSet, Cliques) {
        let g = Graph::complete(n).unwrap();
        let cc = enumerate_chordless_cycles(&g, 3).unwrap();
        let cl = Cliques::new(&cc, g.edge_count()).unwrap();
        (g, cc, cl)
    }

    fn unary(v: &[[f64; 2]]) -> UnaryPotentials {
        UnaryPotentials::new(v.to_vec()).unwrap()
    }

    #[test]
    fn energy_with_zero_potentials_is_unary_sum() {
        let (_, cc, _) = k(3);
        let u = unary(&[[0.5, 1.0], [0.2, -0.3], [0.0, 2.0]]);
        let x = EdgeLabeling::from_bits(&[1, 0, 1]);
        assert_eq!(energy(&x, &u, &PatternTable::neutral(), &cc).unwrap(), 1.0 + 0.2 + 2.0);
    }

    #[test]
    fn invalid_clique_costs_gamma_max() {
        let (_, cc, _) = k(3);
        let u = unary(&[[0.0; 2]; 3]);
        let table = PatternTable { gamma: [0.1, 0.2, 0.3], gamma_max: 7.5 };
        let x = EdgeLabeling::from_bits(&[1, 0, 0]);
        assert_eq!(energy(&x, &u, &table, &cc).unwrap(), 7.5);
    }

    #[test]
    fn energy_rejects_longer_cycles() {
        let g = Graph::new(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let cc = enumerate_chordless_cycles(&g, 4).unwrap();
        let u = unary(&[[0.0; 2]; 4]);
        let x = EdgeLabeling::all_joined(4);
        assert_eq!(
            energy(&x, &u, &PatternTable::neutral(), &cc),
            Err(Error::NonTriangleCycle { index: 0, len: 4 })
        );
    }

    #[test]
    fn energy_matches_cubic_objective_on_k4() {
        let (_, cc, _) = k(4);
        let costs = CostVector::new(alloc::vec![0.3, -1.2, 0.7, 2.0, -0.4, 0.1]).unwrap();
        let u = UnaryPotentials::from_costs(&costs);
        let c = 9.0;
        let table = PatternTable::cubic_penalty(c);
        for mask in 0..64 {
            let x = EdgeLabeling::from_mask(6, mask);
            let unary_sum: f64 = (0..6).map(|e| u.get(e)[x.is_cut(e) as usize]).sum();
            let e = energy(&x, &u, &table, &cc).unwrap();
            assert_eq!(e - unary_sum, c * violation_count(&x, &cc) as f64);
            let cubic = cubic_objective(&costs, &x, PenaltyConstant::new(c).unwrap(), &cc).unwrap();
            assert!((e - cubic).abs() < 1e-12);
        }
    }

    #[test]
    fn init_marginal_examples() {
        assert_eq!(init_marginals(&unary(&[[0.3, 0.3]])), [0.5]);
        let q = init_marginals(&unary(&[[0.0, 9.0f64.ln()]]))[0];
        assert!((q - 0.1).abs() < 1e-15);
        for s in [-30.0, -2.5, 0.0, 1.0, 40.0] {
            let q = init_marginals(&unary(&[[1.0, 1.0 + s]]))[0];
            let oracle = 1.0 / (1.0 + f64::exp(s));
            assert!((q - oracle).abs() < 1e-15, "s = {s}");
        }
    }

    #[test]
    fn uniform_table_message_counts_cliques() {
        let (_, _, cl) = k(5);
        let table = PatternTable::uniform(1.25);
        let q = [0.1, 0.9, 0.3, 0.5, 0.7, 0.2, 0.6, 0.4, 0.8, 0.05];
        for e in 0..10 {
            for l in 0..2 {
                let m = high_order_message(&q, &table, &cl, e, l);
                assert!((m - 1.25 * 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn degenerate_marginals_select_one_pattern() {
        let (_, _, cl) = k(3);
        let table = PatternTable { gamma: [0.4, -0.7, 1.9], gamma_max: 5.0 };
        let q = [0.3, 1.0, 1.0];
        assert!((high_order_message(&q, &table, &cl, 0, 0) - -0.7).abs() < 1e-15);
        assert!((high_order_message(&q, &table, &cl, 0, 1) - 1.9).abs() < 1e-15);
    }

    #[test]
    fn hand_expanded_message() {
        // Target edge 0 with q_j = 0.8, q_k = 0.6.
        // label 0: (0,0) 0.2*0.4 -> g000; (1,1) 0.8*0.6 -> g110; (0,1),(1,0) invalid.
        //   = 0.08*0 + 0.48*0.2 + (1 - 0.56)*2.0 = 0.096 + 0.88 = 0.976
        // label 1: (1,0) 0.8*0.4 -> g110; (0,1) 0.2*0.6 -> g110; (1,1) 0.48 -> g111; (0,0) invalid.
        //   = 0.44*0.2 + 0.48*(-0.5) + (1 - 0.92)*2.0 = 0.088 - 0.24 + 0.16 = 0.008
        let (_, _, cl) = k(3);
        let table = PatternTable { gamma: [0.0, 0.2, -0.5], gamma_max: 2.0 };
        let q = [0.5, 0.8, 0.6];
        assert!((high_order_message(&q, &table, &cl, 0, 0) - 0.976).abs() < 1e-14);
        assert!((high_order_message(&q, &table, &cl, 0, 1) - 0.008).abs() < 1e-14);
    }

    #[test]
    fn uniform_table_step_is_identity_on_init() {
        let (_, _, cl) = k(4);
        let u = unary(&[[0.1, 0.9], [1.0, -1.0], [0.0, 0.0], [2.0, 0.5], [-0.3, 0.3], [0.7, 0.2]]);
        let q0 = init_marginals(&u);
        for g in [0.0, 3.0, -17.25] {
            assert_eq!(mean_field_step(&q0, &u, &PatternTable::uniform(g), &cl), q0);
        }
    }

    #[test]
    fn lone_cut_edge_is_suppressed_monotonically() {
        // Edge 0 leans cut, edges 1 and 2 lean join: thresholded, the clique is 1-0-0.
        let (_, _, cl) = k(3);
        let u = unary(&[[0.2, 0.0], [0.0, 3.0], [0.0, 3.0]]);
        let table = PatternTable { gamma: [0.0, 2.0, 0.0], gamma_max: 8.0 };
        let trace = run_inference(&u, &table, &cl, InferenceConfig { iterations: 6 }).unwrap();
        assert!(trace.snapshot(0)[0] > 0.5 && trace.snapshot(0)[1] < 0.5);

        // Scalar oracle: edges 1 and 2 are symmetric, so the system is (a, b).
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        let psi = |cuts: usize| [0.0, 8.0, 2.0, 0.0][cuts];
        let expected = |qj: f64, qk: f64, l: usize| {
            let mut m = 0.0;
            for (x, px) in [(0, 1.0 - qj), (1, qj)] {
                for (y, py) in [(0, 1.0 - qk), (1, qk)] {
                    m += px * py * psi(l + x + y);
                }
            }
            m
        };
        let (mut a, mut b) = (sig(0.2), sig(-3.0));
        for t in 1..=6 {
            let na = sig(0.2 + expected(b, b, 0) - expected(b, b, 1));
            let nb = sig(-3.0 + expected(a, b, 0) - expected(a, b, 1));
            assert!(na < a, "iteration {t}");
            (a, b) = (na, nb);
            assert!((trace.snapshot(t)[0] - a).abs() < 1e-12);
            assert!((trace.snapshot(t)[1] - b).abs() < 1e-12);
            assert_eq!(trace.snapshot(t)[1], trace.snapshot(t)[2]);
        }
    }

    #[test]
    fn zero_iterations_is_init_only() {
        let (_, _, cl) = k(3);
        let u = unary(&[[0.0, 1.0], [1.0, 0.0], [0.3, 0.3]]);
        let trace = run_inference(&u, &PatternTable::neutral(), &cl, InferenceConfig { iterations: 0 }).unwrap();
        assert_eq!(trace.iterations(), 0);
        assert_eq!(trace.last(), init_marginals(&u).as_slice());
        assert_eq!(InferenceConfig::default().iterations, 3);
    }

    #[test]
    fn metrics_examples() {
        let (_, _, cl) = k(3);
        let trace = MarginalTrace::from_snapshots(alloc::vec![alloc::vec![0.9, 0.1, 0.1]]).unwrap();
        assert_eq!(invalid_cycle_ratios(&trace, &cl), Some(alloc::vec![1.0]));
        assert_eq!(invalid_cycle_ratio(&EdgeLabeling::from_bits(&[1, 1, 0]), &cl), Some(0.0));
        let empty = Cliques::from_triangles(Vec::new(), 1).unwrap();
        assert_eq!(invalid_cycle_ratio(&EdgeLabeling::all_cut(1), &empty), None);

        let gt = EdgeLabeling::from_bits(&[1, 0, 0]);
        let perfect = MarginalTrace::from_snapshots(alloc::vec![alloc::vec![1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(join_marginal_means(&perfect, &gt).unwrap(), Some(alloc::vec![1.0]));
        assert_eq!(join_marginal_means(&perfect, &EdgeLabeling::all_cut(3)).unwrap(), None);
        let by_tag = join_marginal_means_by_tag(&trace, &gt, &[0, 1, 2]).unwrap();
        assert_eq!(by_tag.keys().copied().collect::<Vec<_>>(), [1, 2]);
        assert!((by_tag[&1][0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn edge_relabeling_permutes_marginals() {
        let g = Graph::complete(4).unwrap();
        let cc = enumerate_chordless_cycles(&g, 3).unwrap();
        let cl = Cliques::new(&cc, 6).unwrap();
        let u = unary(&[[0.1, 0.9], [1.0, -1.0], [0.0, 0.2], [2.0, 0.5], [-0.3, 0.3], [0.7, 0.2]]);
        let table = PatternTable { gamma: [0.2, -0.4, 0.9], gamma_max: 1.7 };
        let base = run_inference(&u, &table, &cl, InferenceConfig::default()).unwrap();

        // Edge e is moved to position perm[e].
        let perm = [3, 5, 0, 1, 4, 2];
        let mut pu = alloc::vec![[0.0; 2]; 6];
        for e in 0..6 {
            pu[perm[e]] = u.get(e);
        }
        let pt: Vec<[usize; 3]> = cl.triangles().iter().map(|t| t.map(|e| perm[e])).collect();
        let pcl = Cliques::from_triangles(pt, 6).unwrap();
        let moved = run_inference(&unary(&pu), &table, &pcl, InferenceConfig::default()).unwrap();
        for t in 0..=3 {
            for e in 0..6 {
                assert!((moved.snapshot(t)[perm[e]] - base.snapshot(t)[e]).abs() < 1e-15);
            }
        }
    }
}
