//! Exact and heuristic multicut solvers, and rounding of marginals back to a
//! decomposition.
//!
//! Every solver returns a [`Decomposition`], so its induced labeling is always
//! feasible. Objectives are recomputed with [`multicut_cost`] in edge-id order.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::crf::hard_labeling;
use crate::graph::{decomposition_from_labeling, labeling_from_decomposition, Decomposition, Graph};
use crate::objective::{multicut_cost, ClampCounter, CostVector};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Exact,
    GreedyJoin,
    KernighanLin,
    Repair,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::GreedyJoin => "gaec",
            Method::KernighanLin => "kl",
            Method::Repair => "repair",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub decomposition: Decomposition,
    pub objective: f64,
    pub method: Method,
    /// Wall-clock time; the core crate has no clock and leaves this at zero.
    pub elapsed_seconds: f64,
}

impl SolverResult {
    fn new(graph: &Graph, costs: &CostVector, decomposition: Decomposition, method: Method) -> Result<Self> {
        let labels = labeling_from_decomposition(graph, &decomposition)?;
        let objective = multicut_cost(costs, &labels)?;
        Ok(Self { decomposition, objective, method, elapsed_seconds: 0.0 })
    }
}

fn check_costs(graph: &Graph, costs: &CostVector) -> Result<()> {
    if costs.len() != graph.edge_count() {
        return Err(Error::LengthMismatch {
            what: "cost vector",
            expected: graph.edge_count(),
            actual: costs.len(),
        });
    }
    Ok(())
}

/// Largest node count [`exact_solve`] accepts (Bell(12) is about 4.2 million partitions).
pub const EXACT_MAX_NODES: usize = 12;

/// Global optimum by enumerating every set partition of the nodes as a
/// restricted growth string. Ties go to the lexicographically first string.
pub fn exact_solve(graph: &Graph, costs: &CostVector) -> Result<SolverResult> {
    check_costs(graph, costs)?;
    let n = graph.node_count();
    if n > EXACT_MAX_NODES {
        return Err(Error::TooLargeForExact { nodes: n, max: EXACT_MAX_NODES });
    }
    let mut search = PartitionSearch {
        graph,
        costs,
        labels: vec![0; n],
        best: None,
        tolerance: 1e-9 * (1.0 + costs.abs_sum()),
    };
    if n > 0 {
        search.descend(1, 1, 0.0);
    }
    let (_, ids) = search.best.take().unwrap_or((0.0, Vec::new()));
    SolverResult::new(graph, costs, Decomposition::from_ids(&ids), Method::Exact)
}

struct PartitionSearch<'a> {
    graph: &'a Graph,
    costs: &'a CostVector,
    labels: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
    tolerance: f64,
}

impl PartitionSearch<'_> {
    /// Nodes `0..node` are assigned using labels `0..used`; `cost` is the cut cost so far.
    fn descend(&mut self, node: usize, used: usize, cost: f64) {
        if node == self.labels.len() {
            self.offer(cost);
            return;
        }
        for label in 0..=used {
            let added: f64 = self
                .graph
                .neighbors(node)
                .iter()
                .filter(|&&(u, _)| u < node && self.labels[u] != label)
                .map(|&(_, e)| self.costs[e])
                .sum();
            self.labels[node] = label;
            self.descend(node + 1, used.max(label + 1), cost + added);
        }
    }

    fn offer(&mut self, cost: f64) {
        let replace = match &self.best {
            None => true,
            Some((best, _)) if cost < best - self.tolerance => true,
            Some((best, ids)) if cost <= best + self.tolerance => {
                // Near tie: settle on the edge-order objective so the result is reproducible.
                self.exact_cost(&self.labels) < self.exact_cost(ids)
            }
            Some(_) => false,
        };
        if replace {
            self.best = Some((cost, self.labels.clone()));
        }
    }

    fn exact_cost(&self, ids: &[usize]) -> f64 {
        let d = Decomposition::from_ids(ids);
        let y = labeling_from_decomposition(self.graph, &d).expect("sizes match");
        multicut_cost(self.costs, &y).expect("sizes match")
    }
}

/// Greedy additive edge contraction: starting from singletons, repeatedly join
/// the two adjacent components whose connecting edges have the largest positive
/// total cost, i.e. the join that lowers the objective most.
pub fn greedy_join(graph: &Graph, costs: &CostVector) -> Result<SolverResult> {
    check_costs(graph, costs)?;
    let n = graph.node_count();
    let mut component: Vec<usize> = (0..n).collect();
    // (a, b) with a < b -> total cost of edges between components a and b.
    let mut between: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (e, &(u, v)) in graph.edges().iter().enumerate() {
        *between.entry((u, v)).or_insert(0.0) += costs[e];
    }
    loop {
        let mut choice: Option<((usize, usize), f64)> = None;
        for (&key, &w) in &between {
            if w > 0.0 && choice.is_none_or(|(_, best)| w > best) {
                choice = Some((key, w));
            }
        }
        let Some(((keep, gone), _)) = choice else { break };
        for c in component.iter_mut().filter(|c| **c == gone) {
            *c = keep;
        }
        let moved: Vec<((usize, usize), f64)> = between
            .iter()
            .filter(|(&(a, b), _)| a == gone || b == gone)
            .map(|(&k, &w)| (k, w))
            .collect();
        for (key, w) in moved {
            between.remove(&key);
            let other = if key.0 == gone { key.1 } else { key.0 };
            if other == keep {
                continue;
            }
            let merged = (keep.min(other), keep.max(other));
            *between.entry(merged).or_insert(0.0) += w;
        }
    }
    SolverResult::new(graph, costs, Decomposition::from_ids(&component), Method::GreedyJoin)
}

/// Local search moves accepted by [`kl_refine`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Move {
    Relocate { node: usize, to: usize },
    Isolate { node: usize },
    Merge { keep: usize, gone: usize },
}

/// Move budget per node for [`kl_refine`].
pub const KL_MOVES_PER_NODE: usize = 50;

/// Kernighan-Lin style local search from `start`.
///
/// Elementary moves are: relocate one node to an adjacent component, isolate a
/// node as a new singleton, and merge two adjacent components. The search
/// alternates two phases:
///
/// 1. First improvement: scan moves in a fixed order (per node: adjacent
///    components by id, then the singleton move; afterwards merges of adjacent
///    component pairs) and apply the first strictly improving one, until none
///    is left.
/// 2. A Kernighan-Lin pass: move every node at most once, each time choosing
///    the best relocation or isolation even if it worsens the objective, and
///    keep the prefix of the sequence with the lowest objective if that is a
///    strict improvement. Otherwise the search stops.
///
/// At most `KL_MOVES_PER_NODE * |V|` committed moves are made. The result is
/// never worse than `start`.
pub fn kl_refine(graph: &Graph, costs: &CostVector, start: &Decomposition) -> Result<SolverResult> {
    check_costs(graph, costs)?;
    let initial = SolverResult::new(graph, costs, start.clone(), Method::KernighanLin)?;
    let n = graph.node_count();
    let mut state = Partition::new(graph, costs, start.ids());
    let budget = KL_MOVES_PER_NODE * n;
    let mut moves = 0;
    'search: while moves < budget {
        while moves < budget {
            let Some(mv) = state.first_improving_move() else { break };
            state.apply(mv);
            moves += 1;
        }
        let sequence = state.kl_pass();
        if sequence.is_empty() {
            break;
        }
        for mv in sequence {
            if moves == budget {
                break 'search;
            }
            state.apply(mv);
            moves += 1;
        }
    }
    let refined = SolverResult::new(graph, costs, Decomposition::from_ids(&state.label), Method::KernighanLin)?;
    Ok(if refined.objective <= initial.objective { refined } else { initial })
}

#[derive(Clone)]
struct Partition<'a> {
    graph: &'a Graph,
    costs: &'a CostVector,
    label: Vec<usize>,
    size: Vec<usize>,
    tolerance: f64,
}

impl<'a> Partition<'a> {
    fn new(graph: &'a Graph, costs: &'a CostVector, ids: &[usize]) -> Self {
        let mut size = vec![0usize; ids.len() + 1];
        for &l in ids {
            size[l] += 1;
        }
        Self { graph, costs, label: ids.to_vec(), size, tolerance: 1e-12 * (1.0 + costs.abs_sum()) }
    }

    fn apply(&mut self, mv: Move) {
        match mv {
            Move::Relocate { node, to } => {
                self.size[self.label[node]] -= 1;
                self.size[to] += 1;
                self.label[node] = to;
            }
            Move::Isolate { node } => {
                let fresh = self.size.iter().position(|&s| s == 0).expect("fewer components than nodes + 1");
                self.size[self.label[node]] -= 1;
                self.size[fresh] += 1;
                self.label[node] = fresh;
            }
            Move::Merge { keep, gone } => {
                for l in self.label.iter_mut().filter(|l| **l == gone) {
                    *l = keep;
                }
                self.size[keep] += self.size[gone];
                self.size[gone] = 0;
            }
        }
    }

    /// Objective change of each node move available to `v`, in scan order.
    fn node_moves(&self, v: usize, weight: &mut BTreeMap<usize, f64>, out: &mut Vec<(Move, f64)>) {
        weight.clear();
        out.clear();
        for &(u, e) in self.graph.neighbors(v) {
            *weight.entry(self.label[u]).or_insert(0.0) += self.costs[e];
        }
        let own = weight.get(&self.label[v]).copied().unwrap_or(0.0);
        // Leaving the own component cuts `own`; joining `to` un-cuts `w`.
        for (&to, &w) in weight.iter() {
            if to != self.label[v] {
                out.push((Move::Relocate { node: v, to }, own - w));
            }
        }
        if self.size[self.label[v]] > 1 {
            out.push((Move::Isolate { node: v }, own));
        }
    }

    fn first_improving_move(&self) -> Option<Move> {
        let mut weight = BTreeMap::new();
        let mut candidates = Vec::new();
        for v in 0..self.label.len() {
            self.node_moves(v, &mut weight, &mut candidates);
            if let Some(&(mv, _)) = candidates.iter().find(|&&(_, delta)| delta < -self.tolerance) {
                return Some(mv);
            }
        }
        let mut between: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (e, &(u, v)) in self.graph.edges().iter().enumerate() {
            let (a, b) = (self.label[u], self.label[v]);
            if a != b {
                *between.entry((a.min(b), a.max(b))).or_insert(0.0) += self.costs[e];
            }
        }
        between
            .into_iter()
            .find(|&(_, w)| -w < -self.tolerance)
            .map(|((keep, gone), _)| Move::Merge { keep, gone })
    }

    /// One tentative pass on a copy; returns the best strictly improving prefix.
    fn kl_pass(&self) -> Vec<Move> {
        let mut trial = self.clone();
        let mut locked = vec![false; self.label.len()];
        let mut weight = BTreeMap::new();
        let mut candidates = Vec::new();
        let (mut total, mut best) = (0.0, -self.tolerance);
        let mut sequence = Vec::new();
        let mut best_len = 0;
        for _ in 0..self.label.len() {
            let mut choice: Option<(Move, f64)> = None;
            for v in (0..trial.label.len()).filter(|&v| !locked[v]) {
                trial.node_moves(v, &mut weight, &mut candidates);
                for &(mv, delta) in &candidates {
                    if choice.is_none_or(|(_, d)| delta < d) {
                        choice = Some((mv, delta));
                    }
                }
            }
            let Some((mv, delta)) = choice else { break };
            let node = match mv {
                Move::Relocate { node, .. } | Move::Isolate { node } => node,
                Move::Merge { .. } => unreachable!("passes only move nodes"),
            };
            locked[node] = true;
            trial.apply(mv);
            sequence.push(mv);
            total += delta;
            if total < best {
                best = total;
                best_len = sequence.len();
            }
        }
        sequence.truncate(best_len);
        sequence
    }
}

/// Where [`round_and_repair`] takes its local-search costs from.
#[derive(Debug, Clone, Copy)]
pub enum CostSource<'a> {
    /// `log((1 - q) / q)` of the marginals being repaired.
    Marginals,
    Given(&'a CostVector),
}

/// Thresholds marginals at 0.5, takes connected components of the joined
/// edges, then refines with [`kl_refine`].
pub fn round_and_repair(graph: &Graph, q: &[f64], source: CostSource<'_>) -> Result<SolverResult> {
    if q.len() != graph.edge_count() {
        return Err(Error::LengthMismatch {
            what: "marginals",
            expected: graph.edge_count(),
            actual: q.len(),
        });
    }
    let rounded = decomposition_from_labeling(graph, &hard_labeling(q))?;
    let derived;
    let costs = match source {
        CostSource::Marginals => {
            derived = CostVector::from_probabilities(q, &mut ClampCounter::default());
            &derived
        }
        CostSource::Given(c) => c,
    };
    let mut result = kl_refine(graph, costs, &rounded)?;
    result.method = Method::Repair;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{enumerate_chordless_cycles, is_feasible, EdgeLabeling};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn costs(c: &[f64]) -> CostVector {
        CostVector::new(c.to_vec()).unwrap()
    }

    fn random_costs(m: usize, seed: u64) -> CostVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CostVector::new((0..m).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Minimum over all feasible edge labelings, found by brute force over 2^|E|.
    fn brute_force_optimum(g: &Graph, c: &CostVector) -> f64 {
        let cc = enumerate_chordless_cycles(g, g.node_count().max(3)).unwrap();
        let m = g.edge_count();
        (0..1u64 << m)
            .map(|mask| EdgeLabeling::from_mask(m, mask))
            .filter(|y| is_feasible(g, y, &cc).unwrap())
            .map(|y| multicut_cost(c, &y).unwrap())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn exact_examples_on_triangle() {
        let g = Graph::complete(3).unwrap();
        let r = exact_solve(&g, &costs(&[-1.0, -1.0, -1.0])).unwrap();
        assert_eq!(r.decomposition, Decomposition::singletons(3));
        assert_eq!(r.objective, -3.0);
        // Feasible labelings of K3: 000, 011, 101, 110, 111 -> costs 0, 4, -3, -3, -1.
        let r = exact_solve(&g, &costs(&[-5.0, 2.0, 2.0])).unwrap();
        assert_eq!(r.objective, -3.0);
        let y = labeling_from_decomposition(&g, &r.decomposition).unwrap();
        assert!(y.is_cut(0) && y.cut_count() == 2);
        let r = exact_solve(&g, &costs(&[1.0, 1.0, 1.0])).unwrap();
        assert_eq!(r.decomposition, Decomposition::single_component(3));
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn exact_refuses_large_graphs() {
        let g = Graph::complete(13).unwrap();
        let c = random_costs(g.edge_count(), 1);
        assert_eq!(exact_solve(&g, &c), Err(Error::TooLargeForExact { nodes: 13, max: 12 }));
    }

    #[test]
    fn exact_matches_labeling_brute_force() {
        for seed in 0..30u64 {
            let n = 3 + (seed % 4) as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let all: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
            let edges: Vec<_> = all.into_iter().filter(|_| rng.random_bool(0.7)).collect();
            let g = Graph::new(n, edges).unwrap();
            let c = random_costs(g.edge_count(), seed + 100);
            let r = exact_solve(&g, &c).unwrap();
            assert!((r.objective - brute_force_optimum(&g, &c)).abs() < 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn greedy_examples() {
        let g = Graph::complete(5).unwrap();
        let r = greedy_join(&g, &costs(&[1.0; 10])).unwrap();
        assert_eq!(r.decomposition.component_count(), 1);
        let r = greedy_join(&g, &costs(&[-1.0; 10])).unwrap();
        assert_eq!(r.decomposition, Decomposition::singletons(5));
    }

    #[test]
    fn greedy_never_beats_exact_and_is_close() {
        let g = Graph::complete(8).unwrap();
        let mut gaps = Vec::new();
        for seed in 0..100 {
            let c = random_costs(g.edge_count(), seed);
            let exact = exact_solve(&g, &c).unwrap().objective;
            let greedy = greedy_join(&g, &c).unwrap().objective;
            assert!(greedy >= exact - 1e-12);
            gaps.push((greedy - exact) / exact.abs().max(1e-12));
        }
        gaps.sort_by(f64::total_cmp);
        assert!(gaps[50] <= 0.05, "median gap {}", gaps[50]);
    }

    #[test]
    fn kl_examples() {
        let g = Graph::complete(6).unwrap();
        let c = random_costs(g.edge_count(), 5);
        let exact = exact_solve(&g, &c).unwrap();
        let r = kl_refine(&g, &c, &exact.decomposition).unwrap();
        assert_eq!(r.decomposition, exact.decomposition);
        let r = kl_refine(&g, &costs(&[0.5; 15]), &Decomposition::singletons(6)).unwrap();
        assert_eq!(r.decomposition.component_count(), 1);
    }

    #[test]
    fn kl_after_greedy_usually_optimal() {
        let g = Graph::complete(8).unwrap();
        let mut hits = 0;
        for seed in 0..100 {
            let c = random_costs(g.edge_count(), 1000 + seed);
            let exact = exact_solve(&g, &c).unwrap().objective;
            let greedy = greedy_join(&g, &c).unwrap();
            let refined = kl_refine(&g, &c, &greedy.decomposition).unwrap();
            assert!(refined.objective <= greedy.objective);
            hits += ((refined.objective - exact).abs() <= 1e-9) as usize;
        }
        assert!(hits >= 80, "{hits} of 100 optimal");
    }

    #[test]
    fn repair_examples() {
        let g = Graph::complete(3).unwrap();
        let r = round_and_repair(&g, &[0.9, 0.1, 0.1], CostSource::Given(&costs(&[0.0; 3]))).unwrap();
        assert_eq!(r.decomposition, Decomposition::single_component(3));
        // Feasible rounding {0,1},{2} is kept when it is already locally optimal.
        let q = [0.1, 0.9, 0.9];
        let r = round_and_repair(&g, &q, CostSource::Marginals).unwrap();
        assert_eq!(r.decomposition, Decomposition::from_ids(&[0, 0, 1]));
        assert_eq!(r.method, Method::Repair);
    }

    proptest! {
        #[test]
        fn solvers_return_consistent_results(seed in 0u64..10_000, n in 2usize..8) {
            let g = Graph::complete(n).unwrap();
            let c = random_costs(g.edge_count(), seed);
            let start = greedy_join(&g, &c).unwrap();
            for r in [start.clone(), kl_refine(&g, &c, &Decomposition::singletons(n)).unwrap(), exact_solve(&g, &c).unwrap()] {
                let y = labeling_from_decomposition(&g, &r.decomposition).unwrap();
                prop_assert_eq!(r.objective, multicut_cost(&c, &y).unwrap());
            }
            let refined = kl_refine(&g, &c, &start.decomposition).unwrap();
            prop_assert!(refined.objective <= start.objective);
            prop_assert_eq!(&refined, &kl_refine(&g, &c, &start.decomposition).unwrap());
            prop_assert_eq!(&start, &greedy_join(&g, &c).unwrap());
        }
    }
}
