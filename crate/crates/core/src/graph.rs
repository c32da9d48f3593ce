//! Undirected graphs, edge labelings, node partitions and chordless cycles.
//!
//! Edges are stored as `(u, v)` with `u < v` and receive dense ids in input
//! order. Every per-edge vector in the crate is indexed by these ids.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    /// Per node: `(neighbor, edge id)` sorted by neighbor.
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Graph {
    /// Builds a graph from an edge list. Endpoints are normalized to `u < v`.
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut normalized = Vec::new();
        let mut adjacency = vec![Vec::new(); node_count];
        for (a, b) in edges {
            if a >= node_count || b >= node_count {
                return Err(Error::NodeOutOfRange { u: a, v: b, node_count });
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            let (u, v) = if a < b { (a, b) } else { (b, a) };
            let id = normalized.len();
            normalized.push((u, v));
            adjacency[u].push((v, id));
            adjacency[v].push((u, id));
        }
        for (node, list) in adjacency.iter_mut().enumerate() {
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0].0 == w[1].0) {
                let (u, v) = if node < w[0].0 { (node, w[0].0) } else { (w[0].0, node) };
                return Err(Error::DuplicateEdge(u, v));
            }
        }
        Ok(Self { node_count, edges: normalized, adjacency })
    }

    /// The complete graph on `n` nodes, edges in lexicographic `(u, v)` order.
    pub fn complete(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
        Self::new(n, edges)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn endpoints(&self, edge: usize) -> (usize, usize) {
        self.edges[edge]
    }

    /// `(neighbor, edge id)` pairs of `node`, sorted by neighbor.
    pub fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.adjacency[node]
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        let list = self.adjacency.get(a)?;
        list.binary_search_by_key(&b, |&(n, _)| n).ok().map(|i| list[i].1)
    }

    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.edge_between(a, b).is_some()
    }

    pub fn is_complete(&self) -> bool {
        let n = self.node_count;
        self.edges.len() == n * n.saturating_sub(1) / 2
    }
}

/// Binary edge labels, `true` meaning the edge is cut.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EdgeLabeling(Vec<bool>);

impl EdgeLabeling {
    pub fn new(labels: Vec<bool>) -> Self {
        Self(labels)
    }

    pub fn all_joined(edge_count: usize) -> Self {
        Self(vec![false; edge_count])
    }

    pub fn all_cut(edge_count: usize) -> Self {
        Self(vec![true; edge_count])
    }

    /// Cut wherever `q > threshold`.
    pub fn from_threshold(q: &[f64], threshold: f64) -> Self {
        Self(q.iter().map(|&p| p > threshold).collect())
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        Self(bits.iter().map(|&b| b != 0).collect())
    }

    /// Labeling whose cut set is the binary expansion of `mask` (bit `i` = edge `i`).
    pub fn from_mask(edge_count: usize, mask: u64) -> Self {
        Self((0..edge_count).map(|i| mask >> i & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_cut(&self, edge: usize) -> bool {
        self.0[edge]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn bits(&self) -> Vec<u8> {
        self.0.iter().map(|&c| c as u8).collect()
    }

    pub fn cut_count(&self) -> usize {
        self.0.iter().filter(|&&c| c).count()
    }

    fn check_len(&self, graph: &Graph) -> Result<()> {
        if self.len() != graph.edge_count() {
            return Err(Error::LengthMismatch {
                what: "edge labeling",
                expected: graph.edge_count(),
                actual: self.len(),
            });
        }
        Ok(())
    }
}

/// A node partition with canonical component ids: ids are assigned in order of
/// first occurrence, so equal partitions compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Decomposition(Vec<usize>);

impl Decomposition {
    /// Canonicalizes arbitrary per-node component ids.
    pub fn from_ids(ids: &[usize]) -> Self {
        let mut remap: Vec<(usize, usize)> = Vec::new();
        let canonical = ids
            .iter()
            .map(|&id| match remap.iter().find(|&&(raw, _)| raw == id) {
                Some(&(_, c)) => c,
                None => {
                    let c = remap.len();
                    remap.push((id, c));
                    c
                }
            })
            .collect();
        Self(canonical)
    }

    pub fn single_component(node_count: usize) -> Self {
        Self(vec![0; node_count])
    }

    pub fn singletons(node_count: usize) -> Self {
        Self((0..node_count).collect())
    }

    pub fn node_count(&self) -> usize {
        self.0.len()
    }

    pub fn component_count(&self) -> usize {
        self.0.iter().max().map_or(0, |&m| m + 1)
    }

    pub fn component_of(&self, node: usize) -> usize {
        self.0[node]
    }

    pub fn ids(&self) -> &[usize] {
        &self.0
    }

    pub fn same_component(&self, a: usize, b: usize) -> bool {
        self.0[a] == self.0[b]
    }

    fn check_len(&self, graph: &Graph) -> Result<()> {
        if self.node_count() != graph.node_count() {
            return Err(Error::LengthMismatch {
                what: "decomposition",
                expected: graph.node_count(),
                actual: self.node_count(),
            });
        }
        Ok(())
    }
}

/// Whether a bounded chordless-cycle enumeration is known to be exhaustive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Completeness {
    Complete,
    /// A chordless cycle longer than the bound exists; the node sequence is a witness.
    LongerCycle(Vec<usize>),
    /// The search for longer cycles ran out of budget.
    Undetermined,
}

/// Chordless cycles as sequences of edge ids, in walk order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleSet {
    cycles: Vec<Vec<usize>>,
    max_len: usize,
    completeness: Completeness,
}

impl CycleSet {
    /// Wraps an explicit list of cycles; the caller vouches for completeness.
    pub fn from_cycles(cycles: Vec<Vec<usize>>) -> Self {
        let max_len = cycles.iter().map(Vec::len).max().unwrap_or(3);
        Self { cycles, max_len, completeness: Completeness::Complete }
    }

    pub fn cycles(&self) -> &[Vec<usize>] {
        &self.cycles
    }

    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn completeness(&self) -> &Completeness {
        &self.completeness
    }

    pub fn is_complete(&self) -> bool {
        self.completeness == Completeness::Complete
    }

    /// The cycles as edge-id triples, failing on any longer cycle.
    pub fn triangles(&self) -> Result<Vec<[usize; 3]>> {
        self.cycles
            .iter()
            .enumerate()
            .map(|(index, c)| match c.as_slice() {
                &[a, b, d] => Ok([a, b, d]),
                _ => Err(Error::NonTriangleCycle { index, len: c.len() }),
            })
            .collect()
    }
}

/// Node expansions allowed while looking for a chordless cycle above the bound.
pub const LONGER_CYCLE_SEARCH_BUDGET: usize = 1 << 20;

/// Enumerates all chordless cycles with at most `max_len` edges.
///
/// Each cycle is reported once, starting at its smallest node and oriented so
/// that the second node is smaller than the last. A bounded search then checks
/// for a chordless cycle longer than `max_len`; the result is recorded in
/// [`CycleSet::completeness`].
pub fn enumerate_chordless_cycles(graph: &Graph, max_len: usize) -> Result<CycleSet> {
    if max_len < 3 {
        return Err(Error::CycleLengthBound(max_len));
    }
    let mut search = CycleSearch {
        graph,
        max_len,
        cycles: Vec::new(),
        longer: None,
        budget: LONGER_CYCLE_SEARCH_BUDGET,
        on_path: vec![false; graph.node_count()],
    };
    for s in 0..graph.node_count() {
        for &(v, _) in graph.neighbors(s) {
            if v > s {
                let mut path = vec![s, v];
                search.on_path[s] = true;
                search.on_path[v] = true;
                search.extend(&mut path);
                search.on_path[s] = false;
                search.on_path[v] = false;
            }
        }
    }
    let completeness = match (search.longer, search.budget) {
        (Some(witness), _) => Completeness::LongerCycle(witness),
        (None, 0) => Completeness::Undetermined,
        (None, _) => Completeness::Complete,
    };
    Ok(CycleSet { cycles: search.cycles, max_len, completeness })
}

struct CycleSearch<'g> {
    graph: &'g Graph,
    max_len: usize,
    cycles: Vec<Vec<usize>>,
    longer: Option<Vec<usize>>,
    budget: usize,
    on_path: Vec<bool>,
}

impl CycleSearch<'_> {
    /// `path` is an induced path starting at its minimum node `path[0]`.
    fn extend(&mut self, path: &mut Vec<usize>) {
        let start = path[0];
        let last = *path.last().unwrap();
        let graph = self.graph;
        for &(w, _) in graph.neighbors(last) {
            if w <= start || self.on_path[w] {
                continue;
            }
            let interior = &path[1..path.len() - 1];
            if interior.iter().any(|&x| graph.is_adjacent(x, w)) {
                continue;
            }
            if graph.is_adjacent(w, start) {
                let len = path.len() + 1;
                if len <= self.max_len {
                    if path[1] < w {
                        let mut nodes = path.clone();
                        nodes.push(w);
                        self.cycles.push(edge_cycle(graph, &nodes));
                    }
                } else if self.longer.is_none() {
                    let mut nodes = path.clone();
                    nodes.push(w);
                    self.longer = Some(nodes);
                }
                continue;
            }
            // Any cycle closed beyond `w` has at least `path.len() + 2` edges.
            let beyond_bound = path.len() + 2 > self.max_len;
            if beyond_bound && (self.longer.is_some() || self.budget == 0) {
                continue;
            }
            if beyond_bound {
                self.budget -= 1;
            }
            path.push(w);
            self.on_path[w] = true;
            self.extend(path);
            self.on_path[w] = false;
            path.pop();
        }
    }
}

fn edge_cycle(graph: &Graph, nodes: &[usize]) -> Vec<usize> {
    (0..nodes.len())
        .map(|i| {
            let a = nodes[i];
            let b = nodes[(i + 1) % nodes.len()];
            graph.edge_between(a, b).expect("consecutive cycle nodes are adjacent")
        })
        .collect()
}

/// True iff no cycle in `cycles` carries exactly one cut edge.
///
/// This is the cycle inequality `y_e <= sum of the other labels on the cycle`
/// for every cycle and every edge on it; it characterizes multicuts when
/// `cycles` is the complete chordless cycle set of `graph`.
pub fn is_feasible(graph: &Graph, labels: &EdgeLabeling, cycles: &CycleSet) -> Result<bool> {
    labels.check_len(graph)?;
    Ok(cycles
        .cycles()
        .iter()
        .all(|c| c.iter().filter(|&&e| labels.is_cut(e)).count() != 1))
}

/// Cuts exactly the edges whose endpoints lie in different components.
pub fn labeling_from_decomposition(graph: &Graph, decomposition: &Decomposition) -> Result<EdgeLabeling> {
    decomposition.check_len(graph)?;
    Ok(EdgeLabeling(
        graph
            .edges()
            .iter()
            .map(|&(u, v)| !decomposition.same_component(u, v))
            .collect(),
    ))
}

/// Connected components of the subgraph formed by joined edges.
///
/// Accepts infeasible labelings; a cut edge inside a component is absorbed.
pub fn decomposition_from_labeling(graph: &Graph, labels: &EdgeLabeling) -> Result<Decomposition> {
    labels.check_len(graph)?;
    let mut sets = UnionFind::new(graph.node_count());
    for (e, &(u, v)) in graph.edges().iter().enumerate() {
        if !labels.is_cut(e) {
            sets.union(u, v);
        }
    }
    let roots: Vec<usize> = (0..graph.node_count()).map(|v| sets.find(v)).collect();
    Ok(Decomposition::from_ids(&roots))
}

#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            core::cmp::Ordering::Less => self.parent[ra] = rb,
            core::cmp::Ordering::Greater => self.parent[rb] = ra,
            core::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}
