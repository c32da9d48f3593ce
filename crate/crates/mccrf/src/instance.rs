//! Instance documents (JSON) and CSV point clouds.
//!
//! ```json
//! { "nodes": [{"id": 0, "feature": [0.1, 0.2], "gt_cluster": 0}, ...],
//!   "edges": [{"u": 0, "v": 1, "feature": [...], "gt_label": 0, "cost": -0.3}, ...] }
//! ```
//!
//! `"complete": true` replaces `edges` for a complete graph whose edge features
//! are the derived ones. Node ids are `0..n` in any order. Edge fields are all
//! or nothing: either every edge carries a `feature` (or `gt_label`, `cost`) or
//! none does. Without `gt_cluster` and `gt_label` the instance is unlabeled.

use std::io::Read;
use std::path::Path;

use mccrf_core::data::{edge_features, ClusteringInstance};
use mccrf_core::graph::{labeling_from_decomposition, Decomposition, EdgeLabeling, Graph};
use mccrf_core::objective::CostVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    nodes: Vec<NodeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edges: Option<Vec<EdgeDoc>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    complete: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: usize,
    feature: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gt_cluster: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    u: usize,
    v: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feature: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gt_label: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cost: Option<f64>,
}

pub(crate) fn from_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::schema(path, e.into_inner().to_string())
    })
}

/// Returns `Some(values)` when every item has the field, `None` when none has it.
fn all_or_none<T, U: Clone>(
    items: &[T],
    field: impl Fn(&T) -> Option<&U>,
    list: &str,
    name: &str,
) -> Result<Option<Vec<U>>> {
    let present = items.iter().filter(|i| field(i).is_some()).count();
    if present == 0 {
        return Ok(None);
    }
    if let Some(i) = items.iter().position(|i| field(i).is_none()) {
        return Err(Error::schema(
            format!("{list}[{i}].{name}"),
            format!("missing, but {present} other entries carry `{name}` (all or none)"),
        ));
    }
    Ok(Some(items.iter().map(|i| field(i).unwrap().clone()).collect()))
}

fn check_dims(rows: &[Vec<f64>], list: &str) -> Result<()> {
    if let Some(first) = rows.first() {
        if let Some(i) = rows.iter().position(|r| r.len() != first.len()) {
            return Err(Error::schema(
                format!("{list}[{i}].feature"),
                format!("dimension {} differs from {}", rows[i].len(), first.len()),
            ));
        }
    }
    Ok(())
}

/// Parses an instance document.
pub fn parse_instance(text: &str) -> Result<ClusteringInstance> {
    let doc: InstanceDoc = from_json(text)?;
    let n = doc.nodes.len();
    if n == 0 {
        return Err(Error::schema("nodes", "at least one node is required"));
    }
    let mut slot = vec![None; n];
    for (i, node) in doc.nodes.iter().enumerate() {
        if node.id >= n {
            return Err(Error::schema(format!("nodes[{i}].id"), format!("id {} is not in 0..{n}", node.id)));
        }
        if slot[node.id].replace(i).is_some() {
            return Err(Error::schema(format!("nodes[{i}].id"), format!("duplicate id {}", node.id)));
        }
    }
    let order: Vec<usize> = slot.into_iter().map(Option::unwrap).collect();
    let nodes: Vec<&NodeDoc> = order.iter().map(|&i| &doc.nodes[i]).collect();
    let node_features: Vec<Vec<f64>> = nodes.iter().map(|n| n.feature.clone()).collect();
    check_dims(&doc.nodes.iter().map(|n| n.feature.clone()).collect::<Vec<_>>(), "nodes")?;
    let clusters = all_or_none(&doc.nodes, |n| n.gt_cluster.as_ref(), "nodes", "gt_cluster")?
        .map(|_| Decomposition::from_ids(&nodes.iter().map(|n| n.gt_cluster.unwrap()).collect::<Vec<_>>()));

    let (graph, feats, labels, costs) = match (&doc.edges, doc.complete) {
        (Some(_), true) => return Err(Error::schema("complete", "`complete: true` conflicts with an explicit `edges` list")),
        (None, false) => return Err(Error::schema("edges", "either `edges` or `\"complete\": true` is required")),
        (None, true) => (Graph::complete(n)?, None, None, None),
        (Some(edges), false) => {
            for (i, e) in edges.iter().enumerate() {
                for (name, x) in [("u", e.u), ("v", e.v)] {
                    if x >= n {
                        return Err(Error::schema(format!("edges[{i}].{name}"), format!("unknown node id {x}")));
                    }
                }
                if e.u == e.v {
                    return Err(Error::schema(format!("edges[{i}]"), format!("self-loop on node {}", e.u)));
                }
                if let Some(l) = e.gt_label.filter(|&l| l > 1) {
                    return Err(Error::schema(format!("edges[{i}].gt_label"), format!("{l} is not 0 or 1")));
                }
            }
            let graph = Graph::new(n, edges.iter().map(|e| (e.u, e.v))).map_err(|err| match err {
                mccrf_core::Error::DuplicateEdge(a, b) => {
                    let i = edges.iter().rposition(|e| (e.u.min(e.v), e.u.max(e.v)) == (a, b)).unwrap_or(0);
                    Error::schema(format!("edges[{i}]"), format!("duplicate edge {a}-{b}"))
                }
                other => other.into(),
            })?;
            let feats = all_or_none(edges, |e| e.feature.as_ref(), "edges", "feature")?;
            if let Some(f) = &feats {
                check_dims(f, "edges")?;
            }
            let labels = all_or_none(edges, |e| e.gt_label.as_ref(), "edges", "gt_label")?
                .map(|l| EdgeLabeling::new(l.into_iter().map(|b| b == 1).collect()));
            let costs = all_or_none(edges, |e| e.cost.as_ref(), "edges", "cost")?;
            (graph, feats, labels, costs)
        }
    };
    if let (Some(d), Some(y)) = (&clusters, &labels) {
        let induced = labeling_from_decomposition(&graph, d)?;
        if let Some(e) = (0..y.len()).find(|&e| induced.is_cut(e) != y.is_cut(e)) {
            return Err(Error::schema(
                format!("edges[{e}].gt_label"),
                "disagrees with the gt_cluster values of its endpoints",
            ));
        }
    }
    let instance = ClusteringInstance::new(graph, node_features, feats, clusters, labels).map_err(|err| match err {
        mccrf_core::Error::InvalidConfig(m) => Error::schema("edges[].gt_label", m),
        other => other.into(),
    })?;
    match costs {
        Some(c) => Ok(instance.with_costs(CostVector::new(c)?)?),
        None => Ok(instance),
    }
}

/// Serializes an instance. Complete graphs with derived edge features and no
/// explicit costs use the short `complete` form.
pub fn instance_to_json(instance: &ClusteringInstance) -> String {
    let graph = instance.graph();
    let clusters = instance.gt_decomposition();
    let nodes = instance
        .node_features()
        .iter()
        .enumerate()
        .map(|(id, f)| NodeDoc { id, feature: f.clone(), gt_cluster: clusters.map(|d| d.component_of(id)) })
        .collect();
    let short = graph.is_complete()
        && instance.costs().is_none()
        && (instance.gt_labeling().is_none() || clusters.is_some())
        && instance.edge_features() == edge_features(graph, instance.node_features()).as_slice();
    let edges = (!short).then(|| {
        graph
            .edges()
            .iter()
            .enumerate()
            .map(|(e, &(u, v))| EdgeDoc {
                u,
                v,
                feature: Some(instance.edge_features()[e].clone()),
                gt_label: instance.gt_labeling().map(|y| y.is_cut(e) as u8),
                cost: instance.costs().map(|c| c[e]),
            })
            .collect()
    });
    let doc = InstanceDoc { nodes, edges, complete: short };
    let mut text = serde_json::to_string_pretty(&doc).expect("instance serializes");
    text.push('\n');
    text
}

pub fn load_instance(path: &Path) -> Result<ClusteringInstance> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_instance(&text).map_err(|e| e.in_file(path))
}

pub fn save_instance(path: &Path, instance: &ClusteringInstance) -> Result<()> {
    std::fs::write(path, instance_to_json(instance)).map_err(|e| Error::io(path, e))
}

/// Reads a point cloud with a header row `id, <feature columns>..., [label]`.
/// Rows become nodes of a complete graph in file order; a last column named
/// `label` holds integer ground-truth clusters.
pub fn read_point_cloud(reader: impl Read) -> Result<ClusteringInstance> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::schema("header", e.to_string()))?.clone();
    let labeled = header.iter().next_back().is_some_and(|h| h.eq_ignore_ascii_case("label"));
    let dim = header.len().saturating_sub(1 + labeled as usize);
    if dim == 0 {
        return Err(Error::schema("header", "expected `id`, at least one feature column, and an optional `label`"));
    }
    let mut ids = std::collections::BTreeSet::new();
    let (mut features, mut clusters) = (Vec::new(), Vec::new());
    for (row, record) in rdr.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| Error::schema(format!("line {line}"), e.to_string()))?;
        if !ids.insert(record[0].to_string()) {
            return Err(Error::schema(format!("line {line}, column {}", &header[0]), format!("duplicate id {}", &record[0])));
        }
        let mut f = Vec::with_capacity(dim);
        for c in 1..=dim {
            let x: f64 = record[c].parse().map_err(|_| {
                Error::schema(format!("line {line}, column {}", &header[c]), format!("`{}` is not a number", &record[c]))
            })?;
            if !x.is_finite() {
                return Err(Error::schema(format!("line {line}, column {}", &header[c]), "non-finite value"));
            }
            f.push(x);
        }
        features.push(f);
        if labeled {
            let c = dim + 1;
            clusters.push(record[c].parse::<usize>().map_err(|_| {
                Error::schema(format!("line {line}, column {}", &header[c]), format!("`{}` is not a cluster index", &record[c]))
            })?);
        }
    }
    if features.is_empty() {
        return Err(Error::schema("line 2", "no data rows"));
    }
    let graph = Graph::complete(features.len())?;
    let gt = labeled.then(|| Decomposition::from_ids(&clusters));
    Ok(ClusteringInstance::new(graph, features, None, gt, None)?)
}
