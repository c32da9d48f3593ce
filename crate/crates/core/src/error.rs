use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("graph must have at least one node")]
    EmptyGraph,
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("edge ({u}, {v}) references a node outside 0..{node_count}")]
    NodeOutOfRange { u: usize, v: usize, node_count: usize },
    #[error("length mismatch for {what}: expected {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("maximum cycle length must be at least 3, got {0}")]
    CycleLengthBound(usize),
    #[error("cycle {index} has {len} edges; pattern potentials are defined on triangles only")]
    NonTriangleCycle { index: usize, len: usize },
    #[error("exact solver supports at most {max} nodes, instance has {nodes}")]
    TooLargeForExact { nodes: usize, max: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },
    #[error("instance {0} carries no ground-truth edge labels")]
    Unlabeled(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("trace does not match the inference inputs: {0}")]
    TraceMismatch(&'static str),
}
