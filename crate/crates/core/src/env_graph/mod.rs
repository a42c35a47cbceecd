//! Navigation environments: graphs, trajectories, path enumeration and metrics.

mod graph;
mod metrics;
mod paths;

pub use graph::{euclid, GraphFile, NavGraph, NodeId, Trajectory, Viewpoint};
pub use metrics::{cls, dtw, evaluate_episode, ndtw, write_metrics_csv, MetricReport, METRIC_HEADER};
pub use paths::{
    enumerate_alternatives, partition_trajectories, shortest_path, HopThresholds, TrajectoryPartition,
    TIE_EPS,
};

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("graph has no nodes")]
    Empty,
    #[error("node at position {position} has id {id}; ids must be dense and ordered")]
    NonDenseIds { position: usize, id: usize },
    #[error("node {0} has a non-finite position")]
    BadPosition(usize),
    #[error("unknown node {0}")]
    UnknownNode(usize),
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(usize, usize),
    #[error("edge {0}-{1} has zero length")]
    ZeroLength(usize, usize),
    #[error("disconnected")]
    Disconnected,
    #[error("trajectory has no nodes")]
    EmptyTrajectory,
    #[error("nodes {0} and {1} are not adjacent")]
    NotAdjacent(usize, usize),
    #[error("hop thresholds must satisfy 2 > alpha_n > alpha_p > 1 (got alpha_p={alpha_p}, alpha_n={alpha_n})")]
    Thresholds { alpha_p: f64, alpha_n: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
