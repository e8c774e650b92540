//! Skill-precondition classifiers over scene graphs: a relation network and
//! a two-layer graph network, the feature baselines (26-region one-hots,
//! voxel mean position, voxel bounding box), training and F1 evaluation.

mod config;
mod features;
mod gnn;
mod graph;
mod metrics;
mod model;
mod rn;
mod train;

pub use config::{ModelKind, PrecondConfig};
pub use features::{bbox_features, discrete_features, learned_features, meanpos_features, FeatureSet};
pub use gnn::GraphNetwork;
pub use graph::{build_graph, Edge, EdgeMode, EdgeSource, Node, NodeLabels, SceneGraph, SPARSE_EDGE_DISTANCE, TASK_LABEL_LEN};
pub use metrics::{evaluate, f1_score, weighted_f1, ClassCounts, EvalReport, Prediction};
pub use model::PrecondModel;
pub use rn::RelationNetwork;
pub use train::{train_precondition, LabeledGraph, PrecondTrainConfig, PrecondTrainReport};

use crate::geom::GeomError;
use crate::nn::NnError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PrecondError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("missing feature for pair ({anchor}, {referrant}) in scene {scene_id}")]
    MissingPair { scene_id: u64, anchor: usize, referrant: usize },
    #[error("missing feature for node {0}")]
    MissingNode(usize),
    #[error("edge ({0}, {1}) has no reverse edge")]
    MissingReverse(usize, usize),
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension { what: String, expected: usize, got: usize },
    #[error("training split contains only label {0}")]
    SingleClass(bool),
    #[error("empty dataset")]
    Empty,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged at epoch {0}")]
    Diverged(usize),
}
