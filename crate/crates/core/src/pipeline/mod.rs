//! Dataset files, run configuration, task-scene generation and the
//! end-to-end drivers behind the command-line tool.

mod checks;
mod config;
mod dataset;
mod experiment;
mod taskgen;

pub use checks::{gradcheck_suite, GradcheckRow};
pub use config::{RunConfig, SplitSpec, TaskSplits};
pub use dataset::{
    interactions_from_bytes, interactions_to_bytes, read_interactions, read_tasks, tasks_from_bytes, tasks_to_bytes,
    write_interactions, write_tasks, DatasetHeader, DatasetKind, TaskRecord,
};
pub use experiment::{
    build_graphs, embed_task_scenes, generate_interactions, pair_grid, precond_config, precond_train_config, real2sim_counts,
    relation_config, relation_train_config, run_unstack_benchmark, scene_grid, train_and_evaluate, BenchmarkRow, FeatureSource,
};
pub use taskgen::{generate_task_scenes, is_marginal, label_scene, TaskGenOptions, MARGINAL_MARGIN};

use crate::geom::GeomError;
use crate::minisim::SimError;
use crate::nn::NnError;
use crate::precond::PrecondError;
use crate::relnet::RelnetError;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0} exists; pass --force to overwrite")]
    Exists(String),
    #[error("config digest mismatch: {what} has {found:08x}, expected {expected:08x}")]
    DigestMismatch { what: String, expected: u32, found: u32 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Relnet(#[from] RelnetError),
    #[error(transparent)]
    Precond(#[from] PrecondError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

impl PipelineError {
    /// Process exit code: 2 for configuration errors, 3 for data and I/O
    /// errors, 4 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::DigestMismatch { .. } | PipelineError::GridMismatch(_) => 2,
            PipelineError::Relnet(RelnetError::Config(_) | RelnetError::GridMismatch { .. })
            | PipelineError::Precond(PrecondError::Config(_))
            | PipelineError::Nn(NnError::Config(_)) => 2,
            PipelineError::Numeric(_)
            | PipelineError::Relnet(RelnetError::Diverged { .. } | RelnetError::NonFiniteLoss(_))
            | PipelineError::Precond(PrecondError::Diverged(_))
            | PipelineError::Nn(NnError::NonFinite(_)) => 4,
            _ => 3,
        }
    }
}
