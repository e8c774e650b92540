//! Relational object embeddings learned from simulated pairwise interactions,
//! and graph-structured classifiers that consume them to predict whether a
//! manipulation skill (sweeping, unstacking) can be executed in a scene.
//!
//! The crate is organised bottom-up:
//!
//! * [`geom`] - primitive shapes, voxelisation, anchor-centric pair views and
//!   the 26-region spatial partition.
//! * [`minisim`] - deterministic quasi-static interaction model, block-stack
//!   stability and sweep oracles, and the sim-based baseline.
//! * [`nn`] - a small differentiable core (dense/conv3d layers, losses, Adam,
//!   finite-difference gradient checking, checkpoints).
//! * [`relnet`] - the relation model, batch-all triplet mining and training.
//! * [`precond`] - scene graphs, relation-network and GNN classifiers, metrics.
//! * [`pipeline`] - dataset files, run configuration, task generation and
//!   the end-to-end experiment drivers used by the CLI.

pub mod geom;
pub mod minisim;
pub mod nn;
pub mod pipeline;
pub mod precond;
pub mod relnet;

pub use geom::{GridSpec, ObjectInstance, ShapeKind, VoxelGrid, VoxelPairInput};
pub use minisim::{InteractionEffect, InteractionRecord, PerturbationAction};
pub use nn::{ParamSet, Tensor};
pub use precond::{EvalReport, SceneGraph};
pub use relnet::{ContrastiveConfig, LossWeights, RelationModel};
