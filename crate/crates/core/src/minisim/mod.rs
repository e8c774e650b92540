//! Deterministic quasi-static interaction model and the stability and
//! sweep oracles used for task labels and the sim-based baseline.

pub mod collide;
mod perturb;
mod stability;
mod tasks;

pub use perturb::{
    action_directions, apply_perturbation, generate_interaction, sample_pair_scene, sample_pair_scene_within, ActionKind, Contact,
    InteractionEffect, InteractionRecord, PairScene, PerturbationAction, ACTIONS_PER_SCENE, DIRECTION_COUNT,
    FIXED_MAGNITUDE, MAX_PAIR_DISTANCE, ROTATION_CLIP, ROTATION_GAIN, SWEEP_STEP,
};
pub use stability::{stability_check, StabilityReport, DEFAULT_MOVE_THRESHOLD, SUPPORT_EPS_Z};
pub use tasks::{
    real2sim_predict, reconstruct_boxes, settle, sweep_line_oracle, TaskArgs, TaskKind, DEFAULT_SWEEP_HALF_WIDTH,
    SWEEP_BAR_OFFSET,
};

use crate::geom::GeomError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("initial interpenetration of {0:.3e} m")]
    Interpenetration(f64),
    #[error("degenerate action: {0}")]
    DegenerateAction(String),
    #[error("invalid stack: blocks {a} and {b} interpenetrate by {depth:.3e} m")]
    InvalidStack { a: usize, b: usize, depth: f64 },
    #[error("could not place referrant after {0} attempts")]
    PlacementFailed(usize),
    #[error("empty reconstruction")]
    EmptyReconstruction,
    #[error("need at least {need} objects, got {got}")]
    TooFewObjects { need: usize, got: usize },
    #[error("block index {0} out of range")]
    BadTarget(usize),
}
