//! The object-relation model: a voxel encoder producing a pair embedding,
//! an action-conditioned effect head, batch-all triplet mining over
//! interaction effects, the combined training objective and embedding export.

mod config;
mod effects;
mod embed;
mod loss;
mod mining;
mod model;
mod train;

pub use config::{ContrastiveConfig, LossWeights, RelationConfig};
pub use effects::{action_input, dp_ratio, effect_targets, EffectSummary, PreparedRecord, ACTION_INPUT_LEN, TARGET_LEN};
pub use embed::{embed_scene, EmbeddingKey, EmbeddingTable};
pub use loss::{combined_loss, LossComponents};
pub use mining::{mine_triplets, scene_relation, Channel, PairRelation, Triplet};
pub use model::RelationModel;
pub use train::{train_relation_model, EpochLog, TrainConfig, TrainReport};

use crate::geom::GeomError;
use crate::nn::NnError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RelnetError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("grid mismatch: model expects {expected}, got {got}")]
    GridMismatch { expected: String, got: String },
    #[error("adaptive action with zero centre distance")]
    ZeroDistance,
    #[error("invalid data: {0}")]
    Data(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("loss diverged at epoch {epoch} ({component})")]
    Diverged { epoch: usize, component: String },
    #[error("non-finite {0} loss")]
    NonFiniteLoss(String),
}
