//! Small differentiable core: parameter storage, dense and 3D convolution
//! layers, pooling, losses, Adam, finite-difference checks and checkpoints.

mod adam;
pub mod checkpoint;
mod gradcheck;
mod layers;
pub mod loss;
pub(crate) mod ops;
mod params;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{gradcheck, gradcheck_sequential, GradcheckConfig, GradcheckReport};
pub use layers::{Cache, Conv3dSpec, LayerSpec, Sequential};
pub use ops::{concat, split, sum_rows_canonical};
pub use params::{BlockId, ParamSet};
pub use tensor::Tensor;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("shape mismatch at {layer}: expected {expected}, got {got}")]
    Shape { layer: String, expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("backward called without a matching forward cache")]
    MissingCache,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for NnError {
    fn from(e: std::io::Error) -> Self {
        NnError::Io(e.to_string())
    }
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<(), NnError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NnError::NonFinite(what.to_string()))
    }
}
