//! Minimal neural-network toolkit: a matrix-level autodiff tape, a named
//! parameter store with checkpoints, layers, Adam and gradient checking.

pub mod adam;
pub mod gradcheck;
pub mod layers;
pub mod params;
pub mod tape;

use thiserror::Error;

pub use adam::Adam;
pub use gradcheck::{grad_check, GRAD_CHECK_STEP};
pub use layers::{GruCell, Linear, Mlp};
pub use params::{Gradients, ParamId, ParameterStore, CHECKPOINT_VERSION};
pub use tape::{NodeGrads, Tape, Var};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("duplicate parameter name `{0}`")]
    DuplicateParameter(String),
    #[error("missing parameter `{0}`")]
    MissingParameter(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
