//! Training pairs, teacher-forced losses and the optimization loop.

pub mod config;
pub mod loss;
pub mod pairs;
pub mod train;

use thiserror::Error;

use crate::nets::ModelError;
use crate::nn::NnError;
use crate::props::PropertyError;

pub use config::TrainConfig;
pub use loss::{
    build_loss, build_loss_from, isomer_loss, kl_loss, pair_loss, LossBreakdown, PairLoss,
    PROB_FLOOR,
};
pub use pairs::{extract_actions, make_pair, make_pairs, PairDataset, PairOutcome, TrainingPair};
pub use train::{
    checkpoint_name, init_model, reconstruct, train, train_epochs, write_atomic, EpochMetrics,
    METRICS_HEADER,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("config error: {0}")]
    Config(String),
    #[error("empty training set")]
    EmptyDataset,
    #[error("misaligned inputs: expected {expected}, got {got}")]
    Misaligned { expected: usize, got: usize },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Property(#[from] PropertyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl TrainError {
    /// Adds pair context to numerical failures.
    pub(crate) fn at_pair(self, epoch: usize, index: usize) -> Self {
        match self {
            TrainError::NonFinite(m) => {
                TrainError::NonFinite(format!("{m} (epoch {epoch}, pair {index})"))
            }
            other => other,
        }
    }
}
