//! Shared neural building blocks: feature embedding, conditioned message
//! passing, gated readout and the reparametrized encoder.

pub mod blocks;
pub mod features;
pub mod model;

use thiserror::Error;

use crate::nn::Var;

pub use blocks::{PropagateRound, Propagation, Readout, RoundCache};
pub use features::{raw_features, raw_features_with, Topology, EDGE_FEATURES, NODE_FEATURES};
pub use model::{ActionHead, Encoded, InitHead, Model, ModelConfig, PropertyStat};

/// Node and edge feature matrices of one graph, living on a tape.
#[derive(Clone, Copy, Debug)]
pub struct FeatureState {
    pub nodes: Var,
    pub edges: Var,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("graph has no atoms")]
    EmptyGraph,
    #[error("condition vector has {got} properties, model expects {expected}")]
    ConditionLength { expected: usize, got: usize },
}
