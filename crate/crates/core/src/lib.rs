//! Scaffold-constrained molecular graph generation.
//!
//! A variational autoencoder that extends a scaffold graph into whole
//! molecules by sequential node and edge additions, so every generated graph
//! contains its scaffold. The crate bundles the chemistry layer, a small
//! reverse-mode autodiff engine, the model, training and evaluation.

pub mod chem;
pub mod decoder;
pub mod nets;
pub mod nn;
pub mod props;
pub mod training;
