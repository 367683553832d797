//! Command implementations behind the `scaffgen` binary.

pub mod commands;
pub mod error;
pub mod manifest;
