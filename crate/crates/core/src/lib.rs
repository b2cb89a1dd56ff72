//! Mixture-of-autoencoder similarity model over state-only demonstrations,
//! the shaped intrinsic reward built from its reconstruction loss, and the
//! environments, agents and tooling used to check it at small scale.

pub mod ablation;
pub mod agents;
pub mod cli;
pub mod config;
pub mod envs;
pub mod error;
pub mod fixtures;
pub mod landscape;
pub mod metrics;
pub mod moe;
pub mod nn;
pub mod rng;
pub mod shaping;
mod textio;

pub use error::{Error, Result};
