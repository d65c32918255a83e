//! Command-line plumbing for socialgcn: run configuration, checkpoints and
//! the `train` / `evaluate` / `predict` / `synth` / `ablate` commands.

pub mod artifacts;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;

pub use checkpoint::Checkpoint;
pub use commands::{cmd_ablate, cmd_evaluate, cmd_predict, cmd_synth, cmd_train, prepare_bundle, EvaluateArgs};
pub use config::{Overrides, RunConfig};
pub use error::{Category, CliError, Result};
