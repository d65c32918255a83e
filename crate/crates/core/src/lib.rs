//! SocialGCN: social recommendation with graph-convolutional influence diffusion.
//!
//! The crate is split along the pipeline:
//!
//! - [`data`]: interaction / social / feature stores, TSV IO, preprocessing,
//!   splitting and a seeded synthetic generator.
//! - [`model`]: the forward computation (item embeddings, layer-0 user
//!   embeddings, K-layer social diffusion, final user embeddings, scores).
//! - [`train`]: pairwise ranking loss, negative sampling, hand-written
//!   reverse-mode gradients, Adam, and a finite-difference verifier.
//! - [`eval`]: HR@N / NDCG@N under sampled-candidate ranking, plus the
//!   ablation runner.

pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod train;

pub use data::{
    DatasetBundle, FeatureTable, InteractionMatrix, SocialGraph, SplitConfig, SyntheticSpec,
};
pub use error::{Error, Result};
pub use model::{Aggregator, FeatureMode, HyperParams, ModelParams};



pub use eval::{EvalConfig, MetricReport};
pub use train::{TrainConfig, TrainingLog};
