//! Forward computation.
//!
//! Item embeddings combine a free latent vector with item features through
//! a ReLU layer; user embeddings start from a layer-0 vector (features plus a
//! free latent vector), diffuse through `depth` graph-convolution layers over
//! the follow graph, and finally add the mean embedding of the user's
//! training history. Scores are inner products.

mod forward;
mod hyper;
mod ops;
mod params;

pub use forward::{
    diffuse, score_all_items, user_embedding, DiffusionState, Embeddings, ForwardPass,
};
pub use hyper::{Aggregator, FeatureMode, HyperParams};
pub use ops::{
    aggregate_neighbors, convolve_layer, item_embedding, predict, relu, user_base_embedding,
};
pub use params::{Dense, ModelParams};
