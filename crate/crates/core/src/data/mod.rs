//! Interaction, social and feature data: storage, TSV IO, preprocessing,
//! splitting and synthetic generation.
//!
//! All ids are dense 0-based integers. Downstream modules assume this, so
//! raw data with sparse ids should go through [`preprocess_filter`] first.

mod bundle;
mod features;
mod filter;
mod interactions;
mod io;
mod social;
mod split;
mod synth;

pub use bundle::DatasetBundle;
pub use features::FeatureTable;
pub use filter::{preprocess_filter, FilterConfig, Filtered};
pub use interactions::InteractionMatrix;
pub use io::{
    load_features, load_interactions, load_social, save_features, save_interactions, save_social,
    write_features, write_interactions, write_social,
};
pub use social::SocialGraph;
pub use split::{split, SplitConfig};
pub use synth::{generate_raw, generate_synthetic, RawDataset, SyntheticSpec};
