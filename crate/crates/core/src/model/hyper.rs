use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureMode {
    /// Embeddings mix features and free latents through learned transforms.
    WithFeatures,
    /// No features: `v_i = q_i` and `h0_a = p_a`; requires `latent_dim == embed_dim`.
    Featureless,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Aggregator {
    Average,
    Max,
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMode::WithFeatures => "features",
            FeatureMode::Featureless => "featureless",
        })
    }
}

impl FromStr for FeatureMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "features" | "with_features" => Ok(FeatureMode::WithFeatures),
            "featureless" => Ok(FeatureMode::Featureless),
            _ => Err(Error::Config(format!(
                "unknown feature mode {s:?} (expected features|featureless)"
            ))),
        }
    }
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregator::Average => "average",
            Aggregator::Max => "max",
        })
    }
}

impl FromStr for Aggregator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" | "mean" => Ok(Aggregator::Average),
            "max" => Ok(Aggregator::Max),
            _ => Err(Error::Config(format!(
                "unknown aggregator {s:?} (expected average|max)"
            ))),
        }
    }
}

/// Architecture choices. Feature dims are taken from the data.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HyperParams {
    /// D: width of every hidden layer and of the final user/item space.
    pub embed_dim: usize,
    /// L: width of the free latent vectors p_a and q_i.
    pub latent_dim: usize,
    /// K: number of diffusion layers. 0 disables diffusion.
    pub depth: usize,
    pub feature_mode: FeatureMode,
    pub aggregator: Aggregator,
    pub use_bias: bool,
    /// When false, user free latents are pinned to zero and never trained.
    pub user_free_latent: bool,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            embed_dim: 32,
            latent_dim: 32,
            depth: 2,
            feature_mode: FeatureMode::WithFeatures,
            aggregator: Aggregator::Average,
            use_bias: true,
            user_free_latent: true,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.latent_dim == 0 {
            return Err(Error::Config("embed_dim and latent_dim must be positive".into()));
        }
        if self.feature_mode == FeatureMode::Featureless && self.latent_dim != self.embed_dim {
            return Err(Error::Config(format!(
                "featureless mode needs latent_dim == embed_dim (got {} vs {})",
                self.latent_dim, self.embed_dim
            )));
        }
        Ok(())
    }

    pub fn featureless(&self) -> bool {
        self.feature_mode == FeatureMode::Featureless
    }
}
