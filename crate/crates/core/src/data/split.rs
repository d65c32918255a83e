use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DatasetBundle, InteractionMatrix, SocialGraph};
use crate::error::{Error, Result};

/// Edge-level random hold-out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitConfig {
    pub test_fraction: f64,
    /// Fraction of the post-test remainder that becomes validation.
    pub validation_fraction_of_train: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.10,
            validation_fraction_of_train: 0.10,
            seed: 0,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("test_fraction", self.test_fraction),
            ("validation_fraction_of_train", self.validation_fraction_of_train),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0,1), got {f}")));
            }
        }
        Ok(())
    }
}

// Guards floor() against products like 0.29 * 100 = 28.999999999999996.
fn floor_count(total: usize, fraction: f64) -> usize {
    (total as f64 * fraction + 1e-9).floor() as usize
}

/// Splits edges uniformly at random into train / validation / test.
///
/// Sizes use floor: `|test| = floor(E * test_fraction)`, then
/// `|validation| = floor((E - |test|) * validation_fraction_of_train)`;
/// the remainder is train. The returned bundle carries an empty social
/// graph and no features.
pub fn split(interactions: &InteractionMatrix, config: &SplitConfig) -> Result<DatasetBundle> {
    config.validate()?;
    if interactions.is_empty() {
        return Err(Error::Data("cannot split an empty interaction set".into()));
    }
    let mut edges: Vec<(usize, usize)> = interactions.edges().collect();
    let total = edges.len();
    let n_test = floor_count(total, config.test_fraction);
    if n_test == 0 {
        return Err(Error::Data(format!(
            "test_fraction {} of {total} edges leaves an empty test split",
            config.test_fraction
        )));
    }
    let n_val = floor_count(total - n_test, config.validation_fraction_of_train);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    edges.shuffle(&mut rng);

    let (users, items) = (interactions.num_users(), interactions.num_items());
    let make = |part: &[(usize, usize)]| {
        InteractionMatrix::new(users, items, part.iter().copied())
            .expect("edges come from a valid matrix")
    };
    let test = make(&edges[..n_test]);
    let validation = make(&edges[n_test..n_test + n_val]);
    let train = make(&edges[n_test + n_val..]);

    Ok(DatasetBundle {
        train,
        validation,
        test,
        social: SocialGraph::empty(users),
        user_features: None,
        item_features: None,
    })
}
