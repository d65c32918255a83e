use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{DatasetBundle, InteractionMatrix};
use crate::error::{Error, Result};

/// Which split supplies the positives being ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum EvalSplit {
    Train,
    Validation,
    #[default]
    Test,
}

impl EvalSplit {
    pub fn select(self, bundle: &DatasetBundle) -> &InteractionMatrix {
        match self {
            EvalSplit::Train => &bundle.train,
            EvalSplit::Validation => &bundle.validation,
            EvalSplit::Test => &bundle.test,
        }
    }
}

impl fmt::Display for EvalSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalSplit::Train => "train",
            EvalSplit::Validation => "validation",
            EvalSplit::Test => "test",
        })
    }
}

impl FromStr for EvalSplit {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(EvalSplit::Train),
            "validation" => Ok(EvalSplit::Validation),
            "test" => Ok(EvalSplit::Test),
            _ => Err(Error::Config(format!("unknown split {s:?}"))),
        }
    }
}

/// Positives of one user plus sampled unrated candidates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingTask {
    pub user: usize,
    pub positives: Vec<usize>,
    /// Positives first, then the sampled negatives in ascending id order.
    pub candidates: Vec<usize>,
}

// Odd constant from the golden ratio; spreads repetition indices over seeds.
const REPETITION_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// Per-user candidate sampler. Each (seed, repetition, user) triple gets its
/// own ChaCha stream, so tasks do not depend on evaluation order.
fn task_rng(seed: u64, repetition: u64, user: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(repetition.wrapping_mul(REPETITION_STRIDE)));
    rng.set_stream(user as u64);
    rng
}

/// Builds one task per user with at least one positive in `split`.
///
/// Negatives are drawn uniformly without replacement from the items the
/// user rated in no split; when fewer than `num_negatives` exist, all of
/// them are used.
pub fn build_tasks(
    bundle: &DatasetBundle,
    split: EvalSplit,
    num_negatives: usize,
    seed: u64,
    repetition: u64,
) -> Vec<RankingTask> {
    let target = split.select(bundle);
    let n = bundle.num_items();
    (0..bundle.num_users())
        .filter(|&a| !target.user_items(a).is_empty())
        .map(|user| {
            let positives = target.user_items(user).to_vec();
            let unrated: Vec<usize> = (0..n).filter(|&i| !bundle.is_rated(user, i)).collect();
            let mut sampled: Vec<usize> = if unrated.len() <= num_negatives {
                unrated
            } else {
                let mut rng = task_rng(seed, repetition, user);
                index::sample(&mut rng, unrated.len(), num_negatives)
                    .into_iter()
                    .map(|k| unrated[k])
                    .collect()
            };
            sampled.sort_unstable();
            let mut candidates = positives.clone();
            candidates.extend(sampled);
            RankingTask {
                user,
                positives,
                candidates,
            }
        })
        .collect()
}
