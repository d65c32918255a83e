use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::InteractionMatrix;

/// One (user, liked item, unobserved item) triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PairwiseSample {
    pub user: usize,
    pub pos_item: usize,
    pub neg_item: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledPairs {
    pub pairs: Vec<PairwiseSample>,
    /// Users who liked every item and therefore got no pairs.
    pub skipped_users: usize,
}

/// Draws `negatives_per_positive` uniform negatives (with replacement) for
/// every training positive.
///
/// Output is grouped by user then positive. The stream is a pure function
/// of `(seed, epoch)`: `epoch` selects an independent ChaCha stream.
pub fn sample_pairs(
    train: &InteractionMatrix,
    negatives_per_positive: usize,
    seed: u64,
    epoch: u64,
) -> SampledPairs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    let n = train.num_items();
    let mut pairs = Vec::with_capacity(train.num_edges() * negatives_per_positive);
    let mut skipped_users = 0;
    for user in 0..train.num_users() {
        let liked = train.user_items(user);
        if liked.is_empty() {
            continue;
        }
        if liked.len() >= n {
            skipped_users += 1;
            continue;
        }
        // Dense histories sample from the explicit complement; sparse ones
        // use rejection.
        let complement: Option<Vec<usize>> = (liked.len() * 2 > n)
            .then(|| (0..n).filter(|i| liked.binary_search(i).is_err()).collect());
        for &pos_item in liked {
            for _ in 0..negatives_per_positive {
                let neg_item = match &complement {
                    Some(c) => c[rng.random_range(0..c.len())],
                    None => loop {
                        let j = rng.random_range(0..n);
                        if liked.binary_search(&j).is_err() {
                            break j;
                        }
                    },
                };
                pairs.push(PairwiseSample {
                    user,
                    pos_item,
                    neg_item,
                });
            }
        }
    }
    SampledPairs {
        pairs,
        skipped_users,
    }
}
