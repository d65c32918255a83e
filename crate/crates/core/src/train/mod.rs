//! Pairwise ranking training: negative sampling, loss, hand-written
//! reverse-mode gradients, Adam, and finite-difference verification.

mod adam;
mod backward;
mod gradcheck;
mod loss;
mod sampling;
mod trainer;

pub use adam::{adam_step, AdamState};
pub use backward::{compute_gradients, loss_and_gradients, GradientSet};
pub use gradcheck::{
    check_gradient, finite_difference_check, relative_error, GradCheckOptions, GradCheckReport,
};
pub use loss::{batch_loss, bpr_pair_loss, sigmoid, softplus, PairLoss};
pub use sampling::{sample_pairs, PairwiseSample, SampledPairs};
pub use trainer::{train, EpochRecord, TrainConfig, TrainingLog};
