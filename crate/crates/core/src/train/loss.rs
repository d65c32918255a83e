use std::fmt;
use std::str::FromStr;

use super::PairwiseSample;
use crate::data::DatasetBundle;
use crate::error::{Error, Result};
use crate::model::{ForwardPass, HyperParams, ModelParams};

/// `ln(1 + e^x)` without overflow or cancellation at either tail.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-ln sigmoid(score_pos - score_neg)`.
pub fn bpr_pair_loss(score_pos: f64, score_neg: f64) -> f64 {
    softplus(score_neg - score_pos)
}

/// Per-pair objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairLoss {
    /// `-ln sigmoid(margin)`: pushes positives above sampled negatives.
    #[default]
    Bpr,
    /// `sigmoid(margin)` minimized as written. Minimizing it ranks negatives
    /// above positives; kept only so the two readings can be compared.
    LiteralSigmoid,
}

impl PairLoss {
    pub fn value(self, margin: f64) -> f64 {
        match self {
            PairLoss::Bpr => softplus(-margin),
            PairLoss::LiteralSigmoid => sigmoid(margin),
        }
    }

    /// d value / d margin.
    pub fn derivative(self, margin: f64) -> f64 {
        match self {
            PairLoss::Bpr => -sigmoid(-margin),
            PairLoss::LiteralSigmoid => {
                let s = sigmoid(margin);
                s * (1.0 - s)
            }
        }
    }
}

impl fmt::Display for PairLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PairLoss::Bpr => "bpr",
            PairLoss::LiteralSigmoid => "literal_sigmoid",
        })
    }
}

impl FromStr for PairLoss {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bpr" => Ok(PairLoss::Bpr),
            "literal_sigmoid" => Ok(PairLoss::LiteralSigmoid),
            _ => Err(Error::Config(format!(
                "unknown loss {s:?} (expected bpr|literal_sigmoid)"
            ))),
        }
    }
}

pub(crate) fn batch_ids(batch: &[PairwiseSample]) -> (Vec<usize>, Vec<usize>) {
    let users = batch.iter().map(|s| s.user).collect();
    let items = batch
        .iter()
        .flat_map(|s| [s.pos_item, s.neg_item])
        .collect();
    (users, items)
}

pub(crate) fn regularizer(params: &ModelParams, lambda: f64) -> f64 {
    if lambda == 0.0 {
        0.0
    } else {
        lambda * params.free_latent_sq_norm()
    }
}

pub(crate) fn mean_pair_loss(pass: &ForwardPass, batch: &[PairwiseSample], loss: PairLoss) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    let total: f64 = batch
        .iter()
        .map(|s| loss.value(pass.score(s.user, s.pos_item) - pass.score(s.user, s.neg_item)))
        .sum();
    total / batch.len() as f64
}

/// Mean BPR loss over the batch plus `lambda * (‖P‖² + ‖Q‖²)`.
/// An empty batch contributes only the regularizer.
pub fn batch_loss(
    params: &ModelParams,
    hypers: &HyperParams,
    bundle: &DatasetBundle,
    batch: &[PairwiseSample],
    lambda: f64,
) -> Result<f64> {
    batch_loss_with(params, hypers, bundle, batch, lambda, PairLoss::Bpr)
}

pub(crate) fn batch_loss_with(
    params: &ModelParams,
    hypers: &HyperParams,
    bundle: &DatasetBundle,
    batch: &[PairwiseSample],
    lambda: f64,
    loss: PairLoss,
) -> Result<f64> {
    let data = if batch.is_empty() {
        0.0
    } else {
        let (users, items) = batch_ids(batch);
        let pass = ForwardPass::run(params, hypers, bundle, &users, &items)?;
        mean_pair_loss(&pass, batch, loss)
    };
    Ok(data + regularizer(params, lambda))
}
