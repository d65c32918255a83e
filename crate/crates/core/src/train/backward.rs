//! Reverse-mode gradients of the batch loss.
//!
//! The sweep mirrors [`ForwardPass`] top-down: score -> (u, v) -> history
//! mean and h^K -> diffusion layers -> layer-0 transform / item transform.
//! Row-wise work is done as small matrix products over the active users
//! of each layer, so every reduction has a fixed order.

use ndarray::{s, Array2, ArrayView1, Axis};

use super::loss::{batch_ids, mean_pair_loss, regularizer, PairLoss};
use super::PairwiseSample;
use crate::data::DatasetBundle;
use crate::error::{Error, Result};
use crate::model::{Aggregator, Dense, ForwardPass, HyperParams, ModelParams};

/// d loss / d theta for every tensor of [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet(pub ModelParams);

impl GradientSet {
    pub fn params(&self) -> &ModelParams {
        &self.0
    }

    pub fn all_finite(&self) -> bool {
        self.0.all_finite()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.0.to_flat()
    }
}

/// ReLU' with the subgradient at exactly 0 taken as 0.
fn relu_mask(upstream: &Array2<f64>, pre: &Array2<f64>) -> Array2<f64> {
    let mut dz = upstream.clone();
    dz.zip_mut_with(pre, |g, &z| {
        if z <= 0.0 {
            *g = 0.0
        }
    });
    dz
}

/// Accumulates weight / bias gradients of `layer` for rows `dz` with inputs
/// `input`, returning d loss / d input.
fn dense_backward(layer: &Dense, grad: &mut Dense, dz: &Array2<f64>, input: &Array2<f64>) -> Array2<f64> {
    grad.weight += &dz.t().dot(input);
    if let Some(b) = &mut grad.bias {
        *b += &dz.sum_axis(Axis(0));
    }
    dz.dot(&layer.weight)
}

fn add_row(target: &mut Array2<f64>, row: usize, delta: ArrayView1<'_, f64>) {
    let mut r = target.row_mut(row);
    r += &delta;
}

/// Loss and exact gradients for a batch. An empty batch yields only the
/// regularizer and its gradient.
pub fn loss_and_gradients(
    params: &ModelParams,
    hypers: &HyperParams,
    bundle: &DatasetBundle,
    batch: &[PairwiseSample],
    lambda: f64,
) -> Result<(f64, GradientSet)> {
    loss_and_gradients_with(params, hypers, bundle, batch, lambda, PairLoss::Bpr)
}

pub fn compute_gradients(
    params: &ModelParams,
    hypers: &HyperParams,
    bundle: &DatasetBundle,
    batch: &[PairwiseSample],
    lambda: f64,
) -> Result<GradientSet> {
    loss_and_gradients(params, hypers, bundle, batch, lambda).map(|(_, g)| g)
}

pub(crate) fn loss_and_gradients_with(
    params: &ModelParams,
    hypers: &HyperParams,
    bundle: &DatasetBundle,
    batch: &[PairwiseSample],
    lambda: f64,
    loss: PairLoss,
) -> Result<(f64, GradientSet)> {
    let mut grad = params.zeros_like();
    let mut value = regularizer(params, lambda);

    if !batch.is_empty() {
        let (users, items) = batch_ids(batch);
        let pass = ForwardPass::run(params, hypers, bundle, &users, &items)?;
        value += mean_pair_loss(&pass, batch, loss);
        backprop(params, hypers, bundle, batch, loss, &pass, &mut grad);
    }

    if lambda != 0.0 {
        if hypers.user_free_latent {
            grad.user_latent.scaled_add(2.0 * lambda, &params.user_latent);
        }
        grad.item_latent.scaled_add(2.0 * lambda, &params.item_latent);
    }
    if !hypers.user_free_latent {
        grad.user_latent.fill(0.0);
    }

    let grad = GradientSet(grad);
    if !value.is_finite() {
        return Err(Error::Divergence(format!("batch loss is {value}")));
    }
    if !grad.all_finite() {
        return Err(Error::Divergence("non-finite gradient".into()));
    }
    Ok((value, grad))
}

fn backprop(
    params: &ModelParams,
    hypers: &HyperParams,
    bundle: &DatasetBundle,
    batch: &[PairwiseSample],
    loss: PairLoss,
    pass: &ForwardPass,
    grad: &mut ModelParams,
) {
    let d = hypers.embed_dim;
    let scale = 1.0 / batch.len() as f64;

    // Scores.
    let mut du = Array2::<f64>::zeros(pass.u.raw_dim());
    let mut dv = Array2::<f64>::zeros(pass.v.raw_dim());
    for s in batch {
        let (u, vi, vj) = (pass.user(s.user), pass.item(s.pos_item), pass.item(s.neg_item));
        let g = loss.derivative(u.dot(&vi) - u.dot(&vj)) * scale;
        let ur = pass.target_slot[s.user];
        let mut du_row = du.row_mut(ur);
        du_row.scaled_add(g, &vi);
        du_row.scaled_add(-g, &vj);
        dv.row_mut(pass.item_slot[s.pos_item]).scaled_add(g, &u);
        dv.row_mut(pass.item_slot[s.neg_item]).scaled_add(-g, &u);
    }

    // u_a = h^K_a + mean(v_i, i in R_a).
    let depth = pass.layers.len() - 1;
    let mut dh: Vec<Array2<f64>> = pass
        .layers
        .iter()
        .map(|l| Array2::zeros((l.users.len(), d)))
        .collect();
    for (ur, &a) in pass.targets.iter().enumerate() {
        let du_a = du.row(ur);
        add_row(&mut dh[depth], pass.layers[depth].slot[a], du_a);
        let history = bundle.train.user_items(a);
        if !history.is_empty() {
            let share = &du_a / history.len() as f64;
            for &i in history {
                add_row(&mut dv, pass.item_slot[i], share.view());
            }
        }
    }

    // Diffusion layers, top down.
    for k in (1..=depth).rev() {
        let (lower, upper) = pass.layers.split_at(k);
        let (cur, prev) = (&upper[0], &lower[k - 1]);
        let dz = relu_mask(&dh[k], cur.pre.as_ref().expect("diffusion layers keep pre"));
        let agg = cur.agg.as_ref().expect("diffusion layers keep agg");
        let n = cur.users.len();
        let mut input = Array2::<f64>::zeros((n, 2 * d));
        input.slice_mut(s![.., ..d]).assign(agg);
        for (r, &a) in cur.users.iter().enumerate() {
            input.slice_mut(s![r, d..]).assign(&prev.row(a));
        }
        let dinput = dense_backward(&params.layers[k - 1], &mut grad.layers[k - 1], &dz, &input);

        let (dh_lower, _) = dh.split_at_mut(k);
        let dprev = &mut dh_lower[k - 1];
        for (r, &a) in cur.users.iter().enumerate() {
            add_row(dprev, prev.slot[a], dinput.slice(s![r, d..]));
            let dagg = dinput.slice(s![r, ..d]);
            let nbrs = bundle.social.followees(a);
            if nbrs.is_empty() {
                continue;
            }
            match hypers.aggregator {
                Aggregator::Average => {
                    let share = &dagg / nbrs.len() as f64;
                    for &b in nbrs {
                        add_row(dprev, prev.slot[b], share.view());
                    }
                }
                Aggregator::Max => {
                    for c in 0..d {
                        if dagg[c] == 0.0 {
                            continue;
                        }
                        // First neighbour holding the maximum, as in the forward pass.
                        let mut best = nbrs[0];
                        for &b in &nbrs[1..] {
                            if prev.row(b)[c] > prev.row(best)[c] {
                                best = b;
                            }
                        }
                        dprev[[prev.slot[best], c]] += dagg[c];
                    }
                }
            }
        }
    }

    // Layer 0.
    let base = &pass.layers[0];
    match (&params.user_transform, &mut grad.user_transform) {
        (None, _) => {
            if hypers.user_free_latent {
                for (r, &a) in base.users.iter().enumerate() {
                    add_row(&mut grad.user_latent, a, dh[0].row(r));
                }
            }
        }
        (Some(w0), Some(gw0)) => {
            let x = bundle.user_features.as_ref().expect("feature mode");
            let d1 = x.dim();
            let dz = relu_mask(&dh[0], base.pre.as_ref().expect("feature mode keeps pre"));
            let mut input = Array2::<f64>::zeros((base.users.len(), w0.in_dim()));
            for (r, &a) in base.users.iter().enumerate() {
                input.slice_mut(s![r, ..d1]).assign(&x.row(a));
                input.slice_mut(s![r, d1..]).assign(&params.user_latent.row(a));
            }
            let dinput = dense_backward(w0, gw0, &dz, &input);
            if hypers.user_free_latent {
                for (r, &a) in base.users.iter().enumerate() {
                    add_row(&mut grad.user_latent, a, dinput.slice(s![r, d1..]));
                }
            }
        }
        (Some(_), None) => unreachable!("gradient mirrors params"),
    }

    // Items.
    match (&params.item_transform, &mut grad.item_transform) {
        (None, _) => {
            for (r, &i) in pass.items.iter().enumerate() {
                add_row(&mut grad.item_latent, i, dv.row(r));
            }
        }
        (Some(f), Some(gf)) => {
            let y = bundle.item_features.as_ref().expect("feature mode");
            let l = params.item_latent.ncols();
            let dz = relu_mask(&dv, pass.item_pre.as_ref().expect("feature mode keeps pre"));
            let mut input = Array2::<f64>::zeros((pass.items.len(), f.in_dim()));
            for (r, &i) in pass.items.iter().enumerate() {
                input.slice_mut(s![r, ..l]).assign(&params.item_latent.row(i));
                input.slice_mut(s![r, l..]).assign(&y.row(i));
            }
            let dinput = dense_backward(f, gf, &dz, &input);
            for (r, &i) in pass.items.iter().enumerate() {
                add_row(&mut grad.item_latent, i, dinput.slice(s![r, ..l]));
            }
        }
        (Some(_), None) => unreachable!("gradient mirrors params"),
    }
}
