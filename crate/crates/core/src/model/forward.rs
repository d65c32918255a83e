//! Whole-graph and batch-restricted forward passes.
//!
//! [`ForwardPass`] evaluates embeddings only for the users a batch needs:
//! the targets at layer K, their followees at layer K-1, and so on down to
//! the K-hop closure at layer 0. It keeps the pre-activations so the
//! training module can backpropagate through it.

use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;

use super::ops::{aggregate_rows, convolve_pre, relu_vec};
use super::{predict, Aggregator, Dense, HyperParams, ModelParams};
use crate::data::{DatasetBundle, SocialGraph};
use crate::error::{Error, Result};

const NO_SLOT: usize = usize::MAX;

/// Per-user vectors at every diffusion layer, `layers[k]` is M x D.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionState {
    pub layers: Vec<Array2<f64>>,
}

impl DiffusionState {
    pub fn last(&self) -> &Array2<f64> {
        self.layers.last().expect("at least layer 0")
    }
}

fn stack_rows(rows: Vec<Array1<f64>>, dim: usize) -> Array2<f64> {
    let n = rows.len();
    let mut data = Vec::with_capacity(n * dim);
    for r in rows {
        data.extend(r);
    }
    Array2::from_shape_vec((n, dim), data).expect("uniform row width")
}

fn slots(n: usize, ids: &[usize]) -> Vec<usize> {
    let mut slot = vec![NO_SLOT; n];
    for (row, &id) in ids.iter().enumerate() {
        slot[id] = row;
    }
    slot
}

struct StepOutput {
    agg: Array2<f64>,
    pre: Array2<f64>,
    h: Array2<f64>,
}

/// One graph-convolution layer for `users`, reading the previous layer
/// through `prev_slot` (user id -> row of `prev_h`).
fn diffusion_step(
    layer: &Dense,
    aggregator: Aggregator,
    social: &SocialGraph,
    prev_h: &Array2<f64>,
    prev_slot: &[usize],
    users: &[usize],
) -> StepOutput {
    let d = layer.out_dim();
    let rows: Vec<(Array1<f64>, Array1<f64>)> = users
        .par_iter()
        .map(|&a| {
            let agg = aggregate_rows(
                d,
                social.followees(a).iter().map(|&b| prev_h.row(prev_slot[b])),
                aggregator,
            );
            let pre = convolve_pre(layer, agg.view(), prev_h.row(prev_slot[a]));
            (agg, pre)
        })
        .collect();
    let (aggs, pres): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let pre = stack_rows(pres, d);
    StepOutput {
        agg: stack_rows(aggs, d),
        h: pre.mapv(super::relu),
        pre,
    }
}

/// Runs `depth` layers of social diffusion over every user, starting from
/// `h0` (one row per user).
pub fn diffuse(
    params: &ModelParams,
    hypers: &HyperParams,
    social: &SocialGraph,
    h0: Array2<f64>,
) -> Result<DiffusionState> {
    if h0.nrows() != social.num_users() {
        return Err(Error::Shape {
            context: "layer-0 user rows",
            expected: social.num_users(),
            actual: h0.nrows(),
        });
    }
    if h0.ncols() != hypers.embed_dim {
        return Err(Error::Shape {
            context: "layer-0 width",
            expected: hypers.embed_dim,
            actual: h0.ncols(),
        });
    }
    let users: Vec<usize> = (0..social.num_users()).collect();
    let mut layers = vec![h0];
    for layer in params.layers.iter().take(hypers.depth) {
        let prev = layers.last().expect("non-empty");
        let step = diffusion_step(layer, hypers.aggregator, social, prev, &users, &users);
        layers.push(step.h);
    }
    Ok(DiffusionState { layers })
}

fn add_history_mean<'a>(
    h_last: ArrayView1<'_, f64>,
    history: impl ExactSizeIterator<Item = ArrayView1<'a, f64>>,
) -> Array1<f64> {
    let n = history.len();
    let mut u = h_last.to_owned();
    if n == 0 {
        return u;
    }
    let mut sum = Array1::zeros(u.len());
    for v in history {
        sum += &v;
    }
    u += &(sum / n as f64);
    u
}

/// `u_a = h^K_a + mean_{i in R_a} v_i`; just `h^K_a` for an empty history.
pub fn user_embedding(
    diffusion: &DiffusionState,
    user: usize,
    history: &[usize],
    item_embeddings: &Array2<f64>,
) -> Result<Array1<f64>> {
    let last = diffusion.last();
    if user >= last.nrows() {
        return Err(Error::UnknownId {
            kind: "user",
            id: user,
            count: last.nrows(),
        });
    }
    if let Some(&bad) = history.iter().find(|&&i| i >= item_embeddings.nrows()) {
        return Err(Error::UnknownId {
            kind: "item",
            id: bad,
            count: item_embeddings.nrows(),
        });
    }
    Ok(add_history_mean(
        last.row(user),
        history.iter().map(|&i| item_embeddings.row(i)),
    ))
}

/// Cached activations of one diffusion layer, restricted to the users the
/// computation needs.
#[derive(Debug, Clone)]
pub(crate) struct LayerCache {
    pub users: Vec<usize>,
    pub slot: Vec<usize>,
    pub h: Array2<f64>,
    /// `None` where no ReLU was applied (featureless layer 0).
    pub pre: Option<Array2<f64>>,
    /// Aggregated followee vectors feeding this layer (layers >= 1).
    pub agg: Option<Array2<f64>>,
}

impl LayerCache {
    pub fn row(&self, user: usize) -> ArrayView1<'_, f64> {
        self.h.row(self.slot[user])
    }
}

/// Forward pass restricted to a set of target users and items.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub(crate) layers: Vec<LayerCache>,
    pub(crate) items: Vec<usize>,
    pub(crate) item_slot: Vec<usize>,
    pub(crate) v: Array2<f64>,
    pub(crate) item_pre: Option<Array2<f64>>,
    pub(crate) targets: Vec<usize>,
    pub(crate) target_slot: Vec<usize>,
    pub(crate) u: Array2<f64>,
}

pub(crate) fn check_inputs(
    params: &ModelParams,
    hypers: &HyperParams,
    bundle: &DatasetBundle,
) -> Result<()> {
    hypers.validate()?;
    params.check_shapes(hypers)?;
    let shape = |context, expected, actual| {
        if expected == actual {
            Ok(())
        } else {
            Err(Error::Shape {
                context,
                expected,
                actual,
            })
        }
    };
    shape("user count", bundle.num_users(), params.num_users())?;
    shape("item count", bundle.num_items(), params.num_items())?;
    shape("social users", bundle.num_users(), bundle.social.num_users())?;
    if !hypers.featureless() {
        let x = bundle
            .user_features
            .as_ref()
            .ok_or_else(|| Error::Config("feature mode needs user features".into()))?;
        let y = bundle
            .item_features
            .as_ref()
            .ok_or_else(|| Error::Config("feature mode needs item features".into()))?;
        shape("user feature dim", params.user_feature_dim(), x.dim())?;
        shape("item feature dim", params.item_feature_dim(), y.dim())?;
        shape("user feature rows", bundle.num_users(), x.len())?;
        shape("item feature rows", bundle.num_items(), y.len())?;
    }
    Ok(())
}

fn sorted_unique(mut ids: Vec<usize>) -> Vec<usize> {
    ids.sort_unstable();
    ids.dedup();
    ids
}

impl ForwardPass {
    /// Computes `u_a` for every user in `users` and `v_i` for every item in
    /// `items` plus every item in those users' training histories.
    pub fn run(
        params: &ModelParams,
        hypers: &HyperParams,
        bundle: &DatasetBundle,
        users: &[usize],
        items: &[usize],
    ) -> Result<Self> {
        check_inputs(params, hypers, bundle)?;
        let (m, n, d) = (bundle.num_users(), bundle.num_items(), hypers.embed_dim);
        if let Some(&bad) = users.iter().find(|&&a| a >= m) {
            return Err(Error::UnknownId {
                kind: "user",
                id: bad,
                count: m,
            });
        }
        if let Some(&bad) = items.iter().find(|&&i| i >= n) {
            return Err(Error::UnknownId {
                kind: "item",
                id: bad,
                count: n,
            });
        }
        let social = &bundle.social;
        let targets = sorted_unique(users.to_vec());

        // Active users per layer, from the top down.
        let depth = hypers.depth;
        let mut active = vec![Vec::new(); depth + 1];
        active[depth] = targets.clone();
        for k in (0..depth).rev() {
            let mut next = active[k + 1].clone();
            for &a in &active[k + 1] {
                next.extend_from_slice(social.followees(a));
            }
            active[k] = sorted_unique(next);
        }

        let mut layers = Vec::with_capacity(depth + 1);
        let base_users = std::mem::take(&mut active[0]);
        let base: Vec<(Option<Array1<f64>>, Array1<f64>)> = base_users
            .par_iter()
            .map(|&a| {
                let p_a = params.user_latent.row(a);
                match &params.user_transform {
                    None => (None, p_a.to_owned()),
                    Some(w0) => {
                        let x_a = bundle.user_features.as_ref().expect("checked").row(a);
                        let pre = w0.pre_activation(super::ops::concat(x_a, p_a).view());
                        let h = relu_vec(pre.clone());
                        (Some(pre), h)
                    }
                }
            })
            .collect();
        let (pres, hs): (Vec<_>, Vec<_>) = base.into_iter().unzip();
        let pre0 = params
            .user_transform
            .as_ref()
            .map(|_| stack_rows(pres.into_iter().map(Option::unwrap).collect(), d));
        layers.push(LayerCache {
            slot: slots(m, &base_users),
            users: base_users,
            h: stack_rows(hs, d),
            pre: pre0,
            agg: None,
        });

        for k in 0..depth {
            let prev: &LayerCache = layers.last().expect("non-empty");
            let users_k = std::mem::take(&mut active[k + 1]);
            let step = diffusion_step(
                &params.layers[k],
                hypers.aggregator,
                social,
                &prev.h,
                &prev.slot,
                &users_k,
            );
            layers.push(LayerCache {
                slot: slots(m, &users_k),
                users: users_k,
                h: step.h,
                pre: Some(step.pre),
                agg: Some(step.agg),
            });
        }

        let mut needed = items.to_vec();
        for &a in &targets {
            needed.extend_from_slice(bundle.train.user_items(a));
        }
        let item_ids = sorted_unique(needed);
        let item_rows: Vec<(Option<Array1<f64>>, Array1<f64>)> = item_ids
            .par_iter()
            .map(|&i| {
                let q_i = params.item_latent.row(i);
                match &params.item_transform {
                    None => (None, q_i.to_owned()),
                    Some(f) => {
                        let y_i = bundle.item_features.as_ref().expect("checked").row(i);
                        let pre = f.pre_activation(super::ops::concat(q_i, y_i).view());
                        let v = relu_vec(pre.clone());
                        (Some(pre), v)
                    }
                }
            })
            .collect();
        let (ipres, vs): (Vec<_>, Vec<_>) = item_rows.into_iter().unzip();
        let item_pre = params
            .item_transform
            .as_ref()
            .map(|_| stack_rows(ipres.into_iter().map(Option::unwrap).collect(), d));
        let v = stack_rows(vs, d);
        let item_slot = slots(n, &item_ids);

        let top = layers.last().expect("non-empty");
        let u_rows: Vec<Array1<f64>> = targets
            .par_iter()
            .map(|&a| {
                let history = bundle.train.user_items(a);
                add_history_mean(top.row(a), history.iter().map(|&i| v.row(item_slot[i])))
            })
            .collect();

        Ok(Self {
            layers,
            target_slot: slots(m, &targets),
            targets,
            u: stack_rows(u_rows, d),
            items: item_ids,
            item_slot,
            v,
            item_pre,
        })
    }

    /// Final user embedding; panics if `user` was not a target.
    pub fn user(&self, user: usize) -> ArrayView1<'_, f64> {
        self.u.row(self.target_slot[user])
    }

    /// Item embedding; panics if `item` was not computed.
    pub fn item(&self, item: usize) -> ArrayView1<'_, f64> {
        self.v.row(self.item_slot[item])
    }

    /// Layer-k embedding of an active user.
    pub fn hidden(&self, k: usize, user: usize) -> ArrayView1<'_, f64> {
        self.layers[k].row(user)
    }

    pub fn score(&self, user: usize, item: usize) -> f64 {
        self.user(user).dot(&self.item(item))
    }

    /// Smallest distance from any ReLU input or any max-aggregation
    /// comparison to its switching point. Finite differences taken with a
    /// step much smaller than this margin never cross a kink.
    pub fn kink_margin(&self, social: &SocialGraph, aggregator: Aggregator) -> f64 {
        let mut margin = f64::INFINITY;
        let mut visit = |pre: &Array2<f64>| {
            for &z in pre {
                margin = margin.min(z.abs());
            }
        };
        for layer in &self.layers {
            if let Some(pre) = &layer.pre {
                visit(pre);
            }
        }
        if let Some(pre) = &self.item_pre {
            visit(pre);
        }
        if aggregator == Aggregator::Max {
            for k in 1..self.layers.len() {
                let prev = &self.layers[k - 1];
                for &a in &self.layers[k].users {
                    let nbrs = social.followees(a);
                    for c in 0..prev.h.ncols() {
                        let mut vals: Vec<f64> = nbrs.iter().map(|&b| prev.row(b)[c]).collect();
                        vals.sort_by(|x, y| y.total_cmp(x));
                        // Ties among exact zeros come from dead ReLUs and carry
                        // zero gradient on both sides.
                        if vals.len() >= 2 && vals[0] != 0.0 {
                            margin = margin.min(vals[0] - vals[1]);
                        }
                    }
                }
            }
        }
        margin
    }
}

/// Final embeddings for every user and item.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub users: Array2<f64>,
    pub items: Array2<f64>,
}

impl Embeddings {
    pub fn compute(params: &ModelParams, hypers: &HyperParams, bundle: &DatasetBundle) -> Result<Self> {
        let users: Vec<usize> = (0..bundle.num_users()).collect();
        let items: Vec<usize> = (0..bundle.num_items()).collect();
        let pass = ForwardPass::run(params, hypers, bundle, &users, &items)?;
        Ok(Self {
            users: pass.u,
            items: pass.v,
        })
    }

    pub fn score(&self, user: usize, item: usize) -> f64 {
        self.users.row(user).dot(&self.items.row(item))
    }
}

/// Scores for `candidates` in input order.
pub fn score_all_items(
    params: &ModelParams,
    hypers: &HyperParams,
    bundle: &DatasetBundle,
    user: usize,
    candidates: &[usize],
) -> Result<Vec<(usize, f64)>> {
    let pass = ForwardPass::run(params, hypers, bundle, &[user], candidates)?;
    let u = pass.user(user);
    candidates
        .iter()
        .map(|&i| Ok((i, predict(u, pass.item(i))?)))
        .collect()
}
