#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use socialgcn::model::Dense;
use socialgcn::train::PairwiseSample;
use socialgcn::{
    Aggregator, DatasetBundle, FeatureMode, FeatureTable, HyperParams, InteractionMatrix, ModelParams,
    SocialGraph,
};

pub struct Tiny {
    pub bundle: DatasetBundle,
    pub hypers: HyperParams,
    pub params: ModelParams,
    pub batch: Vec<PairwiseSample>,
}

/// Random tiny instance. User 0 follows nobody and user 1 has no history.
pub fn tiny(seed: u64, depth: usize, mode: FeatureMode, aggregator: Aggregator) -> Tiny {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(4..8);
    let n = rng.random_range(5..9);
    let mut likes = Vec::new();
    for a in 0..m {
        if a == 1 {
            continue;
        }
        for i in 0..n {
            if rng.random_bool(0.35) {
                likes.push((a, i));
            }
        }
    }
    let mut follows = Vec::new();
    for a in 1..m {
        for b in 0..m {
            if a != b && rng.random_bool(0.4) {
                follows.push((a, b));
            }
        }
    }
    let train = InteractionMatrix::new(m, n, likes).unwrap();
    let social = SocialGraph::new(m, follows).unwrap();
    let mut bundle = DatasetBundle::train_only(train, social);
    let (d, l) = match mode {
        FeatureMode::WithFeatures => (3, 2),
        FeatureMode::Featureless => (3, 3),
    };
    let (d1, d2) = if mode == FeatureMode::WithFeatures { (2, 3) } else { (0, 0) };
    if mode == FeatureMode::WithFeatures {
        let mut table = |rows, cols| {
            FeatureTable::new(Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))).unwrap()
        };
        bundle.user_features = Some(table(m, d1));
        bundle.item_features = Some(table(n, d2));
    }
    let hypers = HyperParams {
        embed_dim: d,
        latent_dim: l,
        depth,
        feature_mode: mode,
        aggregator,
        ..Default::default()
    };
    let mut params = ModelParams::zeros(&hypers, m, n, d1, d2);
    let flat: Vec<f64> = (0..params.num_parameters())
        .map(|_| rng.random_range(-0.8..0.8))
        .collect();
    params.set_flat(&flat);
    let batch = (0..m)
        .map(|user| {
            let pos_item = rng.random_range(0..n);
            let neg_item = (pos_item + rng.random_range(1..n)) % n;
            PairwiseSample { user, pos_item, neg_item }
        })
        .collect();
    Tiny {
        bundle,
        hypers,
        params,
        batch,
    }
}

fn dense(layer: &Dense, x: &[f64], activate: bool) -> Vec<f64> {
    (0..layer.weight.nrows())
        .map(|r| {
            let mut z: f64 = (0..x.len()).map(|c| layer.weight[[r, c]] * x[c]).sum();
            if let Some(b) = &layer.bias {
                z += b[r];
            }
            if activate { z.max(0.0) } else { z }
        })
        .collect()
}

fn row(a: &Array2<f64>, r: usize) -> Vec<f64> {
    a.row(r).to_vec()
}

/// Straight-line re-implementation of the forward model over plain vectors.
/// Returns (user embeddings, item embeddings, hidden layers).
pub fn naive_forward(
    params: &ModelParams,
    hypers: &HyperParams,
    bundle: &DatasetBundle,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>) {
    let (m, n) = (bundle.num_users(), bundle.num_items());
    let featureless = hypers.feature_mode == FeatureMode::Featureless;
    let items: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let q = row(&params.item_latent, i);
            if featureless {
                q
            } else {
                let mut x = q;
                x.extend(row(bundle.item_features.as_ref().unwrap().matrix(), i));
                dense(params.item_transform.as_ref().unwrap(), &x, true)
            }
        })
        .collect();
    let h0: Vec<Vec<f64>> = (0..m)
        .map(|a| {
            let p = row(&params.user_latent, a);
            if featureless {
                p
            } else {
                let mut x = row(bundle.user_features.as_ref().unwrap().matrix(), a);
                x.extend(p);
                dense(params.user_transform.as_ref().unwrap(), &x, true)
            }
        })
        .collect();
    let d = hypers.embed_dim;
    let mut layers = vec![h0];
    for k in 0..hypers.depth {
        let prev = &layers[k];
        let next = (0..m)
            .map(|a| {
                let nb = bundle.social.followees(a);
                let mut agg = vec![0.0; d];
                if !nb.is_empty() {
                    for c in 0..d {
                        agg[c] = match hypers.aggregator {
                            Aggregator::Average => nb.iter().map(|&b| prev[b][c]).sum::<f64>() / nb.len() as f64,
                            Aggregator::Max => nb.iter().map(|&b| prev[b][c]).fold(f64::NEG_INFINITY, f64::max),
                        };
                    }
                }
                agg.extend(prev[a].iter().copied());
                dense(&params.layers[k], &agg, true)
            })
            .collect();
        layers.push(next);
    }
    let last = layers.last().unwrap();
    let users = (0..m)
        .map(|a| {
            let hist = bundle.train.user_items(a);
            let mut u = last[a].clone();
            if !hist.is_empty() {
                for c in 0..d {
                    u[c] += hist.iter().map(|&i| items[i][c]).sum::<f64>() / hist.len() as f64;
                }
            }
            u
        })
        .collect();
    (users, items, layers)
}
