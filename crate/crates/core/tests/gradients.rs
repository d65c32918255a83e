mod common;

use socialgcn::train::{
    batch_loss, compute_gradients, finite_difference_check, loss_and_gradients, GradCheckOptions,
    PairwiseSample,
};
use socialgcn::{Aggregator, FeatureMode};

use common::tiny;

const MODES: [FeatureMode; 2] = [FeatureMode::WithFeatures, FeatureMode::Featureless];
const AGGS: [Aggregator; 2] = [Aggregator::Average, Aggregator::Max];

#[test]
fn finite_differences_agree_across_configurations() {
    let mut seed = 100;
    for depth in 0..=2 {
        for mode in MODES {
            for agg in AGGS {
                seed += 1;
                let t = tiny(seed, depth, mode, agg);
                let opts = GradCheckOptions {
                    seed,
                    ..Default::default()
                };
                let report =
                    finite_difference_check(&t.params, &t.hypers, &t.bundle, &t.batch, 0.01, &opts).unwrap();
                assert_eq!(report.checked, t.params.num_parameters());
                assert!(
                    report.passed,
                    "K={depth} {mode} {agg}: rel err {} at {} ({} vs {})",
                    report.max_rel_error, report.worst_index, report.worst_analytic, report.worst_numeric
                );
            }
        }
    }
}

#[test]
fn frozen_user_latents_still_check() {
    let mut t = tiny(9, 2, FeatureMode::WithFeatures, Aggregator::Average);
    t.hypers.user_free_latent = false;
    t.params.user_latent.fill(0.0);
    let report =
        finite_difference_check(&t.params, &t.hypers, &t.bundle, &t.batch, 0.01, &GradCheckOptions::default())
            .unwrap();
    assert!(report.passed, "{report:?}");
    let grads = compute_gradients(&t.params, &t.hypers, &t.bundle, &t.batch, 0.01).unwrap();
    assert!(grads.params().user_latent.iter().all(|&g| g == 0.0));
}

#[test]
fn empty_batch_leaves_only_regularizer_gradients() {
    let t = tiny(21, 2, FeatureMode::WithFeatures, Aggregator::Max);
    let lambda = 0.3;
    let (loss, grads) = loss_and_gradients(&t.params, &t.hypers, &t.bundle, &[], lambda).unwrap();
    let g = grads.params();
    assert_eq!(g.user_latent, &t.params.user_latent * (2.0 * lambda));
    assert_eq!(g.item_latent, &t.params.item_latent * (2.0 * lambda));
    for (name, tensor) in g.tensors() {
        if name != "user_latent" && name != "item_latent" {
            assert!(tensor.iter().all(|&x| x == 0.0), "{name}");
        }
    }
    let norm = t.params.user_latent.mapv(|x| x * x).sum() + t.params.item_latent.mapv(|x| x * x).sum();
    assert!((loss - lambda * norm).abs() < 1e-12);
}

#[test]
fn loss_bounded_below_by_regularizer() {
    for seed in 0..10 {
        let t = tiny(seed, 1, FeatureMode::WithFeatures, Aggregator::Average);
        let reg = 0.05 * (t.params.user_latent.mapv(|x| x * x).sum() + t.params.item_latent.mapv(|x| x * x).sum());
        let loss = batch_loss(&t.params, &t.hypers, &t.bundle, &t.batch, 0.05).unwrap();
        assert!(loss > reg);
    }
}

#[test]
fn unreachable_item_only_sees_regularizer() {
    let t = tiny(33, 2, FeatureMode::Featureless, Aggregator::Average);
    let n = t.bundle.num_items();
    // Pick a user with a history and an item outside every touched set.
    let user = (0..t.bundle.num_users()).find(|&a| !t.bundle.train.user_items(a).is_empty()).unwrap();
    let hist = t.bundle.train.user_items(user);
    let free: Vec<usize> = (0..n).filter(|i| hist.binary_search(i).is_err()).collect();
    if free.len() < 3 {
        return;
    }
    let batch = [PairwiseSample {
        user,
        pos_item: free[0],
        neg_item: free[1],
    }];
    let lambda = 0.1;
    let grads = compute_gradients(&t.params, &t.hypers, &t.bundle, &batch, lambda).unwrap();
    // Histories of diffused neighbours never enter u_a, so free[2] is untouched.
    let untouched = free[2];
    assert_eq!(
        grads.params().item_latent.row(untouched),
        t.params.item_latent.row(untouched).mapv(|x| 2.0 * lambda * x)
    );
}

#[test]
fn dead_layers_get_no_weight_gradient() {
    let mut t = tiny(41, 1, FeatureMode::Featureless, Aggregator::Average);
    for layer in &mut t.params.layers {
        layer.weight.fill(0.0);
        if let Some(b) = &mut layer.bias {
            b.fill(0.0);
        }
    }
    let grads = compute_gradients(&t.params, &t.hypers, &t.bundle, &t.batch, 0.01).unwrap();
    assert!(grads.params().layers[0].weight.iter().all(|&g| g == 0.0));
}
