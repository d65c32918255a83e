use proptest::prelude::*;
use socialgcn::data::generate_synthetic;
use socialgcn::eval::{
    build_tasks, evaluate, evaluate_scorer, hit_ratio_at_n, ndcg_at_n, rank_candidates, EvalConfig, EvalSplit,
};
use socialgcn::model::Embeddings;
use socialgcn::train::{train, TrainConfig};
use socialgcn::{HyperParams, SyntheticSpec};

/// Rank of each candidate from pairwise comparisons alone.
fn oracle(scored: &[(usize, f64)], positives: &[usize], n: usize) -> (f64, f64) {
    let rank = |item: usize, s: f64| {
        scored
            .iter()
            .filter(|&&(j, t)| t > s || (t == s && j < item))
            .count()
    };
    let ranks: Vec<usize> = scored
        .iter()
        .filter(|(i, _)| positives.contains(i))
        .map(|&(i, s)| rank(i, s))
        .collect();
    let hits = ranks.iter().filter(|&&r| r < n).count();
    let dcg: f64 = ranks
        .iter()
        .filter(|&&r| r < n)
        .map(|&r| 1.0 / ((r + 2) as f64).log2())
        .sum();
    let idcg: f64 = (0..positives.len().min(n)).map(|r| 1.0 / ((r + 2) as f64).log2()).sum();
    let hr = hits as f64 / positives.len() as f64;
    (hr, if idcg == 0.0 { 0.0 } else { dcg / idcg })
}

proptest! {
    #[test]
    fn metrics_match_pairwise_oracle(
        scores in prop::collection::vec(0u8..6, 1..=12),
        mask in prop::collection::vec(any::<bool>(), 12),
        n in 1usize..15,
    ) {
        let scored: Vec<(usize, f64)> = scores.iter().enumerate().map(|(i, &s)| (i * 3, f64::from(s))).collect();
        let mut positives: Vec<usize> = scored.iter().zip(&mask).filter(|(_, &m)| m).map(|(&(i, _), _)| i).collect();
        if positives.is_empty() {
            positives.push(scored[0].0);
        }
        let ranked = rank_candidates(&scored);
        let (hr, ndcg) = oracle(&scored, &positives, n);
        prop_assert!((hit_ratio_at_n(&ranked, &positives, n) - hr).abs() < 1e-12);
        prop_assert!((ndcg_at_n(&ranked, &positives, n) - ndcg).abs() < 1e-12);
    }
}

fn bundle() -> socialgcn::DatasetBundle {
    generate_synthetic(&SyntheticSpec {
        users: 80,
        items: 120,
        density: 0.08,
        dim_user: 4,
        dim_item: 4,
        seed: 12,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn negatives_are_unrated_in_every_split() {
    let b = bundle();
    for task in build_tasks(&b, EvalSplit::Test, 30, 3, 0) {
        let negs = &task.candidates[task.positives.len()..];
        assert!(negs.len() <= 30);
        assert!(negs.windows(2).all(|w| w[0] < w[1]));
        assert!(negs.iter().all(|&i| !b.is_rated(task.user, i)));
    }
}

#[test]
fn evaluate_equals_scoring_with_final_embeddings() {
    let b = bundle();
    let hypers = HyperParams {
        embed_dim: 6,
        latent_dim: 6,
        ..Default::default()
    };
    let tc = TrainConfig {
        max_epochs: 5,
        validation_negatives: 30,
        ..Default::default()
    };
    let (params, _) = train(&b, &hypers, &tc).unwrap();
    let cfg = EvalConfig {
        num_negatives: 50,
        repetitions: 3,
        ..Default::default()
    };
    let report = evaluate(&params, &hypers, &b, &cfg).unwrap();
    let emb = Embeddings::compute(&params, &hypers, &b).unwrap();
    let direct = evaluate_scorer(|a, i| emb.score(a, i), &b, &cfg).unwrap();
    assert_eq!(report, direct);
    for p in 0..3 {
        assert!(report.hr[p] <= 1.0 && report.ndcg[p] <= 1.0);
        if p > 0 {
            assert!(report.hr[p] >= report.hr[p - 1]);
        }
    }
}

#[test]
fn random_scores_land_near_chance() {
    let b = bundle();
    let cfg = EvalConfig {
        cutoffs: vec![10],
        num_negatives: 60,
        repetitions: 10,
        ..Default::default()
    };
    let hash = |a: usize, i: usize| {
        let mut x = (a as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (i as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
        x ^= x >> 29;
        x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        (x ^ (x >> 32)) as f64
    };
    let report = evaluate_scorer(hash, &b, &cfg).unwrap();
    let hr = report.hr_at(10).unwrap();
    // Each positive competes against about 60 negatives plus other positives.
    assert!(hr > 0.08 && hr < 0.25, "{hr}");
}
