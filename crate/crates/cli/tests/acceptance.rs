//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p socialgcn-cli --test acceptance`.

use std::collections::VecDeque;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use socialgcn::data::generate_raw;
use socialgcn::eval::{
    evaluate, evaluate_scorer, format_percent, hit_ratio_at_n, ndcg_at_n, rank_candidates, relative_change_percent,
    run_ablation, AblationRow, AblationTable, EvalSplit, MetricReport, Variant,
};
use socialgcn::model::{diffuse, ForwardPass};
use socialgcn::train::{finite_difference_check, train, GradCheckOptions, PairwiseSample};
use socialgcn::{
    Aggregator, DatasetBundle, EvalConfig, FeatureMode, FeatureTable, HyperParams, InteractionMatrix, ModelParams,
    SocialGraph, SyntheticSpec, TrainConfig,
};
use socialgcn_cli::commands::{CHECKPOINT_FILE, LOG_FILE};
use socialgcn_cli::{cmd_synth, cmd_train, RunConfig};

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- gradients

struct Tiny {
    bundle: DatasetBundle,
    hypers: HyperParams,
    params: ModelParams,
    batch: Vec<PairwiseSample>,
}

/// User 0 follows nobody, user 1 rated nothing.
fn tiny(seed: u64, depth: usize, mode: FeatureMode, aggregator: Aggregator) -> Tiny {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(4..9);
    let n = rng.random_range(4..9);
    let likes: Vec<_> = (0..m)
        .filter(|&a| a != 1)
        .flat_map(|a| (0..n).map(move |i| (a, i)))
        .filter(|_| rng.random_bool(0.4))
        .collect();
    let follows: Vec<_> = (1..m)
        .flat_map(|a| (0..m).map(move |b| (a, b)))
        .filter(|&(a, b)| a != b && rng.random_bool(0.4))
        .collect();
    let mut bundle = DatasetBundle::train_only(
        InteractionMatrix::new(m, n, likes).unwrap(),
        SocialGraph::new(m, follows).unwrap(),
    );
    let featured = mode == FeatureMode::WithFeatures;
    let (d, l, d1, d2) = if featured { (3, 2, 2, 3) } else { (3, 3, 0, 0) };
    if featured {
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
    let flat: Vec<f64> = (0..params.num_parameters()).map(|_| rng.random_range(-0.8..0.8)).collect();
    params.set_flat(&flat);
    let batch = (0..m)
        .map(|user| {
            let pos_item = rng.random_range(0..n);
            PairwiseSample {
                user,
                pos_item,
                neg_item: (pos_item + rng.random_range(1..n)) % n,
            }
        })
        .collect();
    Tiny {
        bundle,
        hypers,
        params,
        batch,
    }
}

fn gradient_suite() -> Outcome {
    let mut configs = 0;
    let mut worst: f64 = 0.0;
    let mut jitters = 0;
    for round in 0..2u64 {
        for depth in 0..=2 {
            for mode in [FeatureMode::WithFeatures, FeatureMode::Featureless] {
                for agg in [Aggregator::Average, Aggregator::Max] {
                    let seed = 1000 + configs;
                    let t = tiny(seed, depth, mode, agg);
                    ensure(t.bundle.social.followees(0).is_empty(), || "user 0 must have no followees".into())?;
                    ensure(t.bundle.train.user_items(1).is_empty(), || "user 1 must have no history".into())?;
                    let opts = GradCheckOptions {
                        step: 1e-5,
                        tolerance: 1e-4,
                        seed: seed + round,
                        ..Default::default()
                    };
                    let lambda = 1e-2;
                    let r = finite_difference_check(&t.params, &t.hypers, &t.bundle, &t.batch, lambda, &opts)
                        .map_err(|e| e.to_string())?;
                    ensure(r.passed, || {
                        format!(
                            "K={depth} {mode} {agg}: rel err {:.3e} at coord {} (analytic {}, numeric {})",
                            r.max_rel_error, r.worst_index, r.worst_analytic, r.worst_numeric
                        )
                    })?;
                    worst = worst.max(r.max_rel_error);
                    jitters += r.jitters;
                    configs += 1;
                }
            }
        }
    }
    Ok(format!("{configs} configs, max rel err {worst:.2e}, {jitters} jitters"))
}

// ------------------------------------------------------------------ metrics

/// Full sort by pairwise comparison, then the metric definitions.
fn brute_force(scored: &[(usize, f64)], positives: &[usize], n: usize) -> (f64, f64) {
    let mut list = scored.to_vec();
    for i in 0..list.len() {
        for j in i + 1..list.len() {
            let (a, b) = (list[i], list[j]);
            if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                list.swap(i, j);
            }
        }
    }
    let top = &list[..n.min(list.len())];
    let hits = top.iter().filter(|(i, _)| positives.contains(i)).count();
    let dcg: f64 = top
        .iter()
        .enumerate()
        .filter(|(_, (i, _))| positives.contains(i))
        .map(|(r, _)| 1.0 / ((r + 2) as f64).log2())
        .sum();
    let idcg: f64 = (0..positives.len().min(n)).map(|r| 1.0 / ((r + 2) as f64).log2()).sum();
    (hits as f64 / positives.len() as f64, dcg / idcg)
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst_ndcg: f64 = 0.0;
    for k in 0..500 {
        let len = rng.random_range(1..=12);
        let mut ids: Vec<usize> = (0..40).collect();
        ids.shuffle(&mut rng);
        let scored: Vec<(usize, f64)> = ids[..len]
            .iter()
            .map(|&i| (i, f64::from(rng.random_range(0..5u8)) * 0.25))
            .collect();
        let npos = rng.random_range(1..=len);
        let positives: Vec<usize> = scored[..npos].iter().map(|&(i, _)| i).collect();
        let n = rng.random_range(1..=15);
        let ranked = rank_candidates(&scored);
        let (hr, ndcg) = brute_force(&scored, &positives, n);
        let got_hr = hit_ratio_at_n(&ranked, &positives, n);
        let got_ndcg = ndcg_at_n(&ranked, &positives, n);
        ensure(got_hr.to_bits() == hr.to_bits(), || format!("instance {k}: HR {got_hr} vs {hr}"))?;
        let err = (got_ndcg - ndcg).abs();
        ensure(err < 1e-12, || format!("instance {k}: NDCG {got_ndcg} vs {ndcg}"))?;
        worst_ndcg = worst_ndcg.max(err);
    }
    Ok(format!("500 instances, HR bitwise, max NDCG diff {worst_ndcg:.1e}"))
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn random_ranker() -> Outcome {
    let (users, items) = (3000, 1101);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let test: Vec<_> = (0..users).map(|a| (a, rng.random_range(0..items))).collect();
    let train: Vec<_> = test.iter().map(|&(a, i)| (a, (i + 1 + rng.random_range(0..99)) % items)).collect();
    let bundle = DatasetBundle {
        test: InteractionMatrix::new(users, items, test).unwrap(),
        ..DatasetBundle::train_only(InteractionMatrix::new(users, items, train).unwrap(), SocialGraph::empty(users))
    };
    let cfg = EvalConfig {
        cutoffs: vec![10],
        num_negatives: 1000,
        repetitions: 1,
        seed: 11,
        split: EvalSplit::Test,
    };
    let score = |a: usize, i: usize| (splitmix(splitmix(a as u64) ^ i as u64) >> 11) as f64;
    let report = evaluate_scorer(score, &bundle, &cfg).map_err(|e| e.to_string())?;
    let tasks = report.repetitions[0].users;
    ensure(tasks >= 2000, || format!("only {tasks} tasks"))?;
    let p = 10.0 / 1001.0;
    let sigma = (p * (1.0 - p) / tasks as f64).sqrt();
    let hr = report.hr_at(10).unwrap();
    ensure((hr - p).abs() <= 3.0 * sigma, || {
        format!("HR@10 {hr:.5} outside {p:.5} +/- {:.5}", 3.0 * sigma)
    })?;
    Ok(format!("{tasks} tasks, HR@10 {hr:.5}, band {p:.5} +/- {:.5}", 3.0 * sigma))
}

// ------------------------------------------------------------------- model

fn bfs_within(social: &SocialGraph, start: usize, hops: usize) -> Vec<bool> {
    let mut seen = vec![false; social.num_users()];
    let mut queue = VecDeque::from([(start, 0)]);
    seen[start] = true;
    while let Some((a, d)) = queue.pop_front() {
        if d < hops {
            for &b in social.followees(a) {
                if !seen[b] {
                    seen[b] = true;
                    queue.push_back((b, d + 1));
                }
            }
        }
    }
    seen
}

fn locality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checks = 0;
    for g in 0..50 {
        let m = rng.random_range(2..=30);
        let p = rng.random_range(0.02..0.25);
        let edges: Vec<_> = (0..m)
            .flat_map(|a| (0..m).map(move |b| (a, b)))
            .filter(|&(a, b)| a != b && rng.random_bool(p))
            .collect();
        let social = SocialGraph::new(m, edges).unwrap();
        let depth = g % 4;
        let hypers = HyperParams {
            embed_dim: 3,
            latent_dim: 3,
            depth,
            feature_mode: FeatureMode::Featureless,
            ..Default::default()
        };
        let mut params = ModelParams::zeros(&hypers, m, 1, 0, 0);
        for layer in &mut params.layers {
            layer.weight.mapv_inplace(|_| rng.random_range(0.1..1.0));
        }
        let h0 = Array2::from_shape_simple_fn((m, 3), || rng.random_range(0.5..1.5));
        let base = diffuse(&params, &hypers, &social, h0.clone()).map_err(|e| e.to_string())?;
        let reach: Vec<Vec<bool>> = (0..m).map(|a| bfs_within(&social, a, depth)).collect();
        for source in 0..m {
            let mut bumped = h0.clone();
            bumped.row_mut(source).mapv_inplace(|x| x + 1.0);
            let after = diffuse(&params, &hypers, &social, bumped).map_err(|e| e.to_string())?;
            for a in 0..m {
                let changed = base.last().row(a) != after.last().row(a);
                ensure(changed == reach[a][source], || {
                    format!("graph {g} (K={depth}): user {a} source {source} changed={changed}")
                })?;
                checks += 1;
            }
        }
    }
    Ok(format!("50 graphs, {checks} user/source pairs"))
}

fn degenerate_identities() -> Outcome {
    for seed in 0..10 {
        let t = tiny(seed, 2, FeatureMode::Featureless, Aggregator::Average);
        let users: Vec<usize> = (0..t.bundle.num_users()).collect();
        let items: Vec<usize> = (0..t.bundle.num_items()).collect();
        let pass = ForwardPass::run(&t.params, &t.hypers, &t.bundle, &users, &items).map_err(|e| e.to_string())?;
        for &i in &items {
            ensure(pass.item(i) == t.params.item_latent.row(i), || format!("v_{i} != q_{i}"))?;
        }
        for &a in &users {
            ensure(pass.hidden(0, a) == t.params.user_latent.row(a), || format!("h0_{a} != p_{a}"))?;
        }
    }
    for mode in [FeatureMode::WithFeatures, FeatureMode::Featureless] {
        for seed in 0..10 {
            let t = tiny(seed, 0, mode, Aggregator::Max);
            let users: Vec<usize> = (0..t.bundle.num_users()).collect();
            let items: Vec<usize> = (0..t.bundle.num_items()).collect();
            let pass =
                ForwardPass::run(&t.params, &t.hypers, &t.bundle, &users, &items).map_err(|e| e.to_string())?;
            for &a in &users {
                let hist = t.bundle.train.user_items(a);
                let mut want = pass.hidden(0, a).to_owned();
                if !hist.is_empty() {
                    let mut sum = ndarray::Array1::<f64>::zeros(want.len());
                    for &i in hist {
                        sum += &pass.item(i);
                    }
                    want += &(sum / hist.len() as f64);
                }
                ensure(pass.user(a) == want, || format!("{mode} K=0 user {a}: u != h0 + mean"))?;
            }
        }
    }
    Ok("featureless v=q, h0=p and K=0 u=h0+mean hold bit-exactly".into())
}

// ---------------------------------------------------------------- training

fn overfit() -> Outcome {
    let raw = generate_raw(&SyntheticSpec {
        users: 10,
        items: 10,
        density: 0.3,
        dim_user: 4,
        dim_item: 4,
        num_clusters: 2,
        links_per_user: 2,
        seed: 10,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let mut bundle = DatasetBundle::train_only(raw.interactions, raw.social);
    bundle.user_features = Some(raw.user_features);
    bundle.item_features = Some(raw.item_features);
    let hypers = HyperParams {
        embed_dim: 16,
        latent_dim: 16,
        ..Default::default()
    };
    let config = TrainConfig {
        max_epochs: 500,
        seed: 10,
        ..Default::default()
    };
    let (params, _) = train(&bundle, &hypers, &config).map_err(|e| e.to_string())?;
    let emb = socialgcn::model::Embeddings::compute(&params, &hypers, &bundle).map_err(|e| e.to_string())?;
    let (mut total, mut positive) = (0usize, 0usize);
    for a in 0..10 {
        let liked = bundle.train.user_items(a);
        for &i in liked {
            for j in (0..10).filter(|j| liked.binary_search(j).is_err()) {
                total += 1;
                positive += usize::from(emb.score(a, i) > emb.score(a, j));
            }
        }
    }
    let frac = positive as f64 / total as f64;
    ensure(frac >= 0.95, || format!("{positive}/{total} pairs with positive margin"))?;
    let cfg = EvalConfig {
        cutoffs: vec![10],
        num_negatives: 1000,
        repetitions: 1,
        seed: 10,
        split: EvalSplit::Train,
    };
    let hr = evaluate(&params, &hypers, &bundle, &cfg)
        .map_err(|e| e.to_string())?
        .hr_at(10)
        .unwrap();
    ensure(hr >= 0.95, || format!("train HR@10 {hr}"))?;
    Ok(format!("{positive}/{total} pairs positive ({:.1}%), train HR@10 {hr:.3}", 100.0 * frac))
}

fn run_train_twice(dir: &Path) -> Result<Vec<(Vec<u8>, Vec<u8>)>, String> {
    let data = dir.join("data");
    cmd_synth(
        &SyntheticSpec {
            users: 80,
            items: 60,
            density: 0.1,
            seed: 21,
            ..Default::default()
        },
        &data,
    )
    .map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::load(&data.join("run.cfg")).map_err(|e| e.to_string())?;
    cfg.embed_dim = 8;
    cfg.latent_dim = 8;
    cfg.max_epochs = 4;
    cfg.num_negatives = 50;
    cfg.validation_negatives = 50;
    cfg.repetitions = 2;
    let mut outputs = Vec::new();
    for _ in 0..2 {
        cmd_train(&cfg).map_err(|e| e.to_string())?;
        let out = cfg.output_path();
        let read = |f: &str| std::fs::read(out.join(f)).map_err(|e| e.to_string());
        outputs.push((read(CHECKPOINT_FILE)?, read(LOG_FILE)?));
        std::fs::remove_dir_all(&out).map_err(|e| e.to_string())?;
    }
    Ok(outputs)
}

fn train_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs = run_train_twice(dir.path())?;
    ensure(runs[0].0 == runs[1].0, || "checkpoints differ".into())?;
    ensure(runs[0].1 == runs[1].1, || "logs differ".into())?;
    Ok(format!("checkpoint {} bytes, log {} bytes, identical", runs[0].0.len(), runs[0].1.len()))
}

// ----------------------------------------------------------------- ablation

fn report(value: f64) -> MetricReport {
    MetricReport {
        split: EvalSplit::Test,
        cutoffs: vec![10],
        num_negatives: 1000,
        seed: 0,
        repetitions: Vec::new(),
        hr: vec![value],
        ndcg: vec![value],
    }
}

fn delta_arithmetic() -> Outcome {
    let table = AblationTable {
        cutoffs: vec![10],
        rows: vec![
            AblationRow {
                variant: Variant::Full,
                report: report(0.1621),
                trainable: 0,
            },
            AblationRow {
                variant: Variant::DepthOne,
                report: report(0.1573),
                trainable: 0,
            },
        ],
    };
    let text = table.to_table();
    let row = text.lines().find(|l| l.starts_with("k1")).unwrap_or_default();
    let cells: Vec<&str> = row.split('\t').collect();
    ensure(cells.get(2) == Some(&"-2.96%"), || format!("row: {row}"))?;
    let direct = format_percent(relative_change_percent(0.1621, 0.1573));
    ensure(direct == "-2.96%", || direct.clone())?;
    Ok(format!("0.1621 -> 0.1573 prints {}", cells[2]))
}

/// NDCG@10 of each variant on the seeded 500 x 400 bundle, frozen from a
/// reference run.
const ANCHORS: [(Variant, f64); 3] = [
    (Variant::Full, 0.402_175_496_7),
    (Variant::DepthOne, 0.401_019_341_3),
    (Variant::FeaturelessK2, 0.385_324_135_6),
];

fn regression_anchors() -> Outcome {
    let bundle = socialgcn::data::generate_synthetic(&SyntheticSpec {
        users: 500,
        items: 400,
        homophily: 0.9,
        seed: 2024,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let hypers = HyperParams {
        embed_dim: 16,
        latent_dim: 16,
        ..Default::default()
    };
    let tc = TrainConfig {
        max_epochs: 30,
        early_stop_patience: 5,
        learning_rate: 0.005,
        seed: 2024,
        ..Default::default()
    };
    let ec = EvalConfig {
        cutoffs: vec![10],
        seed: 2024,
        ..Default::default()
    };
    let variants: Vec<Variant> = ANCHORS.iter().map(|a| a.0).collect();
    let table = run_ablation(&bundle, &hypers, &tc, &ec, &variants).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    let mut failures = Vec::new();
    for ((variant, anchor), row) in ANCHORS.iter().zip(&table.rows) {
        let got = row.report.ndcg[0];
        notes.push(format!("{variant}={got:.10}"));
        if got.is_nan() || (got - anchor).abs() > 1e-6 {
            failures.push(format!("{variant}: {got:.10} vs anchor {anchor:.10}"));
        }
    }
    let full = table.rows[0].report.ndcg[0];
    let k1 = table.rows[1].report.ndcg[0];
    notes.push(format!("trend full>=k1: {}", if full >= k1 { "yes" } else { "no" }));
    ensure(failures.is_empty(), || format!("{}; {}", failures.join("; "), notes.join(" ")))?;
    Ok(notes.join(" "))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            name: "gradient suite",
            limit: Some(Duration::from_secs(60)),
            run: gradient_suite,
        },
        Criterion {
            name: "metric oracle",
            limit: Some(Duration::from_secs(5)),
            run: metric_oracle,
        },
        Criterion {
            name: "random-ranker calibration",
            limit: Some(Duration::from_secs(30)),
            run: random_ranker,
        },
        Criterion {
            name: "diffusion locality",
            limit: Some(Duration::from_secs(10)),
            run: locality,
        },
        Criterion {
            name: "degenerate identities",
            limit: None,
            run: degenerate_identities,
        },
        Criterion {
            name: "overfit check",
            limit: Some(Duration::from_secs(120)),
            run: overfit,
        },
        Criterion {
            name: "end-to-end determinism",
            limit: None,
            run: train_determinism,
        },
        Criterion {
            name: "ablation delta arithmetic",
            limit: None,
            run: delta_arithmetic,
        },
        Criterion {
            name: "regression anchors",
            limit: None,
            run: regression_anchors,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.limit) {
            (Ok(_), Some(limit)) if elapsed > limit => Err(format!("took {elapsed:.2?}, limit {limit:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("[PASS] {} ({elapsed:.2?}): {detail}", c.name),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {} ({elapsed:.2?}): {detail}", c.name);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
