use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::backward::loss_and_gradients_with;
use super::{adam_step, sample_pairs, AdamState, PairLoss};
use crate::data::DatasetBundle;
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalConfig, EvalSplit};
use crate::model::{HyperParams, ModelParams};

const SAMPLING_SALT: u64 = 0x5EED_0001;
const SHUFFLE_SALT: u64 = 0x5EED_0002;
const VALIDATION_CUTOFF: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub negatives_per_positive: usize,
    pub lambda_reg: f64,
    pub max_epochs: usize,
    /// Epochs without validation NDCG@10 improvement before stopping.
    /// 0 disables early stopping.
    pub early_stop_patience: usize,
    pub seed: u64,
    pub loss: PairLoss,
    /// Sampled negatives per user for the per-epoch validation pass.
    pub validation_negatives: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 512,
            negatives_per_positive: 5,
            lambda_reg: 1e-4,
            max_epochs: 100,
            early_stop_patience: 10,
            seed: 0,
            loss: PairLoss::Bpr,
            validation_negatives: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.negatives_per_positive == 0 {
            return Err(Error::Config("negatives_per_positive must be at least 1".into()));
        }
        if !(self.lambda_reg.is_finite() && self.lambda_reg >= 0.0) {
            return Err(Error::Config("lambda_reg must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Size-weighted mean of the batch losses.
    pub loss: f64,
    pub val_hr: Option<f64>,
    pub val_ndcg: Option<f64>,
    pub skipped_users: usize,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<EpochRecord>,
    /// Epoch whose parameters were returned; 0 means the initialization.
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub workers: usize,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

impl TrainingLog {
    /// Line-oriented log. Wall time is left out so reruns are byte-identical;
    /// see [`TrainingLog::timing_text`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# adam beta1={} beta2={} epsilon={}",
            self.adam_beta1, self.adam_beta2, self.adam_epsilon
        );
        let _ = writeln!(out, "# regularizer=lambda*(|P|^2+|Q|^2) added once per batch");
        let _ = writeln!(out, "# workers={}", self.workers);
        let _ = writeln!(out, "epoch\tloss\tval_HR@10\tval_NDCG@10\tskipped_users");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{}\t{:.9}\t{}\t{}\t{}",
                r.epoch,
                r.loss,
                opt(r.val_hr),
                opt(r.val_ndcg),
                r.skipped_users
            );
        }
        let _ = writeln!(out, "# best_epoch={} stopped_early={}", self.best_epoch, self.stopped_early);
        out
    }

    pub fn timing_text(&self) -> String {
        let mut out = String::from("epoch\twall_seconds\n");
        for r in &self.records {
            let _ = writeln!(out, "{}\t{:.3}", r.epoch, r.wall_seconds);
        }
        out
    }
}

fn feature_dims(bundle: &DatasetBundle) -> (usize, usize) {
    (
        bundle.user_features.as_ref().map_or(0, |f| f.dim()),
        bundle.item_features.as_ref().map_or(0, |f| f.dim()),
    )
}

/// Mini-batch Adam on the pairwise loss, with per-epoch validation and
/// early stopping on validation NDCG@10.
///
/// Returns the best-validation parameters, or the last ones when the
/// validation split is empty.
pub fn train(
    bundle: &DatasetBundle,
    hypers: &HyperParams,
    config: &TrainConfig,
) -> Result<(ModelParams, TrainingLog)> {
    hypers.validate()?;
    config.validate()?;
    bundle.validate()?;
    if bundle.train.is_empty() {
        return Err(Error::Data("training split has no interactions".into()));
    }
    let (d1, d2) = feature_dims(bundle);
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ModelParams::init(
        hypers,
        bundle.num_users(),
        bundle.num_items(),
        d1,
        d2,
        &mut init_rng,
    );
    params.check_shapes(hypers)?;
    let mut adam = AdamState::new(&params);
    let mut log = TrainingLog {
        records: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
        adam_beta1: adam.beta1,
        adam_beta2: adam.beta2,
        adam_epsilon: adam.epsilon,
        workers: rayon::current_num_threads(),
    };
    let validate = !bundle.validation.is_empty();
    let val_config = EvalConfig {
        cutoffs: vec![VALIDATION_CUTOFF],
        num_negatives: config.validation_negatives,
        repetitions: 1,
        seed: config.seed,
        split: EvalSplit::Validation,
    };

    let mut best: Option<(f64, ModelParams)> = None;
    let mut since_best = 0;
    for epoch in 1..=config.max_epochs {
        let start = Instant::now();
        let mut sampled = sample_pairs(
            &bundle.train,
            config.negatives_per_positive,
            config.seed ^ SAMPLING_SALT,
            epoch as u64,
        );
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed ^ SHUFFLE_SALT);
        shuffle_rng.set_stream(epoch as u64);
        sampled.pairs.shuffle(&mut shuffle_rng);

        let mut total = 0.0;
        let mut weight = 0usize;
        for batch in sampled.pairs.chunks(config.batch_size) {
            let (loss, grads) = loss_and_gradients_with(
                &params,
                hypers,
                bundle,
                batch,
                config.lambda_reg,
                config.loss,
            )
            .map_err(|e| match e {
                Error::Divergence(msg) => Error::Divergence(format!("epoch {epoch}: {msg}")),
                other => other,
            })?;
            adam_step(&mut params, &mut adam, &grads, config.learning_rate)?;
            total += loss * batch.len() as f64;
            weight += batch.len();
        }
        let loss = if weight == 0 { 0.0 } else { total / weight as f64 };

        let (val_hr, val_ndcg) = if validate {
            let report = evaluate(&params, hypers, bundle, &val_config)?;
            (report.hr_at(VALIDATION_CUTOFF), report.ndcg_at(VALIDATION_CUTOFF))
        } else {
            (None, None)
        };
        log.records.push(EpochRecord {
            epoch,
            loss,
            val_hr,
            val_ndcg,
            skipped_users: sampled.skipped_users,
            wall_seconds: start.elapsed().as_secs_f64(),
        });

        match val_ndcg {
            Some(score) => {
                if best.as_ref().is_none_or(|(b, _)| score > *b) {
                    best = Some((score, params.clone()));
                    log.best_epoch = epoch;
                    since_best = 0;
                } else {
                    since_best += 1;
                    if config.early_stop_patience > 0 && since_best >= config.early_stop_patience {
                        log.stopped_early = true;
                        break;
                    }
                }
            }
            None => log.best_epoch = epoch,
        }
    }
    let params = best.map_or(params, |(_, p)| p);
    Ok((params, log))
}
