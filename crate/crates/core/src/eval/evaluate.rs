use std::fmt::Write as _;

use rayon::prelude::*;

use super::{build_tasks, hit_ratio_at_n, ndcg_at_n, rank_candidates, EvalSplit};
use crate::data::DatasetBundle;
use crate::error::{Error, Result};
use crate::model::{Embeddings, HyperParams, ModelParams};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalConfig {
    pub cutoffs: Vec<usize>,
    pub num_negatives: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub split: EvalSplit,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            cutoffs: vec![5, 10, 15],
            num_negatives: 1000,
            repetitions: 10,
            seed: 0,
            split: EvalSplit::Test,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepetitionMetrics {
    pub users: usize,
    /// One entry per cutoff.
    pub hr: Vec<f64>,
    pub ndcg: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub split: EvalSplit,
    pub cutoffs: Vec<usize>,
    pub num_negatives: usize,
    pub seed: u64,
    pub repetitions: Vec<RepetitionMetrics>,
    /// Means over repetitions, one entry per cutoff.
    pub hr: Vec<f64>,
    pub ndcg: Vec<f64>,
}

impl MetricReport {
    fn position(&self, n: usize) -> Option<usize> {
        self.cutoffs.iter().position(|&c| c == n)
    }

    pub fn hr_at(&self, n: usize) -> Option<f64> {
        self.position(n).map(|p| self.hr[p])
    }

    pub fn ndcg_at(&self, n: usize) -> Option<f64> {
        self.position(n).map(|p| self.ndcg[p])
    }

    /// `key=value` report with per-repetition breakdown.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "split={}", self.split);
        let _ = writeln!(out, "num_negatives={}", self.num_negatives);
        let _ = writeln!(out, "repetitions={}", self.repetitions.len());
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "hr_convention=hits/|user positives|, mean over users");
        for (p, n) in self.cutoffs.iter().enumerate() {
            let _ = writeln!(out, "HR@{n}={:.6}", self.hr[p]);
            let _ = writeln!(out, "NDCG@{n}={:.6}", self.ndcg[p]);
        }
        for (r, rep) in self.repetitions.iter().enumerate() {
            for (p, n) in self.cutoffs.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "rep{r}.users={} rep{r}.HR@{n}={:.6} rep{r}.NDCG@{n}={:.6}",
                    rep.users, rep.hr[p], rep.ndcg[p]
                );
            }
        }
        out
    }

    /// Tab-separated header + one row, models x (metric, N).
    pub fn to_table(&self, model: &str) -> String {
        let mut header = String::from("model");
        let mut row = model.to_string();
        for (p, n) in self.cutoffs.iter().enumerate() {
            let _ = write!(header, "\tHR@{n}");
            let _ = write!(row, "\t{:.4}", self.hr[p]);
        }
        for (p, n) in self.cutoffs.iter().enumerate() {
            let _ = write!(header, "\tNDCG@{n}");
            let _ = write!(row, "\t{:.4}", self.ndcg[p]);
        }
        format!("{header}\n{row}\n")
    }
}

/// Evaluates any scoring function under the sampled-candidate protocol.
pub fn evaluate_scorer<F>(score: F, bundle: &DatasetBundle, config: &EvalConfig) -> Result<MetricReport>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    if config.repetitions == 0 {
        return Err(Error::Config("repetitions must be at least 1".into()));
    }
    if config.cutoffs.is_empty() {
        return Err(Error::Config("at least one cutoff is required".into()));
    }
    if config.split.select(bundle).is_empty() {
        return Err(Error::Data(format!("{} split is empty", config.split)));
    }
    let k = config.cutoffs.len();
    let mut repetitions = Vec::with_capacity(config.repetitions);
    for rep in 0..config.repetitions {
        let tasks = build_tasks(
            bundle,
            config.split,
            config.num_negatives,
            config.seed,
            rep as u64,
        );
        let per_user: Vec<(Vec<f64>, Vec<f64>)> = tasks
            .par_iter()
            .map(|task| {
                let scored: Vec<(usize, f64)> = task
                    .candidates
                    .iter()
                    .map(|&i| (i, score(task.user, i)))
                    .collect();
                let ranked = rank_candidates(&scored);
                let hr = config
                    .cutoffs
                    .iter()
                    .map(|&n| hit_ratio_at_n(&ranked, &task.positives, n))
                    .collect();
                let ndcg = config
                    .cutoffs
                    .iter()
                    .map(|&n| ndcg_at_n(&ranked, &task.positives, n))
                    .collect();
                (hr, ndcg)
            })
            .collect();
        let users = per_user.len();
        let mut hr = vec![0.0; k];
        let mut ndcg = vec![0.0; k];
        for (h, g) in &per_user {
            for p in 0..k {
                hr[p] += h[p];
                ndcg[p] += g[p];
            }
        }
        for p in 0..k {
            hr[p] /= users as f64;
            ndcg[p] /= users as f64;
        }
        repetitions.push(RepetitionMetrics { users, hr, ndcg });
    }
    let reps = repetitions.len() as f64;
    let mean = |pick: fn(&RepetitionMetrics) -> &Vec<f64>| -> Vec<f64> {
        (0..k)
            .map(|p| repetitions.iter().map(|r| pick(r)[p]).sum::<f64>() / reps)
            .collect()
    };
    let hr = mean(|r| &r.hr);
    let ndcg = mean(|r| &r.ndcg);
    Ok(MetricReport {
        split: config.split,
        cutoffs: config.cutoffs.clone(),
        num_negatives: config.num_negatives,
        seed: config.seed,
        repetitions,
        hr,
        ndcg,
    })
}

/// Scores every candidate with the model's final embeddings and evaluates.
pub fn evaluate(
    params: &ModelParams,
    hypers: &HyperParams,
    bundle: &DatasetBundle,
    config: &EvalConfig,
) -> Result<MetricReport> {
    let emb = Embeddings::compute(params, hypers, bundle)?;
    evaluate_scorer(|a, i| emb.score(a, i), bundle, config)
}
