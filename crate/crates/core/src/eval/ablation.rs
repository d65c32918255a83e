use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use super::{evaluate, EvalConfig, MetricReport};
use crate::data::DatasetBundle;
use crate::error::{Error, Result};
use crate::model::{FeatureMode, HyperParams};
use crate::train::{train, TrainConfig};

/// Simplified models compared against the full one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Full,
    /// Single diffusion layer.
    DepthOne,
    /// No user or item features, K = 2.
    FeaturelessK2,
    /// No user or item features, K = 1.
    FeaturelessK1,
    /// User free latents pinned to zero.
    NoUserLatent,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Full,
        Variant::DepthOne,
        Variant::FeaturelessK2,
        Variant::FeaturelessK1,
        Variant::NoUserLatent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::DepthOne => "k1",
            Variant::FeaturelessK2 => "featureless_k2",
            Variant::FeaturelessK1 => "featureless_k1",
            Variant::NoUserLatent => "p0",
        }
    }

    /// Hyperparameters of this variant derived from the full model's.
    /// Featureless variants set the latent width to the embedding width.
    pub fn apply(self, base: &HyperParams) -> HyperParams {
        let mut h = base.clone();
        match self {
            Variant::Full => {}
            Variant::DepthOne => h.depth = 1,
            Variant::FeaturelessK2 | Variant::FeaturelessK1 => {
                h.feature_mode = FeatureMode::Featureless;
                h.latent_dim = h.embed_dim;
                h.depth = if self == Variant::FeaturelessK2 { 2 } else { 1 };
            }
            Variant::NoUserLatent => h.user_free_latent = false,
        }
        h
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s.trim())
            .ok_or_else(|| {
                let names: Vec<_> = Variant::ALL.iter().map(|v| v.name()).collect();
                Error::Config(format!(
                    "unknown variant `{}` (valid: {})",
                    s.trim(),
                    names.join(", ")
                ))
            })
    }
}

/// `(variant - full) / full * 100`.
pub fn relative_change_percent(full: f64, variant: f64) -> f64 {
    (variant - full) / full * 100.0
}

/// Two decimals with a percent sign; a negative zero prints as `0.00%`.
pub fn format_percent(value: f64) -> String {
    let text = format!("{value:.2}%");
    if text == "-0.00%" {
        "0.00%".to_string()
    } else {
        text
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: Variant,
    pub report: MetricReport,
    pub trainable: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub cutoffs: Vec<usize>,
    /// The full model always comes first.
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    /// Tab-separated table: absolute metrics, then the change relative to
    /// the full model for each column.
    pub fn to_table(&self) -> String {
        let mut out = String::from("model");
        for n in &self.cutoffs {
            let _ = write!(out, "\tHR@{n}\tImprove.");
        }
        for n in &self.cutoffs {
            let _ = write!(out, "\tNDCG@{n}\tImprove.");
        }
        let _ = writeln!(out, "\ttrainable");
        let full = &self.rows[0].report;
        for row in &self.rows {
            out.push_str(row.variant.name());
            for p in 0..self.cutoffs.len() {
                let (v, f) = (row.report.hr[p], full.hr[p]);
                let _ = write!(out, "\t{v:.4}\t{}", format_percent(relative_change_percent(f, v)));
            }
            for p in 0..self.cutoffs.len() {
                let (v, f) = (row.report.ndcg[p], full.ndcg[p]);
                let _ = write!(out, "\t{v:.4}\t{}", format_percent(relative_change_percent(f, v)));
            }
            let _ = writeln!(out, "\t{}", row.trainable);
        }
        out
    }
}

/// Trains and evaluates each variant from the same seed and data.
///
/// `Full` is inserted at the front when missing, and duplicates are dropped.
pub fn run_ablation(
    bundle: &DatasetBundle,
    base_hypers: &HyperParams,
    train_config: &TrainConfig,
    eval_config: &EvalConfig,
    variants: &[Variant],
) -> Result<AblationTable> {
    let mut order = vec![Variant::Full];
    for &v in variants {
        if !order.contains(&v) {
            order.push(v);
        }
    }
    let mut rows = Vec::with_capacity(order.len());
    for variant in order {
        let hypers = variant.apply(base_hypers);
        let (params, _) = train(bundle, &hypers, train_config)?;
        let report = evaluate(&params, &hypers, bundle, eval_config)?;
        rows.push(AblationRow {
            variant,
            report,
            trainable: params.num_trainable(&hypers),
        });
    }
    Ok(AblationTable {
        cutoffs: eval_config.cutoffs.clone(),
        rows,
    })
}
