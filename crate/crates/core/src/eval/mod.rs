//! Top-N ranking evaluation with sampled candidates.
//!
//! For every user with held-out positives, the positives are ranked together
//! with up to `num_negatives` items the user never rated in any split. HR@N
//! is recall-style (hits / |positives|) and NDCG@N uses binary gains; both
//! are averaged over users and then over repetitions.

mod ablation;
mod evaluate;
mod metrics;
mod tasks;

pub use ablation::{format_percent, relative_change_percent, run_ablation, AblationRow, AblationTable, Variant};
pub use evaluate::{evaluate, evaluate_scorer, EvalConfig, MetricReport, RepetitionMetrics};
pub use metrics::{hit_ratio_at_n, ndcg_at_n, rank_candidates};
pub use tasks::{build_tasks, EvalSplit, RankingTask};
