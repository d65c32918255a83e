use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use socialgcn::data::{
    generate_raw, load_features, load_interactions, load_social, preprocess_filter, split, write_features,
    write_interactions, write_social,
};
use socialgcn::eval::{evaluate, rank_candidates, run_ablation, AblationTable};
use socialgcn::model::score_all_items;
use socialgcn::train::train;
use socialgcn::{DatasetBundle, FeatureMode, InteractionMatrix, SocialGraph, SyntheticSpec};

use crate::artifacts::Staged;
use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{Category, CliError, Result};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const LOG_FILE: &str = "train_log.tsv";
pub const TIMING_FILE: &str = "timing.tsv";
pub const REPORT_FILE: &str = "report.txt";
pub const METRICS_FILE: &str = "metrics.tsv";
pub const ABLATION_FILE: &str = "ablation.tsv";
const LOG_TAIL_LINES: usize = 8;

/// Loads, filters and splits the data named by `cfg`.
pub fn prepare_bundle(cfg: &RunConfig) -> Result<DatasetBundle> {
    cfg.check_inputs()?;
    let interactions = load_interactions(cfg.interactions_path())?;
    let social = load_social(cfg.social_path())?;
    let users = interactions.num_users().max(social.num_users());
    let interactions = InteractionMatrix::new(users, interactions.num_items(), interactions.edges())?;
    let social = SocialGraph::new(users, social.edges())?;
    let user_features = match &cfg.user_features {
        Some(p) => Some(load_features(cfg.resolve(p), users)?),
        None => None,
    };
    let item_features = match &cfg.item_features {
        Some(p) => Some(load_features(cfg.resolve(p), interactions.num_items())?),
        None => None,
    };
    let filtered = preprocess_filter(&interactions, &social, cfg.filter_config())?;
    let mut bundle = split(&filtered.interactions, &cfg.split_config())?;
    bundle.social = filtered.social.clone();
    bundle.user_features = user_features.map(|t| filtered.remap_user_features(&t));
    bundle.item_features = item_features.map(|t| filtered.remap_item_features(&t));
    bundle.validate()?;
    Ok(bundle)
}

fn check_fingerprint(ck: &Checkpoint, bundle: &DatasetBundle, allow_mismatch: bool) -> Result<()> {
    let actual = bundle.fingerprint();
    if actual != ck.fingerprint && !allow_mismatch {
        return Err(CliError::new(
            Category::Data,
            format!(
                "dataset fingerprint mismatch: checkpoint {} vs data {} (pass --allow-mismatch to override)",
                hex::encode(ck.fingerprint),
                hex::encode(actual)
            ),
        ));
    }
    Ok(())
}

fn tail(text: &str, lines: usize) -> String {
    let all: Vec<&str> = text.lines().collect();
    let start = all.len().saturating_sub(lines);
    all[start..].iter().map(|l| format!("{l}\n")).collect()
}

pub struct TrainOutcome {
    pub written: Vec<PathBuf>,
    pub summary: String,
}

/// Filter, split, train, score the selected model on the test split and
/// write the checkpoint plus logs.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutcome> {
    let bundle = prepare_bundle(cfg)?;
    let hypers = cfg.hypers();
    let (params, log) = train(&bundle, &hypers, &cfg.train_config())?;
    let report = evaluate(&params, &hypers, &bundle, &cfg.eval_config())?;

    let mut log_text = log.to_text();
    for line in report.to_text().lines() {
        let _ = writeln!(log_text, "# test {line}");
    }
    let checkpoint = Checkpoint {
        hypers,
        fingerprint: bundle.fingerprint(),
        log_tail: tail(&log_text, LOG_TAIL_LINES),
        params,
    };
    let mut staged = Staged::default();
    staged.add(CHECKPOINT_FILE, checkpoint.to_bytes()?);
    staged.add(LOG_FILE, log_text);
    staged.add(TIMING_FILE, log.timing_text());
    let written = staged.commit(&cfg.output_path())?;

    let mut summary = format!(
        "epochs={} best_epoch={} fingerprint={}\n",
        log.records.len(),
        log.best_epoch,
        hex::encode(checkpoint.fingerprint)
    );
    summary.push_str(&report.to_table("socialgcn"));
    Ok(TrainOutcome { written, summary })
}

pub struct EvaluateArgs<'a> {
    pub checkpoint: &'a Path,
    pub allow_mismatch: bool,
    /// Defaults to the config's output directory.
    pub out_dir: Option<&'a Path>,
}

/// Evaluates a checkpoint on the test split; returns the metric table.
pub fn cmd_evaluate(cfg: &RunConfig, args: &EvaluateArgs<'_>) -> Result<String> {
    let ck = Checkpoint::load(args.checkpoint)?;
    let bundle = prepare_bundle(cfg)?;
    check_fingerprint(&ck, &bundle, args.allow_mismatch)?;
    let report = evaluate(&ck.params, &ck.hypers, &bundle, &cfg.eval_config())?;
    let mut text = report.to_text();
    let _ = writeln!(text, "fingerprint={}", hex::encode(bundle.fingerprint()));
    let _ = writeln!(text, "workers={}", rayon::current_num_threads());
    let table = report.to_table("socialgcn");
    let mut staged = Staged::default();
    staged.add(REPORT_FILE, text);
    staged.add(METRICS_FILE, table.clone());
    let dir = args.out_dir.map_or_else(|| cfg.output_path(), Path::to_path_buf);
    staged.commit(&dir)?;
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub items: Vec<(usize, f64)>,
    pub notice: Option<String>,
}

impl Prediction {
    pub fn to_text(&self) -> String {
        self.items.iter().map(|(i, s)| format!("{i}\t{s}\n")).collect()
    }
}

/// Top-`top_n` unseen items for `user`, best first.
pub fn cmd_predict(
    cfg: &RunConfig,
    checkpoint: &Path,
    user: usize,
    top_n: usize,
    allow_mismatch: bool,
) -> Result<Prediction> {
    let ck = Checkpoint::load(checkpoint)?;
    let bundle = prepare_bundle(cfg)?;
    check_fingerprint(&ck, &bundle, allow_mismatch)?;
    if user >= bundle.num_users() {
        return Err(CliError::new(
            Category::Data,
            format!("unknown user id {user} (valid: 0..{})", bundle.num_users()),
        ));
    }
    if top_n == 0 {
        return Ok(Prediction {
            items: Vec::new(),
            notice: None,
        });
    }
    let seen = bundle.train.user_items(user);
    let candidates: Vec<usize> = (0..bundle.num_items())
        .filter(|i| seen.binary_search(i).is_err())
        .collect();
    if candidates.is_empty() {
        return Ok(Prediction {
            items: Vec::new(),
            notice: Some(format!("user {user} has every item among its training positives")),
        });
    }
    let scored = score_all_items(&ck.params, &ck.hypers, &bundle, user, &candidates)?;
    let score_of: std::collections::HashMap<usize, f64> = scored.iter().copied().collect();
    let items = rank_candidates(&scored)
        .into_iter()
        .take(top_n)
        .map(|i| (i, score_of[&i]))
        .collect();
    Ok(Prediction { items, notice: None })
}

fn encode(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    write(&mut buf).expect("writing to memory");
    buf
}

/// Generates a synthetic dataset plus a ready-to-run config in `out_dir`.
pub fn cmd_synth(spec: &SyntheticSpec, out_dir: &Path) -> Result<String> {
    let raw = generate_raw(spec)?;
    let mut staged = Staged::default();
    staged.add("interactions.tsv", encode(|b| write_interactions(&raw.interactions, b)));
    staged.add("social.tsv", encode(|b| write_social(&raw.social, b)));
    staged.add("user_features.tsv", encode(|b| write_features(&raw.user_features, b)));
    staged.add("item_features.tsv", encode(|b| write_features(&raw.item_features, b)));
    let mut cfg = RunConfig::new("interactions.tsv".into(), "social.tsv".into(), "run".into());
    cfg.feature_mode = FeatureMode::WithFeatures;
    cfg.user_features = Some("user_features.tsv".into());
    cfg.item_features = Some("item_features.tsv".into());
    cfg.seed = spec.seed;
    staged.add("run.cfg", cfg.to_text());
    staged.commit(out_dir)?;

    let (m, n) = (raw.interactions.num_users(), raw.interactions.num_items());
    let mut out = String::new();
    let _ = writeln!(out, "users={m}");
    let _ = writeln!(out, "items={n}");
    let _ = writeln!(out, "ratings={}", raw.interactions.num_edges());
    let _ = writeln!(out, "links={}", raw.social.num_edges());
    let _ = writeln!(out, "rating_density={}", raw.interactions.density());
    let _ = writeln!(out, "link_density={}", raw.social.link_density());
    Ok(out)
}

/// Runs the configured ablation variants and writes the comparison table.
pub fn cmd_ablate(cfg: &RunConfig) -> Result<(AblationTable, String)> {
    let bundle = prepare_bundle(cfg)?;
    let table = run_ablation(
        &bundle,
        &cfg.hypers(),
        &cfg.train_config(),
        &cfg.eval_config(),
        &cfg.variants,
    )?;
    let text = table.to_table();
    let mut staged = Staged::default();
    staged.add(ABLATION_FILE, text.clone());
    staged.commit(&cfg.output_path())?;
    Ok((table, text))
}
