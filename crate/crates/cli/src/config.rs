//! Flat `key=value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key is
//! optional except the data paths and `output_dir`; relative paths resolve
//! against the directory holding the config file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use socialgcn::data::FilterConfig;
use socialgcn::eval::{EvalSplit, Variant};
use socialgcn::train::PairLoss;
use socialgcn::{Aggregator, EvalConfig, FeatureMode, HyperParams, SplitConfig, TrainConfig};

use crate::error::{missing, CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Directory relative paths are resolved against. Not serialized.
    pub base_dir: PathBuf,

    pub interactions: PathBuf,
    pub social: PathBuf,
    pub user_features: Option<PathBuf>,
    pub item_features: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,

    pub embed_dim: usize,
    pub latent_dim: usize,
    pub depth: usize,
    pub feature_mode: FeatureMode,
    pub aggregator: Aggregator,
    pub use_bias: bool,
    pub user_free_latent: bool,

    pub learning_rate: f64,
    pub batch_size: usize,
    pub negatives_per_positive: usize,
    pub lambda_reg: f64,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub loss: PairLoss,
    pub validation_negatives: usize,

    pub cutoffs: Vec<usize>,
    pub num_negatives: usize,
    pub repetitions: usize,

    pub test_fraction: f64,
    pub validation_fraction: f64,
    pub min_ratings: usize,
    pub min_links: usize,
    pub min_item_degree: usize,

    pub variants: Vec<Variant>,
}

impl RunConfig {
    /// Defaults for everything but the paths.
    pub fn new(interactions: PathBuf, social: PathBuf, output_dir: PathBuf) -> Self {
        let h = HyperParams::default();
        let t = TrainConfig::default();
        let e = EvalConfig::default();
        let s = SplitConfig::default();
        let f = FilterConfig::default();
        Self {
            base_dir: PathBuf::from("."),
            interactions,
            social,
            user_features: None,
            item_features: None,
            output_dir,
            seed: 0,
            embed_dim: h.embed_dim,
            latent_dim: h.latent_dim,
            depth: h.depth,
            feature_mode: h.feature_mode,
            aggregator: h.aggregator,
            use_bias: h.use_bias,
            user_free_latent: h.user_free_latent,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            negatives_per_positive: t.negatives_per_positive,
            lambda_reg: t.lambda_reg,
            max_epochs: t.max_epochs,
            early_stop_patience: t.early_stop_patience,
            loss: t.loss,
            validation_negatives: t.validation_negatives,
            cutoffs: e.cutoffs,
            num_negatives: e.num_negatives,
            repetitions: e.repetitions,
            test_fraction: s.test_fraction,
            validation_fraction: s.validation_fraction_of_train,
            min_ratings: f.min_ratings,
            min_links: f.min_links,
            min_item_degree: f.min_item_degree,
            variants: Variant::ALL.to_vec(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base).map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message)))
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("line {}: expected key=value", n + 1)))?;
            let k = k.trim();
            if map.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(CliError::config(format!("line {}: duplicate key `{k}`", n + 1)));
            }
        }
        let mut take = |key: &str| map.remove(key);
        let required = |v: Option<String>, key: &str| {
            v.ok_or_else(|| CliError::config(format!("missing required key `{key}`")))
        };

        let mut cfg = RunConfig::new(
            required(take("interactions"), "interactions")?.into(),
            required(take("social"), "social")?.into(),
            required(take("output_dir"), "output_dir")?.into(),
        );
        cfg.base_dir = base_dir.to_path_buf();
        cfg.user_features = take("user_features").filter(|s| !s.is_empty()).map(PathBuf::from);
        cfg.item_features = take("item_features").filter(|s| !s.is_empty()).map(PathBuf::from);

        macro_rules! field {
            ($($name:ident),* $(,)?) => {
                $(if let Some(v) = take(stringify!($name)) {
                    cfg.$name = parse_value(stringify!($name), &v)?;
                })*
            };
        }
        field!(
            seed, embed_dim, latent_dim, depth, feature_mode, aggregator, use_bias, user_free_latent,
            learning_rate, batch_size, negatives_per_positive, lambda_reg, max_epochs,
            early_stop_patience, loss, validation_negatives, num_negatives, repetitions,
            test_fraction, validation_fraction, min_ratings, min_links, min_item_degree,
        );
        if let Some(v) = take("cutoffs") {
            cfg.cutoffs = parse_list("cutoffs", &v)?;
        }
        if let Some(v) = take("variants") {
            cfg.variants = parse_list("variants", &v)?;
        }
        if let Some(key) = map.keys().next() {
            return Err(CliError::config(format!("unknown key `{key}`")));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical text form; `parse(to_text())` reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("interactions", &self.interactions.display());
        kv("social", &self.social.display());
        let opt = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        kv("user_features", &opt(&self.user_features));
        kv("item_features", &opt(&self.item_features));
        kv("output_dir", &self.output_dir.display());
        kv("seed", &self.seed);
        kv("embed_dim", &self.embed_dim);
        kv("latent_dim", &self.latent_dim);
        kv("depth", &self.depth);
        kv("feature_mode", &self.feature_mode);
        kv("aggregator", &self.aggregator);
        kv("use_bias", &self.use_bias);
        kv("user_free_latent", &self.user_free_latent);
        kv("learning_rate", &self.learning_rate);
        kv("batch_size", &self.batch_size);
        kv("negatives_per_positive", &self.negatives_per_positive);
        kv("lambda_reg", &self.lambda_reg);
        kv("max_epochs", &self.max_epochs);
        kv("early_stop_patience", &self.early_stop_patience);
        kv("loss", &self.loss);
        kv("validation_negatives", &self.validation_negatives);
        kv("cutoffs", &join(&self.cutoffs));
        kv("num_negatives", &self.num_negatives);
        kv("repetitions", &self.repetitions);
        kv("test_fraction", &self.test_fraction);
        kv("validation_fraction", &self.validation_fraction);
        kv("min_ratings", &self.min_ratings);
        kv("min_links", &self.min_links);
        kv("min_item_degree", &self.min_item_degree);
        kv("variants", &join(&self.variants));
        out
    }

    pub fn validate(&self) -> Result<()> {
        let featured = self.feature_mode == FeatureMode::WithFeatures;
        match (featured, &self.user_features, &self.item_features) {
            (true, Some(_), Some(_)) | (false, None, None) => {}
            (true, _, _) => {
                return Err(CliError::config(
                    "feature_mode=features needs both user_features and item_features",
                ))
            }
            (false, _, _) => {
                return Err(CliError::config("feature paths are only allowed with feature_mode=features"))
            }
        }
        if self.cutoffs.is_empty() || self.cutoffs.contains(&0) {
            return Err(CliError::config("cutoffs must be a non-empty list of positive integers"));
        }
        self.hypers().validate()?;
        self.train_config().validate()?;
        self.split_config().validate()?;
        Ok(())
    }

    /// Fails with a config error when an input file is missing.
    pub fn check_inputs(&self) -> Result<()> {
        let mut inputs = vec![(self.interactions_path(), "interactions"), (self.social_path(), "social")];
        if let Some(p) = &self.user_features {
            inputs.push((self.resolve(p), "user_features"));
        }
        if let Some(p) = &self.item_features {
            inputs.push((self.resolve(p), "item_features"));
        }
        for (path, what) in inputs {
            if !path.is_file() {
                return Err(missing(&path, what));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn interactions_path(&self) -> PathBuf {
        self.resolve(&self.interactions)
    }

    pub fn social_path(&self) -> PathBuf {
        self.resolve(&self.social)
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn hypers(&self) -> HyperParams {
        HyperParams {
            embed_dim: self.embed_dim,
            latent_dim: self.latent_dim,
            depth: self.depth,
            feature_mode: self.feature_mode,
            aggregator: self.aggregator,
            use_bias: self.use_bias,
            user_free_latent: self.user_free_latent,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            negatives_per_positive: self.negatives_per_positive,
            lambda_reg: self.lambda_reg,
            max_epochs: self.max_epochs,
            early_stop_patience: self.early_stop_patience,
            seed: self.seed,
            loss: self.loss,
            validation_negatives: self.validation_negatives,
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            cutoffs: self.cutoffs.clone(),
            num_negatives: self.num_negatives,
            repetitions: self.repetitions,
            seed: self.seed,
            split: EvalSplit::Test,
        }
    }

    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            test_fraction: self.test_fraction,
            validation_fraction_of_train: self.validation_fraction,
            seed: self.seed,
        }
    }

    pub fn filter_config(&self) -> FilterConfig {
        FilterConfig {
            min_ratings: self.min_ratings,
            min_links: self.min_links,
            min_item_degree: self.min_item_degree,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub depth: Option<usize>,
    /// Sets both the embedding and the latent width.
    pub dim: Option<usize>,
    pub mode: Option<FeatureMode>,
    pub cutoffs: Option<Vec<usize>>,
    pub negatives: Option<usize>,
    pub repetitions: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.depth {
            cfg.depth = v;
        }
        if let Some(v) = self.dim {
            cfg.embed_dim = v;
            cfg.latent_dim = v;
        }
        if let Some(v) = self.mode {
            cfg.feature_mode = v;
            if v == FeatureMode::Featureless {
                cfg.user_features = None;
                cfg.item_features = None;
                cfg.latent_dim = cfg.embed_dim;
            }
        }
        if let Some(v) = &self.cutoffs {
            cfg.cutoffs = v.clone();
        }
        if let Some(v) = self.negatives {
            cfg.num_negatives = v;
        }
        if let Some(v) = self.repetitions {
            cfg.repetitions = v;
        }
        cfg.validate()
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::config(format!("`{key}`: cannot parse {value:?}: {e}")))
}

/// Comma-separated list.
pub fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "interactions=r.tsv\nsocial=s.tsv\nfeature_mode=featureless\nembed_dim=16\nlatent_dim=16\noutput_dir=out\n";

    #[test]
    fn round_trip_is_exact() {
        let mut cfg = RunConfig::parse(MINIMAL, Path::new("/data")).unwrap();
        cfg.learning_rate = 0.1 + 0.2;
        cfg.lambda_reg = 1e-4;
        cfg.cutoffs = vec![5, 10, 15];
        cfg.variants = vec![Variant::Full, Variant::NoUserLatent];
        let text = cfg.to_text();
        let back = RunConfig::parse(&text, Path::new("/data")).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn features_mode_needs_feature_paths() {
        let text = "interactions=r\nsocial=s\noutput_dir=o\n";
        let err = RunConfig::parse(text, Path::new(".")).unwrap_err();
        assert!(err.message.contains("user_features"), "{err}");
        let ok = format!("{text}user_features=u\nitem_features=i\n");
        assert!(RunConfig::parse(&ok, Path::new(".")).is_ok());
        let stray = format!("{MINIMAL}user_features=u\n");
        assert!(RunConfig::parse(&stray, Path::new(".")).is_err());
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        for bad in [
            format!("{MINIMAL}colour=blue\n"),
            format!("{MINIMAL}seed=1\nseed=2\n"),
            format!("{MINIMAL}just words\n"),
            format!("{MINIMAL}depth=two\n"),
            format!("{MINIMAL}variants=full,k9\n"),
            "social=s\noutput_dir=o\n".to_string(),
        ] {
            let err = RunConfig::parse(&bad, Path::new(".")).unwrap_err();
            assert_eq!(err.category, crate::error::Category::Config, "{bad}");
        }
    }

    #[test]
    fn relative_paths_follow_config_dir() {
        let cfg = RunConfig::parse(MINIMAL, Path::new("/data/run")).unwrap();
        assert_eq!(cfg.interactions_path(), PathBuf::from("/data/run/r.tsv"));
        let abs = MINIMAL.replace("r.tsv", "/abs/r.tsv");
        let cfg = RunConfig::parse(&abs, Path::new("/data/run")).unwrap();
        assert_eq!(cfg.interactions_path(), PathBuf::from("/abs/r.tsv"));
    }

    #[test]
    fn overrides_apply_and_revalidate() {
        let mut cfg = RunConfig::parse(MINIMAL, Path::new(".")).unwrap();
        Overrides {
            seed: Some(7),
            depth: Some(1),
            dim: Some(8),
            cutoffs: Some(vec![5, 10]),
            ..Default::default()
        }
        .apply(&mut cfg)
        .unwrap();
        assert_eq!((cfg.seed, cfg.depth, cfg.embed_dim, cfg.latent_dim), (7, 1, 8, 8));
        let bad = Overrides {
            mode: Some(FeatureMode::WithFeatures),
            ..Default::default()
        };
        assert!(bad.apply(&mut cfg).is_err());
    }
}
