use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use socialgcn::{FeatureMode, SyntheticSpec};
use socialgcn_cli::config::parse_list;
use socialgcn_cli::{
    cmd_ablate, cmd_evaluate, cmd_predict, cmd_synth, cmd_train, CliError, EvaluateArgs, Overrides, Result,
    RunConfig,
};

#[derive(Parser)]
#[command(name = "socialgcn", version, about = "Social recommendation with graph-convolutional diffusion")]
struct Cli {
    /// Worker threads for training and evaluation (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (flat key=value file).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Diffusion depth K.
    #[arg(long)]
    k: Option<usize>,
    /// Embedding width D (also sets the latent width).
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, value_parser = ["features", "featureless"])]
    mode: Option<String>,
    /// Comma-separated cutoffs, e.g. 5,10,15.
    #[arg(long)]
    n: Option<String>,
    /// Sampled negatives per evaluated user.
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    repetitions: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        let overrides = Overrides {
            seed: self.seed,
            depth: self.k,
            dim: self.dim,
            mode: self.mode.as_deref().map(str::parse::<FeatureMode>).transpose()?,
            cutoffs: self.n.as_deref().map(|s| parse_list("--n", s)).transpose()?,
            negatives: self.negatives,
            repetitions: self.repetitions,
        };
        overrides.apply(&mut cfg)?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write checkpoint.bin and train_log.tsv.
    Train(Common),
    /// Score a checkpoint on the test split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Evaluate even if the data differs from what the model was trained on.
        #[arg(long)]
        allow_mismatch: bool,
        /// Directory for report.txt and metrics.tsv (default: output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the top-N unseen items for one user.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        user: usize,
        #[arg(long, default_value_t = 10)]
        top_n: usize,
        #[arg(long)]
        allow_mismatch: bool,
    },
    /// Generate a synthetic dataset with a matching run.cfg.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        items: Option<usize>,
        #[arg(long)]
        homophily: Option<f64>,
        #[arg(long)]
        density: Option<f64>,
        #[arg(long)]
        dim_user: Option<usize>,
        #[arg(long)]
        dim_item: Option<usize>,
        #[arg(long)]
        clusters: Option<usize>,
        #[arg(long)]
        links: Option<usize>,
    },
    /// Train and compare the simplified variants listed in the config.
    Ablate(Common),
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::config("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("cannot size worker pool: {e}")))?;
    }
    match cli.command {
        Command::Train(common) => {
            let out = cmd_train(&common.load()?)?;
            print!("{}", out.summary);
            for p in out.written {
                eprintln!("wrote {}", p.display());
            }
        }
        Command::Evaluate {
            common,
            checkpoint,
            allow_mismatch,
            out,
        } => {
            let args = EvaluateArgs {
                checkpoint: &checkpoint,
                allow_mismatch,
                out_dir: out.as_deref(),
            };
            print!("{}", cmd_evaluate(&common.load()?, &args)?);
        }
        Command::Predict {
            common,
            checkpoint,
            user,
            top_n,
            allow_mismatch,
        } => {
            let prediction = cmd_predict(&common.load()?, &checkpoint, user, top_n, allow_mismatch)?;
            if let Some(notice) = &prediction.notice {
                eprintln!("{notice}");
            }
            print!("{}", prediction.to_text());
        }
        Command::Synth {
            out,
            seed,
            users,
            items,
            homophily,
            density,
            dim_user,
            dim_item,
            clusters,
            links,
        } => {
            let d = SyntheticSpec::default();
            let spec = SyntheticSpec {
                users: users.unwrap_or(d.users),
                items: items.unwrap_or(d.items),
                dim_user: dim_user.unwrap_or(d.dim_user),
                dim_item: dim_item.unwrap_or(d.dim_item),
                homophily: homophily.unwrap_or(d.homophily),
                density: density.unwrap_or(d.density),
                num_clusters: clusters.unwrap_or(d.num_clusters),
                links_per_user: links.unwrap_or(d.links_per_user),
                seed,
            };
            print!("{}", cmd_synth(&spec, &out)?);
        }
        Command::Ablate(common) => {
            let (_, text) = cmd_ablate(&common.load()?)?;
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
