//! Batch front-end for the walkguard toolkit.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod samples;
pub mod scoring;

pub use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "walkguard", version)]
#[command(
    about = "Score walking-assistance text, compute group advantages, and simulate danger triggers"
)]
pub struct Cli {
    /// Run configuration (`key = value` lines). Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override the configured random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Override the configured trigger rule.
    #[arg(long, global = true, value_parser = clap::builder::PossibleValuesParser::new(walkguard_core::TriggerRule::NAMES))]
    pub policy: Option<String>,

    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    pub print_config: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Args, Debug, Clone)]
pub struct ScoringArgs {
    /// Samples file (JSON Lines).
    #[arg(long)]
    pub samples: PathBuf,

    /// Embedding table: a `count dim` header, then `token v1 .. vdim` lines.
    #[arg(long)]
    pub embeddings: PathBuf,

    /// Per-candidate log2-probabilities (JSON Lines `{"id", "log2_probs"}`).
    /// Without it, a bigram model is fitted on the sample references.
    #[arg(long)]
    pub logprobs: Option<PathBuf>,

    /// Stopword list used for keyword extraction; a built-in list otherwise.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,

    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Score every candidate of every sample with the four rewards.
    Score(ScoringArgs),

    /// Compute group-relative advantages from a score report.
    Advantages {
        /// `scores.csv` written by `score`.
        #[arg(long)]
        scores: PathBuf,

        /// Require every group to contain exactly this many candidates.
        #[arg(long)]
        group_size: Option<usize>,

        /// Telemetry CSV to append this step to; `<out>/telemetry.csv` by default.
        #[arg(long)]
        telemetry: Option<PathBuf>,

        #[arg(long)]
        out: PathBuf,
    },

    /// Replay a frame stream through the trigger policy.
    TriggerSim {
        /// Frame stream (JSON Lines).
        #[arg(long)]
        stream: PathBuf,

        /// Classifier file written by `train-ead`, applied to frames with features.
        #[arg(long)]
        classifier: Option<PathBuf>,

        #[arg(long)]
        out: PathBuf,
    },

    /// Train the danger classifier on a labeled frame stream.
    TrainEad {
        /// Frame stream where every frame has `features` and `danger_true`.
        #[arg(long)]
        stream: PathBuf,

        #[arg(long)]
        out: PathBuf,
    },

    /// ROUGE, keyword density and rewards for one output per sample.
    Evaluate(ScoringArgs),
}

/// Result of a command that ran to completion. Records that failed
/// individually are counted here; fatal problems are returned as errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Outcome {
    pub record_errors: usize,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        if self.record_errors == 0 {
            0
        } else {
            1
        }
    }
}

pub fn effective_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
    }
    if let Some(name) = &cli.policy {
        cfg.set_policy(name)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let cfg = effective_config(&cli)?;
    if cli.print_config {
        print!("{}", cfg.to_text());
        return Ok(Outcome::default());
    }
    let Some(command) = cli.command else {
        anyhow::bail!("no command given; see --help");
    };
    match command {
        Command::Score(args) => commands::score(&args, &cfg),
        Command::Advantages {
            scores,
            group_size,
            telemetry,
            out,
        } => commands::advantages(&scores, group_size, telemetry.as_deref(), &out, &cfg),
        Command::TriggerSim {
            stream,
            classifier,
            out,
        } => commands::trigger_sim(&stream, classifier.as_deref(), &out, &cfg),
        Command::TrainEad { stream, out } => commands::train_ead(&stream, &out, &cfg),
        Command::Evaluate(args) => commands::evaluate(&args, &cfg),
    }
}
