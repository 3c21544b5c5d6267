use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod plots;

/// Train and evaluate machine-generated text detectors with longer-text
/// supervision.
#[derive(Parser, Debug)]
#[command(name = "e2h", version)]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Run configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Seed, taking precedence over the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, env = "E2H_OUT", default_value = "runs", global = true)]
    out: PathBuf,

    /// FPR targets for TPR@FPR; repeatable.
    #[arg(long = "fpr", default_values_t = [0.01], global = true)]
    fpr: Vec<f64>,

    /// Also write ROC curves and score histograms as SVG.
    #[arg(long, global = true)]
    plots: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Jointly train a detector and its supervisor.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        /// Partition tag for validation metrics.
        #[arg(long, default_value = "source_model")]
        by: commands::PartitionKey,
    },
    /// Score a corpus with a trained detector.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "source_model")]
        by: commands::PartitionKey,
        /// Score every sample instead of the held-out test split.
        #[arg(long)]
        all: bool,
    },
    /// Replace sentences of machine texts with human sentences.
    Mix {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        fraction: f64,
    },
    /// Generate an i.i.d. token corpus.
    Synth {
        /// Human token distribution, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        human: Vec<f64>,
        /// Machine token distribution, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        machine: Vec<f64>,
        /// Tokens per sample.
        #[arg(long)]
        length: usize,
        /// Samples per class.
        #[arg(long)]
        count: usize,
        /// Human share of each machine sample.
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
    },
    /// Check the longer-text detectability bounds by exact enumeration.
    VerifyTheorems {
        /// JSON list of cells; defaults to the built-in grid.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Fail when a cell exceeds the enumeration budget.
        #[arg(long)]
        strict: bool,
    },
    /// Distill a fresh detector from a trained teacher.
    Kd {
        #[arg(long)]
        teacher: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "source_model")]
        by: commands::PartitionKey,
    },
    /// Tabulate one or more metrics files.
    Report {
        #[arg(long = "metrics", required = true)]
        metrics: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { corpus, by } => commands::train(&cli.common, &corpus, by),
        Command::Eval {
            checkpoint,
            corpus,
            by,
            all,
        } => commands::eval(&cli.common, &checkpoint, &corpus, by, all),
        Command::Mix { corpus, fraction } => commands::mix(&cli.common, &corpus, fraction),
        Command::Synth {
            human,
            machine,
            length,
            count,
            alpha,
        } => commands::synth(&cli.common, human, machine, length, count, alpha),
        Command::VerifyTheorems { grid, strict } => commands::verify_theorems(&cli.common, grid.as_deref(), strict),
        Command::Kd { teacher, corpus, by } => commands::kd(&cli.common, &teacher, &corpus, by),
        Command::Report { metrics } => commands::report(&cli.common, &metrics),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
