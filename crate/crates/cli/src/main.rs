//! `atrisk`: an end-to-end pipeline for identifying at-risk students from
//! LMS activity exports.
//!
//! Stages: `ingest` (parse/join/filter or synthesize a cohort), `featurize`
//! (selection, per-section normalization, VIF, labeling, oversampling,
//! split), `train` (seven classifier families with cross-validated grid
//! search), `explain` (exact Shapley attributions), `cluster` (k-means with
//! elbow/silhouette selection), `stats` (one-way ANOVA + Tukey HSD across
//! clusters), and `report` (everything, plus a digest manifest).

mod config;
mod manifest;
mod pipeline;

use clap::{Parser, Subcommand};
use config::PipelineConfig;
use pipeline::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "atrisk",
    version,
    about = "At-risk student analytics over LMS activity exports"
)]
struct Cli {
    /// Pipeline configuration file (JSON); flags override its fields.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory for all artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed; all randomness derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic cohort as raw export files plus ground truth.
    Synth,
    /// Parse, join, and filter the cohort (or synthesize it in place).
    Ingest {
        /// Learner Usage Report CSV.
        #[arg(long, value_name = "FILE")]
        lur: Option<PathBuf>,
        /// Grades Report CSV.
        #[arg(long, value_name = "FILE")]
        gr: Option<PathBuf>,
    },
    /// Feature selection, normalization, VIF, labeling, oversampling, split.
    Featurize {
        /// Drop features whose missing fraction is at or above this value.
        #[arg(long, value_name = "FRACTION")]
        max_missing: Option<f64>,
        /// At-risk grade threshold in percent.
        #[arg(long, value_name = "PERCENT")]
        threshold: Option<f64>,
        #[arg(long, value_name = "FRACTION")]
        train_fraction: Option<f64>,
        /// Oversample only the training side, after the split.
        #[arg(long)]
        oversample_after_split: bool,
    },
    /// Grid-search, fit, and evaluate the classifier families.
    Train {
        /// Family to train (repeatable); default is all seven.
        #[arg(long)]
        family: Vec<String>,
        /// Cross-validation folds.
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Exact Shapley attributions for the trained models.
    Explain {
        #[arg(long)]
        family: Vec<String>,
        /// Background set size.
        #[arg(long)]
        background: Option<usize>,
        /// Number of test instances to explain.
        #[arg(long)]
        instances: Option<usize>,
    },
    /// K-means engagement clustering with elbow/silhouette selection.
    Cluster {
        /// Fixed cluster count, overriding the elbow choice.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        k_min: Option<usize>,
        #[arg(long)]
        k_max: Option<usize>,
    },
    /// ANOVA + Tukey HSD of features and grades across clusters.
    Stats {
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Run every stage in order and write the digest manifest.
    Report,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match &cli.command {
        Command::Synth | Command::Report => {}
        Command::Ingest { lur, gr } => {
            if let Some(lur) = lur {
                config.lur = Some(lur.clone());
                config.synthetic = None;
            }
            if let Some(gr) = gr {
                config.gr = Some(gr.clone());
                config.synthetic = None;
            }
        }
        Command::Featurize {
            max_missing,
            threshold,
            train_fraction,
            oversample_after_split,
        } => {
            if let Some(v) = max_missing {
                config.max_missing_fraction = *v;
            }
            if let Some(v) = threshold {
                config.label_policy.threshold = *v;
            }
            if let Some(v) = train_fraction {
                config.train_fraction = *v;
            }
            if *oversample_after_split {
                config.oversample_before_split = false;
            }
        }
        Command::Train { family, folds } => {
            if !family.is_empty() {
                config.families = family.clone();
            }
            if let Some(v) = folds {
                config.cv_folds = *v;
            }
        }
        Command::Explain {
            family,
            background,
            instances,
        } => {
            if !family.is_empty() {
                config.families = family.clone();
            }
            if let Some(v) = background {
                config.shap_background = *v;
            }
            if let Some(v) = instances {
                config.shap_instances = *v;
            }
        }
        Command::Cluster { k, k_min, k_max } => {
            if let Some(v) = k {
                config.cluster_k = Some(*v);
            }
            if let Some(v) = k_min {
                config.k_min = *v;
            }
            if let Some(v) = k_max {
                config.k_max = *v;
            }
        }
        Command::Stats { alpha } => {
            if let Some(v) = alpha {
                config.alpha = *v;
            }
        }
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = load_config(cli)?;
    match &cli.command {
        Command::Synth => pipeline::run_synth(&config),
        Command::Ingest { .. } => pipeline::run_ingest(&config),
        Command::Featurize { .. } => pipeline::run_featurize(&config),
        Command::Train { .. } => pipeline::run_train(&config),
        Command::Explain { .. } => pipeline::run_explain(&config),
        Command::Cluster { .. } => pipeline::run_cluster(&config),
        Command::Stats { .. } => pipeline::run_stats(&config),
        Command::Report => pipeline::run_report(&config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successful exits; anything else
            // is a usage error (exit 1).
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
