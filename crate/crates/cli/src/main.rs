//! `gpc`: synthetic data, the three training steps, evaluation, the
//! condition grid, single-image inference and CAM visualization.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gpc::training::Variant;

/// Error in how the tool was invoked or configured (exit code 1).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "gpc", version, about = "Gaze-zone estimation robust to eyeglasses")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `train.seed` and `synth.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (`out_dir`; for synth-data, `data.root`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Step-2 variant; also selects which generators later commands load.
    #[arg(long, global = true)]
    pub variant: Option<Variant>,
    /// Config override `key=value` with a dotted key; `--key=value` also works.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render a synthetic dataset with manifests and pupil ground truth.
    SynthData,
    /// Run one training step.
    Train {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        step: u8,
        /// Step 1 only: train on images with and without glasses.
        #[arg(long)]
        all_data: bool,
        /// Continue from the last epoch checkpoint when present.
        #[arg(long)]
        resume: bool,
        /// Stop after this many epochs (the schedule still uses the configured count).
        #[arg(long)]
        max_epochs: Option<usize>,
    },
    /// Evaluate pipelines on a split and write reports.
    Evaluate {
        /// classifier-only | all-data | removal | removal-ft | table
        #[arg(long, default_value = "table")]
        model: String,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Train one classifier per condition set and evaluate on every set.
    Grid,
    /// Classify eye images.
    Infer {
        #[arg(required = true)]
        images: Vec<PathBuf>,
        /// Run the glasses-removal generator before the classifier.
        #[arg(long)]
        remove_glasses: bool,
        /// Use the fine-tuned classifier of the selected variant.
        #[arg(long)]
        finetuned: bool,
        /// Directory for the glasses-removed inputs.
        #[arg(long)]
        save_intermediate: Option<PathBuf>,
        /// Also write the results as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Side-by-side CAM overlays and a gaze drift report.
    Visualize {
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
}

/// Rewrites `--a.b=v` into `--set a.b=v` so config keys can be passed directly.
fn expand_overrides(args: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut out = Vec::new();
    for a in args {
        match a.strip_prefix("--") {
            Some(rest) if rest.split_once('=').is_some_and(|(k, _)| k.contains('.')) => {
                out.push("--set".into());
                out.push(rest.to_string());
            }
            _ => out.push(a),
        }
    }
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();
    let cli = match Cli::try_parse_from(expand_overrides(std::env::args())) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match e.downcast_ref::<gpc::Error>() {
        Some(gpc::Error::Config(_) | gpc::Error::BadChannelRequest(_) | gpc::Error::InvalidSpec(_) | gpc::Error::ConfigMismatch(_)) => 1,
        _ => 2,
    }
}
