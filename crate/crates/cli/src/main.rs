//! Pipeline CLI.
//!
//! Subcommands: `run` (two-stage prediction over scene manifests), `eval`
//! (score stored predictions), `lift` (2D detections to 3D boxes) and
//! `render` (SVG figures). Exit codes: 0 success, 1 usage error, 2 data
//! error. Per-scene failures inside `run` never abort the whole run.

mod common;
mod eval;
mod lift;
mod render_cmd;
mod run;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

/// Errors carry the exit code they map to.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

pub type CliResult = Result<(), CliError>;

#[derive(Parser)]
#[command(name = "openemma", version, about = "End-to-end driving pipeline over vision-language models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct ScoringArgs {
    /// Prediction horizon in seconds (2 waypoints per second)
    #[arg(long, default_value_t = 5)]
    pub horizon: u32,
    /// L2 metric mode: displacement at the horizon index (point) or the
    /// average displacement up to it (ade)
    #[arg(long, default_value = "point")]
    pub l2_mode: openemma_core::evaluation::L2Mode,
}

#[derive(Subcommand)]
enum Command {
    /// Run the two-stage pipeline over every scene manifest in a directory
    Run {
        /// Directory of scene manifest *.json files
        #[arg(long)]
        scenes: PathBuf,
        /// Output directory (predictions.jsonl, report.json, report.csv)
        #[arg(long)]
        out: PathBuf,
        /// Model name sent to the endpoint (part of request fingerprints)
        #[arg(long, default_value = "gpt-4o")]
        model: String,
        /// Chat endpoint base URL (env OPENEMMA_BASE_URL)
        #[arg(long)]
        base_url: Option<String>,
        /// Camera frames attached to the stage-1 prompt (1-10, newest last)
        #[arg(long, default_value_t = 1)]
        frames: usize,
        /// Answer requests from this recorded store instead of the network
        #[arg(long)]
        replay: Option<PathBuf>,
        /// Record every (fingerprint, response) pair into this store
        #[arg(long)]
        record: Option<PathBuf>,
        /// Concurrent scene workers
        #[arg(long, default_value_t = 4)]
        workers: usize,
        #[command(flatten)]
        scoring: ScoringArgs,
    },
    /// Score a predictions file against scene manifests
    Eval {
        /// Predictions JSONL produced by `run`
        #[arg(long)]
        predictions: PathBuf,
        /// Directory of scene manifest *.json files
        #[arg(long)]
        scenes: PathBuf,
        /// Output directory (report.json, report.csv)
        #[arg(long)]
        out: PathBuf,
        /// Model name written into the report
        #[arg(long, default_value = "gpt-4o")]
        model: String,
        #[command(flatten)]
        scoring: ScoringArgs,
    },
    /// Lift 2D detections into 3D boxes via the tight-enclosure constraint
    Lift {
        /// Detections JSONL ({"frame", "class", "box2d", "dims_lwh", "alpha"})
        #[arg(long)]
        detections: PathBuf,
        /// Intrinsics JSON ({"fx", "fy", "cx", "cy"})
        #[arg(long)]
        intrinsics: PathBuf,
        /// Output JSONL of 7-parameter boxes
        #[arg(long)]
        out: PathBuf,
    },
    /// Render SVG figures for stored predictions
    Render {
        /// Predictions JSONL produced by `run`
        #[arg(long)]
        predictions: PathBuf,
        /// Directory of scene manifest *.json files
        #[arg(long)]
        scenes: PathBuf,
        /// Output directory for *.svg files
        #[arg(long)]
        out: PathBuf,
        /// Prediction horizon in seconds (must match the run)
        #[arg(long, default_value_t = 5)]
        horizon: u32,
    },
}

fn main() {
    std::process::exit(run_cli());
}

fn run_cli() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Run {
            scenes,
            out,
            model,
            base_url,
            frames,
            replay,
            record,
            workers,
            scoring,
        } => run::execute(run::RunOptions {
            scenes,
            out,
            model,
            base_url,
            frames,
            replay,
            record,
            workers,
            scoring,
        }),
        Command::Eval {
            predictions,
            scenes,
            out,
            model,
            scoring,
        } => eval::execute(&predictions, &scenes, &out, &model, &scoring),
        Command::Lift {
            detections,
            intrinsics,
            out,
        } => lift::execute(&detections, &intrinsics, &out),
        Command::Render {
            predictions,
            scenes,
            out,
            horizon,
        } => render_cmd::execute(&predictions, &scenes, &out, horizon),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}
