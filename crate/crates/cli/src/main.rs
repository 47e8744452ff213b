//! `noisylp` command-line front end.
//!
//! ```text
//! noisylp estimate --config run.json [--diagnostics] [--out result.json]
//! noisylp infer    --config run.json [--seed 7]
//! noisylp simulate --config scenario.json [--out report.csv] [--threads 8]
//! noisylp aicm     --config bounds.json
//! ```
//!
//! Exit codes: 0 on success (infeasible or unbounded programs are reported
//! in the output), 1 on a computational fault, 2 on invalid input.

mod canonical;
mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use commands::Output;
use config::read_json;
use noisylp::Error;

#[derive(Parser)]
#[command(name = "noisylp", version, about = "Estimation and inference for LP values with estimated parameters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Seed for every random stream; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parallel replications.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the LP value with the selected estimators.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Add δ-condition, condition-number and penalty-adequacy diagnostics.
        #[arg(long)]
        diagnostics: bool,
    },
    /// Split-sample confidence bound for the LP value.
    Infer {
        #[command(flatten)]
        common: Common,
    },
    /// Run a simulation study and write its CSV report.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Raise replications to full scale (10⁴ for consistency, 10³ for inference).
        #[arg(long)]
        full_scale: bool,
    },
    /// Bounds and confidence intervals from affine conditional-moment assumptions.
    Aicm {
        #[command(flatten)]
        common: Common,
    },
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn run(cli: Cli) -> noisylp::Result<(Output, Option<PathBuf>)> {
    let common = match &cli.command {
        Command::Estimate { common, .. }
        | Command::Infer { common }
        | Command::Simulate { common, .. }
        | Command::Aicm { common } => common,
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Error::InvalidArgument("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    let base = base_dir(&common.config);
    let output = match &cli.command {
        Command::Estimate { diagnostics, .. } => {
            commands::estimate(&read_json(&common.config)?, &base, *diagnostics, common.seed)?
        }
        Command::Infer { .. } => commands::infer(&read_json(&common.config)?, &base, common.seed)?,
        Command::Simulate { full_scale, .. } => {
            commands::simulate(&read_json(&common.config)?, common.seed, *full_scale)?
        }
        Command::Aicm { .. } => commands::aicm(&read_json(&common.config)?, &base, common.seed)?,
    };
    Ok((output, common.out.clone()))
}

fn emit(text: &str, out: Option<&Path>) -> noisylp::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(cli).and_then(|(output, out)| {
        let text = match output {
            Output::Json(v) => canonical::to_canonical(&v).map_err(|e| Error::Numerical(e.to_string()))?,
            Output::Csv(s) => s,
        };
        emit(&text, out.as_deref())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = json!({"error": {"code": e.code(), "message": e.to_string()}});
            print!("{}", canonical::to_canonical(&body).expect("error object serializes"));
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
