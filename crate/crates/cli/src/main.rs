//! `crkernel`: runs the exact identity suite and the numeric probes from a
//! run file and writes CSV tables.
//!
//! Exit status: 0 when every check passes, 1 on a failed check, 2 on a
//! configuration error, 3 on an internal error.

mod commands;
mod config;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use config::{load_config, Command};

#[derive(Parser, Debug)]
#[command(name = "crkernel", version, about = "Kernel identity checks and Monte Carlo probes for model CR manifolds")]
struct Args {
    /// Run file with [run], [probe], [tolerance] and optionally [model].
    #[arg(long)]
    config: PathBuf,
    /// verify, scaling, holder, solve or report; overrides [run] command.
    #[arg(long)]
    command: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo samples per estimate.
    #[arg(long)]
    samples: Option<usize>,
    /// Output directory. Falls back to [run] out, then $CRKERNEL_OUT, then
    /// ./crkernel-out.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Treat unknown sections and keys as errors instead of warnings.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Internal(String),
}

/// A CSV table with a header row.
pub struct Table {
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { rows: vec![header.iter().map(|s| s.to_string()).collect()] }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert!(row.iter().all(|c| !c.contains([',', '"', '\n'])));
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text: String = self.rows.iter().map(|r| r.join(",") + "\n").collect();
        std::fs::write(path, text).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
    }
}

fn run(args: &Args) -> Result<bool, CliError> {
    let (mut cfg, warnings) = load_config(&args.config, args.strict).map_err(|e| CliError::Config(e.to_string()))?;
    for w in warnings {
        eprintln!("warning: {}: {w}", args.config.display());
    }
    let command = match &args.command {
        Some(c) => c.parse::<Command>().map_err(CliError::Config)?,
        None => cfg.command.ok_or_else(|| CliError::Config("no command given (--command or [run] command)".into()))?,
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    match args.samples {
        Some(0) => return Err(CliError::Config("--samples must be positive".into())),
        Some(n) => cfg.samples = n,
        None => {}
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .or_else(|| std::env::var_os("CRKERNEL_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("crkernel-out"));
    println!("{}", commands::header(&cfg, command));
    let ok = commands::run(&cfg, command, &out)?;
    println!("{command}: {} (outputs in {})", if ok { "pass" } else { "fail" }, out.display());
    Ok(ok)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(CliError::Internal(e)) => {
            eprintln!("internal error: {e}");
            ExitCode::from(3)
        }
    }
}
