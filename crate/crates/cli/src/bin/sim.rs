//! `sim run` executes one scenario; `sim batch` runs every `*.json` in a
//! directory concurrently and writes `<name>.csv` and `<name>.metrics.json`
//! beside each config.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vtolctl::sim::{run, run_batch, Metrics, RunOutput, ScenarioConfig, SimError};

#[derive(Parser)]
#[command(name = "sim", about = "Closed-loop scenario runner")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and write its log.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// CSV log destination.
        #[arg(long)]
        out: PathBuf,
        /// Overrides `simulation.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Metrics destination; printed to stdout when absent.
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Run every scenario in a directory.
    Batch {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn write_metrics(m: &Metrics, path: Option<&Path>) -> Result<(), SimError> {
    let text = serde_json::to_string_pretty(m)? + "\n";
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run_one(config: &Path, out: &Path, seed: Option<u64>, metrics: Option<&Path>) -> Result<bool, SimError> {
    let mut cfg = ScenarioConfig::from_file(config)?;
    if let Some(s) = seed {
        cfg.simulation.seed = s;
    }
    let result = run(&cfg)?;
    result.write_csv(out)?;
    write_metrics(&result.metrics, metrics)?;
    Ok(result.metrics.status == "ok")
}

fn save(config: &Path, result: &RunOutput) -> Result<(), SimError> {
    result.write_csv(config.with_extension("csv"))?;
    write_metrics(&result.metrics, Some(&config.with_extension("metrics.json")))
}

fn batch(dir: &Path) -> Result<bool, SimError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && !p.to_string_lossy().ends_with(".metrics.json"))
        .collect();
    paths.sort();
    let mut configs = Vec::with_capacity(paths.len());
    for p in &paths {
        configs.push(ScenarioConfig::from_file(p).map_err(|e| SimError::Config(format!("{}: {e}", p.display())))?);
    }
    let mut all_ok = true;
    for (path, result) in paths.iter().zip(run_batch(&configs)) {
        match result.and_then(|r| save(path, &r).map(|_| r)) {
            Ok(r) => {
                println!("{}: {}", path.display(), r.metrics.status);
                all_ok &= r.metrics.status == "ok";
            }
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                all_ok = false;
            }
        }
    }
    Ok(all_ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.cmd {
        Cmd::Run { config, out, seed, metrics } => run_one(config, out, *seed, metrics.as_deref()),
        Cmd::Batch { dir } => batch(dir),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
