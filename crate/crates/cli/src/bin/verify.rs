//! `verify prop1`: kinematic Monte-Carlo of the attitude law; exit code 1
//! when any trial fails.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vtolctl::stability::prop1_montecarlo;

#[derive(Parser)]
#[command(name = "verify", about = "Numerical stability checks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Random initial attitudes in the moving-air and still-air regimes.
    Prop1 {
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON report destination.
        #[arg(long)]
        report: PathBuf,
    },
}

fn main() -> ExitCode {
    let Cmd::Prop1 { trials, seed, report } = Cli::parse().cmd;
    let r = prop1_montecarlo(trials as usize, seed);
    let text = serde_json::to_string_pretty(&r).expect("report serializes") + "\n";
    if let Err(e) = std::fs::write(&report, text) {
        eprintln!("error: cannot write {}: {e}", report.display());
        return ExitCode::from(2);
    }
    println!("moving: {}/{} passed, still: {}/{} passed", r.moving.passed, r.moving.trials, r.still.passed, r.still.trials);
    if r.all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
