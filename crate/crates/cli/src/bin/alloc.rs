//! `alloc solve`: exact allocation of one (T, ϑ, Γ, airspeed) command.
//! Exit code 2 when the rotors cannot realize the command.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vtolctl::airframe::AircraftParams;
use vtolctl::allocation::{allocate, AllocConfig};
use vtolctl::geom3::Vec3;

#[derive(Parser)]
#[command(name = "alloc", about = "Actuator allocation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the actuator set for one command as JSON.
    Solve {
        /// Thrust intensity [N].
        #[arg(long)]
        thrust: f64,
        /// Thrust tilt [rad].
        #[arg(long, allow_hyphen_values = true)]
        tilt: f64,
        /// Body torque Γx,Γy,Γz [N·m].
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true, default_value = "0,0,0")]
        torque: Vec3,
        /// Airspeed used for the surface share [m/s].
        #[arg(long, default_value_t = 0.0)]
        airspeed: f64,
        /// Aircraft parameter file; built-in parameters when absent.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        delta_star: Option<f64>,
        #[arg(long)]
        blend_width: Option<f64>,
    },
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let parts: Vec<f64> =
        s.split(',').map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"))).collect::<Result<_, _>>()?;
    match parts[..] {
        [x, y, z] => Ok(Vec3::new(x, y, z)),
        _ => Err(format!("expected three comma-separated numbers, got {}", parts.len())),
    }
}

fn main() -> ExitCode {
    let Cmd::Solve { thrust, tilt, torque, airspeed, params, delta_star, blend_width } = Cli::parse().cmd;
    let params = match params.map(AircraftParams::from_file).transpose() {
        Ok(p) => p.unwrap_or_else(AircraftParams::eflite_like),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    };
    let mut cfg = AllocConfig::default();
    cfg.delta_star = delta_star.unwrap_or(cfg.delta_star);
    cfg.r = blend_width.unwrap_or(cfg.r);
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(3);
    }
    match allocate(thrust, tilt, &torque, airspeed, &params, &cfg) {
        Ok(set) => {
            println!("{}", serde_json::to_string_pretty(&set).expect("actuator set serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("infeasible: {e}");
            ExitCode::from(2)
        }
    }
}
