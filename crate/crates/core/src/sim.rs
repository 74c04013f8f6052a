//! Closed-loop scenario runner: guidance, estimator, desired frame, rate
//! law, allocation and plant, one log record per control cycle.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airframe::{AircraftParams, ParamError};
use crate::airvel::{AirVelConfig, AirVelEstimator};
use crate::allocation::{allocate_saturating, rotor_forward, surface_torque, AllocConfig};
use crate::attitude::{omega_star, FrameRateEstimator, RateGains, TorqueLaw, TorqueMode};
use crate::dynamics::{step, PlantInput, RigidState, WindProfile};
use crate::frame::{smooth_weight, FrameConfig, FrameSelector, Regime};
use crate::geom3::{Rotation, Vec3};
use crate::guidance::{climb_reference, speed_ref, xi_trajectory, CirclePath, GuidanceGains, PathFollower, SpeedRamp};

/// First line of every log file.
pub const LOG_VERSION: &str = "# vtolctl-log v1";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("metrics need at least one record")]
    EmptyLog,
}

fn bad(msg: impl Into<String>) -> SimError {
    SimError::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissionKind {
    Hover,
    #[default]
    Circle,
    Line,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoverSpec {
    pub target: [f64; 3],
    /// Initial position relative to `target` [m].
    pub start_offset: [f64; 3],
}

impl Default for HoverSpec {
    fn default() -> Self {
        HoverSpec { target: [0.0, 0.0, -10.0], start_offset: [0.5, -0.3, 0.4] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircleSpec {
    pub takeoff_duration: f64,
    pub takeoff_height: f64,
    pub radius: f64,
    /// Tilt of the circle plane about the horizontal axis normal to the initial heading [deg].
    pub inclination_deg: f64,
    pub ramp: SpeedRamp,
    /// Time between the end of the climb and the start of the ramp [s]; the
    /// speed reference eases from 0 to `ramp.v_start` over it.
    pub ramp_delay: f64,
}

impl Default for CircleSpec {
    fn default() -> Self {
        CircleSpec {
            takeoff_duration: 10.0,
            takeoff_height: 10.0,
            radius: 40.0,
            inclination_deg: 10.0,
            ramp: SpeedRamp::default(),
            ramp_delay: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineSpec {
    pub velocity: [f64; 3],
    /// Start on the desired frame for the initial air velocity.
    pub trim: bool,
}

impl Default for LineSpec {
    fn default() -> Self {
        LineSpec { velocity: [-10.0, 0.0, 0.0], trim: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissionConfig {
    pub kind: MissionKind,
    pub duration: f64,
    pub start: [f64; 3],
    /// Initial yaw [deg].
    pub heading_deg: f64,
    pub hover: HoverSpec,
    pub circle: CircleSpec,
    pub line: LineSpec,
}

impl Default for MissionConfig {
    fn default() -> Self {
        MissionConfig {
            kind: MissionKind::Circle,
            duration: 110.0,
            start: [0.0; 3],
            heading_deg: 180.0,
            hover: HoverSpec::default(),
            circle: CircleSpec::default(),
            line: LineSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub guidance: GuidanceGains,
    pub frame: FrameConfig,
    pub rates: RateGains,
    pub torque_mode: TorqueMode,
    pub estimator: AirVelConfig,
    pub allocation: AllocConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantInputMode {
    /// Wrench reproduced by the saturated actuators.
    #[default]
    Achieved,
    /// Controller thrust, tilt and torque, bypassing allocation.
    Commanded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub plant_dt: f64,
    pub control_dt: f64,
    pub seed: u64,
    /// Standard deviation of the pitot noise [m/s]; zero disables it.
    pub pitot_noise_std: f64,
    /// Constant body torque added to the plant [N·m].
    pub disturbance_torque: [f64; 3],
    /// Per-axis bound of a uniform random body torque, redrawn every
    /// control cycle [N·m]; zero disables it.
    pub disturbance_bound: f64,
    /// Multiplier on the plant's aerodynamic coefficients.
    pub aero_scale: f64,
    pub plant_input: PlantInputMode,
    /// Feed the true air velocity to the controller instead of the estimate.
    pub true_airspeed: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            plant_dt: 0.001,
            control_dt: 0.004,
            seed: 0,
            pitot_noise_std: 0.0,
            disturbance_torque: [0.0; 3],
            disturbance_bound: 0.0,
            aero_scale: 1.0,
            plant_input: PlantInputMode::Achieved,
            true_airspeed: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub aircraft: AircraftParams,
    pub wind: WindProfile,
    pub mission: MissionConfig,
    pub controller: ControllerConfig,
    pub simulation: SimulationConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig::circle_mission()
    }
}

impl ScenarioConfig {
    /// Takeoff, then the inclined circle with the 3 → 9 m/s ramp in gusty wind.
    pub fn circle_mission() -> Self {
        ScenarioConfig {
            name: "circle_mission".into(),
            aircraft: AircraftParams::eflite_like(),
            wind: WindProfile::mission(),
            mission: MissionConfig::default(),
            controller: ControllerConfig::default(),
            simulation: SimulationConfig::default(),
        }
    }

    /// Position hold in still air from a small offset.
    pub fn hover() -> Self {
        ScenarioConfig {
            name: "hover".into(),
            wind: WindProfile::calm(),
            mission: MissionConfig { kind: MissionKind::Hover, duration: 30.0, heading_deg: 0.0, ..MissionConfig::default() },
            ..ScenarioConfig::circle_mission()
        }
    }

    /// Trimmed straight flight in a steady horizontal wind.
    pub fn cruise() -> Self {
        ScenarioConfig {
            name: "cruise".into(),
            wind: WindProfile { steady: Vec3::new(3.0, 0.0, 0.0), ..WindProfile::calm() },
            mission: MissionConfig {
                kind: MissionKind::Line,
                duration: 20.0,
                start: [0.0, 0.0, -20.0],
                heading_deg: 180.0,
                ..MissionConfig::default()
            },
            ..ScenarioConfig::circle_mission()
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self, SimError> {
        let c: ScenarioConfig = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, SimError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    fn substeps(&self) -> Result<usize, SimError> {
        let s = &self.simulation;
        if !(s.plant_dt > 0.0 && s.plant_dt <= crate::dynamics::MAX_DT && s.control_dt >= s.plant_dt) {
            return Err(bad("need 0 < plant_dt <= 0.02 and control_dt >= plant_dt"));
        }
        let n = (s.control_dt / s.plant_dt).round();
        if (n * s.plant_dt - s.control_dt).abs() > 1e-12 {
            return Err(bad("control_dt must be an integer multiple of plant_dt"));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.aircraft.validate()?;
        self.wind.validate().map_err(bad)?;
        self.substeps()?;
        let c = &self.controller;
        c.guidance.validate().map_err(|e| bad(e.to_string()))?;
        c.frame.validate().map_err(|e| bad(e.to_string()))?;
        c.rates.validate().map_err(|e| bad(e.to_string()))?;
        c.estimator.validate().map_err(bad)?;
        c.allocation.validate().map_err(bad)?;
        let m = &self.mission;
        if !(m.duration >= 0.0 && m.duration.is_finite()) {
            return Err(bad("mission duration must be >= 0"));
        }
        if m.kind == MissionKind::Circle {
            let cs = &m.circle;
            cs.ramp.validate().map_err(|e| bad(e.to_string()))?;
            if !(cs.takeoff_duration > 0.0 && cs.radius > 0.0 && cs.ramp_delay >= 0.0) {
                return Err(bad("circle mission needs positive takeoff_duration and radius"));
            }
        }
        let s = &self.simulation;
        if !(s.pitot_noise_std >= 0.0 && s.disturbance_bound >= 0.0 && s.aero_scale > 0.0) {
            return Err(bad("pitot_noise_std and disturbance_bound must be >= 0, aero_scale > 0"));
        }
        Ok(())
    }
}

/// One control cycle. Vectors are inertial unless named `_body`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub t: f64,
    pub p: Vec3,
    pub v: Vec3,
    /// (w, x, y, z) with w ≥ 0.
    pub q: [f64; 4],
    pub omega: Vec3,
    pub va_true_body: Vec3,
    pub va_hat_body: Vec3,
    pub pitot_valid: bool,
    pub regime: Regime,
    pub fallback: bool,
    pub lambda: f64,
    pub lambda_bar: f64,
    pub alpha: f64,
    pub thrust: f64,
    pub tilt: f64,
    pub tilt1: f64,
    pub tilt2: f64,
    /// Rotor speeds over `w_max`.
    pub w_norm: [f64; 3],
    pub delta: [f64; 2],
    pub xi: Vec3,
    pub speed: f64,
    pub speed_ref: f64,
    pub airspeed: f64,
    pub cross_track: f64,
    pub speed_error: f64,
    /// 0: reference tracking (takeoff, hover, line), 1: path following.
    pub phase: u8,
    pub saturation: u32,
    pub gust: bool,
}

const HEADER: &[&str] = &[
    "t",
    "px",
    "py",
    "pz",
    "vx",
    "vy",
    "vz",
    "qw",
    "qx",
    "qy",
    "qz",
    "wx",
    "wy",
    "wz",
    "va_x",
    "va_y",
    "va_z",
    "vahat_x",
    "vahat_y",
    "vahat_z",
    "pitot_valid",
    "regime",
    "fallback",
    "lambda",
    "lambda_bar",
    "alpha",
    "thrust",
    "tilt",
    "tilt1",
    "tilt2",
    "w1n",
    "w2n",
    "w3n",
    "delta1",
    "delta2",
    "xi_x",
    "xi_y",
    "xi_z",
    "speed",
    "speed_ref",
    "airspeed",
    "cross_track",
    "speed_error",
    "phase",
    "saturation",
    "gust",
];

pub fn csv_header() -> String {
    HEADER.join(",")
}

impl LogRecord {
    fn floats(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(self.t)
            .chain(self.p.iter().copied())
            .chain(self.v.iter().copied())
            .chain(self.q)
            .chain(self.omega.iter().copied())
            .chain(self.va_true_body.iter().copied())
            .chain(self.va_hat_body.iter().copied())
    }

    pub fn to_csv_row(&self) -> String {
        let f = |x: f64| format!("{x:.8e}");
        let mut cols: Vec<String> = self.floats().map(f).collect();
        cols.push((self.pitot_valid as u8).to_string());
        cols.push(self.regime.code().to_string());
        cols.push((self.fallback as u8).to_string());
        for x in [self.lambda, self.lambda_bar, self.alpha, self.thrust, self.tilt, self.tilt1, self.tilt2] {
            cols.push(f(x));
        }
        cols.extend(self.w_norm.iter().chain(&self.delta).map(|&x| f(x)));
        cols.extend(self.xi.iter().map(|&x| f(x)));
        for x in [self.speed, self.speed_ref, self.airspeed, self.cross_track, self.speed_error] {
            cols.push(f(x));
        }
        cols.push(self.phase.to_string());
        cols.push(self.saturation.to_string());
        cols.push((self.gust as u8).to_string());
        cols.join(",")
    }
}

pub fn write_csv<W: Write>(log: &[LogRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{LOG_VERSION}")?;
    writeln!(w, "{}", csv_header())?;
    for r in log {
        writeln!(w, "{}", r.to_csv_row())?;
    }
    w.flush()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SaturationDuty {
    pub w: [f64; 3],
    pub tilt: [f64; 2],
    pub delta: [f64; 2],
    pub any: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Metrics {
    pub status: String,
    pub failure: Option<String>,
    pub duration: f64,
    pub cycles: usize,
    /// First path-phase time with cross-track < 1 m and |speed error| < 0.5 m/s.
    pub capture_time: Option<f64>,
    /// Whole path phase.
    pub cross_track_rms: Option<f64>,
    pub cross_track_max: Option<f64>,
    /// Path phase after capture.
    pub cross_track_rms_captured: Option<f64>,
    pub cross_track_max_captured: Option<f64>,
    /// Path phase after capture, gust windows excluded.
    pub speed_rms: Option<f64>,
    pub initial_tilt_deg: f64,
    pub max_tilt_deg: f64,
    /// Largest tilt while the speed reference sits at its final value.
    pub max_tilt_top_speed_deg: Option<f64>,
    pub max_tilt_rate: f64,
    pub saturation_duty: SaturationDuty,
    pub estimator_error_rms: Option<[f64; 3]>,
    pub regime_fraction: [f64; 3],
    pub final_position_error: f64,
    pub final_thrust: f64,
    pub final_tilt: f64,
    pub fallbacks: u64,
    pub estimator_faults: u64,
}

fn rms(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    (n > 0).then(|| (s / n as f64).sqrt())
}

/// Summary statistics of a log. Final values average the last second.
pub fn metrics(log: &[LogRecord]) -> Result<Metrics, SimError> {
    let first = log.first().ok_or(SimError::EmptyLog)?;
    let last = log[log.len() - 1];
    let n = log.len() as f64;
    let dt = if log.len() > 1 { log[1].t - first.t } else { 0.0 };

    let path: Vec<&LogRecord> = log.iter().filter(|r| r.phase == 1).collect();
    let capture_time = path.iter().find(|r| r.cross_track < 1.0 && r.speed_error.abs() < 0.5).map(|r| r.t);
    let captured: Vec<&&LogRecord> = path.iter().filter(|r| capture_time.is_some_and(|tc| r.t >= tc)).collect();
    let cross_track_rms = rms(path.iter().map(|r| r.cross_track));
    let cross_track_max = path.iter().map(|r| r.cross_track).reduce(f64::max);
    let cross_track_rms_captured = rms(captured.iter().map(|r| r.cross_track));
    let cross_track_max_captured = captured.iter().map(|r| r.cross_track).reduce(f64::max);
    let speed_rms = rms(captured.iter().filter(|r| !r.gust).map(|r| r.speed_error));

    let top = path.iter().map(|r| r.speed_ref).reduce(f64::max);
    let max_tilt_top_speed_deg =
        top.and_then(|top| path.iter().filter(|r| r.speed_ref >= top - 1e-9).map(|r| r.tilt.to_degrees()).reduce(f64::max));
    let early: Vec<f64> = log.iter().take_while(|r| r.phase == 0).map(|r| r.tilt).collect();
    let initial_tilt_deg =
        if early.is_empty() { first.tilt } else { early.iter().sum::<f64>() / early.len() as f64 }.to_degrees();

    let max_tilt_rate = if dt > 0.0 {
        log.windows(2).map(|w| ((w[1].tilt1 - w[0].tilt1).abs().max((w[1].tilt2 - w[0].tilt2).abs())) / dt).fold(0.0, f64::max)
    } else {
        0.0
    };

    let mut sat = SaturationDuty::default();
    for r in log {
        let b = r.saturation;
        for k in 0..3 {
            sat.w[k] += ((b >> k) & 1) as f64 / n;
        }
        for k in 0..2 {
            sat.tilt[k] += ((b >> (3 + k)) & 1) as f64 / n;
            sat.delta[k] += ((b >> (5 + k)) & 1) as f64 / n;
        }
        sat.any += (b != 0) as u8 as f64 / n;
    }

    let valid: Vec<&LogRecord> = log.iter().filter(|r| r.pitot_valid).collect();
    let estimator_error_rms = (!valid.is_empty())
        .then(|| std::array::from_fn(|k| rms(valid.iter().map(|r| r.va_hat_body[k] - r.va_true_body[k])).unwrap_or(0.0)));

    let mut regime_fraction = [0.0; 3];
    for r in log {
        regime_fraction[r.regime.code() as usize] += 1.0;
    }
    regime_fraction.iter_mut().for_each(|f| *f /= n);

    let tail: Vec<&LogRecord> = log.iter().filter(|r| r.t >= last.t - 1.0 + 1e-9).collect();
    let m = tail.len() as f64;
    Ok(Metrics {
        status: "ok".into(),
        failure: None,
        duration: last.t - first.t + dt,
        cycles: log.len(),
        capture_time,
        cross_track_rms,
        cross_track_max,
        cross_track_rms_captured,
        cross_track_max_captured,
        speed_rms,
        initial_tilt_deg,
        max_tilt_deg: log.iter().map(|r| r.tilt.to_degrees()).fold(f64::NEG_INFINITY, f64::max),
        max_tilt_top_speed_deg,
        max_tilt_rate,
        saturation_duty: sat,
        estimator_error_rms,
        regime_fraction,
        final_position_error: tail.iter().map(|r| r.cross_track).sum::<f64>() / m,
        final_thrust: tail.iter().map(|r| r.thrust).sum::<f64>() / m,
        final_tilt: tail.iter().map(|r| r.tilt).sum::<f64>() / m,
        fallbacks: log.iter().filter(|r| r.fallback).count() as u64,
        estimator_faults: 0,
    })
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: Vec<LogRecord>,
    pub metrics: Metrics,
}

impl RunOutput {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), SimError> {
        let f = std::fs::File::create(path)?;
        write_csv(&self.log, std::io::BufWriter::new(f))?;
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        write_csv(&self.log, &mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("log is ASCII")
    }
}

enum Guidance {
    Hover { target: Vec3 },
    Circle { p0: Vec3, spec: CircleSpec, follower: Box<PathFollower> },
    Line { p0: Vec3, velocity: Vec3 },
}

struct GuidanceOut {
    xi: Vec3,
    speed_ref: f64,
    cross_track: f64,
    speed_error: f64,
    phase: u8,
}

impl Guidance {
    fn new(cfg: &ScenarioConfig, start: Vec3) -> Result<Self, SimError> {
        let m = &cfg.mission;
        let gains = &cfg.controller.guidance;
        Ok(match m.kind {
            MissionKind::Hover => Guidance::Hover { target: Vec3::from(m.hover.target) },
            MissionKind::Line => Guidance::Line { p0: start, velocity: Vec3::from(m.line.velocity) },
            MissionKind::Circle => {
                let c = &m.circle;
                let psi = m.heading_deg.to_radians();
                let inc = c.inclination_deg.to_radians();
                let heading = Vec3::new(psi.cos(), psi.sin(), 0.0);
                let normal = Vec3::new(inc.sin() * psi.cos(), inc.sin() * psi.sin(), inc.cos());
                let top = start - c.takeoff_height * Vec3::z();
                let path = CirclePath::through(top, heading, normal, c.radius).map_err(|e| bad(e.to_string()))?;
                let follower = Box::new(PathFollower::new(path, gains.clone(), gains.xi_max(cfg.aircraft.g0), heading));
                Guidance::Circle { p0: start, spec: c.clone(), follower }
            }
        })
    }

    fn command(&mut self, t: f64, p: &Vec3, v: &Vec3, gains: &GuidanceGains, xi_max: f64) -> GuidanceOut {
        let z = Vec3::zeros();
        match self {
            Guidance::Hover { target } => GuidanceOut {
                xi: xi_trajectory(p, v, target, &z, &z, gains, xi_max),
                speed_ref: 0.0,
                cross_track: (p - *target).norm(),
                speed_error: v.norm(),
                phase: 0,
            },
            Guidance::Line { p0, velocity } => {
                let p_ref = *p0 + *velocity * t;
                GuidanceOut {
                    xi: xi_trajectory(p, v, &p_ref, velocity, &z, gains, xi_max),
                    speed_ref: velocity.norm(),
                    cross_track: (p - p_ref).norm(),
                    speed_error: v.norm() - velocity.norm(),
                    phase: 0,
                }
            }
            Guidance::Circle { p0, spec, follower } => {
                let cross = follower.path.closest(p).map_or(f64::NAN, |pp| pp.error.norm());
                if t < spec.takeoff_duration {
                    let (pr, vr, ar) = climb_reference(t, p0, spec.takeoff_height, spec.takeoff_duration);
                    GuidanceOut {
                        xi: xi_trajectory(p, v, &pr, &vr, &ar, gains, xi_max),
                        speed_ref: vr.norm(),
                        cross_track: cross,
                        speed_error: v.norm() - vr.norm(),
                        phase: 0,
                    }
                } else {
                    let since = t - spec.takeoff_duration;
                    // ease in from hover so the handover does not step ξ
                    let v_star = if since < spec.ramp_delay {
                        spec.ramp.v_start * (1.0 - smooth_weight(since, 0.0, spec.ramp_delay))
                    } else {
                        speed_ref(since - spec.ramp_delay, &spec.ramp)
                    };
                    let c = follower.command(p, v, v_star);
                    GuidanceOut { xi: c.xi, speed_ref: v_star, cross_track: c.cross_track, speed_error: c.speed_error, phase: 1 }
                }
            }
        }
    }
}

fn quat_wxyz(r: &Rotation) -> [f64; 4] {
    let q = r.to_quaternion();
    let s = if q.w < 0.0 { -1.0 } else { 1.0 };
    [s * q.w, s * q.i, s * q.j, s * q.k]
}

/// Runs one scenario. Plant divergence ends the run early with status
/// `diverged`; the log up to the last good cycle is kept.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput, SimError> {
    cfg.validate()?;
    let params = &cfg.aircraft;
    let plant_params = params.with_aero_scale(cfg.simulation.aero_scale);
    let sim = &cfg.simulation;
    let ctl = &cfg.controller;
    let n_sub = cfg.substeps()?;
    let dt = sim.control_dt;
    let cycles = (cfg.mission.duration / dt).round() as usize;
    let xi_max = ctl.guidance.xi_max(params.g0);
    let j = params.inertia_matrix();
    let steady_disturbance = Vec3::from(sim.disturbance_torque);

    let yaw = Rotation::from_euler(0.0, 0.0, cfg.mission.heading_deg.to_radians());
    let start = match cfg.mission.kind {
        MissionKind::Hover => Vec3::from(cfg.mission.hover.target) + Vec3::from(cfg.mission.hover.start_offset),
        _ => Vec3::from(cfg.mission.start),
    };
    let mut state = RigidState::at_rest(start, yaw);
    if cfg.mission.kind == MissionKind::Line {
        state.v = Vec3::from(cfg.mission.line.velocity);
        if cfg.mission.line.trim {
            let va = state.v - cfg.wind.at(0.0);
            let mut sel = FrameSelector::new(ctl.frame.clone());
            if let Ok(out) = sel.select(&Vec3::zeros(), &va, &yaw, params, dt) {
                state.r = out.frame.axes.rotation();
            }
        }
    }

    let mut guidance = Guidance::new(cfg, start)?;
    let mut estimator = AirVelEstimator::new(ctl.estimator.clone(), params.g0);
    let mut selector = FrameSelector::new(ctl.frame.clone());
    let mut rate_est = FrameRateEstimator::default();
    let mut torque_law = TorqueLaw::new(ctl.torque_mode);
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    // separate stream: enabling the disturbance leaves the pitot noise unchanged
    let mut torque_rng = ChaCha8Rng::seed_from_u64(sim.seed);
    torque_rng.set_stream(1);
    let noise = Normal::new(0.0, sim.pitot_noise_std).map_err(|e| bad(e.to_string()))?;

    let mut log = Vec::with_capacity(cycles);
    let mut faults = 0u64;
    let mut failure: Option<String> = None;

    for k in 0..cycles {
        let t = k as f64 * dt;
        let s = state;
        let wind = cfg.wind.at(t);
        let va_true = s.v - wind;
        let va_true_body = s.r.to_body(&va_true);
        let pitot = va_true_body.x + if sim.pitot_noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        let est = match estimator.update(&s.v, &s.r, &s.omega, pitot, dt) {
            Ok(e) => e,
            Err(_) => {
                faults += 1;
                crate::airvel::AirVelEstimate { v_a_hat: Vec3::zeros(), pitot_valid: false, v_a2_state: 0.0 }
            }
        };
        let va_ctrl = if sim.true_airspeed { va_true } else { s.r.to_inertial(&est.v_a_hat) };

        let g = guidance.command(t, &s.p, &s.v, &ctl.guidance, xi_max);
        let out = match selector.select(&g.xi, &va_ctrl, &s.r, params, dt) {
            Ok(o) => o,
            Err(e) => {
                failure = Some(format!("t={t:.3}: desired frame: {e}"));
                break;
            }
        };
        let rate = rate_est.update(&out.frame, dt).map_err(|e| bad(e.to_string()))?;
        let w_star = omega_star(&out.frame, &s.r, &rate, &ctl.rates);
        let gamma = torque_law.compute(&s.omega, &w_star, dt, &j, &ctl.rates).map_err(|e| bad(e.to_string()))?;
        let act = match allocate_saturating(out.tilt.thrust, out.tilt.theta, &gamma, va_ctrl.norm(), params, &ctl.allocation) {
            Ok(a) => a,
            Err(e) => {
                failure = Some(format!("t={t:.3}: allocation: {e}"));
                break;
            }
        };
        let input = match sim.plant_input {
            PlantInputMode::Commanded => PlantInput { thrust: out.tilt.thrust, tilt: out.tilt.theta, torque: gamma },
            PlantInputMode::Achieved => {
                let (fx, fz, tm) = rotor_forward(&[act.w1, act.w2, act.w3], &[act.tilt1, act.tilt2], params);
                let ts = surface_torque(&[act.delta1, act.delta2], va_true.norm(), params);
                PlantInput { thrust: fx.hypot(fz), tilt: fx.atan2(fz), torque: tm + ts }
            }
        };

        log.push(LogRecord {
            t,
            p: s.p,
            v: s.v,
            q: quat_wxyz(&s.r),
            omega: s.omega,
            va_true_body,
            va_hat_body: est.v_a_hat,
            pitot_valid: est.pitot_valid,
            regime: out.frame.regime,
            fallback: out.fallback,
            lambda: out.frame.lambda_val,
            lambda_bar: act.lambda_bar,
            alpha: out.frame.alpha,
            thrust: out.tilt.thrust,
            tilt: out.tilt.theta,
            tilt1: act.tilt1,
            tilt2: act.tilt2,
            w_norm: [act.w1 / params.w_max, act.w2 / params.w_max, act.w3 / params.w_max],
            delta: [act.delta1, act.delta2],
            xi: g.xi,
            speed: s.v.norm(),
            speed_ref: g.speed_ref,
            airspeed: va_true.norm(),
            cross_track: g.cross_track,
            speed_error: g.speed_error,
            phase: g.phase,
            saturation: act.saturated.bits(),
            gust: cfg.wind.gust_factor(t) > 0.0,
        });

        let b = sim.disturbance_bound;
        let disturbance =
            if b > 0.0 { steady_disturbance + Vec3::from_fn(|_, _| torque_rng.random_range(-b..=b)) } else { steady_disturbance };
        let mut next = state;
        for m in 0..n_sub {
            let ts = t + m as f64 * sim.plant_dt;
            match step(&next, &input, ts, sim.plant_dt, &cfg.wind, &plant_params, &disturbance) {
                Ok(x) => next = x,
                Err(e) => {
                    failure = Some(format!("t={ts:.3}: plant: {e}"));
                    break;
                }
            }
        }
        if failure.is_some() {
            break;
        }
        if next.p.norm() > 1e5 || next.omega.norm() > 1e3 {
            failure = Some(format!("t={t:.3}: state left the flight envelope"));
            break;
        }
        state = next;
    }

    let mut m = if log.is_empty() { Metrics { status: "ok".into(), ..Metrics::default() } } else { metrics(&log)? };
    m.estimator_faults = faults;
    if let Some(f) = failure {
        m.status = "diverged".into();
        m.failure = Some(f);
    }
    Ok(RunOutput { log, metrics: m })
}

/// Runs scenarios concurrently; results keep the input order.
pub fn run_batch(configs: &[ScenarioConfig]) -> Vec<Result<RunOutput, SimError>> {
    configs.par_iter().map(run).collect()
}
