//! Actuator allocation for the tri-rotor, two-surface airframe: torque split
//! between surfaces and rotors, surface deflections, and the rotor mixing
//! system with saturation.

use nalgebra::{Matrix2, Matrix3x2, SVector, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airframe::{AircraftParams, TILT_MAX, TILT_MIN};
use crate::frame::smooth_weight;
use crate::geom3::Vec3;

type Vec5 = SVector<f64, 5>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocError {
    #[error("rear rotor would need negative thrust (X5 = {0:.4})")]
    RearRotorInfeasible(f64),
    #[error("front rotor {rotor} tilt outside the atan branch (vertical component {x:.4} <= 0)")]
    FrontTiltBranch { rotor: u8, x: f64 },
    #[error("negative thrust demand {0}")]
    NegativeThrust(f64),
    #[error("mixer matrix is singular")]
    SingularMixer,
    #[error("non-finite allocation input")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllocConfig {
    /// Airspeed below which rotors carry all torque [m/s].
    pub delta_star: f64,
    /// Width of the torque hand-over [m/s].
    pub r: f64,
    /// Airspeed floor in the surface law [m/s].
    pub v_floor: f64,
}

impl Default for AllocConfig {
    fn default() -> Self {
        AllocConfig { delta_star: 7.0, r: 2.0, v_floor: 3.0 }
    }
}

impl AllocConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.delta_star > 0.0 && self.r > 0.0 && self.v_floor > 0.0) {
            return Err("delta_star, r and v_floor must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TorqueSplit {
    pub gamma_a: Vec3,
    pub gamma_m: Vec3,
    pub lambda_bar: f64,
}

/// `Γ_m = λ̄Γ`, `Γ_a = Γ − Γ_m`; `λ̄` is 1 up to `δ*` and 0 from `δ* + r`.
pub fn split_torque(gamma: &Vec3, airspeed: f64, delta_star: f64, r: f64) -> TorqueSplit {
    let lambda_bar = smooth_weight(airspeed, delta_star, delta_star + r);
    let gamma_m = lambda_bar * gamma;
    TorqueSplit { gamma_a: gamma - gamma_m, gamma_m, lambda_bar }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SaturationFlags {
    pub w: [bool; 3],
    pub tilt: [bool; 2],
    pub delta: [bool; 2],
}

impl SaturationFlags {
    pub fn any(&self) -> bool {
        self.w.iter().chain(&self.tilt).chain(&self.delta).any(|&f| f)
    }

    /// Bit n set for channel n in the order w1..w3, tilt1, tilt2, delta1, delta2.
    pub fn bits(&self) -> u32 {
        self.w.iter().chain(&self.tilt).chain(&self.delta).enumerate().map(|(n, &f)| (f as u32) << n).sum()
    }
}

fn clamp_flag(x: f64, lo: f64, hi: f64) -> (f64, bool) {
    if x < lo {
        (lo, true)
    } else if x > hi {
        (hi, true)
    } else {
        (x, false)
    }
}

/// Tilt clamped to its mechanical range; flagged only strictly outside it.
pub fn saturate_tilt(raw: f64) -> (f64, bool) {
    clamp_flag(raw, TILT_MIN, TILT_MAX)
}

/// `δ = A·Γ_a / max(V², v_floor²)`, clamped to `±limit`.
pub fn surface_deflections(gamma_a: &Vec3, airspeed: f64, params: &AircraftParams, v_floor: f64) -> ([f64; 2], [bool; 2]) {
    let raw = params.surface_map() * gamma_a / airspeed.powi(2).max(v_floor * v_floor);
    let lim = params.surface_limit;
    let (d1, f1) = clamp_flag(raw[0], -lim, lim);
    let (d2, f2) = clamp_flag(raw[1], -lim, lim);
    ([d1, d2], [f1, f2])
}

/// Right pseudo-inverse of the surface map; zero when it is rank deficient.
pub fn surface_pinv(params: &AircraftParams) -> Matrix3x2<f64> {
    let a = params.surface_map();
    let gram: Matrix2<f64> = a * a.transpose();
    gram.try_inverse().map(|g| a.transpose() * g).unwrap_or_else(Matrix3x2::zeros)
}

/// Torque produced by deflections `delta` at the given airspeed.
pub fn surface_torque(delta: &[f64; 2], airspeed: f64, params: &AircraftParams) -> Vec3 {
    surface_pinv(params) * Vector2::new(delta[0], delta[1]) * airspeed * airspeed
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RotorSolution {
    pub x: [f64; 5],
    pub w: [f64; 3],
    pub tilt: [f64; 2],
    pub w_sat: [bool; 3],
    pub tilt_sat: [bool; 2],
}

fn mixer_inverse(params: &AircraftParams) -> Result<nalgebra::SMatrix<f64, 5, 5>, AllocError> {
    params.mixer().try_inverse().ok_or(AllocError::SingularMixer)
}

fn rhs(thrust: f64, theta: f64, gamma_m: &Vec3) -> Vec5 {
    Vec5::from([thrust * theta.sin(), thrust * theta.cos(), gamma_m.x, gamma_m.y, gamma_m.z])
}

fn speed_from_force(u: f64, mu: f64, params: &AircraftParams) -> (f64, bool) {
    clamp_flag((u.max(0.0) / mu).sqrt(), params.w_min, params.w_max)
}

fn finish(x: Vec5, params: &AircraftParams) -> RotorSolution {
    let u1 = x[0].hypot(x[2]);
    let u2 = x[1].hypot(x[3]);
    let (w1, s1) = speed_from_force(u1, params.mu12, params);
    let (w2, s2) = speed_from_force(u2, params.mu12, params);
    let (w3, s3) = speed_from_force(x[4], params.mu3, params);
    let (t1, f1) = saturate_tilt(x[2].atan2(x[0]));
    let (t2, f2) = saturate_tilt(x[3].atan2(x[1]));
    RotorSolution { x: x.into(), w: [w1, w2, w3], tilt: [t1, t2], w_sat: [s1, s2, s3], tilt_sat: [f1, f2] }
}

/// Exact inversion of the mixer; errors when the solution leaves the
/// physically meaningful branch.
pub fn rotor_solve(thrust: f64, theta: f64, gamma_m: &Vec3, params: &AircraftParams) -> Result<RotorSolution, AllocError> {
    if !(thrust.is_finite() && theta.is_finite() && gamma_m.iter().all(|g| g.is_finite())) {
        return Err(AllocError::NonFinite);
    }
    if thrust < 0.0 {
        return Err(AllocError::NegativeThrust(thrust));
    }
    let x = mixer_inverse(params)? * rhs(thrust, theta, gamma_m);
    if x[4] < 0.0 {
        return Err(AllocError::RearRotorInfeasible(x[4]));
    }
    for (rotor, xv) in [(1u8, x[0]), (2u8, x[1])] {
        if xv <= 0.0 {
            return Err(AllocError::FrontTiltBranch { rotor, x: xv });
        }
    }
    Ok(finish(x, params))
}

/// Total variant for the control loop: infeasible components are clamped
/// (rear thrust at zero, tilts at their limits) instead of rejected.
pub fn rotor_solve_saturating(
    thrust: f64,
    theta: f64,
    gamma_m: &Vec3,
    params: &AircraftParams,
) -> Result<RotorSolution, AllocError> {
    if !(thrust.is_finite() && theta.is_finite() && gamma_m.iter().all(|g| g.is_finite())) {
        return Err(AllocError::NonFinite);
    }
    let mut x = mixer_inverse(params)? * rhs(thrust.max(0.0), theta, gamma_m);
    let rear_clamped = x[4] < 0.0;
    x[4] = x[4].max(0.0);
    let mut s = finish(x, params);
    s.w_sat[2] |= rear_clamped;
    Ok(s)
}

/// `(T sinϑ, T cosϑ, Γ_m)` produced by the given rotor speeds and tilts.
pub fn rotor_forward(w: &[f64; 3], tilt: &[f64; 2], params: &AircraftParams) -> (f64, f64, Vec3) {
    let u1 = params.mu12 * w[0] * w[0];
    let u2 = params.mu12 * w[1] * w[1];
    let u3 = params.mu3 * w[2] * w[2];
    let x = Vec5::from([u1 * tilt[0].cos(), u2 * tilt[1].cos(), u1 * tilt[0].sin(), u2 * tilt[1].sin(), u3]);
    let y = params.mixer() * x;
    (y[0], y[1], Vec3::new(y[2], y[3], y[4]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Wrench {
    pub thrust: f64,
    pub tilt: f64,
    pub torque: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActuatorSet {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub tilt1: f64,
    pub tilt2: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub saturated: SaturationFlags,
    pub lambda_bar: f64,
    /// Wrench reproduced by the clamped actuators through the forward map.
    pub achieved: Wrench,
}

impl ActuatorSet {
    pub fn achieved_with_airspeed(&self, airspeed: f64, params: &AircraftParams) -> Wrench {
        let (fx, fz, tm) = rotor_forward(&[self.w1, self.w2, self.w3], &[self.tilt1, self.tilt2], params);
        Wrench {
            thrust: fx.hypot(fz),
            tilt: fx.atan2(fz),
            torque: tm + surface_torque(&[self.delta1, self.delta2], airspeed, params),
        }
    }
}

fn compose(
    thrust: f64,
    theta: f64,
    gamma: &Vec3,
    airspeed: f64,
    params: &AircraftParams,
    cfg: &AllocConfig,
    solver: fn(f64, f64, &Vec3, &AircraftParams) -> Result<RotorSolution, AllocError>,
) -> Result<ActuatorSet, AllocError> {
    let split = split_torque(gamma, airspeed, cfg.delta_star, cfg.r);
    let pinv = surface_pinv(params);
    let a = params.surface_map();
    // The part of Γ_a the surfaces cannot produce (yaw) goes to the rotors.
    let surfaceable = pinv * (a * split.gamma_a);
    let gamma_m = split.gamma_m + (split.gamma_a - surfaceable);
    let (delta, delta_sat) = surface_deflections(&split.gamma_a, airspeed, params, cfg.v_floor);
    let rot = solver(thrust, theta, &gamma_m, params)?;
    let mut set = ActuatorSet {
        w1: rot.w[0],
        w2: rot.w[1],
        w3: rot.w[2],
        tilt1: rot.tilt[0],
        tilt2: rot.tilt[1],
        delta1: delta[0],
        delta2: delta[1],
        saturated: SaturationFlags { w: rot.w_sat, tilt: rot.tilt_sat, delta: delta_sat },
        lambda_bar: split.lambda_bar,
        achieved: Wrench { thrust: 0.0, tilt: 0.0, torque: Vec3::zeros() },
    };
    set.achieved = set.achieved_with_airspeed(airspeed.max(cfg.v_floor), params);
    Ok(set)
}

/// Split, surfaces, then the exact rotor solve.
pub fn allocate(
    thrust: f64,
    theta: f64,
    gamma: &Vec3,
    airspeed: f64,
    params: &AircraftParams,
    cfg: &AllocConfig,
) -> Result<ActuatorSet, AllocError> {
    compose(thrust, theta, gamma, airspeed, params, cfg, rotor_solve)
}

/// As [`allocate`] but never rejects a finite command.
pub fn allocate_saturating(
    thrust: f64,
    theta: f64,
    gamma: &Vec3,
    airspeed: f64,
    params: &AircraftParams,
    cfg: &AllocConfig,
) -> Result<ActuatorSet, AllocError> {
    compose(thrust, theta, gamma, airspeed, params, cfg, rotor_solve_saturating)
}
