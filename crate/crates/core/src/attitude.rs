//! Desired body rate and torque law.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{Axes, DesiredFrame, Regime};
use crate::geom3::{Mat3, Rotation, Vec3};

/// Lower bound on every gain.
pub const GAIN_FLOOR: f64 = 0.05;
/// Time constant of the frame-axis differentiators [s].
pub const RATE_TAU: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttitudeError {
    #[error("gain {0} must exceed {GAIN_FLOOR}")]
    Gain(&'static str),
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateGains {
    pub k_i: f64,
    pub k_j: f64,
    pub k_k: f64,
    pub k_gamma: [f64; 3],
}

impl Default for RateGains {
    fn default() -> Self {
        RateGains { k_i: 4.0, k_j: 4.0, k_k: 4.0, k_gamma: [20.0, 20.0, 15.0] }
    }
}

impl RateGains {
    pub fn validate(&self) -> Result<(), AttitudeError> {
        let named = [
            ("k_i", self.k_i),
            ("k_j", self.k_j),
            ("k_k", self.k_k),
            ("k_gamma[0]", self.k_gamma[0]),
            ("k_gamma[1]", self.k_gamma[1]),
            ("k_gamma[2]", self.k_gamma[2]),
        ];
        match named.iter().find(|(_, g)| !(*g > GAIN_FLOOR && g.is_finite())) {
            Some((name, _)) => Err(AttitudeError::Gain(name)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TorqueMode {
    #[default]
    Simple,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRate {
    /// Inertial coordinates [rad/s].
    pub omega_bar: Vec3,
    pub valid: bool,
}

impl FrameRate {
    pub fn zero() -> Self {
        FrameRate { omega_bar: Vec3::zeros(), valid: false }
    }
}

/// Filtered finite-difference estimate of the desired-frame angular rate.
///
/// The sample is invalid (rate zero, filters cleared) whenever the regime
/// or the completeness of the low-speed frame changes.
#[derive(Debug, Clone)]
pub struct FrameRateEstimator {
    tau: f64,
    prev: Option<(Axes, bool, bool)>,
    di: Vec3,
    dj: Vec3,
    dk: Vec3,
}

impl Default for FrameRateEstimator {
    fn default() -> Self {
        FrameRateEstimator::new(RATE_TAU)
    }
}

impl FrameRateEstimator {
    pub fn new(tau: f64) -> Self {
        FrameRateEstimator { tau, prev: None, di: Vec3::zeros(), dj: Vec3::zeros(), dk: Vec3::zeros() }
    }

    pub fn reset(&mut self) {
        *self = FrameRateEstimator::new(self.tau);
    }

    pub fn update(&mut self, frame: &DesiredFrame, dt: f64) -> Result<FrameRate, AttitudeError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(AttitudeError::InvalidStep(dt));
        }
        let low = frame.regime == Regime::LowSpeed;
        let key = (low, frame.complete);
        let now = frame.axes;
        let Some((prev, p_low, p_complete)) = self.prev.replace((now, low, frame.complete)) else {
            return Ok(FrameRate::zero());
        };
        if (p_low, p_complete) != key {
            self.di = Vec3::zeros();
            self.dj = Vec3::zeros();
            self.dk = Vec3::zeros();
            return Ok(FrameRate::zero());
        }
        let g = dt / (self.tau + dt);
        self.di += g * ((now.i - prev.i) / dt - self.di);
        self.dj += g * ((now.j - prev.j) / dt - self.dj);
        self.dk += g * ((now.k - prev.k) / dt - self.dk);
        let w_k = now.k.cross(&self.dk);
        let omega_bar = if !low {
            w_k + now.k.dot(&now.i.cross(&self.di)) * now.k
        } else if frame.complete {
            w_k + now.k.dot(&now.j.cross(&self.dj)) * now.k
        } else {
            w_k
        };
        Ok(FrameRate { omega_bar, valid: true })
    }
}

/// `ω* = ω̄ + k_i(ı×ī) + k_j(ȷ×ȷ̄) + k_k(k×k̄)`, returned in body coordinates.
pub fn omega_star_high(frame: &Axes, r: &Rotation, rate: &FrameRate, gains: &RateGains) -> Vec3 {
    let w = rate.omega_bar
        + gains.k_i * r.i_axis().cross(&frame.i)
        + gains.k_j * r.j_axis().cross(&frame.j)
        + gains.k_k * r.k_axis().cross(&frame.k);
    r.to_body(&w)
}

/// `ω* = ω̄ + k_j(ȷ×j_d) + k_k(k×k̄)` with `j_d` unnormalised, body coordinates.
pub fn omega_star_low(j_d: &Vec3, k_bar: &Vec3, r: &Rotation, rate: &FrameRate, gains: &RateGains) -> Vec3 {
    let w = rate.omega_bar + gains.k_j * r.j_axis().cross(j_d) + gains.k_k * r.k_axis().cross(k_bar);
    r.to_body(&w)
}

/// Regime-dispatched desired rate.
pub fn omega_star(frame: &DesiredFrame, r: &Rotation, rate: &FrameRate, gains: &RateGains) -> Vec3 {
    match frame.regime {
        Regime::LowSpeed => omega_star_low(&frame.j_d, &frame.axes.k, r, rate, gains),
        _ => omega_star_high(&frame.axes, r, rate, gains),
    }
}

/// `Γ = −k_γ·J(ω − ω*)`, plus `ω×Jω* + J·ω̇*` in full mode.
pub fn torque(omega: &Vec3, omega_star: &Vec3, omega_star_dot: &Vec3, j: &Mat3, gains: &RateGains, mode: TorqueMode) -> Vec3 {
    let kg = Vec3::from(gains.k_gamma);
    let fb = -kg.component_mul(&(j * (omega - omega_star)));
    match mode {
        TorqueMode::Simple => fb,
        TorqueMode::Full => fb + omega.cross(&(j * omega_star)) + j * omega_star_dot,
    }
}

/// Torque law with a filtered derivative of ω*.
#[derive(Debug, Clone)]
pub struct TorqueLaw {
    pub mode: TorqueMode,
    tau: f64,
    prev: Option<Vec3>,
    dot: Vec3,
}

impl TorqueLaw {
    pub fn new(mode: TorqueMode) -> Self {
        TorqueLaw { mode, tau: RATE_TAU, prev: None, dot: Vec3::zeros() }
    }

    pub fn compute(
        &mut self,
        omega: &Vec3,
        omega_star: &Vec3,
        dt: f64,
        j: &Mat3,
        gains: &RateGains,
    ) -> Result<Vec3, AttitudeError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(AttitudeError::InvalidStep(dt));
        }
        if let Some(prev) = self.prev {
            let g = dt / (self.tau + dt);
            self.dot += g * ((omega_star - prev) / dt - self.dot);
        }
        self.prev = Some(*omega_star);
        Ok(torque(omega, omega_star, &self.dot, j, gains, self.mode))
    }

    pub fn omega_star_dot(&self) -> Vec3 {
        self.dot
    }
}
