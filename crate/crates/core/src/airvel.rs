//! Air-velocity estimation from inertial velocity, attitude, body rate and a
//! single longitudinal pitot reading.
//!
//! The vertical component assumes horizontal wind and small sideslip; the
//! lateral component is a stable first-order mimic of the sideslip dynamics.
//! Below the pitot threshold the estimate is the null vector.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom3::{Rotation, Vec3};

/// Smallest |k₀·k| for which the vertical estimate is computed.
pub const VERTICAL_GUARD: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("attitude too close to vertical for the air-velocity estimate (k0·k = {0:.3})")]
    NearVertical(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AirVelConfig {
    /// Rising threshold on the pitot reading [m/s].
    pub pitot_min: f64,
    /// The estimate drops out below `pitot_min - pitot_hysteresis`.
    pub pitot_hysteresis: f64,
    /// Lateral estimator gain [1/s].
    pub k_va2: f64,
}

impl Default for AirVelConfig {
    fn default() -> Self {
        AirVelConfig { pitot_min: 2.0, pitot_hysteresis: 0.5, k_va2: 1.0 }
    }
}

impl AirVelConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.pitot_min > 0.0 && self.pitot_hysteresis >= 0.0 && self.pitot_hysteresis < self.pitot_min) {
            return Err("need pitot_min > pitot_hysteresis >= 0".into());
        }
        if self.k_va2.is_nan() || self.k_va2 <= 0.0 {
            return Err("k_va2 must be > 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AirVelEstimate {
    /// Estimated air velocity in body coordinates [m/s].
    pub v_a_hat: Vec3,
    pub pitot_valid: bool,
    /// Internal lateral state [m/s].
    pub v_a2_state: f64,
}

/// `v̂a3 = k₀·(v − va1·ı) / (k₀·k)`.
pub fn estimate_va3(v: &Vec3, r: &Rotation, v_a1: f64) -> Result<f64, EstimatorError> {
    let m = r.matrix();
    let k0_dot_k = m[(2, 2)];
    if k0_dot_k.abs() <= VERTICAL_GUARD {
        return Err(EstimatorError::NearVertical(k0_dot_k));
    }
    Ok((v.z - v_a1 * m[(2, 0)]) / k0_dot_k)
}

/// Forward-Euler step of `v̂̇a2 = g·ȷ + (v̂a3·ω₁ − va1·ω₃) − k·v̂a2`.
#[allow(clippy::too_many_arguments)]
pub fn step_va2(state: f64, v_a1: f64, va3_hat: f64, omega: &Vec3, r: &Rotation, g0: f64, k_gain: f64, dt: f64) -> f64 {
    let g_dot_j = g0 * r.matrix()[(2, 1)];
    state + dt * (g_dot_j + (va3_hat * omega.x - v_a1 * omega.z) - k_gain * state)
}

/// Stateful estimator with pitot-validity hysteresis.
#[derive(Debug, Clone)]
pub struct AirVelEstimator {
    pub config: AirVelConfig,
    pub g0: f64,
    valid: bool,
    va2: f64,
}

impl AirVelEstimator {
    pub fn new(config: AirVelConfig, g0: f64) -> Self {
        AirVelEstimator { config, g0, valid: false, va2: 0.0 }
    }

    pub fn is_valid(&self) -> bool {
        self.valid
    }

    pub fn lateral_state(&self) -> f64 {
        self.va2
    }

    /// Processes one sample. An attitude too close to vertical invalidates
    /// the pitot channel before the error is returned.
    pub fn update(
        &mut self,
        v: &Vec3,
        r: &Rotation,
        omega: &Vec3,
        pitot: f64,
        dt: f64,
    ) -> Result<AirVelEstimate, EstimatorError> {
        let threshold = if self.valid { self.config.pitot_min - self.config.pitot_hysteresis } else { self.config.pitot_min };
        self.valid = pitot >= threshold;
        if !self.valid {
            self.va2 = 0.0;
            return Ok(AirVelEstimate { v_a_hat: Vec3::zeros(), pitot_valid: false, v_a2_state: 0.0 });
        }
        let va3 = match estimate_va3(v, r, pitot) {
            Ok(x) => x,
            Err(e) => {
                self.valid = false;
                self.va2 = 0.0;
                return Err(e);
            }
        };
        self.va2 = step_va2(self.va2, pitot, va3, omega, r, self.g0, self.config.k_va2, dt);
        Ok(AirVelEstimate { v_a_hat: Vec3::new(pitot, self.va2, va3), pitot_valid: true, v_a2_state: self.va2 })
    }
}
