//! Vehicle parameters and the aerodynamic force model.
//!
//! The default parameter set (`eflite_like`) is synthetic: it has the
//! geometry of a small tri-tilt-rotor but the numbers are not measured
//! airframe data.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Matrix2x3, SMatrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom3::{Mat3, Vec3};

/// Lower rotor-tilt limit [rad].
pub const TILT_MIN: f64 = -PI / 15.0;
/// Upper rotor-tilt limit [rad].
pub const TILT_MAX: f64 = PI / 2.0;
/// Airspeed below which α and β are not defined [m/s].
pub const SPEED_FLOOR: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("invalid aircraft parameter `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("mixing matrix is singular (|det D| = {0:.3e})")]
    SingularMixer(f64),
    #[error("cannot read parameter file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse parameter file: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Physical and actuator parameters.
///
/// Serialized as a flat JSON object; absent keys take the `eflite_like`
/// value, unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AircraftParams {
    /// Mass [kg].
    pub mass: f64,
    /// Inertia about the centre of mass, row-major [kg·m²].
    pub inertia: [[f64; 3]; 3],
    /// Gravity [m/s²].
    pub g0: f64,
    /// Longitudinal drag coefficient [N·s²/m²].
    pub c0: f64,
    /// Normal-force coefficient [N·s²/m²].
    pub c0_bar: f64,
    /// Lateral damping coefficient [N·s²/m²].
    pub c_lat: f64,
    /// Front rotor thrust constant [N·s²].
    pub mu12: f64,
    /// Rear rotor thrust constant [N·s²].
    pub mu3: f64,
    /// Longitudinal arm of the front rotors [m].
    pub r1: f64,
    /// Lateral arm of the front rotors [m].
    pub r2: f64,
    /// Longitudinal arm of the rear rotor [m].
    pub r3: f64,
    /// Drag-torque to thrust ratio of the front rotors [m].
    pub nu12: f64,
    pub nu3: f64,
    /// Surface effectiveness: δ = A·Γ_a / |v_a|², rows = surfaces.
    pub surface_matrix: [[f64; 3]; 2],
    /// Rotor speed limits [rad/s].
    pub w_min: f64,
    pub w_max: f64,
    /// Symmetric surface deflection limit [rad].
    pub surface_limit: f64,
}

impl Default for AircraftParams {
    fn default() -> Self {
        Self::eflite_like()
    }
}

impl AircraftParams {
    /// Synthetic tri-tilt-rotor parameter set.
    pub fn eflite_like() -> Self {
        AircraftParams {
            mass: 1.0,
            inertia: [[0.02, 0.0, 0.0], [0.0, 0.03, 0.0], [0.0, 0.0, 0.04]],
            g0: 9.81,
            c0: 0.05,
            c0_bar: 0.5,
            c_lat: 0.2,
            mu12: 1e-5,
            mu3: 1e-5,
            r1: 0.2,
            r2: 0.2,
            r3: 0.4,
            nu12: 0.02,
            nu3: 0.02,
            surface_matrix: [[0.5, 0.0, 0.0], [0.0, 0.5, 0.0]],
            w_min: 50.0,
            w_max: 1100.0,
            surface_limit: 0.5,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self, ParamError> {
        let p: AircraftParams = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ParamError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn inertia_matrix(&self) -> Mat3 {
        let j = &self.inertia;
        Mat3::new(j[0][0], j[0][1], j[0][2], j[1][0], j[1][1], j[1][2], j[2][0], j[2][1], j[2][2])
    }

    pub fn surface_map(&self) -> Matrix2x3<f64> {
        let a = &self.surface_matrix;
        Matrix2x3::new(a[0][0], a[0][1], a[0][2], a[1][0], a[1][1], a[1][2])
    }

    /// The 5×5 rotor mixing matrix mapping
    /// (X1..X5) = (u1 cos ϑ1, u2 cos ϑ2, u1 sin ϑ1, u2 sin ϑ2, u3)
    /// to (T sin ϑ, T cos ϑ, Γ_m).
    pub fn mixer(&self) -> SMatrix<f64, 5, 5> {
        let (r1, r2, r3, n12, n3) = (self.r1, self.r2, self.r3, self.nu12, self.nu3);
        SMatrix::<f64, 5, 5>::from_row_slice(&[
            0.0, 0.0, 1.0, 1.0, 0.0, //
            1.0, 1.0, 0.0, 0.0, 1.0, //
            -r2, r2, n12, -n12, 0.0, //
            r1, r1, 0.0, 0.0, -r3, //
            -n12, n12, -r2, r2, -n3,
        ])
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        fn positive(field: &'static str, v: f64) -> Result<(), ParamError> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ParamError::Invalid { field, reason: format!("must be > 0, got {v}") })
            }
        }
        positive("mass", self.mass)?;
        positive("g0", self.g0)?;
        positive("c0", self.c0)?;
        positive("c0_bar", self.c0_bar)?;
        positive("c_lat", self.c_lat)?;
        positive("mu12", self.mu12)?;
        positive("mu3", self.mu3)?;
        positive("r1", self.r1)?;
        positive("r2", self.r2)?;
        positive("r3", self.r3)?;
        positive("nu12", self.nu12)?;
        positive("nu3", self.nu3)?;
        positive("w_max", self.w_max)?;
        positive("surface_limit", self.surface_limit)?;
        if !(self.w_min >= 0.0 && self.w_min < self.w_max) {
            return Err(ParamError::Invalid {
                field: "w_min",
                reason: format!("need 0 <= w_min < w_max, got {} / {}", self.w_min, self.w_max),
            });
        }
        let j = self.inertia_matrix();
        if (j - j.transpose()).abs().max() > 1e-12 {
            return Err(ParamError::Invalid { field: "inertia", reason: "not symmetric".into() });
        }
        if j.cholesky().is_none() {
            return Err(ParamError::Invalid { field: "inertia", reason: "not positive definite".into() });
        }
        if self.surface_matrix.iter().flatten().any(|x| !x.is_finite()) {
            return Err(ParamError::Invalid { field: "surface_matrix", reason: "non-finite entry".into() });
        }
        let det = self.mixer().determinant();
        if det.abs() <= 1e-9 {
            return Err(ParamError::SingularMixer(det));
        }
        Ok(())
    }

    /// Copy with the three aerodynamic coefficients scaled (plant mismatch).
    pub fn with_aero_scale(&self, scale: f64) -> Self {
        AircraftParams { c0: self.c0 * scale, c0_bar: self.c0_bar * scale, c_lat: self.c_lat * scale, ..self.clone() }
    }
}

/// Aerodynamic force in body coordinates for a body-frame air velocity.
///
/// `F = -(c0·va1·ı + c̄0·va3·k)|va| - c_lat·|va|·va2·ȷ`
pub fn aero_force_body(v_a: &Vec3, params: &AircraftParams) -> Vec3 {
    let s = v_a.norm();
    -Vec3::new(params.c0 * v_a.x, params.c_lat * v_a.y, params.c0_bar * v_a.z) * s
}

/// Unit thrust direction `sinϑ·ı − cosϑ·k` in body coordinates.
pub fn thrust_direction(theta: f64) -> Vec3 {
    Vec3::new(theta.sin(), 0.0, -theta.cos())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AirflowAngles {
    /// Angle of attack [rad].
    pub alpha: f64,
    /// Sideslip [rad].
    pub beta: f64,
    /// |v_a| [m/s].
    pub speed: f64,
    /// False below [`SPEED_FLOOR`]; alpha and beta are then reported as 0.
    pub defined: bool,
}

pub fn airflow_angles(v_a: &Vec3) -> AirflowAngles {
    let speed = v_a.norm();
    if speed < SPEED_FLOOR {
        return AirflowAngles { alpha: 0.0, beta: 0.0, speed, defined: false };
    }
    AirflowAngles { alpha: (v_a.z / speed).clamp(-1.0, 1.0).asin(), beta: v_a.y.atan2(v_a.x.abs()), speed, defined: true }
}
