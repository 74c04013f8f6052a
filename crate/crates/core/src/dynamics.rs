//! Rigid-body plant: wind field, Newton–Euler equations and a fixed-step
//! RK4 integrator.
//!
//! Inertial frame is north-east-down (k₀ points down), so gravity is
//! `(0, 0, g0)` and altitude is `-p.z`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airframe::{aero_force_body, thrust_direction, AircraftParams};
use crate::geom3::{reorthonormalize, skew, GeomError, Mat3, Rotation, Vec3};

/// Largest accepted plant step [s].
pub const MAX_DT: f64 = 0.02;
/// Width of the cosine ramp on each gust edge [s].
pub const GUST_RAMP: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("integration step {0} outside (0, {MAX_DT}]")]
    InvalidStep(f64),
    #[error("negative thrust command {0}")]
    NegativeThrust(f64),
    #[error("state diverged: `{0}` is not finite")]
    Divergence(&'static str),
    #[error("attitude repair failed: {0}")]
    Attitude(#[from] GeomError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidState {
    /// Inertial position [m].
    pub p: Vec3,
    /// Inertial velocity [m/s].
    pub v: Vec3,
    /// Body-to-inertial attitude.
    pub r: Rotation,
    /// Body angular rate [rad/s].
    pub omega: Vec3,
}

impl RigidState {
    pub fn at_rest(p: Vec3, r: Rotation) -> Self {
        RigidState { p, v: Vec3::zeros(), r, omega: Vec3::zeros() }
    }

    /// Kinetic plus potential energy (`-m·g0·p₃` with k₀ down).
    pub fn energy(&self, params: &AircraftParams) -> f64 {
        let j = params.inertia_matrix();
        0.5 * params.mass * self.v.norm_squared() + 0.5 * self.omega.dot(&(j * self.omega)) - params.mass * params.g0 * self.p.z
    }
}

/// Thrust magnitude, thrust tilt and body torque applied to the plant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantInput {
    pub thrust: f64,
    pub tilt: f64,
    pub torque: Vec3,
}

/// Steady wind plus periodic gusts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindProfile {
    /// Steady inertial wind [m/s].
    pub steady: Vec3,
    pub gust_magnitude: f64,
    /// Gust length within each period [s].
    pub gust_duration: f64,
    pub gust_period: f64,
    pub gust_direction: Vec3,
}

impl Default for WindProfile {
    fn default() -> Self {
        WindProfile::calm()
    }
}

impl WindProfile {
    pub fn calm() -> Self {
        WindProfile {
            steady: Vec3::zeros(),
            gust_magnitude: 0.0,
            gust_duration: 0.0,
            gust_period: 0.0,
            gust_direction: Vec3::x(),
        }
    }

    /// 3 m/s along ı₀ with 2 m/s gusts lasting 2 s every 10 s.
    pub fn mission() -> Self {
        WindProfile {
            steady: Vec3::new(3.0, 0.0, 0.0),
            gust_magnitude: 2.0,
            gust_duration: 2.0,
            gust_period: 10.0,
            gust_direction: Vec3::x(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.gust_magnitude >= 0.0 && self.gust_duration >= 0.0 && self.gust_period >= 0.0) {
            return Err("gust magnitude, duration and period must be >= 0".into());
        }
        if self.gust_duration > self.gust_period {
            return Err("gust_duration exceeds gust_period".into());
        }
        if self.gust_magnitude > 0.0 && (self.gust_direction.norm() - 1.0).abs() > 1e-9 {
            return Err("gust_direction must be a unit vector".into());
        }
        if !self.steady.iter().all(|x| x.is_finite()) {
            return Err("steady wind must be finite".into());
        }
        Ok(())
    }

    /// Gust envelope in [0, 1]; C¹ thanks to the cosine edges.
    pub fn gust_factor(&self, t: f64) -> f64 {
        if self.gust_magnitude == 0.0 || self.gust_period <= 0.0 || self.gust_duration <= 0.0 {
            return 0.0;
        }
        let phase = t.rem_euclid(self.gust_period);
        let dur = self.gust_duration;
        if phase >= dur {
            return 0.0;
        }
        let ramp = GUST_RAMP.min(0.5 * dur);
        let edge = |x: f64| 0.5 * (1.0 - (PI * x / ramp).cos());
        if phase < ramp {
            edge(phase)
        } else if phase > dur - ramp {
            edge(dur - phase)
        } else {
            1.0
        }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.steady + self.gust_direction * (self.gust_magnitude * self.gust_factor(t))
    }
}

/// Inertial wind velocity at time `t`.
pub fn wind_at(t: f64, profile: &WindProfile) -> Vec3 {
    profile.at(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub p_dot: Vec3,
    pub v_dot: Vec3,
    pub r_dot: Mat3,
    pub omega_dot: Vec3,
}

// Integration state with an unconstrained attitude matrix.
#[derive(Clone, Copy)]
struct Flat {
    p: Vec3,
    v: Vec3,
    r: Mat3,
    w: Vec3,
}

impl Flat {
    fn advance(&self, d: &StateDerivative, h: f64) -> Flat {
        Flat { p: self.p + d.p_dot * h, v: self.v + d.v_dot * h, r: self.r + d.r_dot * h, w: self.w + d.omega_dot * h }
    }
}

fn flat_derivative(
    y: &Flat,
    u: &PlantInput,
    v_w: &Vec3,
    params: &AircraftParams,
    j: &Mat3,
    j_inv: &Mat3,
    disturbance: &Vec3,
) -> StateDerivative {
    let v_a_body = y.r.tr_mul(&(y.v - v_w));
    let force_body = aero_force_body(&v_a_body, params) + thrust_direction(u.tilt) * u.thrust;
    let gravity = Vec3::new(0.0, 0.0, params.g0);
    let jw = j * y.w;
    StateDerivative {
        p_dot: y.v,
        v_dot: gravity + y.r * force_body / params.mass,
        r_dot: y.r * skew(&y.w),
        omega_dot: j_inv * (-y.w.cross(&jw) + u.torque + disturbance),
    }
}

/// Time derivative of the rigid state. Parasitic torques are not modelled;
/// `disturbance` is an optional external body torque.
pub fn derivatives(s: &RigidState, u: &PlantInput, v_w: &Vec3, params: &AircraftParams, disturbance: &Vec3) -> StateDerivative {
    let j = params.inertia_matrix();
    let j_inv = j.try_inverse().expect("inertia validated positive definite");
    let y = Flat { p: s.p, v: s.v, r: *s.r.matrix(), w: s.omega };
    flat_derivative(&y, u, v_w, params, &j, &j_inv, disturbance)
}

/// One RK4 step with the input held constant, followed by attitude repair.
pub fn step(
    s: &RigidState,
    u: &PlantInput,
    t: f64,
    dt: f64,
    wind: &WindProfile,
    params: &AircraftParams,
    disturbance: &Vec3,
) -> Result<RigidState, DynamicsError> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(DynamicsError::InvalidStep(dt));
    }
    if u.thrust < 0.0 {
        return Err(DynamicsError::NegativeThrust(u.thrust));
    }
    let j = params.inertia_matrix();
    let j_inv = j.try_inverse().expect("inertia validated positive definite");
    let y0 = Flat { p: s.p, v: s.v, r: *s.r.matrix(), w: s.omega };
    let (w0, wm, w1) = (wind.at(t), wind.at(t + 0.5 * dt), wind.at(t + dt));
    let f = |y: &Flat, vw: &Vec3| flat_derivative(y, u, vw, params, &j, &j_inv, disturbance);

    let k1 = f(&y0, &w0);
    let k2 = f(&y0.advance(&k1, 0.5 * dt), &wm);
    let k3 = f(&y0.advance(&k2, 0.5 * dt), &wm);
    let k4 = f(&y0.advance(&k3, dt), &w1);
    let h = dt / 6.0;
    let y = Flat {
        p: y0.p + (k1.p_dot + 2.0 * k2.p_dot + 2.0 * k3.p_dot + k4.p_dot) * h,
        v: y0.v + (k1.v_dot + 2.0 * k2.v_dot + 2.0 * k3.v_dot + k4.v_dot) * h,
        r: y0.r + (k1.r_dot + 2.0 * k2.r_dot + 2.0 * k3.r_dot + k4.r_dot) * h,
        w: y0.w + (k1.omega_dot + 2.0 * k2.omega_dot + 2.0 * k3.omega_dot + k4.omega_dot) * h,
    };

    let finite = |x: &[f64]| x.iter().all(|c| c.is_finite());
    if !finite(y.p.as_slice()) {
        return Err(DynamicsError::Divergence("p"));
    }
    if !finite(y.v.as_slice()) {
        return Err(DynamicsError::Divergence("v"));
    }
    if !finite(y.r.as_slice()) {
        return Err(DynamicsError::Divergence("R"));
    }
    if !finite(y.w.as_slice()) {
        return Err(DynamicsError::Divergence("omega"));
    }
    Ok(RigidState { p: y.p, v: y.v, r: reorthonormalize(&y.r)?, omega: y.w })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn level() -> Rotation {
        Rotation::identity()
    }

    #[test]
    fn wind_examples() {
        let w = WindProfile::mission();
        assert!((wind_at(5.0, &w) - Vec3::new(3.0, 0.0, 0.0)).norm() < 1e-15);
        assert!((wind_at(11.0, &w) - Vec3::new(5.0, 0.0, 0.0)).norm() < 1e-15);
        let calm = WindProfile::calm();
        for t in [0.0, 1.0, 10.5, 1e4] {
            assert_eq!(wind_at(t, &calm), Vec3::zeros());
        }
    }

    #[test]
    fn gust_edges_are_smooth() {
        let w = WindProfile::mission();
        assert_eq!(w.gust_factor(10.0), 0.0);
        assert!((w.gust_factor(10.1) - 0.5).abs() < 1e-12);
        assert_eq!(w.gust_factor(10.2), 1.0);
        assert!((w.gust_factor(11.9) - 0.5).abs() < 1e-12);
        assert_eq!(w.gust_factor(12.0), 0.0);
        // numerical slope stays bounded through the edges
        let h = 1e-6;
        let mut max_slope = 0.0f64;
        let mut t = 9.5;
        while t < 12.5 {
            max_slope = max_slope.max(((w.gust_factor(t + h) - w.gust_factor(t)) / h).abs());
            t += 1e-3;
        }
        assert!(max_slope <= PI / (2.0 * GUST_RAMP) + 1e-3);
        assert!(WindProfile { gust_duration: 11.0, ..WindProfile::mission() }.validate().is_err());
    }

    #[test]
    fn hover_is_a_fixed_point() {
        let p = AircraftParams::eflite_like();
        let s = RigidState::at_rest(Vec3::new(1.0, 2.0, -10.0), level());
        let u = PlantInput { thrust: p.mass * p.g0, tilt: 0.0, torque: Vec3::zeros() };
        let d = derivatives(&s, &u, &Vec3::zeros(), &p, &Vec3::zeros());
        assert_eq!(d.p_dot, Vec3::zeros());
        assert!(d.v_dot.norm() < 1e-15);
        assert_eq!(d.r_dot, Mat3::zeros());
        assert_eq!(d.omega_dot, Vec3::zeros());

        let wind = WindProfile::calm();
        let next = step(&s, &u, 0.0, 0.001, &wind, &p, &Vec3::zeros()).unwrap();
        assert!((next.p - s.p).norm() < 1e-12);
        assert!(next.v.norm() < 1e-12);
        assert!((next.r.matrix() - s.r.matrix()).abs().max() < 1e-12);
    }

    #[test]
    fn free_fall_and_pure_spin() {
        let p = AircraftParams::eflite_like();
        let s = RigidState::at_rest(Vec3::zeros(), level());
        let d = derivatives(&s, &PlantInput::default(), &Vec3::zeros(), &p, &Vec3::zeros());
        assert!((d.v_dot - Vec3::new(0.0, 0.0, 9.81)).norm() < 1e-15);

        let spin = RigidState { omega: Vec3::new(1.0, 0.0, 0.0), ..s };
        let d = derivatives(&spin, &PlantInput::default(), &Vec3::zeros(), &p, &Vec3::zeros());
        assert_eq!(d.omega_dot, Vec3::zeros());
    }

    #[test]
    fn free_fall_one_second_matches_ballistic() {
        // Oracle: v₃(t) = g0·t. Aero is zeroed so the trajectory is purely ballistic.
        let mut p = AircraftParams::eflite_like();
        p.c0 = 0.0;
        p.c0_bar = 0.0;
        p.c_lat = 0.0;
        let wind = WindProfile::calm();
        let mut s = RigidState::at_rest(Vec3::zeros(), level());
        let dt = 0.001;
        for k in 0..1000 {
            s = step(&s, &PlantInput::default(), k as f64 * dt, dt, &wind, &p, &Vec3::zeros()).unwrap();
        }
        assert!((s.v.z - 9.81).abs() < 1e-6);
        assert!((s.p.z - 0.5 * 9.81).abs() < 1e-6);
    }

    #[test]
    fn torque_free_spin_conserves_angular_momentum() {
        // Symmetric top: J = diag(0.02, 0.02, 0.04), spin tilted off the symmetry axis.
        let mut p = AircraftParams::eflite_like();
        p.inertia = [[0.02, 0.0, 0.0], [0.0, 0.02, 0.0], [0.0, 0.0, 0.04]];
        let j = p.inertia_matrix();
        let wind = WindProfile::calm();
        let mut s = RigidState {
            omega: Vec3::new(0.5, 0.2, 3.0),
            ..RigidState::at_rest(Vec3::zeros(), Rotation::from_euler(0.1, 0.2, 0.3))
        };
        let h0 = s.r.to_inertial(&(j * s.omega));
        let dt = 0.001;
        for k in 0..10_000 {
            s = step(&s, &PlantInput::default(), k as f64 * dt, dt, &wind, &p, &Vec3::zeros()).unwrap();
            let orth = (s.r.matrix().transpose() * s.r.matrix() - Mat3::identity()).abs().max();
            assert!(orth < 1e-9);
        }
        let h = s.r.to_inertial(&(j * s.omega));
        assert!(((j * s.omega).norm() - h0.norm()).abs() < 1e-6);
        assert!((h - h0).norm() < 1e-6);
    }

    #[test]
    fn energy_is_conserved_without_aero_or_inputs() {
        let mut p = AircraftParams::eflite_like();
        p.c0 = 0.0;
        p.c0_bar = 0.0;
        p.c_lat = 0.0;
        let wind = WindProfile::calm();
        let mut s = RigidState {
            p: Vec3::new(0.0, 0.0, -50.0),
            v: Vec3::new(3.0, -1.0, 0.5),
            r: Rotation::from_euler(0.4, -0.3, 1.0),
            omega: Vec3::new(0.7, -1.1, 0.4),
        };
        let e0 = s.energy(&p);
        let dt = 0.001;
        for k in 0..10_000 {
            s = step(&s, &PlantInput::default(), k as f64 * dt, dt, &wind, &p, &Vec3::zeros()).unwrap();
        }
        assert!(((s.energy(&p) - e0) / e0.abs()).abs() < 1e-5);
    }

    #[test]
    fn airspeed_decays_in_still_air() {
        let p = AircraftParams::eflite_like();
        let wind = WindProfile::calm();
        // Level attitude with T = m·g0 cancels gravity, leaving only drag.
        let mut s = RigidState { p: Vec3::zeros(), v: Vec3::new(8.0, 3.0, -1.0), r: level(), omega: Vec3::zeros() };
        let u = PlantInput { thrust: p.mass * p.g0, tilt: 0.0, torque: Vec3::zeros() };
        let mut last = s.v.norm();
        for k in 0..2000 {
            s = step(&s, &u, k as f64 * 0.001, 0.001, &wind, &p, &Vec3::zeros()).unwrap();
            assert!(s.v.norm() <= last + 1e-12);
            last = s.v.norm();
        }
    }

    #[test]
    fn step_rejects_bad_inputs() {
        let p = AircraftParams::eflite_like();
        let s = RigidState::at_rest(Vec3::zeros(), level());
        let w = WindProfile::calm();
        let z = Vec3::zeros();
        assert_eq!(step(&s, &PlantInput::default(), 0.0, 0.05, &w, &p, &z), Err(DynamicsError::InvalidStep(0.05)));
        let neg = PlantInput { thrust: -1.0, ..Default::default() };
        assert!(matches!(step(&s, &neg, 0.0, 0.001, &w, &p, &z), Err(DynamicsError::NegativeThrust(_))));
        let bad = RigidState { v: Vec3::new(f64::NAN, 0.0, 0.0), ..s };
        assert_eq!(step(&bad, &PlantInput::default(), 0.0, 0.001, &w, &p, &z), Err(DynamicsError::Divergence("p")));
    }
}
