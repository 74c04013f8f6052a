//! Desired body frame, angle of attack, thrust tilt and intensity.
//!
//! Everything here is expressed in inertial (NED) coordinates. Two frame
//! constructions coexist: the high-speed one built around the air velocity
//! and the acceleration demand, and the low-speed one built around a desired
//! pitch. A smooth weight blends their angles of attack across the transition.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airframe::{AircraftParams, SPEED_FLOOR};
use crate::geom3::{Rotation, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("air velocity and acceleration demand are aligned (|va x a| = {cross:.3e})")]
    Singular { cross: f64 },
    #[error("body heading is vertical; desired pitch frame undefined")]
    HeadingUndefined,
    #[error("acceleration demand is parallel to the desired heading")]
    AccelerationDegenerate,
    #[error("angle of attack is indeterminate for the requested tilt")]
    Indeterminate,
    #[error("thrust direction is indeterminate (both projections vanish)")]
    IndeterminateThrust,
    #[error("invalid frame configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    LowSpeed,
    Transition,
    HighSpeed,
}

impl Regime {
    pub fn code(self) -> u8 {
        match self {
            Regime::LowSpeed => 0,
            Regime::Transition => 1,
            Regime::HighSpeed => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelTriple {
    pub a: Vec3,
    pub d: Vec3,
    pub e: Vec3,
}

/// `a = m(ξ − g)`, `d = a + c0|va|va`, `e = a + c̄0|va|va`.
pub fn accel_triple(xi: &Vec3, v_a: &Vec3, params: &AircraftParams) -> AccelTriple {
    let a = params.mass * (xi - params.g0 * Vec3::z());
    let q = v_a.norm() * v_a;
    AccelTriple { a, d: a + params.c0 * q, e: a + params.c0_bar * q }
}

fn cross_guard(v_a: &Vec3, a: &Vec3) -> f64 {
    1e-3 * v_a.norm() * a.norm()
}

/// `ȷ̄ = (va × a)/|va × a|`.
pub fn jbar_highspeed(a: &Vec3, v_a: &Vec3) -> Result<Vec3, FrameError> {
    let c = v_a.cross(a);
    let n = c.norm();
    let guard = cross_guard(v_a, a);
    if n.is_nan() || guard.is_nan() || n <= guard || n == 0.0 {
        return Err(FrameError::Singular { cross: n });
    }
    Ok(c / n)
}

/// Angle of attack minimising the thrust intensity.
pub fn alpha_min_thrust(a: &Vec3, v_a: &Vec3, params: &AircraftParams) -> f64 {
    let s = v_a.cross(a).norm();
    let speed = v_a.norm();
    0.5 * s.atan2(a.dot(v_a) + 0.5 * (params.c0 + params.c0_bar) * speed.powi(3))
}

/// Angle of attack consistent with a prescribed thrust tilt.
pub fn alpha_from_tilt(theta: f64, a: &Vec3, v_a: &Vec3, params: &AircraftParams) -> Result<f64, FrameError> {
    let s = v_a.cross(a).norm();
    let av = a.dot(v_a);
    let v3 = v_a.norm().powi(3);
    let (st, ct) = theta.sin_cos();
    let num = st * s - ct * (av + params.c0 * v3);
    let den = ct * s + st * (av + params.c0_bar * v3);
    if num.abs() < 1e-12 && den.abs() < 1e-12 {
        return Err(FrameError::Indeterminate);
    }
    Ok(num.atan2(den))
}

/// Orthonormal desired axes (inertial coordinates).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axes {
    pub i: Vec3,
    pub j: Vec3,
    pub k: Vec3,
}

impl Axes {
    pub fn rotation(&self) -> Rotation {
        Rotation::from_axes(&self.i, &self.j, &self.k).unwrap_or_default()
    }
}

/// `ī = cosα·v̂ + sinα·(ȷ̄×v̂)`, `k̄ = sinα·v̂ − cosα·(ȷ̄×v̂)`.
pub fn frame_highspeed(a: &Vec3, v_a: &Vec3, alpha: f64) -> Result<Axes, FrameError> {
    let j = jbar_highspeed(a, v_a)?;
    let vh = v_a.normalize();
    let w = j.cross(&vh);
    let (sa, ca) = alpha.sin_cos();
    Ok(Axes { i: ca * vh + sa * w, j, k: sa * vh - ca * w })
}

/// Unfiltered desired heading for pitch `theta_d` given the current body x axis.
pub fn i_d_raw(theta_d: f64, i_current: &Vec3) -> Result<Vec3, FrameError> {
    let h = Vec3::new(i_current.x, i_current.y, 0.0);
    let n = h.norm();
    if n < 1e-6 {
        return Err(FrameError::HeadingUndefined);
    }
    Ok(theta_d.cos() * h / n - theta_d.sin() * Vec3::z())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowSpeedFrame {
    pub i_d: Vec3,
    pub k_bar: Vec3,
    /// Regularised, not unit: `|j_d| < 1`, zero in still air.
    pub j_d: Vec3,
    /// Full frame when `|va| ≥ σ`; otherwise `ī = i_d`, `ȷ̄ = k̄ × i_d`.
    pub axes: Axes,
    pub complete: bool,
    pub alpha: f64,
}

pub fn frame_lowspeed(i_d: &Vec3, a: &Vec3, v_a: &Vec3, eps: f64, sigma: f64) -> Result<LowSpeedFrame, FrameError> {
    let pa = a - a.dot(i_d) * i_d;
    let n = pa.norm();
    if n < 1e-6 {
        return Err(FrameError::AccelerationDegenerate);
    }
    let k_bar = -pa / n;
    let kv = k_bar.cross(v_a);
    let j_d = kv / (eps + kv.norm());
    let speed = v_a.norm();
    let alpha = if speed > SPEED_FLOOR { (v_a.dot(&k_bar) / speed).clamp(-1.0, 1.0).asin() } else { 0.0 };
    let jn = j_d.norm();
    let (axes, complete) = if speed >= sigma && jn > 1e-9 {
        let j = j_d / jn;
        (Axes { i: j.cross(&k_bar), j, k: k_bar }, true)
    } else {
        (Axes { i: *i_d, j: k_bar.cross(i_d), k: k_bar }, false)
    };
    Ok(LowSpeedFrame { i_d: *i_d, k_bar, j_d, axes, complete, alpha })
}

/// Non-increasing C¹ weight: 1 up to `lo`, 0 from `hi`, smoothstep between.
pub fn smooth_weight(x: f64, lo: f64, hi: f64) -> f64 {
    if x <= lo {
        1.0
    } else if x >= hi {
        0.0
    } else {
        let s = (x - lo) / (hi - lo);
        1.0 - 3.0 * s * s + 2.0 * s * s * s
    }
}

/// Returns `(α, λ)` with `α = λ·α_l + (1 − λ)·α_h`.
pub fn blend_alpha(speed: f64, alpha_l: f64, alpha_h: f64, sigma_m: f64, sigma_big_m: f64) -> (f64, f64) {
    let lambda = smooth_weight(speed, sigma_m, sigma_big_m);
    (lambda * alpha_l + (1.0 - lambda) * alpha_h, lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TiltThrust {
    pub theta: f64,
    pub thrust: f64,
}

/// `ϑ = atan2(d·i*, −e·k̄)`, `T = sinϑ(d·i*) − cosϑ(e·k̄) ≥ 0`.
pub fn tilt_thrust(d: &Vec3, e: &Vec3, i_star: &Vec3, k_bar: &Vec3) -> Result<TiltThrust, FrameError> {
    let di = d.dot(i_star);
    let ek = e.dot(k_bar);
    if di == 0.0 && ek == 0.0 {
        return Err(FrameError::IndeterminateThrust);
    }
    let theta = di.atan2(-ek);
    Ok(TiltThrust { theta, thrust: theta.sin() * di - theta.cos() * ek })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SecondaryPolicy {
    MinThrust,
    /// Tilt as a piecewise-linear function of airspeed, `[speed, tilt_rad]`.
    TiltSchedule {
        table: Vec<[f64; 2]>,
    },
}

impl SecondaryPolicy {
    fn scheduled_tilt(table: &[[f64; 2]], speed: f64) -> f64 {
        match table.iter().position(|r| r[0] > speed) {
            None => table[table.len() - 1][1],
            Some(0) => table[0][1],
            Some(k) => {
                let ([x0, y0], [x1, y1]) = (table[k - 1], table[k]);
                y0 + (y1 - y0) * (speed - x0) / (x1 - x0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameConfig {
    pub policy: SecondaryPolicy,
    pub sigma_m: f64,
    pub sigma_big_m: f64,
    pub hysteresis: f64,
    /// Regulariser of the low-speed lateral axis [m/s].
    pub eps: f64,
    /// Airspeed from which the low-speed frame is complete [m/s].
    pub sigma: f64,
    pub theta_d: f64,
    /// Time constant of the desired-heading filter [s].
    pub tau_heading: f64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            policy: SecondaryPolicy::MinThrust,
            sigma_m: 3.0,
            sigma_big_m: 9.0,
            hysteresis: 0.25,
            eps: 0.1,
            sigma: 1.0,
            theta_d: 0.0,
            tau_heading: 0.25,
        }
    }
}

impl FrameConfig {
    pub fn validate(&self) -> Result<(), FrameError> {
        let bad = |m: &str| Err(FrameError::Config(m.to_string()));
        if !(self.sigma_m > 0.0 && self.sigma_big_m > self.sigma_m) {
            return bad("need 0 < sigma_m < sigma_big_m");
        }
        if !(self.hysteresis >= 0.0 && self.hysteresis < self.sigma_m) {
            return bad("hysteresis must lie in [0, sigma_m)");
        }
        if !(self.eps > 0.0 && self.sigma > 0.0 && self.tau_heading > 0.0) {
            return bad("eps, sigma and tau_heading must be positive");
        }
        if self.theta_d.is_nan() || self.theta_d.abs() >= std::f64::consts::FRAC_PI_2 {
            return bad("theta_d must lie in (-pi/2, pi/2)");
        }
        if let SecondaryPolicy::TiltSchedule { table } = &self.policy {
            if table.is_empty() || table.windows(2).any(|w| w[1][0] <= w[0][0]) {
                return bad("tilt schedule must be non-empty with increasing speeds");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesiredFrame {
    pub axes: Axes,
    pub alpha: f64,
    pub regime: Regime,
    pub theta_d: f64,
    pub lambda_val: f64,
    /// Low-speed lateral axis, used unnormalised by the low-speed rate law.
    pub j_d: Vec3,
    /// False when the low-speed lateral axis is undefined.
    pub complete: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameOutput {
    pub frame: DesiredFrame,
    pub tilt: TiltThrust,
    pub accel: AccelTriple,
    /// High-speed construction failed this cycle; low-speed frame used.
    pub fallback: bool,
}

/// Stateful frame selection: regime hysteresis and desired-heading filter.
#[derive(Debug, Clone)]
pub struct FrameSelector {
    pub config: FrameConfig,
    regime: Regime,
    i_d: Option<Vec3>,
    fallbacks: u64,
}

impl FrameSelector {
    pub fn new(config: FrameConfig) -> Self {
        FrameSelector { config, regime: Regime::LowSpeed, i_d: None, fallbacks: 0 }
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn fallback_count(&self) -> u64 {
        self.fallbacks
    }

    fn update_regime(&mut self, speed: f64) -> Regime {
        let c = &self.config;
        let low = match self.regime {
            Regime::LowSpeed => speed < c.sigma_m + c.hysteresis,
            _ => speed < c.sigma_m - c.hysteresis,
        };
        self.regime = if low {
            Regime::LowSpeed
        } else if speed >= c.sigma_big_m {
            Regime::HighSpeed
        } else {
            Regime::Transition
        };
        self.regime
    }

    fn filtered_heading(&mut self, r: &Rotation, dt: f64) -> Result<Vec3, FrameError> {
        let raw = match i_d_raw(self.config.theta_d, &r.i_axis()) {
            Ok(x) => x,
            Err(e) => return self.i_d.ok_or(e),
        };
        let next = match self.i_d {
            None => raw,
            Some(prev) => {
                let g = dt / (self.config.tau_heading + dt);
                let x = prev + g * (raw - prev);
                if x.norm() < 1e-6 {
                    raw
                } else {
                    x.normalize()
                }
            }
        };
        self.i_d = Some(next);
        Ok(next)
    }

    fn alpha_high(&self, a: &Vec3, v_a: &Vec3, params: &AircraftParams) -> Result<f64, FrameError> {
        match &self.config.policy {
            SecondaryPolicy::MinThrust => Ok(alpha_min_thrust(a, v_a, params)),
            SecondaryPolicy::TiltSchedule { table } => {
                alpha_from_tilt(SecondaryPolicy::scheduled_tilt(table, v_a.norm()), a, v_a, params)
            }
        }
    }

    /// One control cycle. `v_a` is the (estimated) air velocity, inertial.
    pub fn select(
        &mut self,
        xi: &Vec3,
        v_a: &Vec3,
        r: &Rotation,
        params: &AircraftParams,
        dt: f64,
    ) -> Result<FrameOutput, FrameError> {
        let accel = accel_triple(xi, v_a, params);
        let speed = v_a.norm();
        let regime = self.update_regime(speed);
        let i_d = self.filtered_heading(r, dt)?;
        let low = frame_lowspeed(&i_d, &accel.a, v_a, self.config.eps, self.config.sigma)?;
        let theta_d = self.config.theta_d;

        let low_output = |fallback: bool| -> Result<FrameOutput, FrameError> {
            let tilt = tilt_thrust(&accel.d, &accel.e, &low.i_d, &low.k_bar)?;
            Ok(FrameOutput {
                frame: DesiredFrame {
                    axes: low.axes,
                    alpha: low.alpha,
                    regime: Regime::LowSpeed,
                    theta_d,
                    lambda_val: 1.0,
                    j_d: low.j_d,
                    complete: low.complete,
                },
                tilt,
                accel,
                fallback,
            })
        };

        if regime == Regime::LowSpeed {
            return low_output(false);
        }
        let high = self.alpha_high(&accel.a, v_a, params).and_then(|alpha_h| {
            let (alpha, lambda) = blend_alpha(speed, low.alpha, alpha_h, self.config.sigma_m, self.config.sigma_big_m);
            frame_highspeed(&accel.a, v_a, alpha).map(|axes| (axes, alpha, lambda))
        });
        match high {
            Ok((axes, alpha, lambda_val)) => {
                let tilt = tilt_thrust(&accel.d, &accel.e, &axes.i, &axes.k)?;
                Ok(FrameOutput {
                    frame: DesiredFrame { axes, alpha, regime, theta_d, lambda_val, j_d: low.j_d, complete: true },
                    tilt,
                    accel,
                    fallback: false,
                })
            }
            Err(FrameError::Singular { .. }) | Err(FrameError::Indeterminate) => {
                self.fallbacks += 1;
                low_output(true)
            }
            Err(e) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn params() -> AircraftParams {
        AircraftParams::eflite_like()
    }

    /// Thrust intensity for a given α, evaluated through the frame.
    fn thrust_at(alpha: f64, a: &Vec3, v_a: &Vec3, p: &AircraftParams) -> f64 {
        let t = accel_triple(&(a / p.mass + p.g0 * Vec3::z()), v_a, p);
        let f = frame_highspeed(a, v_a, alpha).unwrap();
        let di = t.d.dot(&f.i);
        let ek = t.e.dot(&f.k);
        (di * di + ek * ek).sqrt()
    }

    #[test]
    fn accel_triple_examples() {
        let p = params();
        let t = accel_triple(&Vec3::zeros(), &Vec3::zeros(), &p);
        let g = Vec3::new(0.0, 0.0, -9.81);
        assert_eq!((t.a, t.d, t.e), (g, g, g));
        let t = accel_triple(&Vec3::zeros(), &Vec3::new(10.0, 0.0, 0.0), &p);
        assert!((t.d - Vec3::new(5.0, 0.0, -9.81)).norm() < 1e-12);
        let sym = AircraftParams { c0_bar: p.c0, ..p.clone() };
        let t = accel_triple(&Vec3::new(1.0, 2.0, 3.0), &Vec3::new(4.0, -1.0, 2.0), &sym);
        assert_eq!(t.d, t.e);
    }

    #[test]
    fn jbar_examples() {
        let j = jbar_highspeed(&Vec3::new(0.0, 0.0, -1.0), &Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((j - Vec3::y()).norm() < 1e-15);
        assert!(matches!(
            jbar_highspeed(&Vec3::new(0.0, 0.0, -2.0), &Vec3::new(0.0, 0.0, 5.0)),
            Err(FrameError::Singular { .. })
        ));
    }

    #[test]
    fn alpha_min_thrust_examples() {
        let p = params();
        assert_eq!(alpha_min_thrust(&Vec3::new(3.0, 0.0, 0.0), &Vec3::new(2.0, 0.0, 0.0), &p), 0.0);
        // a·va = −½(c0+c̄0)|va|³ with a cross component
        let v = Vec3::new(2.0, 0.0, 0.0);
        let ax = -0.5 * (p.c0 + p.c0_bar) * 8.0 / 2.0;
        let al = alpha_min_thrust(&Vec3::new(ax, 0.0, -4.0), &v, &p);
        assert!((al - FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn highspeed_frame_examples() {
        let a = Vec3::new(0.3, -0.2, -9.0);
        let v = Vec3::new(8.0, 3.0, 0.5);
        let f0 = frame_highspeed(&a, &v, 0.0).unwrap();
        assert!((f0.i - v.normalize()).norm() < 1e-15);
        let f = frame_highspeed(&a, &v, FRAC_PI_2).unwrap();
        assert!((f.i - f.j.cross(&v.normalize())).norm() < 1e-15);
        assert!((f.k - v.normalize()).norm() < 1e-15);
    }

    #[test]
    fn lowspeed_examples() {
        let lvl = Vec3::x();
        let a = Vec3::new(0.0, 0.0, -9.81);
        let f = frame_lowspeed(&i_d_raw(0.0, &lvl).unwrap(), &a, &Vec3::zeros(), 0.1, 1.0).unwrap();
        assert_eq!(f.k_bar, Vec3::z());
        assert_eq!(f.j_d, Vec3::zeros());
        assert!(!f.complete);
        let i_d = i_d_raw(0.2, &lvl).unwrap();
        assert!((i_d - Vec3::new(0.2f64.cos(), 0.0, -0.2f64.sin())).norm() < 1e-15);
        let f = frame_lowspeed(&i_d_raw(0.0, &lvl).unwrap(), &a, &Vec3::new(3.0, 0.0, 0.0), 0.1, 1.0).unwrap();
        assert_eq!(f.alpha, 0.0);
        assert!(f.complete);
        assert!((f.axes.i.cross(&f.axes.j) - f.axes.k).norm() < 1e-12);
        assert!(matches!(i_d_raw(0.0, &Vec3::z()), Err(FrameError::HeadingUndefined)));
        assert!(matches!(
            frame_lowspeed(&Vec3::x(), &Vec3::new(-3.0, 0.0, 0.0), &Vec3::zeros(), 0.1, 1.0),
            Err(FrameError::AccelerationDegenerate)
        ));
    }

    #[test]
    fn blend_boundaries() {
        assert_eq!(blend_alpha(3.0, 0.1, 0.4, 3.0, 9.0), (0.1, 1.0));
        assert_eq!(blend_alpha(9.0, 0.1, 0.4, 3.0, 9.0), (0.4, 0.0));
        assert_eq!(smooth_weight(6.0, 3.0, 9.0), 0.5);
        // C¹: one-sided slopes vanish at both knots
        let h = 1e-7;
        assert!((smooth_weight(3.0 + h, 3.0, 9.0) - 1.0).abs() / h < 1e-5);
        assert!(smooth_weight(9.0 - h, 3.0, 9.0).abs() / h < 1e-5);
    }

    #[test]
    fn tilt_thrust_examples() {
        let h = tilt_thrust(&Vec3::new(0.0, 0.0, -9.81), &Vec3::new(0.0, 0.0, -9.81), &Vec3::x(), &Vec3::z()).unwrap();
        assert_eq!(h.theta, 0.0);
        assert!((h.thrust - 9.81).abs() < 1e-12);
        let p = params();
        let t = accel_triple(&Vec3::zeros(), &Vec3::new(10.0, 0.0, 0.0), &p);
        let c = tilt_thrust(&t.d, &t.e, &Vec3::x(), &Vec3::z()).unwrap();
        assert!((c.theta - 5f64.atan2(9.81)).abs() < 1e-12);
        assert!((c.theta - 0.471).abs() < 1e-3);
        assert!((c.thrust - (25.0f64 + 9.81 * 9.81).sqrt()).abs() < 1e-12);
        let f = tilt_thrust(&Vec3::x(), &Vec3::zeros(), &Vec3::x(), &Vec3::z()).unwrap();
        assert_eq!((f.theta, f.thrust), (FRAC_PI_2, 1.0));
        assert!(tilt_thrust(&Vec3::y(), &Vec3::x(), &Vec3::x(), &Vec3::z()).is_err());
    }

    #[test]
    fn alpha_from_tilt_forward_thrust() {
        let p = params();
        let a = Vec3::new(0.0, 0.0, -9.81);
        let v = Vec3::new(12.0, 0.0, 0.0);
        let s = v.cross(&a).norm();
        let expected = s.atan2(a.dot(&v) + p.c0_bar * 12f64.powi(3));
        let got = alpha_from_tilt(FRAC_PI_2, &a, &v, &p).unwrap();
        assert!((got - expected).abs() < 1e-12);
        let scaled = alpha_from_tilt(FRAC_PI_2, &(2.0 * a), &v, &p).unwrap();
        let direct = (2.0 * s).atan2(2.0 * a.dot(&v) + p.c0_bar * 12f64.powi(3));
        assert!((scaled - direct).abs() < 1e-12);
    }

    #[test]
    fn hover_fixed_point() {
        let p = params();
        let mut sel = FrameSelector::new(FrameConfig::default());
        let out = sel.select(&Vec3::zeros(), &Vec3::zeros(), &Rotation::identity(), &p, 0.004).unwrap();
        assert_eq!(out.frame.regime, Regime::LowSpeed);
        assert_eq!(out.tilt.theta, 0.0);
        assert_eq!(out.tilt.thrust, p.mass * p.g0);
    }

    #[test]
    fn high_speed_uses_min_thrust_alpha() {
        let p = params();
        let mut sel = FrameSelector::new(FrameConfig::default());
        let v = Vec3::new(12.0, 0.0, 0.0);
        let out = sel.select(&Vec3::zeros(), &v, &Rotation::identity(), &p, 0.004).unwrap();
        assert_eq!(out.frame.regime, Regime::HighSpeed);
        assert_eq!(out.frame.lambda_val, 0.0);
        assert_eq!(out.frame.alpha, alpha_min_thrust(&out.accel.a, &v, &p));
    }

    #[test]
    fn regime_hysteresis() {
        let p = params();
        let mut sel = FrameSelector::new(FrameConfig::default());
        let r = Rotation::identity();
        let mut at = |s: f64| sel.select(&Vec3::zeros(), &Vec3::new(s, 0.0, 0.0), &r, &p, 0.004).unwrap().frame.regime;
        assert_eq!(at(3.1), Regime::LowSpeed);
        assert_eq!(at(3.3), Regime::Transition);
        assert_eq!(at(2.9), Regime::Transition);
        assert_eq!(at(2.7), Regime::LowSpeed);
        assert_eq!(at(9.5), Regime::HighSpeed);
    }

    #[test]
    fn singular_high_speed_falls_back() {
        let p = params();
        let mut sel = FrameSelector::new(FrameConfig::default());
        // air velocity straight down, aligned with the demand
        let out = sel.select(&Vec3::zeros(), &Vec3::new(0.0, 0.0, -10.0), &Rotation::identity(), &p, 0.004).unwrap();
        assert!(out.fallback);
        assert_eq!(out.frame.regime, Regime::LowSpeed);
        assert_eq!(sel.fallback_count(), 1);
    }

    #[test]
    fn sweep_alpha_is_continuous() {
        let p = params();
        let mut sel = FrameSelector::new(FrameConfig::default());
        let dt = 0.004;
        let n = 15_000;
        let mut prev: Option<f64> = None;
        let mut worst = 0.0f64;
        for k in 0..=n {
            let speed = 12.0 * k as f64 / n as f64;
            let out = sel.select(&Vec3::zeros(), &Vec3::new(speed, 0.0, 0.0), &Rotation::identity(), &p, dt).unwrap();
            if let Some(a) = prev {
                worst = worst.max((out.frame.alpha - a).abs());
            }
            prev = Some(out.frame.alpha);
        }
        assert!(worst < 0.01, "max step {worst}");
    }

    #[test]
    fn tilt_schedule_interpolates() {
        let table = vec![[3.0, 0.2], [9.0, 1.4]];
        assert_eq!(SecondaryPolicy::scheduled_tilt(&table, 0.0), 0.2);
        assert!((SecondaryPolicy::scheduled_tilt(&table, 6.0) - 0.8).abs() < 1e-15);
        assert_eq!(SecondaryPolicy::scheduled_tilt(&table, 20.0), 1.4);
    }

    fn arb_vec(r: f64) -> impl Strategy<Value = Vec3> {
        (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn triple_identity(xi in arb_vec(7.0), v in arb_vec(20.0)) {
            let p = params();
            let t = accel_triple(&xi, &v, &p);
            let want = (p.c0_bar - p.c0) * v.norm() * v;
            prop_assert!((t.e - t.d - want).norm() <= 1e-12 * (1.0 + want.norm() + t.a.norm()));
        }

        #[test]
        fn highspeed_frame_is_right_handed(a in arb_vec(15.0), v in arb_vec(20.0), alpha in -1.5..1.5f64) {
            prop_assume!(v.cross(&a).norm() > 1e-2 * v.norm() * a.norm());
            let f = frame_highspeed(&a, &v, alpha).unwrap();
            prop_assert!(f.j.dot(&a).abs() < 1e-12 * a.norm());
            prop_assert!(f.j.dot(&v).abs() < 1e-12 * v.norm());
            prop_assert!((f.i.cross(&f.j) - f.k).norm() < 1e-12);
            prop_assert!((f.i.norm() - 1.0).abs() < 1e-12 && (f.k.norm() - 1.0).abs() < 1e-12);
            // ī and k̄ stay in span(v̂, ȷ̄×v̂)
            prop_assert!(f.i.dot(&f.j).abs() < 1e-12 && f.k.dot(&f.j).abs() < 1e-12);
        }

        #[test]
        fn tilt_thrust_defining_relations(a in arb_vec(15.0), v in arb_vec(20.0), alpha in -1.5..1.5f64) {
            prop_assume!(v.cross(&a).norm() > 1e-2 * v.norm() * a.norm());
            let p = params();
            let t = accel_triple(&(a + p.g0 * Vec3::z()), &v, &p);
            let f = frame_highspeed(&t.a, &v, alpha).unwrap();
            let tt = tilt_thrust(&t.d, &t.e, &f.i, &f.k).unwrap();
            let scale = 1.0 + t.d.norm() + t.e.norm();
            prop_assert!(tt.thrust >= 0.0);
            prop_assert!((tt.thrust * tt.theta.sin() - t.d.dot(&f.i)).abs() < 1e-12 * scale);
            prop_assert!((tt.thrust * tt.theta.cos() + t.e.dot(&f.k)).abs() < 1e-12 * scale);
        }

        #[test]
        fn min_thrust_alpha_beats_neighbours(a in arb_vec(15.0), v in arb_vec(20.0), da in 0.001..0.5f64) {
            prop_assume!(v.norm() > 0.5 && v.cross(&a).norm() > 1e-2 * v.norm() * a.norm());
            let p = params();
            let al = alpha_min_thrust(&a, &v, &p);
            let t0 = thrust_at(al, &a, &v, &p);
            prop_assert!(t0 <= thrust_at(al + da, &a, &v, &p) + 1e-9);
            prop_assert!(t0 <= thrust_at(al - da, &a, &v, &p) + 1e-9);
        }

        #[test]
        fn tilt_round_trip(a in arb_vec(15.0), v in arb_vec(20.0)) {
            prop_assume!(v.norm() > 0.5 && v.cross(&a).norm() > 1e-2 * v.norm() * a.norm());
            let p = params();
            let t = accel_triple(&(a + p.g0 * Vec3::z()), &v, &p);
            // domain in which the tilt map is invertible with positive thrust
            let speed = v.norm();
            let c = a.dot(&v) / speed;
            let s = v.cross(&a).norm() / speed;
            let cap_a = c + p.c0 * speed * speed;
            let cap_b = c + p.c0_bar * speed * speed;
            prop_assume!(s * s + cap_a * cap_b > 1e-3 * (1.0 + a.norm_squared()));
            let al = alpha_min_thrust(&a, &v, &p);
            let f = frame_highspeed(&a, &v, al).unwrap();
            let tt = tilt_thrust(&t.d, &t.e, &f.i, &f.k).unwrap();
            let back = alpha_from_tilt(tt.theta, &a, &v, &p).unwrap();
            prop_assert!((back - al).abs() < 1e-9, "{} vs {}", back, al);
        }
    }
}
