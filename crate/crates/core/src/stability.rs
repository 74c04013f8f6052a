//! Numerical checks of the kinematic attitude law: Lyapunov function,
//! decay bound, matrix identities and the k-axis scalar ODE, plus a seeded
//! Monte-Carlo driver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::attitude::{omega_star_low, FrameRate, RateGains};
use crate::frame::Axes;
use crate::geom3::{antisym, projector, reorthonormalize, skew, GeomError, Mat3, Rotation, Vec3};

/// Angular exclusion radius around the antipodal set [rad].
pub const ANTIPODAL_RADIUS: f64 = 1e-3;
/// Round-off allowance on the monotone-decrease test.
pub const MONOTONE_TOL: f64 = 1e-12;
/// Integration stops once E drops below this.
pub const E_FLOOR: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StabilityError {
    #[error("invalid trial: {0}")]
    InvalidTrial(String),
    #[error("kinematic integration diverged: {0}")]
    Divergence(#[from] GeomError),
}

/// `E = trace(I − R R̄ᵀ)`.
pub fn lyap_e(r: &Rotation, frame: &Axes) -> f64 {
    let rbar = Mat3::from_columns(&[frame.i, frame.j, frame.k]);
    3.0 - (r.matrix() * rbar.transpose()).trace()
}

/// Sum form `(1 − ıᵀī) + (1 − ȷᵀȷ̄) + (1 − kᵀk̄)`.
pub fn lyap_e_axes(r: &Rotation, frame: &Axes) -> f64 {
    (1.0 - r.i_axis().dot(&frame.i)) + (1.0 - r.j_axis().dot(&frame.j)) + (1.0 - r.k_axis().dot(&frame.k))
}

/// `|aᵀP_a(R̃)P_a(R̃)a + ½aᵀ(I − R̃R̃)a|`, identically zero on SO(3).
pub fn identity_check(rt: &Rotation, a: &Vec3) -> f64 {
    let m = rt.matrix();
    let pa = antisym(m);
    let lhs = a.dot(&(pa * pa * a));
    let rhs = 0.5 * a.dot(&((Mat3::identity() - m * m) * a));
    (lhs + rhs).abs()
}

/// Smallest eigenvalue of `k_k·Π_k̄ + k_j·Π_ȷ̄`, with `Π_u = I − uuᵀ`.
pub fn q_rate_bound(k_k: f64, k_j: f64, frame: &Axes) -> f64 {
    let c = frame.k.dot(&frame.j);
    let disc = ((k_k - k_j).powi(2) + 4.0 * k_k * k_j * c * c).sqrt();
    (k_k + k_j - disc) / 2.0
}

pub fn q_matrix(k_k: f64, k_j: f64, frame: &Axes) -> Mat3 {
    let pk = projector(&frame.k).unwrap_or_else(|_| Mat3::identity());
    let pj = projector(&frame.j).unwrap_or_else(|_| Mat3::identity());
    k_k * pk + k_j * pj
}

/// Closed-form `y(t) = 1 − kᵀk̄` for `ẏ = −k_k·y(2 − y)`.
pub fn k_axis_closed_form(y0: f64, k_k: f64, t: f64) -> f64 {
    let e = (-2.0 * k_k * t).exp();
    2.0 * y0 * e / (2.0 - y0 + y0 * e)
}

/// Haar-uniform rotation from a normalised Gaussian quaternion.
pub fn haar_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            let q = nalgebra::Quaternion::new(q[0] / n, q[1] / n, q[2] / n, q[3] / n);
            return Rotation::from_quaternion(&nalgebra::UnitQuaternion::new_unchecked(q));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AirspeedRegime {
    /// Constant air velocity (inertial) with `|v_a| ≥ σ`.
    Moving {
        v_a: [f64; 3],
    },
    Still,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KinematicTrial {
    pub r0: [[f64; 3]; 3],
    /// Desired k̄ (unit, inertial).
    pub k_bar: [f64; 3],
    /// Constant angular rate of the desired frame (inertial) [rad/s].
    pub frame_rate: [f64; 3],
    pub k_j: f64,
    pub k_k: f64,
    pub eps: f64,
    pub dt: f64,
    pub horizon: f64,
    pub regime: AirspeedRegime,
}

impl KinematicTrial {
    pub fn validate(&self) -> Result<(), StabilityError> {
        let bad = |m: &str| Err(StabilityError::InvalidTrial(m.into()));
        if !(self.dt > 0.0 && self.dt <= 0.01) {
            return bad("dt must lie in (0, 0.01]");
        }
        if self.horizon.is_nan() || self.horizon <= 0.0 {
            return bad("horizon must be positive");
        }
        if !(self.k_j > 0.0 && self.k_k > 0.0 && self.eps > 0.0) {
            return bad("gains and eps must be positive");
        }
        if (Vec3::from(self.k_bar).norm() - 1.0).abs() > 1e-9 {
            return bad("k_bar must be unit");
        }
        Ok(())
    }

    fn r0(&self) -> Rotation {
        let m = Mat3::from_fn(|i, j| self.r0[i][j]);
        reorthonormalize(&m).unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy)]
struct Target {
    k_bar: Vec3,
    j_d: Vec3,
    axes: Axes,
}

fn rot_about(w: &Vec3, t: f64) -> Rotation {
    let n = w.norm();
    if n == 0.0 {
        Rotation::identity()
    } else {
        Rotation::from_axis_angle(&(w / n), n * t)
    }
}

fn target(trial: &KinematicTrial, t: f64) -> Target {
    let q = rot_about(&Vec3::from(trial.frame_rate), t);
    let k_bar = q.to_inertial(&Vec3::from(trial.k_bar));
    let (j_d, j_unit) = match trial.regime {
        AirspeedRegime::Moving { v_a } => {
            let kv = k_bar.cross(&q.to_inertial(&Vec3::from(v_a)));
            (kv / (trial.eps + kv.norm()), kv.normalize())
        }
        AirspeedRegime::Still => {
            // any completion: only k̄ is meaningful here
            let seed = if k_bar.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
            (Vec3::zeros(), k_bar.cross(&seed).normalize())
        }
    };
    Target { k_bar, j_d, axes: Axes { i: j_unit.cross(&k_bar), j: j_unit, k: k_bar } }
}

fn omega_inertial(trial: &KinematicTrial, r: &Rotation, t: f64) -> Vec3 {
    let tg = target(trial, t);
    let gains = RateGains { k_i: 0.0, k_j: trial.k_j, k_k: trial.k_k, k_gamma: [1.0; 3] };
    let rate = FrameRate { omega_bar: Vec3::from(trial.frame_rate), valid: true };
    r.to_inertial(&omega_star_low(&tg.j_d, &tg.k_bar, r, &rate, &gains))
}

fn rk4_step(trial: &KinematicTrial, r: &Rotation, t: f64, dt: f64) -> Result<Rotation, GeomError> {
    let f = |m: &Mat3, tt: f64| -> Mat3 { skew(&omega_inertial(trial, &Rotation::from_matrix_unchecked(*m), tt)) * m };
    let m = r.matrix();
    let k1 = f(m, t);
    let k2 = f(&(m + k1 * (dt / 2.0)), t + dt / 2.0);
    let k3 = f(&(m + k2 * (dt / 2.0)), t + dt / 2.0);
    let k4 = f(&(m + k3 * dt), t + dt);
    reorthonormalize(&(m + (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (dt / 6.0)))
}

#[derive(Debug, Clone, Serialize)]
pub struct KinematicResult {
    pub t: Vec<f64>,
    pub e: Vec<f64>,
    /// `1 − kᵀk̄` along the trajectory.
    pub y: Vec<f64>,
    /// Least-squares slope of `−ln E` over the tail half [1/s].
    pub fitted_rate: Option<f64>,
    /// `λ_min(Q)` with the effective lateral gain `k_j·|j_d|`.
    pub lambda_min: f64,
    pub monotone: bool,
    /// Initial angle between R and R̄ [rad].
    pub initial_angle: f64,
}

fn fit_rate(t: &[f64], e: &[f64]) -> Option<f64> {
    let n = t.len();
    let tail: Vec<(f64, f64)> =
        t[n / 2..].iter().zip(&e[n / 2..]).filter(|(_, &ev)| ev > 0.0).map(|(&tv, &ev)| (tv, ev.ln())).collect();
    if tail.len() < 3 {
        return None;
    }
    let m = tail.len() as f64;
    let (st, sy) = tail.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mt, my) = (st / m, sy / m);
    let (sxy, sxx) = tail.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mt) * (y - my), b + (x - mt).powi(2)));
    (sxx > 0.0).then(|| -sxy / sxx)
}

/// Integrates `Ṙ = R·skew(ω*)` until E falls below [`E_FLOOR`] or the horizon.
pub fn simulate_kinematic(trial: &KinematicTrial) -> Result<KinematicResult, StabilityError> {
    trial.validate()?;
    let mut r = trial.r0();
    let tg0 = target(trial, 0.0);
    let lambda_min = q_rate_bound(trial.k_k, trial.k_j * tg0.j_d.norm(), &tg0.axes);
    let initial_angle = r.compose(&tg0.axes.rotation().transpose()).angle();
    let mut t = 0.0;
    let mut ts = vec![0.0];
    let mut es = vec![lyap_e(&r, &tg0.axes)];
    let mut ys = vec![1.0 - r.k_axis().dot(&tg0.k_bar)];
    let steps = (trial.horizon / trial.dt).ceil() as usize;
    let mut monotone = true;
    let still = matches!(trial.regime, AirspeedRegime::Still);
    for n in 0..steps {
        r = rk4_step(trial, &r, t, trial.dt)?;
        t = (n + 1) as f64 * trial.dt;
        let tg = target(trial, t);
        let e = lyap_e(&r, &tg.axes);
        let y = 1.0 - r.k_axis().dot(&tg.k_bar);
        if e > es[es.len() - 1] + MONOTONE_TOL {
            monotone = false;
        }
        ts.push(t);
        es.push(e);
        ys.push(y);
        let done = if still { y < E_FLOOR } else { e < E_FLOOR };
        if done {
            break;
        }
    }
    let fitted_rate = if still { None } else { fit_rate(&ts, &es) };
    Ok(KinematicResult { t: ts, e: es, y: ys, fitted_rate, lambda_min, monotone, initial_angle })
}

#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    pub index: usize,
    pub trial: KinematicTrial,
    pub reason: String,
    pub e_trace_head: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RegimeReport {
    pub trials: usize,
    pub passed: usize,
    pub excluded: usize,
    pub min_rate_ratio: Option<f64>,
    pub mean_rate_ratio: Option<f64>,
    pub max_ode_error: Option<f64>,
    pub counterexamples: Vec<Counterexample>,
}

impl RegimeReport {
    pub fn all_passed(&self) -> bool {
        self.passed + self.excluded == self.trials && self.counterexamples.is_empty()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Prop1Report {
    pub seed: u64,
    pub trials: usize,
    pub moving: RegimeReport,
    pub still: RegimeReport,
    pub all_passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloConfig {
    pub dt: f64,
    pub horizon: f64,
    pub gain_range: (f64, f64),
    pub speed_range: (f64, f64),
    pub eps: f64,
    pub ode_tol: f64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig { dt: 0.005, horizon: 60.0, gain_range: (0.5, 2.0), speed_range: (1.0, 15.0), eps: 0.1, ode_tol: 1e-4 }
    }
}

fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn to_rows(r: &Rotation) -> [[f64; 3]; 3] {
    let m = r.matrix();
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

/// Random trial: Haar R0 and R̄, gains in range, air velocity in the
/// ī–k̄ plane of R̄ (moving) or zero (still).
pub fn random_trial<R: Rng + ?Sized>(rng: &mut R, moving: bool, cfg: &MonteCarloConfig) -> KinematicTrial {
    let r0 = haar_rotation(rng);
    let rbar = haar_rotation(rng);
    let (g0, g1) = cfg.gain_range;
    let k_j = rng.random_range(g0..=g1);
    let k_k = rng.random_range(g0..=g1);
    let regime = if moving {
        let speed = rng.random_range(cfg.speed_range.0..=cfg.speed_range.1);
        let aoa: f64 = rng.random_range(-0.3..=0.3);
        let v = speed * (aoa.cos() * rbar.i_axis() + aoa.sin() * rbar.k_axis());
        AirspeedRegime::Moving { v_a: v.into() }
    } else {
        AirspeedRegime::Still
    };
    KinematicTrial {
        r0: to_rows(&r0),
        k_bar: rbar.k_axis().into(),
        frame_rate: [0.0; 3],
        k_j,
        k_k,
        eps: cfg.eps,
        dt: cfg.dt,
        horizon: cfg.horizon,
        regime,
    }
}

enum Outcome {
    Pass(Option<f64>, Option<f64>),
    Excluded,
    Fail(String, Vec<f64>),
}

fn judge(trial: &KinematicTrial, cfg: &MonteCarloConfig) -> Outcome {
    let res = match simulate_kinematic(trial) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(e.to_string(), Vec::new()),
    };
    let head = res.e.iter().step_by(20).take(50).copied().collect();
    match trial.regime {
        AirspeedRegime::Moving { .. } => {
            if std::f64::consts::PI - res.initial_angle < ANTIPODAL_RADIUS {
                return Outcome::Excluded;
            }
            if !res.monotone {
                return Outcome::Fail("E increased".into(), head);
            }
            let last = *res.e.last().unwrap_or(&f64::INFINITY);
            if last >= E_FLOOR && res.e[0] >= E_FLOOR {
                return Outcome::Fail(format!("E did not converge (final {last:.3e})"), head);
            }
            match res.fitted_rate {
                None if res.e[0] < E_FLOOR => Outcome::Pass(None, None),
                None => Outcome::Fail("no rate fit".into(), head),
                Some(rate) => {
                    let ratio = rate / res.lambda_min;
                    if ratio >= 0.5 {
                        Outcome::Pass(Some(ratio), None)
                    } else {
                        Outcome::Fail(format!("rate {rate:.4} below 0.5*lambda_min {:.4}", res.lambda_min), head)
                    }
                }
            }
        }
        AirspeedRegime::Still => {
            let y0 = res.y[0];
            let err =
                res.t.iter().zip(&res.y).map(|(&t, &y)| (y - k_axis_closed_form(y0, trial.k_k, t)).abs()).fold(0.0, f64::max);
            let converged = *res.y.last().unwrap_or(&f64::INFINITY) < E_FLOOR;
            let predicted = k_axis_closed_form(y0, trial.k_k, trial.horizon) >= E_FLOOR;
            if err > cfg.ode_tol {
                Outcome::Fail(format!("scalar ODE mismatch {err:.3e}"), head)
            } else if !converged && predicted {
                Outcome::Excluded
            } else if !converged {
                Outcome::Fail("k did not converge".into(), head)
            } else {
                Outcome::Pass(None, Some(err))
            }
        }
    }
}

fn run_regime(trials: usize, seed: u64, moving: bool, cfg: &MonteCarloConfig) -> RegimeReport {
    let offset = if moving { 0 } else { 1u64 << 32 };
    let outcomes: Vec<(usize, KinematicTrial, Outcome)> = (0..trials)
        .into_par_iter()
        .map(|n| {
            let mut rng = trial_rng(seed, offset + n as u64);
            let trial = random_trial(&mut rng, moving, cfg);
            let o = judge(&trial, cfg);
            (n, trial, o)
        })
        .collect();
    let mut rep = RegimeReport { trials, ..Default::default() };
    let mut ratios = Vec::new();
    for (index, trial, o) in outcomes {
        match o {
            Outcome::Pass(ratio, err) => {
                rep.passed += 1;
                ratios.extend(ratio);
                if let Some(e) = err {
                    rep.max_ode_error = Some(rep.max_ode_error.map_or(e, |m: f64| m.max(e)));
                }
            }
            Outcome::Excluded => rep.excluded += 1,
            Outcome::Fail(reason, e_trace_head) => {
                rep.counterexamples.push(Counterexample { index, trial, reason, e_trace_head })
            }
        }
    }
    if !ratios.is_empty() {
        rep.min_rate_ratio = Some(ratios.iter().copied().fold(f64::INFINITY, f64::min));
        rep.mean_rate_ratio = Some(ratios.iter().sum::<f64>() / ratios.len() as f64);
    }
    rep
}

/// Both claims over `trials` Haar-random initial attitudes each; deterministic per seed.
pub fn prop1_montecarlo(trials: usize, seed: u64) -> Prop1Report {
    prop1_montecarlo_with(trials, seed, &MonteCarloConfig::default())
}

pub fn prop1_montecarlo_with(trials: usize, seed: u64, cfg: &MonteCarloConfig) -> Prop1Report {
    let moving = run_regime(trials, seed, true, cfg);
    let still = run_regime(trials, seed, false, cfg);
    let all_passed = moving.all_passed() && still.all_passed();
    Prop1Report { seed, trials, moving, still, all_passed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom3::vex_unchecked;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn axes(r: &Rotation) -> Axes {
        Axes { i: r.i_axis(), j: r.j_axis(), k: r.k_axis() }
    }

    #[test]
    fn lyap_examples() {
        let f = axes(&Rotation::from_euler(0.3, 0.2, 0.1));
        let r = f.rotation();
        assert!(lyap_e(&r, &f).abs() < 1e-15);
        let flipped = Rotation::from_axis_angle(&f.k, PI).compose(&r);
        assert!((lyap_e(&flipped, &f) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn identity_examples() {
        assert_eq!(identity_check(&Rotation::identity(), &Vec3::new(1.0, 2.0, 3.0)), 0.0);
        let q = Rotation::from_axis_angle(&Vec3::z(), PI / 2.0);
        assert!(identity_check(&q, &Vec3::x()) < 1e-15);
    }

    #[test]
    fn q_bound_examples() {
        let f = axes(&Rotation::identity());
        assert!((q_rate_bound(1.0, 1.0, &f) - 1.0).abs() < 1e-15);
        let eig = q_matrix(1.0, 1.0, &f).symmetric_eigen().eigenvalues;
        let mut e: Vec<f64> = eig.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        assert!((e[0] - 1.0).abs() < 1e-12 && (e[1] - 1.0).abs() < 1e-12 && (e[2] - 2.0).abs() < 1e-12);
        assert_eq!(q_rate_bound(1.0, 0.0, &f), 0.0);
        assert!((q_rate_bound(3.0, 6.0, &f) - 3.0 * q_rate_bound(1.0, 2.0, &f)).abs() < 1e-12);
    }

    fn trial_at(r0: Rotation, regime: AirspeedRegime, k_bar: Vec3) -> KinematicTrial {
        KinematicTrial {
            r0: to_rows(&r0),
            k_bar: k_bar.into(),
            frame_rate: [0.0; 3],
            k_j: 1.0,
            k_k: 1.0,
            eps: 0.1,
            dt: 0.005,
            horizon: 30.0,
            regime,
        }
    }

    #[test]
    fn aligned_start_stays_aligned() {
        let regime = AirspeedRegime::Moving { v_a: [5.0, 0.0, 0.0] };
        let t = trial_at(Rotation::identity(), regime, Vec3::z());
        let res = simulate_kinematic(&t).unwrap();
        assert!(res.e.iter().all(|&e| e.abs() < 1e-12));
    }

    #[test]
    fn antipodal_point_is_stationary() {
        // k = −k̄ with ȷ aligned: both correction terms vanish
        let r = Rotation::from_axis_angle(&Vec3::y(), PI);
        let regime = AirspeedRegime::Still;
        let t = KinematicTrial { horizon: 1.0, ..trial_at(r, regime, Vec3::z()) };
        let res = simulate_kinematic(&t).unwrap();
        assert!(res.y.iter().all(|&y| (y - 2.0).abs() < 1e-12));
    }

    #[test]
    fn still_regime_matches_scalar_ode() {
        let r0 = Rotation::from_euler(1.1, -0.7, 2.0);
        let t = KinematicTrial { k_k: 1.7, ..trial_at(r0, AirspeedRegime::Still, Vec3::z()) };
        let res = simulate_kinematic(&t).unwrap();
        let y0 = res.y[0];
        for (&tt, &y) in res.t.iter().zip(&res.y) {
            assert!((y - k_axis_closed_form(y0, 1.7, tt)).abs() < 1e-8);
        }
    }

    #[test]
    fn dedt_matches_quadratic_form() {
        let rbar = Rotation::from_euler(0.4, 0.1, -0.6);
        let v = 6.0 * rbar.i_axis();
        let r0 = Rotation::from_euler(-1.0, 0.8, 1.5);
        let trial = KinematicTrial {
            dt: 1e-4,
            horizon: 1e-4,
            k_j: 1.3,
            k_k: 0.8,
            ..trial_at(r0, AirspeedRegime::Moving { v_a: v.into() }, rbar.k_axis())
        };
        let res = simulate_kinematic(&trial).unwrap();
        let fd = (res.e[1] - res.e[0]) / 1e-4;
        let tg = target(&trial, 0.0);
        let q = q_matrix(trial.k_k, trial.k_j * tg.j_d.norm(), &tg.axes);
        let rt = r0.matrix() * tg.axes.rotation().matrix().transpose();
        let w = vex_unchecked(&antisym(&rt));
        let analytic = -2.0 * w.dot(&(q * w));
        assert!((fd - analytic).abs() < 1e-3 * analytic.abs(), "{fd} vs {analytic}");
    }

    #[test]
    fn montecarlo_is_deterministic_and_passes() {
        let a = prop1_montecarlo(24, 7);
        let b = prop1_montecarlo(24, 7);
        assert!(a.all_passed, "{:?}", a.moving.counterexamples.first().map(|c| &c.reason));
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn invalid_trial_rejected() {
        let t = KinematicTrial { dt: 0.02, ..trial_at(Rotation::identity(), AirspeedRegime::Still, Vec3::z()) };
        assert!(matches!(simulate_kinematic(&t), Err(StabilityError::InvalidTrial(_))));
    }

    proptest! {
        #[test]
        fn e_forms_agree_and_are_bounded(s1 in 0u64..u64::MAX) {
            let mut rng = ChaCha8Rng::seed_from_u64(s1);
            let r = haar_rotation(&mut rng);
            let f = axes(&haar_rotation(&mut rng));
            let e = lyap_e(&r, &f);
            prop_assert!((e - lyap_e_axes(&r, &f)).abs() < 1e-12);
            prop_assert!((-1e-12..=4.0 + 1e-12).contains(&e));
        }

        #[test]
        fn identity_holds(s in 0u64..u64::MAX, a in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)) {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let a = Vec3::new(a.0, a.1, a.2);
            prop_assume!(a.norm() > 1e-3);
            prop_assert!(identity_check(&haar_rotation(&mut rng), &a.normalize()) < 1e-12);
        }

        #[test]
        fn closed_form_bound_matches_eigen(s in 0u64..u64::MAX, kk in 0.05..5.0f64, kj in 0.05..5.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let f = axes(&haar_rotation(&mut rng));
            let j = (f.j + 0.5 * f.k).normalize();
            let skewed = Axes { j, ..f };
            let eig = q_matrix(kk, kj, &skewed).symmetric_eigen().eigenvalues.min();
            prop_assert!((eig - q_rate_bound(kk, kj, &skewed)).abs() < 1e-10);
        }
    }
}
