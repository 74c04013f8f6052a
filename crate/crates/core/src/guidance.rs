//! Outer loop: the auxiliary acceleration ξ for reference tracking and for
//! following an inclined circle at a ramped inertial speed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom3::{saturate_norm, Vec3};

/// Below this speed the heading direction is held.
pub const HEADING_FLOOR: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GuidanceError {
    #[error("invalid guidance parameter {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> GuidanceError {
    GuidanceError::Invalid { field, reason: reason.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuidanceGains {
    pub k_p: f64,
    pub k_v: f64,
    pub k_s: f64,
    pub k_h: f64,
    pub k_c: f64,
    /// Cross-track saturation distance [m].
    pub d_sat: f64,
    /// |ξ| bound as a fraction of g0.
    pub xi_max_g: f64,
}

impl Default for GuidanceGains {
    fn default() -> Self {
        GuidanceGains { k_p: 1.0, k_v: 1.8, k_s: 0.8, k_h: 1.0, k_c: 0.6, d_sat: 5.0, xi_max_g: 0.7 }
    }
}

impl GuidanceGains {
    pub fn validate(&self) -> Result<(), GuidanceError> {
        for (field, x) in
            [("k_p", self.k_p), ("k_v", self.k_v), ("k_s", self.k_s), ("k_h", self.k_h), ("k_c", self.k_c), ("d_sat", self.d_sat)]
        {
            if !(x > 0.0 && x.is_finite()) {
                return Err(invalid(field, "must be positive"));
            }
        }
        if !(self.xi_max_g > 0.0 && self.xi_max_g < 1.0) {
            return Err(invalid("xi_max_g", "must lie in (0, 1) so that a = m(xi - g) never vanishes"));
        }
        Ok(())
    }

    pub fn xi_max(&self, g0: f64) -> f64 {
        self.xi_max_g * g0
    }
}

/// `ξ = a_ref − k_p(p − p_ref) − k_v(v − v_ref)`, norm-saturated at `xi_max`.
pub fn xi_trajectory(p: &Vec3, v: &Vec3, p_ref: &Vec3, v_ref: &Vec3, a_ref: &Vec3, gains: &GuidanceGains, xi_max: f64) -> Vec3 {
    let raw = a_ref - gains.k_p * (p - p_ref) - gains.k_v * (v - v_ref);
    saturate_norm(&raw, xi_max)
}

/// Unit heading `v/|v|`, held at the last value while `|v| ≤ HEADING_FLOOR`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadingMemory {
    h: Vec3,
}

impl HeadingMemory {
    pub fn new(initial: Vec3) -> Self {
        let n = initial.norm();
        HeadingMemory { h: if n > 0.0 { initial / n } else { Vec3::x() } }
    }

    pub fn update(&mut self, v: &Vec3) -> Vec3 {
        let n = v.norm();
        if n > HEADING_FLOOR {
            self.h = v / n;
        }
        self.h
    }

    pub fn current(&self) -> Vec3 {
        self.h
    }
}

pub fn heading_direction(v: &Vec3, memory: &mut HeadingMemory) -> Vec3 {
    memory.update(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CirclePath {
    pub center: Vec3,
    pub normal: Vec3,
    pub radius: f64,
}

/// Closest-point data; the travel direction is `normal × radial`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint {
    pub point: Vec3,
    pub tangent: Vec3,
    pub radial: Vec3,
    /// `p − point`, including the out-of-plane offset.
    pub error: Vec3,
}

impl CirclePath {
    pub fn new(center: Vec3, normal: Vec3, radius: f64) -> Result<Self, GuidanceError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("radius", "must be positive"));
        }
        let n = normal.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(invalid("normal", "must be a nonzero vector"));
        }
        Ok(CirclePath { center, normal: normal / n, radius })
    }

    /// Circle through `start` whose tangent there is the projection of
    /// `heading` onto the plane orthogonal to `normal`.
    pub fn through(start: Vec3, heading: Vec3, normal: Vec3, radius: f64) -> Result<Self, GuidanceError> {
        let n = normal.normalize();
        let t = heading - heading.dot(&n) * n;
        if t.norm() < 1e-9 {
            return Err(invalid("normal", "heading is parallel to the circle normal"));
        }
        let t = t.normalize();
        let radial = t.cross(&n);
        CirclePath::new(start - radius * radial, n, radius)
    }

    /// `None` when `p` lies on the axis of the circle.
    pub fn closest(&self, p: &Vec3) -> Option<PathPoint> {
        let rel = p - self.center;
        let in_plane = rel - rel.dot(&self.normal) * self.normal;
        let d = in_plane.norm();
        if d < 1e-9 * self.radius.max(1.0) {
            return None;
        }
        let radial = in_plane / d;
        let point = self.center + self.radius * radial;
        Some(PathPoint { point, tangent: self.normal.cross(&radial), radial, error: p - point })
    }

    pub fn point_at(&self, phase: f64, reference: &Vec3) -> Vec3 {
        let r0 = (reference - reference.dot(&self.normal) * self.normal).normalize();
        let t0 = self.normal.cross(&r0);
        self.center + self.radius * (phase.cos() * r0 + phase.sin() * t0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeedRamp {
    pub v_start: f64,
    pub v_end: f64,
    pub ramp_rate: f64,
}

impl Default for SpeedRamp {
    fn default() -> Self {
        SpeedRamp { v_start: 3.0, v_end: 9.0, ramp_rate: 0.1 }
    }
}

impl SpeedRamp {
    pub fn validate(&self) -> Result<(), GuidanceError> {
        if !(self.v_start > 0.0 && self.v_end > 0.0) {
            return Err(invalid("ramp", "speeds must be positive"));
        }
        if self.ramp_rate.is_nan() || self.ramp_rate <= 0.0 {
            return Err(invalid("ramp_rate", "must be positive"));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        (self.v_end - self.v_start).abs() / self.ramp_rate
    }
}

/// Linear ramp from `v_start` toward `v_end`, clamped at both ends.
pub fn speed_ref(t: f64, ramp: &SpeedRamp) -> f64 {
    let (lo, hi) = if ramp.v_end >= ramp.v_start { (ramp.v_start, ramp.v_end) } else { (ramp.v_end, ramp.v_start) };
    let sign = if ramp.v_end >= ramp.v_start { 1.0 } else { -1.0 };
    (ramp.v_start + sign * ramp.ramp_rate * t.max(0.0)).clamp(lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathCommand {
    pub xi: Vec3,
    pub heading: Vec3,
    pub desired_heading: Vec3,
    pub cross_track: f64,
    pub speed_error: f64,
}

/// Stateful circle follower. The heading turn rate combines the on-path
/// feedforward `(|v|/R)·n` with the steering term `k_h(h × h*)`.
#[derive(Debug, Clone)]
pub struct PathFollower {
    pub path: CirclePath,
    pub gains: GuidanceGains,
    pub xi_max: f64,
    heading: HeadingMemory,
    last_tangent: Vec3,
}

impl PathFollower {
    pub fn new(path: CirclePath, gains: GuidanceGains, xi_max: f64, initial_heading: Vec3) -> Self {
        let heading = HeadingMemory::new(initial_heading);
        PathFollower { path, gains, xi_max, last_tangent: heading.current(), heading }
    }

    pub fn command(&mut self, p: &Vec3, v: &Vec3, v_star: f64) -> PathCommand {
        let h = self.heading.update(v);
        let speed = v.norm();
        let (tangent, error) = match self.path.closest(p) {
            Some(pp) => {
                self.last_tangent = pp.tangent;
                (pp.tangent, pp.error)
            }
            None => (self.last_tangent, Vec3::zeros()),
        };
        let correction = saturate_norm(&(-error / self.gains.d_sat), 1.0);
        let h_star = (tangent + self.gains.k_c * correction).normalize();
        let omega_h = (speed / self.path.radius) * self.path.normal + self.gains.k_h * h.cross(&h_star);
        let xi_v = -self.gains.k_s * (speed - v_star);
        let raw = xi_v * h + speed * omega_h.cross(&h);
        PathCommand {
            xi: saturate_norm(&raw, self.xi_max),
            heading: h,
            desired_heading: h_star,
            cross_track: error.norm(),
            speed_error: speed - v_star,
        }
    }
}

/// Smooth vertical climb: quintic profile from `p0` to `height` above it over
/// `duration`, zero velocity and acceleration at both ends.
pub fn climb_reference(t: f64, p0: &Vec3, height: f64, duration: f64) -> (Vec3, Vec3, Vec3) {
    let up = -Vec3::z();
    let tau = (t / duration).clamp(0.0, 1.0);
    let s = tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau);
    let (ds, dds) = if t > 0.0 && t < duration {
        (
            30.0 * tau * tau * (1.0 - tau) * (1.0 - tau) / duration,
            60.0 * tau * (1.0 - tau) * (1.0 - 2.0 * tau) / (duration * duration),
        )
    } else {
        (0.0, 0.0)
    };
    (p0 + height * s * up, height * ds * up, height * dds * up)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gains() -> GuidanceGains {
        GuidanceGains::default()
    }

    #[test]
    fn trajectory_examples() {
        let g = gains();
        let z = Vec3::zeros();
        assert_eq!(xi_trajectory(&z, &z, &z, &z, &z, &g, 5.0), z);
        let g1 = GuidanceGains { k_p: 1.0, k_v: 1.0, ..g.clone() };
        let xi = xi_trajectory(&Vec3::new(1.0, 0.0, 0.0), &z, &z, &z, &z, &g1, 5.0);
        assert!((xi - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-15);
        let far = Vec3::new(30.0, -40.0, 0.0);
        let xi = xi_trajectory(&far, &z, &z, &z, &z, &g1, 5.0);
        assert!((xi.norm() - 5.0).abs() < 1e-12);
        assert!((xi.normalize() + far.normalize()).norm() < 1e-12);
    }

    #[test]
    fn heading_examples() {
        let mut m = HeadingMemory::new(Vec3::y());
        assert_eq!(heading_direction(&Vec3::new(5.0, 0.0, 0.0), &mut m), Vec3::x());
        let h = heading_direction(&Vec3::new(3.0, 4.0, 0.0), &mut m);
        assert!((h - Vec3::new(0.6, 0.8, 0.0)).norm() < 1e-15);
        assert_eq!(heading_direction(&Vec3::new(0.05, 0.0, 0.0), &mut m), h);
    }

    #[test]
    fn ramp_examples() {
        let r = SpeedRamp::default();
        assert_eq!(speed_ref(0.0, &r), 3.0);
        assert_eq!(speed_ref(1e4, &r), 9.0);
        assert!((speed_ref(r.duration() / 2.0, &r) - 6.0).abs() < 1e-12);
    }

    fn level_circle() -> CirclePath {
        CirclePath::new(Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0), 40.0).unwrap()
    }

    #[test]
    fn on_path_demand_is_centripetal() {
        let path = level_circle();
        let p = Vec3::new(40.0, 0.0, 0.0);
        let pp = path.closest(&p).unwrap();
        let v = 6.0 * pp.tangent;
        let mut f = PathFollower::new(path, gains(), 100.0, v);
        let c = f.command(&p, &v, 6.0);
        assert!(c.xi.dot(&c.heading).abs() < 1e-12);
        assert!((c.xi.norm() - 36.0 / 40.0).abs() < 0.05 * 36.0 / 40.0);
        // toward the centre
        assert!(c.xi.dot(&pp.radial) < 0.0);
        assert!(c.cross_track < 1e-12);
    }

    #[test]
    fn speed_term_isolated() {
        let path = level_circle();
        let p = Vec3::new(0.0, 40.0, 0.0);
        let t = path.closest(&p).unwrap().tangent;
        let g = GuidanceGains { k_s: 1.0, ..gains() };
        let mut f = PathFollower::new(path, g, 100.0, t);
        let c = f.command(&p, &(5.0 * t), 6.0);
        assert!((c.xi.dot(&c.heading) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn outward_error_steers_inward() {
        let path = level_circle();
        let p = Vec3::new(50.0, 0.0, 0.0);
        let pp = path.closest(&p).unwrap();
        let mut f = PathFollower::new(path, gains(), 100.0, pp.tangent);
        let c = f.command(&p, &(5.0 * pp.tangent), 5.0);
        assert!((c.desired_heading - pp.tangent).dot(&pp.radial) < 0.0);
        assert!((c.cross_track - 10.0).abs() < 1e-12);
    }

    #[test]
    fn axis_point_holds_last_tangent() {
        let path = level_circle();
        let mut f = PathFollower::new(path, gains(), 100.0, Vec3::y());
        let c0 = f.command(&Vec3::new(40.0, 0.0, 0.0), &Vec3::new(0.0, 5.0, 0.0), 5.0);
        let c1 = f.command(&Vec3::new(0.0, 0.0, -3.0), &Vec3::new(0.0, 5.0, 0.0), 5.0);
        assert!(c1.xi.iter().all(|x| x.is_finite()));
        assert!(c0.desired_heading.dot(&c1.desired_heading) > 0.0);
    }

    #[test]
    fn circle_through_start() {
        let n = Vec3::new(10f64.to_radians().sin(), 0.0, 10f64.to_radians().cos());
        let start = Vec3::new(0.0, 0.0, -10.0);
        let c = CirclePath::through(start, -Vec3::x(), n, 40.0).unwrap();
        let pp = c.closest(&start).unwrap();
        assert!(pp.error.norm() < 1e-9);
        assert!(pp.tangent.dot(&-Vec3::x()) > 0.98);
        assert!((c.point_at(0.0, &(start - c.center)) - start).norm() < 1e-9);
    }

    #[test]
    fn climb_reference_endpoints() {
        let p0 = Vec3::new(1.0, 2.0, 0.0);
        let (p, v, a) = climb_reference(0.0, &p0, 10.0, 10.0);
        assert_eq!((p, v, a), (p0, Vec3::zeros(), Vec3::zeros()));
        let (p, v, _) = climb_reference(10.0, &p0, 10.0, 10.0);
        assert!((p - Vec3::new(1.0, 2.0, -10.0)).norm() < 1e-12 && v == Vec3::zeros());
        // finite-difference consistency at mid-climb
        let h = 1e-5;
        let (pa, va, aa) = climb_reference(4.0, &p0, 10.0, 10.0);
        let (pb, vb, _) = climb_reference(4.0 + h, &p0, 10.0, 10.0);
        assert!(((pb - pa) / h - va).norm() < 1e-4);
        assert!(((vb - va) / h - aa).norm() < 1e-4);
    }

    fn arb_vec(r: f64) -> impl Strategy<Value = Vec3> {
        (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn xi_is_bounded(p in arb_vec(200.0), v in arb_vec(30.0), vs in 1.0..15.0f64) {
            let g = gains();
            let xi_max = g.xi_max(9.81);
            let path = CirclePath::new(Vec3::new(0.0, 0.0, -10.0), Vec3::new(0.17, 0.0, 0.98), 40.0).unwrap();
            let mut f = PathFollower::new(path, g.clone(), xi_max, Vec3::x());
            let c = f.command(&p, &v, vs);
            prop_assert!(c.xi.norm() <= xi_max * (1.0 + 1e-12));
            let xt = xi_trajectory(&p, &v, &Vec3::zeros(), &Vec3::zeros(), &Vec3::zeros(), &g, xi_max);
            prop_assert!(xt.norm() <= xi_max * (1.0 + 1e-12));
        }

        #[test]
        fn pathfollow_is_rotation_invariant(
            p in arb_vec(80.0), v in arb_vec(12.0),
            axis in arb_vec(1.0), angle in -3.0..3.0f64,
        ) {
            prop_assume!(v.norm() > 0.5 && axis.norm() > 0.1);
            let q = crate::geom3::Rotation::from_axis_angle(&axis.normalize(), angle);
            let g = gains();
            let c0 = Vec3::new(3.0, -2.0, -10.0);
            let n0 = Vec3::new(0.1, 0.2, 0.97);
            let mut f = PathFollower::new(CirclePath::new(c0, n0, 40.0).unwrap(), g.clone(), 100.0, v);
            let mut fr = PathFollower::new(
                CirclePath::new(q.to_inertial(&c0), q.to_inertial(&n0), 40.0).unwrap(), g, 100.0, q.to_inertial(&v));
            let a = f.command(&p, &v, 7.0);
            let b = fr.command(&q.to_inertial(&p), &q.to_inertial(&v), 7.0);
            prop_assert!((q.to_inertial(&a.xi) - b.xi).norm() < 1e-9);
        }
    }
}
