//! 3-D geometry kernel: cross-product matrices, the antisymmetric projector,
//! plane projections and a checked rotation-matrix newtype.
//!
//! Vectors and matrices are plain `nalgebra` types. Attitude is always held
//! as a rotation matrix whose columns are the body axes expressed in the
//! inertial basis.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Orthonormality / determinant tolerance for [`Rotation`].
pub const ORTHO_TOL: f64 = 1e-9;
/// Largest Frobenius distance to SO(3) that [`reorthonormalize`] will repair.
pub const REPAIR_GATE: f64 = 1e-3;
/// Skew-symmetry tolerance accepted by [`vex`].
pub const SKEW_TOL: f64 = 1e-9;
/// Minimum axis length accepted by [`project_perp`].
pub const AXIS_FLOOR: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("matrix is not skew-symmetric (asymmetry {0:.3e})")]
    NotSkew(f64),
    #[error("projection axis is degenerate (|u| = {0:.3e})")]
    DegenerateAxis(f64),
    #[error("matrix is not a rotation (orthonormality error {ortho:.3e}, det {det:.6})")]
    NotRotation { ortho: f64, det: f64 },
    #[error("matrix drifted {0:.3e} away from SO(3), refusing to repair")]
    Divergence(f64),
}

/// Cross-product matrix: `skew(a) * b == a.cross(&b)`.
pub fn skew(a: &Vec3) -> Mat3 {
    Mat3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

/// Inverse of [`skew`].
pub fn vex(m: &Mat3) -> Result<Vec3, GeomError> {
    let asym = (m + m.transpose()).abs().max();
    if asym > SKEW_TOL {
        return Err(GeomError::NotSkew(asym));
    }
    Ok(vex_unchecked(m))
}

/// Reads the axial vector of the antisymmetric part without checking.
pub fn vex_unchecked(m: &Mat3) -> Vec3 {
    Vec3::new(0.5 * (m[(2, 1)] - m[(1, 2)]), 0.5 * (m[(0, 2)] - m[(2, 0)]), 0.5 * (m[(1, 0)] - m[(0, 1)]))
}

/// Antisymmetric part `(M - Mᵀ)/2`.
pub fn antisym(m: &Mat3) -> Mat3 {
    (m - m.transpose()) * 0.5
}

/// Projection of `x` on the plane orthogonal to `u`.
pub fn project_perp(u: &Vec3, x: &Vec3) -> Result<Vec3, GeomError> {
    let n = u.norm();
    if n <= AXIS_FLOOR {
        return Err(GeomError::DegenerateAxis(n));
    }
    let uh = u / n;
    Ok(x - uh * uh.dot(x))
}

/// The projector matrix `I - ûûᵀ`.
pub fn projector(u: &Vec3) -> Result<Mat3, GeomError> {
    let n = u.norm();
    if n <= AXIS_FLOOR {
        return Err(GeomError::DegenerateAxis(n));
    }
    let uh = u / n;
    Ok(Mat3::identity() - uh * uh.transpose())
}

/// Polar (closest in Frobenius norm) rotation to `m`.
///
/// Inputs farther than [`REPAIR_GATE`] from SO(3), or with a negative
/// determinant, are rejected rather than silently projected.
pub fn reorthonormalize(m: &Mat3) -> Result<Rotation, GeomError> {
    if !m.iter().all(|x| x.is_finite()) {
        return Err(GeomError::Divergence(f64::INFINITY));
    }
    let svd = m.svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(GeomError::Divergence(f64::INFINITY)),
    };
    let dist = svd.singular_values.iter().map(|s| (s - 1.0).powi(2)).sum::<f64>().sqrt();
    let polar = u * vt;
    if dist > REPAIR_GATE || polar.determinant() < 0.0 {
        return Err(GeomError::Divergence(dist));
    }
    Ok(Rotation(polar))
}

/// A 3×3 matrix in SO(3). Columns are the body axes ı, ȷ, k in inertial
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Checks the SO(3) invariants within [`ORTHO_TOL`].
    pub fn new(m: Mat3) -> Result<Self, GeomError> {
        let ortho = (m.transpose() * m - Mat3::identity()).abs().max();
        let det = m.determinant();
        if ortho > ORTHO_TOL || (det - 1.0).abs() > ORTHO_TOL || !ortho.is_finite() {
            return Err(GeomError::NotRotation { ortho, det });
        }
        Ok(Rotation(m))
    }

    /// Wraps `m` without checks; for integrator stages already known to be
    /// within round-off of SO(3).
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Rotation(m)
    }

    /// Builds the rotation whose columns are the given axes.
    pub fn from_axes(i: &Vec3, j: &Vec3, k: &Vec3) -> Result<Self, GeomError> {
        Self::new(Mat3::from_columns(&[*i, *j, *k]))
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 || angle == 0.0 {
            return Self::identity();
        }
        let k = skew(&(axis / n));
        Rotation(Mat3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos()))
    }

    /// Yaw-pitch-roll (z-y-x) construction.
    pub fn from_euler(roll: f64, pitch: f64, yaw: f64) -> Self {
        let rz = Self::from_axis_angle(&Vec3::z(), yaw);
        let ry = Self::from_axis_angle(&Vec3::y(), pitch);
        let rx = Self::from_axis_angle(&Vec3::x(), roll);
        Rotation(rz.0 * ry.0 * rx.0)
    }

    pub fn from_quaternion(q: &UnitQuaternion<f64>) -> Self {
        Rotation(*q.to_rotation_matrix().matrix())
    }

    pub fn to_quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_matrix(&self.0)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn i_axis(&self) -> Vec3 {
        self.0.column(0).into_owned()
    }

    pub fn j_axis(&self) -> Vec3 {
        self.0.column(1).into_owned()
    }

    pub fn k_axis(&self) -> Vec3 {
        self.0.column(2).into_owned()
    }

    pub fn transpose(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    /// Body coordinates of an inertial vector.
    pub fn to_body(&self, x: &Vec3) -> Vec3 {
        self.0.tr_mul(x)
    }

    /// Inertial coordinates of a body vector.
    pub fn to_inertial(&self, x: &Vec3) -> Vec3 {
        self.0 * x
    }

    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation(self.0 * other.0)
    }

    /// Rotation angle in [0, π].
    pub fn angle(&self) -> f64 {
        ((self.0.trace() - 1.0) * 0.5).clamp(-1.0, 1.0).acos()
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

/// Scales `x` down so that its norm does not exceed `max`.
pub fn saturate_norm(x: &Vec3, max: f64) -> Vec3 {
    let n = x.norm();
    if n > max && n > 0.0 {
        x * (max / n)
    } else {
        *x
    }
}
