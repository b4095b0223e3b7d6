//! SO(3) and unit-quaternion primitives.
//!
//! Conventions: Hamilton product, scalar-first quaternions, and rotations
//! that map body-frame vectors into the inertial frame. Rotation vectors are
//! exponential coordinates (axis times angle, radians).
//!
//! Every closed-form expression below has a series branch for angles under
//! [`SMALL_ANGLE`] so that the `0/0` limits never hit floating point.

use nalgebra::{Matrix3, Vector3, Vector4};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Exponential coordinates of a rotation (axis times angle).
pub type RotationVector = Vec3;

/// Body-to-inertial rotation matrix.
pub type RotationMatrix = Mat3;

/// Angle below which exp, log and `jr_inv` switch to their Taylor series.
pub const SMALL_ANGLE: f64 = 1e-4;

/// Tolerance used to accept a matrix as skew-symmetric or orthonormal.
pub const MATRIX_TOL: f64 = 1e-9;

/// `jr_inv` is rejected at or beyond this angle (the `sin` denominator vanishes at 2π).
pub const JR_INV_MAX_ANGLE: f64 = 2.0 * std::f64::consts::PI - 0.1;

/// Skew-symmetric cross-product matrix: `hat(v) * w == v.cross(&w)`.
pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]. Rejects matrices whose symmetric part exceeds [`MATRIX_TOL`].
pub fn vee(m: &Mat3) -> Result<Vec3> {
    let sym = (m + m.transpose()).norm();
    if !(sym <= MATRIX_TOL) {
        return Err(Error::NotSkewSymmetric(sym));
    }
    Ok(vee_unchecked(m))
}

fn vee_unchecked(m: &Mat3) -> Vec3 {
    Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// Rodrigues formula for `exp([theta]x)`.
pub fn exp_so3(theta: &RotationVector) -> RotationMatrix {
    let angle = theta.norm();
    let k = hat(theta);
    let k2 = k * k;
    if angle < SMALL_ANGLE {
        return Mat3::identity() + k + 0.5 * k2;
    }
    let a = angle.sin() / angle;
    let b = (1.0 - angle.cos()) / (angle * angle);
    Mat3::identity() + a * k + b * k2
}

/// Largest entrywise deviation of `RᵀR` from the identity.
pub fn orthogonality_error(r: &Mat3) -> f64 {
    (r.transpose() * r - Mat3::identity()).abs().max()
}

/// Checks the rotation-matrix invariants (orthonormal, det = +1).
pub fn check_rotation(r: &Mat3) -> Result<()> {
    let orthogonality = orthogonality_error(r);
    let det = r.determinant();
    if !(orthogonality <= MATRIX_TOL) || !((det - 1.0).abs() <= MATRIX_TOL) {
        return Err(Error::NotRotation { orthogonality, det });
    }
    Ok(())
}

/// Logarithm of a rotation matrix on the canonical branch, `‖theta‖ <= π`.
pub fn log_so3(r: &RotationMatrix) -> Result<RotationVector> {
    check_rotation(r)?;
    Ok(log_so3_unchecked(r))
}

pub(crate) fn log_so3_unchecked(r: &RotationMatrix) -> RotationVector {
    let cos_angle = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    // sin(angle) * axis
    let sin_axis = 0.5 * vee_unchecked(&(r - r.transpose()));
    let sin_angle = sin_axis.norm();
    let angle = sin_angle.atan2(cos_angle);

    if angle < SMALL_ANGLE {
        // angle / sin(angle) to second order
        return (1.0 + angle * angle / 6.0) * sin_axis;
    }
    if cos_angle > -0.99 {
        return (angle / sin_angle) * sin_axis;
    }

    // Near π: (R + Rᵀ)/2 - cos I = (1 - cos) a aᵀ, read the axis off its largest diagonal.
    let outer = (0.5 * (r + r.transpose()) - cos_angle * Mat3::identity()) / (1.0 - cos_angle);
    let k = (0..3)
        .max_by(|&i, &j| outer[(i, i)].total_cmp(&outer[(j, j)]))
        .unwrap_or(0);
    let ak = outer[(k, k)].max(0.0).sqrt();
    let mut axis = Vec3::from_fn(|i, _| if i == k { ak } else { outer[(k, i)] / ak });
    axis.normalize_mut();
    if axis.dot(&sin_axis) < 0.0 {
        axis = -axis;
    }
    angle * axis
}

/// Inverse right Jacobian of SO(3).
///
/// `I + ½[θ]x + (1/θ² − (1 + cos θ)/(2θ sin θ))[θ]x²`, evaluated through the
/// half-angle identity `(1 + cos θ)/sin θ = cot(θ/2)` so that θ = π is regular.
pub fn jr_inv(theta: &RotationVector) -> Result<Mat3> {
    let angle = theta.norm();
    if !(angle < JR_INV_MAX_ANGLE) {
        return Err(Error::JacobianDomain(angle));
    }
    let k = hat(theta);
    let k2 = k * k;
    let coeff = if angle < SMALL_ANGLE {
        1.0 / 12.0 + angle * angle / 720.0
    } else {
        let half = 0.5 * angle;
        1.0 / (angle * angle) - half.cos() / (2.0 * angle * half.sin())
    };
    Ok(Mat3::identity() + 0.5 * k + coeff * k2)
}

/// Right Jacobian of SO(3), `exp(θ + δ) ≈ exp(θ) exp(J_r(θ) δ)`.
pub fn jr(theta: &RotationVector) -> Mat3 {
    let angle = theta.norm();
    let k = hat(theta);
    let k2 = k * k;
    let (a, b) = if angle < SMALL_ANGLE {
        (0.5 - angle * angle / 24.0, 1.0 / 6.0 - angle * angle / 120.0)
    } else {
        let a2 = angle * angle;
        ((1.0 - angle.cos()) / a2, (angle - angle.sin()) / (a2 * angle))
    };
    Mat3::identity() - a * k + b * k2
}

/// Unit quaternion, Hamilton convention, stored scalar-first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuat {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Default for UnitQuat {
    fn default() -> Self {
        Self::identity()
    }
}

impl UnitQuat {
    pub const fn identity() -> Self {
        Self {
            w: 1.0,
            x: 0.0,
            y: 0.0,
            z: 0.0,
        }
    }

    /// Normalizes `(w, x, y, z)`. Fails on zero or non-finite input.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < 1e-12 {
            return Err(crate::error::invalid(
                "quaternion",
                format!("cannot normalize ({w}, {x}, {y}, {z})"),
            ));
        }
        Ok(Self::from_raw(w / n, x / n, y / n, z / n))
    }

    pub(crate) const fn from_raw(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub(crate) fn from_vector4_normalized(v: &Vector4<f64>) -> Self {
        let v = v / v.norm();
        Self::from_raw(v[0], v[1], v[2], v[3])
    }

    /// Unnormalized coordinates; only for intermediate integrator stages.
    pub(crate) fn from_raw_vector(v: &Vector4<f64>) -> Self {
        Self::from_raw(v[0], v[1], v[2], v[3])
    }

    /// Rescaled to unit norm (guards against integration drift).
    pub fn normalized(&self) -> Self {
        Self::from_vector4_normalized(&self.as_vector4())
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn as_vector4(&self) -> Vector4<f64> {
        Vector4::new(self.w, self.x, self.y, self.z)
    }

    pub fn vector_part(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn norm(&self) -> f64 {
        self.as_vector4().norm()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.as_vector4().dot(&other.as_vector4())
    }

    pub fn conjugate(&self) -> Self {
        Self::from_raw(self.w, -self.x, -self.y, -self.z)
    }

    /// Representative with `w >= 0` (ties broken on the first nonzero vector component).
    pub fn canonical(&self) -> Self {
        let flip = if self.w != 0.0 {
            self.w < 0.0
        } else {
            [self.x, self.y, self.z]
                .into_iter()
                .find(|c| *c != 0.0)
                .is_some_and(|c| c < 0.0)
        };
        if flip {
            Self::from_raw(-self.w, -self.x, -self.y, -self.z)
        } else {
            *self
        }
    }

    /// Same physical rotation as `other` within `tol` (either sign).
    pub fn same_rotation(&self, other: &Self, tol: f64) -> bool {
        let a = self.as_vector4();
        let b = other.as_vector4();
        (a - b).abs().max() <= tol || (a + b).abs().max() <= tol
    }

    /// Quaternion of the rotation `exp([theta]x)`.
    pub fn from_rotation_vector(theta: &RotationVector) -> Self {
        let angle = theta.norm();
        let half = 0.5 * angle;
        let (w, s) = if angle < SMALL_ANGLE {
            (1.0 - half * half / 2.0, 0.5 - angle * angle / 48.0)
        } else {
            (half.cos(), half.sin() / angle)
        };
        Self::from_vector4_normalized(&Vector4::new(w, s * theta.x, s * theta.y, s * theta.z))
    }

    /// Rotation of `angle` radians about the unit vector `axis`.
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        Self::from_rotation_vector(&(axis.normalize() * angle))
    }

    /// Shepperd's method; returns the canonical (`w >= 0`) representative.
    pub fn from_rotation_matrix(r: &RotationMatrix) -> Self {
        let tr = r.trace();
        let candidates = [tr, r[(0, 0)], r[(1, 1)], r[(2, 2)]];
        let best = (0..4)
            .max_by(|&i, &j| candidates[i].total_cmp(&candidates[j]))
            .unwrap_or(0);
        let v = match best {
            0 => {
                let s = 2.0 * (1.0 + tr).sqrt();
                Vector4::new(
                    0.25 * s,
                    (r[(2, 1)] - r[(1, 2)]) / s,
                    (r[(0, 2)] - r[(2, 0)]) / s,
                    (r[(1, 0)] - r[(0, 1)]) / s,
                )
            }
            1 => {
                let s = 2.0 * (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).sqrt();
                Vector4::new(
                    (r[(2, 1)] - r[(1, 2)]) / s,
                    0.25 * s,
                    (r[(0, 1)] + r[(1, 0)]) / s,
                    (r[(0, 2)] + r[(2, 0)]) / s,
                )
            }
            2 => {
                let s = 2.0 * (1.0 - r[(0, 0)] + r[(1, 1)] - r[(2, 2)]).sqrt();
                Vector4::new(
                    (r[(0, 2)] - r[(2, 0)]) / s,
                    (r[(0, 1)] + r[(1, 0)]) / s,
                    0.25 * s,
                    (r[(1, 2)] + r[(2, 1)]) / s,
                )
            }
            _ => {
                let s = 2.0 * (1.0 - r[(0, 0)] - r[(1, 1)] + r[(2, 2)]).sqrt();
                Vector4::new(
                    (r[(1, 0)] - r[(0, 1)]) / s,
                    (r[(0, 2)] + r[(2, 0)]) / s,
                    (r[(1, 2)] + r[(2, 1)]) / s,
                    0.25 * s,
                )
            }
        };
        Self::from_vector4_normalized(&v).canonical()
    }

    /// Body-to-inertial rotation matrix.
    pub fn to_rotation_matrix(&self) -> RotationMatrix {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        Mat3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Rotates a body-frame vector into the inertial frame.
    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.to_rotation_matrix() * v
    }

    /// `½ q ⊗ (0, ω)` for a body-frame rate `omega`.
    pub fn kinematics(&self, omega: &Vec3) -> Vector4<f64> {
        0.5 * hamilton(&self.as_vector4(), &Vector4::new(0.0, omega.x, omega.y, omega.z))
    }
}

fn hamilton(a: &Vector4<f64>, b: &Vector4<f64>) -> Vector4<f64> {
    let (aw, ax, ay, az) = (a[0], a[1], a[2], a[3]);
    let (bw, bx, by, bz) = (b[0], b[1], b[2], b[3]);
    Vector4::new(
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )
}

/// Hamilton product `a ⊗ b`, renormalized.
pub fn quat_mul(a: &UnitQuat, b: &UnitQuat) -> UnitQuat {
    UnitQuat::from_vector4_normalized(&hamilton(&a.as_vector4(), &b.as_vector4()))
}

impl std::ops::Mul for UnitQuat {
    type Output = UnitQuat;

    fn mul(self, rhs: UnitQuat) -> UnitQuat {
        quat_mul(&self, &rhs)
    }
}

pub fn quat_to_rot(q: &UnitQuat) -> RotationMatrix {
    q.to_rotation_matrix()
}

/// Heading of the body x-axis projected onto the horizontal plane.
pub fn yaw_of(r: &RotationMatrix) -> f64 {
    r[(1, 0)].atan2(r[(0, 0)])
}

/// Wraps an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}
