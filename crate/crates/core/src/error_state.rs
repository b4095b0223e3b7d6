//! Error-state composition, nonlinear error dynamics and their Jacobians.
//!
//! The error state is stacked as `δx = (δp, δθ, δv) ∈ ℝ⁹` and the error
//! control as `δu = (δc, δω) ∈ ℝ⁴`. Orientation error lives in exponential
//! coordinates on the right of the nominal attitude, `R_t = R exp([δθ]x)`.

use nalgebra::{SMatrix, SVector};

use crate::rotations::{
    exp_so3, hat, log_so3_unchecked, quat_mul, Mat3, RotationMatrix, RotationVector, UnitQuat, Vec3,
};
use crate::vehicle::{Control, KinematicState, NominalState, VehicleParams};

pub const STATE_DIM: usize = 9;
pub const CONTROL_DIM: usize = 4;

pub type ErrorVector = SVector<f64, STATE_DIM>;
pub type ControlVector = SVector<f64, CONTROL_DIM>;
pub type StateMatrix = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type InputMatrix = SMatrix<f64, STATE_DIM, CONTROL_DIM>;

// Row/column offsets of each block in the stacked vectors.
const P: usize = 0;
const THETA: usize = 3;
const V: usize = 6;
const C: usize = 0;
const OMEGA: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorState {
    pub dp: Vec3,
    pub dtheta: RotationVector,
    pub dv: Vec3,
}

impl ErrorState {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn to_vector(&self) -> ErrorVector {
        let mut x = ErrorVector::zeros();
        x.fixed_rows_mut::<3>(P).copy_from(&self.dp);
        x.fixed_rows_mut::<3>(THETA).copy_from(&self.dtheta);
        x.fixed_rows_mut::<3>(V).copy_from(&self.dv);
        x
    }

    pub fn from_vector(x: &ErrorVector) -> Self {
        Self {
            dp: x.fixed_rows::<3>(P).into(),
            dtheta: x.fixed_rows::<3>(THETA).into(),
            dv: x.fixed_rows::<3>(V).into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorControl {
    pub dc: f64,
    pub domega: Vec3,
}

impl ErrorControl {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn to_vector(&self) -> ControlVector {
        let mut u = ControlVector::zeros();
        u[C] = self.dc;
        u.fixed_rows_mut::<3>(OMEGA).copy_from(&self.domega);
        u
    }

    pub fn from_vector(u: &ControlVector) -> Self {
        Self {
            dc: u[C],
            domega: u.fixed_rows::<3>(OMEGA).into(),
        }
    }
}

/// `(A, B)` of the error dynamics and the point they were evaluated at.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedSystem {
    pub a: StateMatrix,
    pub b: InputMatrix,
    pub dx_bar: ErrorState,
    pub du_bar: ErrorControl,
    pub nominal_r: RotationMatrix,
    pub nominal_c: f64,
}

/// `x ⊕ δx`: additive position and velocity, right-multiplied attitude.
pub fn compose_state(nominal: &NominalState, err: &ErrorState) -> KinematicState {
    let dq = UnitQuat::from_rotation_vector(&err.dtheta);
    KinematicState {
        p: nominal.p + err.dp,
        q: quat_mul(&nominal.q, &dq),
        v: nominal.v + err.dv,
    }
}

/// `x_t ⊖ x`, with `δθ = log(Rᵀ R_t)` on the canonical branch.
pub fn compute_error(true_s: &KinematicState, nominal: &NominalState) -> ErrorState {
    let r = nominal.q.to_rotation_matrix();
    let r_t = true_s.q.to_rotation_matrix();
    ErrorState {
        dp: true_s.p - nominal.p,
        dtheta: log_so3_unchecked(&(r.transpose() * r_t)),
        dv: true_s.v - nominal.v,
    }
}

/// `u ⊕ δu`: `c_t = c + δc`, `ω_t = exp([δθ]x)ᵀ ω + δω` (current body frame).
pub fn compose_control(nominal_u: &Control, err_u: &ErrorControl, dtheta: &RotationVector) -> Control {
    let d_r = exp_so3(dtheta);
    Control {
        c: nominal_u.c + err_u.dc,
        omega: d_r.transpose() * nominal_u.omega + err_u.domega,
    }
}

fn thrust_axis(c: f64) -> Vec3 {
    Vec3::new(0.0, 0.0, c)
}

/// Nonlinear error dynamics `δẋ = f(δx, δu)` under the small-angle model:
///
/// * `δṗ = δv`
/// * `δθ̇ = (I + ½[δθ]x) δω`
/// * `δv̇ = (1/m) R ((0,0,δc) + [δθ]x (0,0,c+δc))`
pub fn error_dynamics(
    dx: &ErrorState,
    du: &ErrorControl,
    nominal_r: &RotationMatrix,
    nominal_c: f64,
    params: &VehicleParams,
) -> ErrorVector {
    let k = hat(&dx.dtheta);
    let theta_dot = (Mat3::identity() + 0.5 * k) * du.domega;
    let v_dot = nominal_r * (thrust_axis(du.dc) + k * thrust_axis(nominal_c + du.dc)) / params.mass;
    ErrorState {
        dp: dx.dv,
        dtheta: theta_dot,
        dv: v_dot,
    }
    .to_vector()
}

/// `∂f/∂δx` at `(δx, δu)`. Only the `(δp,δv)`, `(δθ,δθ)` and `(δv,δθ)` blocks are nonzero.
pub fn jacobian_a(
    _dx: &ErrorState,
    du: &ErrorControl,
    nominal_r: &RotationMatrix,
    nominal_c: f64,
    params: &VehicleParams,
) -> StateMatrix {
    let mut a = StateMatrix::zeros();
    a.fixed_view_mut::<3, 3>(P, V).copy_from(&Mat3::identity());
    a.fixed_view_mut::<3, 3>(THETA, THETA)
        .copy_from(&(-0.5 * hat(&du.domega)));
    a.fixed_view_mut::<3, 3>(V, THETA)
        .copy_from(&(-(nominal_r * hat(&thrust_axis(nominal_c + du.dc))) / params.mass));
    a
}

/// `∂f/∂δu` at `δx`. Only the `(δθ,δω)` and `(δv,δc)` blocks are nonzero.
pub fn jacobian_b(dx: &ErrorState, nominal_r: &RotationMatrix, params: &VehicleParams) -> InputMatrix {
    let k = hat(&dx.dtheta);
    let mut b = InputMatrix::zeros();
    b.fixed_view_mut::<3, 3>(THETA, OMEGA)
        .copy_from(&(Mat3::identity() + 0.5 * k));
    b.fixed_view_mut::<3, 1>(V, C)
        .copy_from(&(nominal_r * (Mat3::identity() + k) * Vec3::z() / params.mass));
    b
}

/// Builds `(A, B)` at the linearization point `(δx̄, δū)`.
pub fn linearize(
    dx_bar: &ErrorState,
    du_bar: &ErrorControl,
    nominal_r: &RotationMatrix,
    nominal_c: f64,
    params: &VehicleParams,
) -> LinearizedSystem {
    LinearizedSystem {
        a: jacobian_a(dx_bar, du_bar, nominal_r, nominal_c, params),
        b: jacobian_b(dx_bar, nominal_r, params),
        dx_bar: *dx_bar,
        du_bar: *du_bar,
        nominal_r: *nominal_r,
        nominal_c,
    }
}
