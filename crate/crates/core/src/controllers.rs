//! Outer error-state LQR loop and inner bodyrate loop.

use crate::error::{invalid, Result};
use crate::error_state::{compose_control, compute_error, linearize, ErrorControl, ErrorState};
use crate::riccati::{self, lqr_gain, CareSolution, LqrWeights};
use crate::rotations::{Mat3, Vec3};
use crate::trajectory::TrajectorySample;
use crate::vehicle::{Control, TrueState, VehicleParams};

/// Diagonal proportional gains of the bodyrate loop (1/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyrateGains {
    pub kp: Vec3,
}

impl Default for BodyrateGains {
    fn default() -> Self {
        Self {
            kp: Vec3::new(20.0, 20.0, 8.0),
        }
    }
}

impl BodyrateGains {
    pub fn validate(&self) -> Result<()> {
        if self.kp.iter().all(|k| *k > 0.0 && k.is_finite()) {
            Ok(())
        } else {
            Err(invalid(
                "bodyrate.kp_per_s",
                format!("entries must be finite and > 0, got {:?}", self.kp.as_slice()),
            ))
        }
    }

    pub fn min(&self) -> f64 {
        self.kp.min()
    }
}

/// `τ = J K_p (ω − ω_t) + ω_t × J ω_t`.
pub fn bodyrate_torque(omega_cmd: &Vec3, omega_true: &Vec3, params: &VehicleParams, gains: &BodyrateGains) -> Vec3 {
    let j: &Mat3 = &params.inertia;
    j * gains.kp.component_mul(&(omega_cmd - omega_true)) + omega_true.cross(&(j * omega_true))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterLoopOutput {
    /// Composed command, thrust already clamped to the plant limits.
    pub command: Control,
    pub error: ErrorState,
    /// `δu = −K δx` before composition and clamping.
    pub delta_u: ErrorControl,
    pub gain: CareSolution,
    pub saturated: bool,
}

/// One outer-loop update.
///
/// Linearizes the error dynamics at `(δx, prev_du)`, solves for `K` with `A`
/// shifted by `−epsilon·I`, and applies `δu = −K δx` through `u ⊕ δu`.
pub fn lqr_step(
    true_s: &TrueState,
    sample: &TrajectorySample,
    weights: &LqrWeights,
    params: &VehicleParams,
    prev_du: &ErrorControl,
    epsilon: f64,
) -> riccati::Result<OuterLoopOutput> {
    let error = compute_error(&true_s.kinematic(), &sample.nominal);
    let r = sample.nominal.q.to_rotation_matrix();
    let sys = linearize(&error, prev_du, &r, sample.u_nominal.c, params);
    let gain = lqr_gain(&sys, weights, epsilon)?;
    let delta_u = ErrorControl::from_vector(&(-(gain.gain() * error.to_vector())));
    let raw = compose_control(&sample.u_nominal, &delta_u, &error.dtheta);
    let (c, saturated) = params.clamp_thrust(raw.c);
    Ok(OuterLoopOutput {
        command: Control { c, omega: raw.omega },
        error,
        delta_u,
        gain,
        saturated,
    })
}
