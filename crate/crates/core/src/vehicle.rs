//! Vehicle parameters and the continuous-time plant.
//!
//! The translational and attitude kinematics are shared between the true and
//! nominal models; the true model additionally carries the body rate and its
//! Euler equation `J ω̇ = τ − ω × Jω`.

use nalgebra::Vector4;

use crate::error::{invalid, Result};
use crate::rotations::{Mat3, UnitQuat, Vec3};

pub const STANDARD_GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleParams {
    pub mass: f64,
    pub inertia: Mat3,
    pub gravity: Vec3,
    pub thrust_min: f64,
    pub thrust_max: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        let mass = 1.0;
        Self {
            mass,
            inertia: Mat3::from_diagonal(&Vec3::new(0.01, 0.01, 0.02)),
            gravity: Vec3::new(0.0, 0.0, -STANDARD_GRAVITY),
            thrust_min: 0.0,
            thrust_max: 4.0 * mass * STANDARD_GRAVITY,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(invalid("vehicle.mass_kg", format!("must be > 0, got {}", self.mass)));
        }
        if self.inertia.iter().any(|v| !v.is_finite()) {
            return Err(invalid("vehicle.inertia_kgm2", "entries must be finite"));
        }
        let asym = (self.inertia - self.inertia.transpose()).abs().max();
        if asym > 1e-12 {
            return Err(invalid("vehicle.inertia_kgm2", format!("not symmetric ({asym:.3e})")));
        }
        if self.inertia.cholesky().is_none() {
            return Err(invalid("vehicle.inertia_kgm2", "not positive definite"));
        }
        if self.gravity.iter().any(|v| !v.is_finite()) {
            return Err(invalid("vehicle.gravity_mps2", "entries must be finite"));
        }
        if !(self.thrust_min >= 0.0) {
            return Err(invalid("vehicle.thrust_min_n", "must be >= 0"));
        }
        if !(self.thrust_max > self.thrust_min && self.thrust_max.is_finite()) {
            return Err(invalid("vehicle.thrust_max_n", "must be finite and > thrust_min_n"));
        }
        Ok(())
    }

    /// Thrust that balances gravity, `m‖g‖`.
    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.gravity.norm()
    }

    /// Clamps a thrust command to the plant limits; the flag is set when clamping was active.
    pub fn clamp_thrust(&self, c: f64) -> (f64, bool) {
        let clamped = c.clamp(self.thrust_min, self.thrust_max);
        (clamped, clamped != c)
    }

    pub fn inertia_inverse(&self) -> Mat3 {
        self.inertia.try_inverse().expect("inertia validated positive definite")
    }
}

/// Plant state: position, attitude and velocity (inertial) plus body rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueState {
    pub p: Vec3,
    pub q: UnitQuat,
    pub v: Vec3,
    pub omega: Vec3,
}

impl TrueState {
    pub fn is_finite(&self) -> bool {
        self.p.iter().all(|x| x.is_finite())
            && self.q.coords().iter().all(|x| x.is_finite())
            && self.v.iter().all(|x| x.is_finite())
            && self.omega.iter().all(|x| x.is_finite())
    }

    pub fn kinematic(&self) -> KinematicState {
        KinematicState {
            p: self.p,
            q: self.q,
            v: self.v,
        }
    }

    pub fn from_kinematic(k: &KinematicState, omega: Vec3) -> Self {
        Self {
            p: k.p,
            q: k.q,
            v: k.v,
            omega,
        }
    }
}

/// Position, attitude and velocity; the part of the state the error is defined over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicState {
    pub p: Vec3,
    pub q: UnitQuat,
    pub v: Vec3,
}

/// Reference state along the planned trajectory.
pub type NominalState = KinematicState;

/// Collective thrust (N) and body-rate command (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Control {
    pub c: f64,
    pub omega: Vec3,
}

/// Collective thrust (N) and body torque (N·m) applied to the plant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench {
    pub c: f64,
    pub tau: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueDerivative {
    pub p_dot: Vec3,
    pub q_dot: Vector4<f64>,
    pub v_dot: Vec3,
    pub omega_dot: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NominalDerivative {
    pub p_dot: Vec3,
    pub q_dot: Vector4<f64>,
    pub v_dot: Vec3,
}

fn translational(q: &UnitQuat, v: &Vec3, c: f64, params: &VehicleParams) -> (Vec3, Vec3) {
    let thrust_body = Vec3::new(0.0, 0.0, c);
    (*v, params.gravity + q.rotate(&thrust_body) / params.mass)
}

/// Time derivative of the plant state. The thrust is clamped to
/// `[thrust_min, thrust_max]` before use.
pub fn true_derivative(s: &TrueState, w: &Wrench, params: &VehicleParams) -> TrueDerivative {
    let (c, _) = params.clamp_thrust(w.c);
    let (p_dot, v_dot) = translational(&s.q, &s.v, c, params);
    let j = &params.inertia;
    let omega_dot = params.inertia_inverse() * (w.tau - s.omega.cross(&(j * s.omega)));
    TrueDerivative {
        p_dot,
        q_dot: s.q.kinematics(&s.omega),
        v_dot,
        omega_dot,
    }
}

/// Time derivative of the nominal state; the body rate is an input here.
pub fn nominal_derivative(s: &NominalState, u: &Control, params: &VehicleParams) -> NominalDerivative {
    let (p_dot, v_dot) = translational(&s.q, &s.v, u.c, params);
    NominalDerivative {
        p_dot,
        q_dot: s.q.kinematics(&u.omega),
        v_dot,
    }
}
