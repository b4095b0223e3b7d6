//! Nominal trajectories via the differential-flatness map.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{invalid, Error, Result};
use crate::rotations::{Mat3, UnitQuat, Vec3};
use crate::vehicle::{Control, NominalState, VehicleParams};

/// Thrust below which the flatness map is rejected (N).
pub const MIN_FLAT_THRUST: f64 = 0.1;
/// Lower bound on `‖z_b × x_c‖` before the heading is considered undefined.
pub const GIMBAL_TOL: f64 = 1e-6;

/// Position and yaw with the derivatives the flatness map consumes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlatOutputs {
    pub pos: Vec3,
    pub vel: Vec3,
    pub acc: Vec3,
    pub jerk: Vec3,
    pub yaw: f64,
    pub yaw_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub nominal: NominalState,
    pub u_nominal: Control,
    pub flat: FlatOutputs,
}

/// Yaw-about-z quaternion used to pick a continuous sign for the attitude.
fn yaw_quat(yaw: f64) -> UnitQuat {
    UnitQuat::from_axis_angle(&Vec3::z(), yaw)
}

/// Nominal state and feedforward control from flat outputs.
///
/// The attitude sign is chosen so that `q · q_z(ψ) > 0`; with a continuous
/// `ψ` this keeps consecutive samples on the same hemisphere.
pub fn flatness_map(flat: &FlatOutputs, params: &VehicleParams) -> Result<(NominalState, Control)> {
    let m = params.mass;
    let f = m * (flat.acc - params.gravity);
    let c = f.norm();
    if !(c > MIN_FLAT_THRUST) {
        return Err(Error::NearFreeFall(c));
    }
    let z_b = f / c;
    let (s, co) = flat.yaw.sin_cos();
    let x_c = Vec3::new(co, s, 0.0);
    let y_c = Vec3::new(-s, co, 0.0);
    let zx = z_b.cross(&x_c);
    let n = zx.norm();
    if n < GIMBAL_TOL {
        return Err(Error::GimbalCondition);
    }
    let y_b = zx / n;
    let x_b = y_b.cross(&z_b);
    let r = Mat3::from_columns(&[x_b, y_b, z_b]);

    let mut q = UnitQuat::from_rotation_matrix(&r);
    if q.dot(&yaw_quat(flat.yaw)) < 0.0 {
        q = UnitQuat::from_raw(-q.w(), -q.x(), -q.y(), -q.z());
    }

    let f_dot = m * flat.jerk;
    let z_b_dot = (f_dot - z_b * z_b.dot(&f_dot)) / c;
    let omega = Vec3::new(
        -y_b.dot(&f_dot) / c,
        x_b.dot(&f_dot) / c,
        -(x_b.dot(&z_b_dot.cross(&x_c)) + flat.yaw_rate * x_b.dot(&z_b.cross(&y_c))) / n,
    );

    Ok((
        NominalState {
            p: flat.pos,
            q,
            v: flat.vel,
        },
        Control { c, omega },
    ))
}

/// Anything that can be sampled for a nominal state and feedforward at time `t`.
pub trait Trajectory: Send + Sync {
    fn sample(&self, t: f64, vehicle: &VehicleParams) -> Result<TrajectorySample>;
}

fn sample_from_flat(t: f64, flat: FlatOutputs, vehicle: &VehicleParams) -> Result<TrajectorySample> {
    let (nominal, u_nominal) = flatness_map(&flat, vehicle).map_err(|e| Error::Trajectory {
        t,
        reason: e.to_string(),
    })?;
    Ok(TrajectorySample {
        t,
        nominal,
        u_nominal,
        flat,
    })
}

/// Constant position and yaw.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HoverTrajectory {
    pub p0: Vec3,
    pub yaw: f64,
}

pub fn hover_trajectory(p0: Vec3, yaw: f64) -> HoverTrajectory {
    HoverTrajectory { p0, yaw }
}

impl Trajectory for HoverTrajectory {
    fn sample(&self, t: f64, vehicle: &VehicleParams) -> Result<TrajectorySample> {
        let flat = FlatOutputs {
            pos: self.p0,
            yaw: self.yaw,
            ..Default::default()
        };
        sample_from_flat(t, flat, vehicle)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum YawMode {
    Fixed(f64),
    /// Heading follows the horizontal velocity.
    Tangent,
    /// Constant yaw rate (rad/s) starting from zero.
    Spinning(f64),
}

/// Gerono lemniscate `x = A_x sin Ωt`, `y = A_y sin Ωt cos Ωt` at constant altitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemniscateParams {
    pub amplitude_x: f64,
    pub amplitude_y: f64,
    pub omega_traj: f64,
    pub altitude: f64,
    pub yaw_mode: YawMode,
}

impl Default for LemniscateParams {
    fn default() -> Self {
        Self {
            amplitude_x: 2.0,
            amplitude_y: 1.0,
            omega_traj: 0.8,
            altitude: 1.5,
            yaw_mode: YawMode::Tangent,
        }
    }
}

impl LemniscateParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.amplitude_x, self.amplitude_y, self.omega_traj, self.altitude]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(invalid("trajectory", "lemniscate parameters must be finite"));
        }
        if self.amplitude_x < 0.0 {
            return Err(invalid("trajectory.amplitude_x_m", "must be >= 0"));
        }
        if self.amplitude_y < 0.0 {
            return Err(invalid("trajectory.amplitude_y_m", "must be >= 0"));
        }
        if !(self.omega_traj > 0.0) {
            return Err(invalid("trajectory.omega_rad_per_s", "must be > 0"));
        }
        match self.yaw_mode {
            YawMode::Tangent if !(self.amplitude_x > 0.0 && self.amplitude_y > 0.0) => Err(invalid(
                "trajectory.yaw",
                "tangent yaw needs both amplitudes > 0 (heading undefined otherwise)",
            )),
            YawMode::Fixed(v) | YawMode::Spinning(v) if !v.is_finite() => {
                Err(invalid("trajectory.yaw", "must be finite"))
            }
            _ => Ok(()),
        }
    }

    /// Peak horizontal acceleration; the flatness map cannot fail while this is below `‖g‖`.
    pub fn peak_acceleration(&self) -> f64 {
        let w2 = self.omega_traj * self.omega_traj;
        (self.amplitude_x * w2).hypot(2.0 * self.amplitude_y * w2)
    }

    pub fn period(&self) -> f64 {
        TAU / self.omega_traj
    }

    /// Flat outputs at `t`, derivatives in closed form.
    pub fn flat_outputs(&self, t: f64) -> FlatOutputs {
        let (ax, ay, w) = (self.amplitude_x, self.amplitude_y, self.omega_traj);
        let (s1, c1) = (w * t).sin_cos();
        let (s2, c2) = (2.0 * w * t).sin_cos();
        let w2 = w * w;
        let w3 = w2 * w;
        let pos = Vec3::new(ax * s1, 0.5 * ay * s2, self.altitude);
        let vel = Vec3::new(ax * w * c1, ay * w * c2, 0.0);
        let acc = Vec3::new(-ax * w2 * s1, -2.0 * ay * w2 * s2, 0.0);
        let jerk = Vec3::new(-ax * w3 * c1, -4.0 * ay * w3 * c2, 0.0);
        let (yaw, yaw_rate) = match self.yaw_mode {
            YawMode::Fixed(psi) => (psi, 0.0),
            YawMode::Spinning(rate) => (rate * t, rate),
            YawMode::Tangent => {
                // The heading never equals +π/2 (ẋ = 0 forces ẏ < 0), so cutting there is continuous.
                let mut psi = vel.y.atan2(vel.x);
                if psi > FRAC_PI_2 {
                    psi -= 2.0 * PI;
                }
                let rate = (vel.x * acc.y - vel.y * acc.x) / (vel.x * vel.x + vel.y * vel.y);
                (psi, rate)
            }
        };
        FlatOutputs {
            pos,
            vel,
            acc,
            jerk,
            yaw,
            yaw_rate,
        }
    }
}

pub fn lemniscate_sample(params: &LemniscateParams, vehicle: &VehicleParams, t: f64) -> Result<TrajectorySample> {
    sample_from_flat(t, params.flat_outputs(t), vehicle)
}

impl Trajectory for LemniscateParams {
    fn sample(&self, t: f64, vehicle: &VehicleParams) -> Result<TrajectorySample> {
        lemniscate_sample(self, vehicle, t)
    }
}

/// Closed set of trajectories selectable from configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectorySpec {
    Hover(HoverTrajectory),
    Lemniscate(LemniscateParams),
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Hover(h) => {
                if h.p0.iter().all(|v| v.is_finite()) && h.yaw.is_finite() {
                    Ok(())
                } else {
                    Err(invalid("trajectory", "hover position and yaw must be finite"))
                }
            }
            Self::Lemniscate(l) => l.validate(),
        }
    }
}

impl Trajectory for TrajectorySpec {
    fn sample(&self, t: f64, vehicle: &VehicleParams) -> Result<TrajectorySample> {
        match self {
            Self::Hover(h) => h.sample(t, vehicle),
            Self::Lemniscate(l) => l.sample(t, vehicle),
        }
    }
}
