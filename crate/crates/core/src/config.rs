//! JSON run configuration. Units are part of every key name; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::controllers::BodyrateGains;
use crate::error_state::{CONTROL_DIM, STATE_DIM};
use crate::riccati::{LqrWeights, DEFAULT_REGULARIZATION};
use crate::rotations::{Mat3, UnitQuat, Vec3};
use crate::simulation::SimConfig;
use crate::sweep::Scenario;
use crate::trajectory::{HoverTrajectory, LemniscateParams, Trajectory, TrajectorySpec, YawMode};
use crate::vehicle::{TrueState, VehicleParams, STANDARD_GRAVITY};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("config error: {0}")]
    Invalid(#[from] crate::Error),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub vehicle: VehicleConfig,
    #[serde(default)]
    pub lqr: LqrConfig,
    #[serde(default)]
    pub bodyrate: BodyrateConfig,
    pub trajectory: TrajectoryConfig,
    pub sim: SimSection,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleConfig {
    pub mass_kg: f64,
    /// Row-major inertia matrix.
    pub inertia_kgm2: [[f64; 3]; 3],
    pub gravity_mps2: [f64; 3],
    pub thrust_min_n: f64,
    /// Defaults to four times the hover thrust.
    pub thrust_max_n: Option<f64>,
}

impl Default for VehicleConfig {
    fn default() -> Self {
        Self {
            mass_kg: 1.0,
            inertia_kgm2: [[0.01, 0.0, 0.0], [0.0, 0.01, 0.0], [0.0, 0.0, 0.02]],
            gravity_mps2: [0.0, 0.0, -STANDARD_GRAVITY],
            thrust_min_n: 0.0,
            thrust_max_n: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LqrConfig {
    /// Diagonal of Q over (δp, δθ, δv).
    pub q_diag: [f64; STATE_DIM],
    /// Diagonal of R over (δc, δω).
    pub r_diag: [f64; CONTROL_DIM],
    pub regularization: f64,
}

impl Default for LqrConfig {
    fn default() -> Self {
        let w = LqrWeights::default();
        Self {
            q_diag: w.q.diagonal().into(),
            r_diag: w.r.diagonal().into(),
            regularization: DEFAULT_REGULARIZATION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BodyrateConfig {
    pub kp_per_s: [f64; 3],
}

impl Default for BodyrateConfig {
    fn default() -> Self {
        Self {
            kp_per_s: BodyrateGains::default().kp.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectoryConfig {
    Hover {
        position_m: [f64; 3],
        #[serde(default)]
        yaw_rad: f64,
    },
    Lemniscate {
        amplitude_x_m: f64,
        amplitude_y_m: f64,
        omega_rad_per_s: f64,
        altitude_m: f64,
        #[serde(default)]
        yaw: YawConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum YawConfig {
    Fixed {
        yaw_rad: f64,
    },
    #[default]
    Tangent,
    Spinning {
        rate_rad_per_s: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_dt")]
    pub dt_inner_s: f64,
    #[serde(default = "default_divisor")]
    pub outer_divisor: usize,
    pub duration_s: f64,
    #[serde(default)]
    pub initial: InitialConfig,
}

fn default_dt() -> f64 {
    1e-3
}

fn default_divisor() -> usize {
    10
}

/// Initial plant state. Missing position means the trajectory start point;
/// missing attitude means level (identity); velocity and rate default to zero.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub position_m: Option<[f64; 3]>,
    pub quaternion_wxyz: Option<[f64; 4]>,
    pub velocity_mps: [f64; 3],
    pub body_rate_radps: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub settle_threshold_m: f64,
    pub window_start_s: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            settle_threshold_m: 0.01,
            window_start_s: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub csv: bool,
    pub svg: bool,
    pub summary: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            csv: true,
            svg: true,
            summary: true,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::Parse {
                path,
                message: e.into_inner().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn vehicle_params(&self) -> Result<VehicleParams, ConfigError> {
        let v = &self.vehicle;
        let inertia = Mat3::from_fn(|i, j| v.inertia_kgm2[i][j]);
        let gravity = Vec3::from(v.gravity_mps2);
        let params = VehicleParams {
            mass: v.mass_kg,
            inertia,
            gravity,
            thrust_min: v.thrust_min_n,
            thrust_max: v.thrust_max_n.unwrap_or(4.0 * v.mass_kg * gravity.norm()),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn weights(&self) -> Result<LqrWeights, ConfigError> {
        let w = LqrWeights::from_diagonals(&self.lqr.q_diag, &self.lqr.r_diag);
        w.validate().map_err(|e| ConfigError::Parse {
            path: "lqr".into(),
            message: e.to_string(),
        })?;
        Ok(w)
    }

    pub fn gains(&self) -> Result<BodyrateGains, ConfigError> {
        let g = BodyrateGains {
            kp: Vec3::from(self.bodyrate.kp_per_s),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn trajectory_spec(&self) -> Result<TrajectorySpec, ConfigError> {
        let spec = match &self.trajectory {
            TrajectoryConfig::Hover { position_m, yaw_rad } => TrajectorySpec::Hover(HoverTrajectory {
                p0: Vec3::from(*position_m),
                yaw: *yaw_rad,
            }),
            TrajectoryConfig::Lemniscate {
                amplitude_x_m,
                amplitude_y_m,
                omega_rad_per_s,
                altitude_m,
                yaw,
            } => TrajectorySpec::Lemniscate(LemniscateParams {
                amplitude_x: *amplitude_x_m,
                amplitude_y: *amplitude_y_m,
                omega_traj: *omega_rad_per_s,
                altitude: *altitude_m,
                yaw_mode: match yaw {
                    YawConfig::Fixed { yaw_rad } => YawMode::Fixed(*yaw_rad),
                    YawConfig::Tangent => YawMode::Tangent,
                    YawConfig::Spinning { rate_rad_per_s } => YawMode::Spinning(*rate_rad_per_s),
                },
            }),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Validates every section and assembles a runnable scenario.
    pub fn scenario(&self, name: impl Into<String>) -> Result<Scenario, ConfigError> {
        let params = self.vehicle_params()?;
        let weights = self.weights()?;
        let gains = self.gains()?;
        let trajectory = self.trajectory_spec()?;
        let init = &self.sim.initial;
        let position = match init.position_m {
            Some(p) => Vec3::from(p),
            None => trajectory.sample(0.0, &params)?.nominal.p,
        };
        let q = match init.quaternion_wxyz {
            Some([w, x, y, z]) => UnitQuat::new(w, x, y, z).map_err(|e| ConfigError::Parse {
                path: "sim.initial.quaternion_wxyz".into(),
                message: e.to_string(),
            })?,
            None => UnitQuat::identity(),
        };
        let sim = SimConfig {
            dt_inner: self.sim.dt_inner_s,
            outer_divisor: self.sim.outer_divisor,
            duration: self.sim.duration_s,
            initial: TrueState {
                p: position,
                q,
                v: Vec3::from(init.velocity_mps),
                omega: Vec3::from(init.body_rate_radps),
            },
            regularization: self.lqr.regularization,
        };
        sim.validate()?;
        let m = &self.metrics;
        if !(m.settle_threshold_m > 0.0) {
            return Err(crate::error::invalid("metrics.settle_threshold_m", "must be > 0").into());
        }
        if !(m.window_start_s >= 0.0 && m.window_start_s <= sim.duration) {
            return Err(crate::error::invalid("metrics.window_start_s", "must lie within [0, sim.duration_s]").into());
        }
        Ok(Scenario {
            name: name.into(),
            trajectory,
            sim,
            weights,
            gains,
            params,
            settle_threshold: m.settle_threshold_m,
            window_start: m.window_start_s,
        })
    }
}
