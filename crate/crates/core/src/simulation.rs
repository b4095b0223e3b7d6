//! Closed-loop simulation: RK4 plant and bodyrate loop at the inner rate,
//! LQR re-linearization at the outer rate, one log row per inner step.

use thiserror::Error;

use crate::controllers::{bodyrate_torque, lqr_step, BodyrateGains};
use crate::error::{invalid, Result};
use crate::error_state::{compute_error, ErrorControl, ErrorState};
use crate::riccati::{LqrWeights, RiccatiError, DEFAULT_REGULARIZATION};
use crate::rotations::{quat_to_rot, wrap_angle, yaw_of, UnitQuat, Vec3};
use crate::trajectory::Trajectory;
use crate::vehicle::{true_derivative, Control, NominalState, TrueDerivative, TrueState, VehicleParams, Wrench};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt_inner: f64,
    /// Inner steps per outer-loop update.
    pub outer_divisor: usize,
    pub duration: f64,
    pub initial: TrueState,
    /// Shift `ε` applied to `A` before each Riccati solve.
    pub regularization: f64,
}

impl SimConfig {
    pub fn new(duration: f64, initial: TrueState) -> Self {
        Self {
            dt_inner: 1e-3,
            outer_divisor: 10,
            duration,
            initial,
            regularization: DEFAULT_REGULARIZATION,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_inner > 0.0 && self.dt_inner.is_finite()) {
            return Err(invalid("sim.dt_inner_s", "must be finite and > 0"));
        }
        if self.outer_divisor < 1 {
            return Err(invalid("sim.outer_divisor", "must be >= 1"));
        }
        if !(self.duration >= self.dt_inner && self.duration.is_finite()) {
            return Err(invalid("sim.duration_s", "must be finite and >= dt_inner_s"));
        }
        if !(self.regularization >= 0.0 && self.regularization.is_finite()) {
            return Err(invalid("lqr.regularization", "must be finite and >= 0"));
        }
        if !self.initial.is_finite() {
            return Err(invalid("sim.initial", "must be finite"));
        }
        Ok(())
    }

    /// Number of integration steps; the log holds one more row than this.
    pub fn steps(&self) -> usize {
        // the small slack absorbs representation error in duration / dt
        (self.duration / self.dt_inner + 1e-9).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("trajectory failed at t = {t}: {source}")]
    Trajectory { t: f64, source: crate::Error },
    #[error("Riccati solve failed at t = {t}: {source}")]
    Riccati { t: f64, source: RiccatiError },
}

/// Error together with the rows logged before it occurred.
#[derive(Debug, Clone, Error)]
#[error("{error} (after {} logged rows)", log.rows.len())]
pub struct SimFailure {
    pub log: SimLog,
    pub error: SimError,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub true_state: TrueState,
    pub nominal: NominalState,
    pub error: ErrorState,
    pub c_t: f64,
    pub omega_cmd: Vec3,
    pub tau: Vec3,
    pub dp_norm: f64,
    /// Residual of the gain currently applied.
    pub care_residual: f64,
    pub saturated: bool,
}

impl LogRow {
    /// Wrapped difference between true and nominal heading.
    pub fn yaw_error(&self) -> f64 {
        wrap_angle(yaw_of(&quat_to_rot(&self.true_state.q)) - yaw_of(&quat_to_rot(&self.nominal.q)))
    }
}

/// Statistics over all Riccati solves of a run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CareStats {
    pub solves: usize,
    pub max_residual: f64,
    pub max_closed_loop_abscissa: f64,
    pub max_newton_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimLog {
    pub rows: Vec<LogRow>,
    pub dt: f64,
    pub care: CareStats,
}

impl SimLog {
    pub fn saturation_count(&self) -> usize {
        self.rows.iter().filter(|r| r.saturated).count()
    }

    pub fn final_row(&self) -> Option<&LogRow> {
        self.rows.last()
    }
}

fn advance(s: &TrueState, d: &TrueDerivative, h: f64) -> TrueState {
    TrueState {
        p: s.p + d.p_dot * h,
        q: UnitQuat::from_raw_vector(&(s.q.as_vector4() + d.q_dot * h)),
        v: s.v + d.v_dot * h,
        omega: s.omega + d.omega_dot * h,
    }
}

/// Classical RK4 over the 13-dimensional state; the quaternion is
/// renormalized once after the combined update.
pub fn rk4_step(s: &TrueState, w: &Wrench, params: &VehicleParams, dt: f64) -> Option<TrueState> {
    let k1 = true_derivative(s, w, params);
    let k2 = true_derivative(&advance(s, &k1, 0.5 * dt), w, params);
    let k3 = true_derivative(&advance(s, &k2, 0.5 * dt), w, params);
    let k4 = true_derivative(&advance(s, &k3, dt), w, params);
    let sum = TrueDerivative {
        p_dot: k1.p_dot + 2.0 * k2.p_dot + 2.0 * k3.p_dot + k4.p_dot,
        q_dot: k1.q_dot + 2.0 * k2.q_dot + 2.0 * k3.q_dot + k4.q_dot,
        v_dot: k1.v_dot + 2.0 * k2.v_dot + 2.0 * k3.v_dot + k4.v_dot,
        omega_dot: k1.omega_dot + 2.0 * k2.omega_dot + 2.0 * k3.omega_dot + k4.omega_dot,
    };
    let q_raw = s.q.as_vector4() + sum.q_dot * (dt / 6.0);
    let next = TrueState {
        p: s.p + sum.p_dot * (dt / 6.0),
        q: UnitQuat::from_raw_vector(&q_raw).normalized(),
        v: s.v + sum.v_dot * (dt / 6.0),
        omega: s.omega + sum.omega_dot * (dt / 6.0),
    };
    next.is_finite().then_some(next)
}

/// Runs the cascaded loop. Deterministic: identical inputs give identical logs.
///
/// At step `k` (time `k·dt`) the outer loop runs when `k` is a multiple of
/// `outer_divisor`; its command is held until the next outer tick. The row
/// for step `k` records the state at `k·dt` and the inputs applied over
/// `[k·dt, (k+1)·dt)`.
pub fn run_closed_loop(
    cfg: &SimConfig,
    traj: &dyn Trajectory,
    weights: &LqrWeights,
    gains: &BodyrateGains,
    params: &VehicleParams,
) -> std::result::Result<SimLog, SimFailure> {
    let steps = cfg.steps();
    let mut log = SimLog {
        rows: Vec::with_capacity(steps + 1),
        dt: cfg.dt_inner,
        care: CareStats {
            max_closed_loop_abscissa: f64::NEG_INFINITY,
            ..Default::default()
        },
    };
    let mut s = cfg.initial;
    s.q = s.q.normalized();
    let mut prev_du = ErrorControl::zero();
    let mut command = Control {
        c: params.hover_thrust(),
        omega: Vec3::zeros(),
    };
    let mut saturated = false;
    let mut residual = 0.0;

    macro_rules! fail {
        ($e:expr) => {
            return Err(SimFailure { log, error: $e })
        };
    }

    for k in 0..=steps {
        let t = k as f64 * cfg.dt_inner;
        let sample = match traj.sample(t, params) {
            Ok(x) => x,
            Err(source) => fail!(SimError::Trajectory { t, source }),
        };
        let error = if k % cfg.outer_divisor == 0 {
            let out = match lqr_step(&s, &sample, weights, params, &prev_du, cfg.regularization) {
                Ok(x) => x,
                Err(source) => fail!(SimError::Riccati { t, source }),
            };
            let care = &mut log.care;
            care.solves += 1;
            care.max_residual = care.max_residual.max(out.gain.residual);
            care.max_closed_loop_abscissa = care.max_closed_loop_abscissa.max(out.gain.closed_loop_abscissa);
            care.max_newton_iterations = care.max_newton_iterations.max(out.gain.iterations);
            if out.saturated {
                log::debug!("thrust clamped at t = {t:.3}");
            }
            command = out.command;
            saturated = out.saturated;
            residual = out.gain.residual;
            prev_du = out.delta_u;
            out.error
        } else {
            compute_error(&s.kinematic(), &sample.nominal)
        };
        let tau = bodyrate_torque(&command.omega, &s.omega, params, gains);
        log.rows.push(LogRow {
            t,
            true_state: s,
            nominal: sample.nominal,
            error,
            c_t: command.c,
            omega_cmd: command.omega,
            tau,
            dp_norm: error.dp.norm(),
            care_residual: residual,
            saturated,
        });
        if k < steps {
            s = match rk4_step(&s, &Wrench { c: command.c, tau }, params, cfg.dt_inner) {
                Some(x) => x,
                None => fail!(SimError::NonFinite { t: t + cfg.dt_inner }),
            };
        }
    }
    log::debug!(
        "{} CARE solves, max residual {:.3e}, max closed-loop abscissa {:.3e}",
        log.care.solves,
        log.care.max_residual,
        log.care.max_closed_loop_abscissa
    );
    Ok(log)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingMetrics {
    /// RMS of `‖δp‖` over rows with `t ≥ window_start`.
    pub rmse_position: f64,
    /// Largest `‖δp‖` over the same window.
    pub max_position_error: f64,
    /// Earliest logged time after which `‖δp‖` stays below the threshold.
    pub settling_time: Option<f64>,
    /// `‖δθ‖` at the last row.
    pub final_attitude_error: f64,
    /// Largest absolute heading error over the window.
    pub max_yaw_error: f64,
}

pub fn compute_metrics(log: &SimLog, settle_threshold: f64, window_start: f64) -> Result<TrackingMetrics> {
    let last = log.rows.last().ok_or_else(|| invalid("log", "empty simulation log"))?;
    if window_start > last.t {
        return Err(invalid(
            "metrics.window_start_s",
            format!("window starts at {window_start} s but the log ends at {} s", last.t),
        ));
    }
    let window: Vec<&LogRow> = log.rows.iter().filter(|r| r.t >= window_start).collect();
    let n = window.len() as f64;
    let rmse_position = (window.iter().map(|r| r.dp_norm * r.dp_norm).sum::<f64>() / n).sqrt();
    let max_position_error = window.iter().map(|r| r.dp_norm).fold(0.0, f64::max);
    let max_yaw_error = window.iter().map(|r| r.yaw_error().abs()).fold(0.0, f64::max);

    let settling_time = match log.rows.iter().rposition(|r| !(r.dp_norm < settle_threshold)) {
        None => Some(log.rows[0].t),
        Some(i) if i + 1 < log.rows.len() => Some(log.rows[i + 1].t),
        Some(_) => None,
    };

    Ok(TrackingMetrics {
        rmse_position,
        max_position_error,
        settling_time,
        final_attitude_error: last.error.dtheta.norm(),
        max_yaw_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotations::Mat3;
    use crate::trajectory::hover_trajectory;
    use approx::assert_relative_eq;

    fn rest(p: Vec3) -> TrueState {
        TrueState {
            p,
            q: UnitQuat::identity(),
            v: Vec3::zeros(),
            omega: Vec3::zeros(),
        }
    }

    fn synthetic(errors: impl Fn(f64) -> f64, dt: f64, steps: usize) -> SimLog {
        let nominal = rest(Vec3::zeros()).kinematic();
        let rows = (0..=steps)
            .map(|k| {
                let t = k as f64 * dt;
                let e = errors(t);
                LogRow {
                    t,
                    true_state: rest(Vec3::new(e, 0.0, 0.0)),
                    nominal,
                    error: ErrorState {
                        dp: Vec3::new(e, 0.0, 0.0),
                        ..ErrorState::zero()
                    },
                    c_t: 9.81,
                    omega_cmd: Vec3::zeros(),
                    tau: Vec3::zeros(),
                    dp_norm: e.abs(),
                    care_residual: 0.0,
                    saturated: false,
                }
            })
            .collect();
        SimLog {
            rows,
            dt,
            care: CareStats::default(),
        }
    }

    #[test]
    fn hover_fixed_point() {
        let params = VehicleParams::default();
        let s = rest(Vec3::new(1.0, 2.0, 3.0));
        let w = Wrench {
            c: params.hover_thrust(),
            tau: Vec3::zeros(),
        };
        let n = rk4_step(&s, &w, &params, 1e-3).unwrap();
        assert!((n.p - s.p).norm() < 1e-12);
        assert!((n.v - s.v).norm() < 1e-12);
        assert!((n.q.as_vector4() - s.q.as_vector4()).norm() < 1e-12);
    }

    #[test]
    fn free_fall_matches_ballistics() {
        let params = VehicleParams::default();
        let mut s = rest(Vec3::zeros());
        let w = Wrench {
            c: 0.0,
            tau: Vec3::zeros(),
        };
        for _ in 0..1000 {
            s = rk4_step(&s, &w, &params, 1e-3).unwrap();
        }
        assert!((s.v.z + 9.81).abs() < 1e-9);
        assert!((s.p.z + 4.905).abs() < 1e-6);
    }

    #[test]
    fn symmetric_spin_is_constant() {
        let params = VehicleParams {
            inertia: Mat3::identity() * 0.02,
            ..Default::default()
        };
        let omega = Vec3::new(1.0, -2.0, 0.5);
        let mut s = TrueState {
            omega,
            ..rest(Vec3::zeros())
        };
        let w = Wrench {
            c: params.hover_thrust(),
            tau: Vec3::zeros(),
        };
        for _ in 0..1000 {
            s = rk4_step(&s, &w, &params, 1e-3).unwrap();
            assert!((s.q.norm() - 1.0).abs() < 1e-12);
        }
        assert!((s.omega - omega).norm() < 1e-10);
    }

    #[test]
    fn quaternion_drift_before_normalization_is_small() {
        let params = VehicleParams::default();
        let s = TrueState {
            omega: Vec3::new(3.0, -1.0, 2.0),
            ..rest(Vec3::zeros())
        };
        let w = Wrench {
            c: params.hover_thrust(),
            tau: Vec3::new(0.01, 0.0, -0.01),
        };
        let dt = 1e-3;
        let k = true_derivative(&s, &w, &params);
        // a single explicit RK4 update of q before renormalization
        let k2 = true_derivative(&advance(&s, &k, 0.5 * dt), &w, &params);
        let k3 = true_derivative(&advance(&s, &k2, 0.5 * dt), &w, &params);
        let k4 = true_derivative(&advance(&s, &k3, dt), &w, &params);
        let q = s.q.as_vector4() + (k.q_dot + 2.0 * k2.q_dot + 2.0 * k3.q_dot + k4.q_dot) * (dt / 6.0);
        assert!((q.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn non_finite_is_reported() {
        let params = VehicleParams::default();
        let w = Wrench {
            c: f64::NAN,
            tau: Vec3::zeros(),
        };
        assert!(rk4_step(&rest(Vec3::zeros()), &w, &params, 1e-3).is_none());
    }

    #[test]
    fn hover_equilibrium_is_preserved() {
        let params = VehicleParams::default();
        let p0 = Vec3::new(0.0, 0.0, 1.0);
        let cfg = SimConfig::new(2.0, rest(p0));
        let log = run_closed_loop(
            &cfg,
            &hover_trajectory(p0, 0.0),
            &LqrWeights::default(),
            &BodyrateGains::default(),
            &params,
        )
        .unwrap();
        assert_eq!(log.rows.len(), 2001);
        assert!(log.rows.iter().all(|r| r.dp_norm < 1e-6));
        assert!(log.rows.windows(2).all(|w| w[1].t > w[0].t));
        assert_eq!(log.care.solves, 201);
        assert!(log.care.max_residual < 1e-8);
    }

    #[test]
    fn row_count_follows_duration() {
        let params = VehicleParams::default();
        let mut cfg = SimConfig::new(0.0105, rest(Vec3::zeros()));
        cfg.outer_divisor = 3;
        let traj = hover_trajectory(Vec3::zeros(), 0.0);
        let log = run_closed_loop(&cfg, &traj, &LqrWeights::default(), &BodyrateGains::default(), &params).unwrap();
        assert_eq!(log.rows.len(), 11);
        assert_eq!(log.care.solves, 4);
    }

    #[test]
    fn metrics_zero_error() {
        let m = compute_metrics(&synthetic(|_| 0.0, 0.01, 100), 0.01, 0.0).unwrap();
        assert_eq!(m.rmse_position, 0.0);
        assert_eq!(m.max_position_error, 0.0);
        assert_eq!(m.settling_time, Some(0.0));
        assert_eq!(m.final_attitude_error, 0.0);
        assert_eq!(m.max_yaw_error, 0.0);
    }

    #[test]
    fn metrics_exponential_settling() {
        let dt = 1e-3;
        let m = compute_metrics(&synthetic(|t| (-t).exp(), dt, 8000), 0.01, 0.0).unwrap();
        let ts = m.settling_time.unwrap();
        assert!((ts - 100f64.ln()).abs() <= dt, "{ts}");
        assert_relative_eq!(m.max_position_error, 1.0);
    }

    #[test]
    fn metrics_never_settles() {
        let m = compute_metrics(&synthetic(|_| 0.1, 0.01, 100), 0.01, 0.5).unwrap();
        assert_eq!(m.settling_time, None);
        assert_relative_eq!(m.rmse_position, 0.1, epsilon = 1e-15);
    }

    #[test]
    fn metrics_window_past_end_fails() {
        assert!(compute_metrics(&synthetic(|_| 0.0, 0.01, 100), 0.01, 1.5).is_err());
        assert!(compute_metrics(&SimLog::default(), 0.01, 0.0).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimConfig::new(1.0, rest(Vec3::zeros()));
        cfg.validate().unwrap();
        cfg.outer_divisor = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = SimConfig::new(1e-4, rest(Vec3::zeros()));
        assert!(cfg.validate().is_err());
        cfg.duration = 1.0;
        cfg.dt_inner = -1.0;
        assert!(cfg.validate().is_err());
    }
}
