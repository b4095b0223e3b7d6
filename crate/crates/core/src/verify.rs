//! Numerical self-checks exposed through `eslqr verify`.
//!
//! Every suite draws from a fixed-seed generator, so reports are reproducible.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error_state::{
    error_dynamics, jacobian_a, jacobian_b, ErrorControl, ErrorState, ErrorVector, InputMatrix, StateMatrix,
    CONTROL_DIM, STATE_DIM,
};
use crate::par;
use crate::riccati::{lqr_gain, solve_care, LqrWeights, DEFAULT_REGULARIZATION, RESIDUAL_TOL};
use crate::rotations::{exp_so3, jr_inv, log_so3, quat_to_rot, Mat3, RotationMatrix, Vec3};
use crate::trajectory::{lemniscate_sample, LemniscateParams, YawMode};
use crate::vehicle::VehicleParams;

const SEED: u64 = 0x5eed_e51c;

/// A measured quantity compared against a bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub what: String,
    pub value: f64,
    pub bound: f64,
    /// `value >= bound` is required instead of `value < bound`.
    pub at_least: bool,
}

impl Check {
    fn below(what: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            what: what.into(),
            value,
            bound,
            at_least: false,
        }
    }

    fn above(what: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            what: what.into(),
            value,
            bound,
            at_least: true,
        }
    }

    pub fn passed(&self) -> bool {
        if self.at_least {
            self.value >= self.bound
        } else {
            self.value < self.bound
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[{}] {}", if self.passed() { "PASS" } else { "FAIL" }, self.name)?;
        for c in &self.checks {
            let op = if c.at_least { ">=" } else { "<" };
            writeln!(
                f,
                "    {:<4} {}: {:.3e} (required {op} {:.1e})",
                if c.passed() { "ok" } else { "FAIL" },
                c.what,
                c.value,
                c.bound
            )?;
        }
        Ok(())
    }
}

fn unit_vector(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

fn ball(rng: &mut impl Rng, radius: f64) -> Vec3 {
    unit_vector(rng) * radius * rng.gen_range(0.0f64..1.0).cbrt()
}

/// Random linearization point: error, error control, nominal attitude and thrust.
#[derive(Debug, Clone, Copy)]
struct Point {
    dx: ErrorState,
    du: ErrorControl,
    r: RotationMatrix,
    c: f64,
}

fn random_points(n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Point {
            dx: ErrorState {
                dp: ball(&mut rng, 1.0),
                dtheta: ball(&mut rng, 0.3),
                dv: ball(&mut rng, 1.0),
            },
            du: ErrorControl {
                dc: rng.gen_range(-2.0..2.0),
                domega: ball(&mut rng, 1.0),
            },
            r: exp_so3(&ball(&mut rng, PI - 1e-3)),
            c: rng.gen_range(2.0..20.0),
        })
        .collect()
}

fn fd_jacobians(pt: &Point, params: &VehicleParams, h: f64) -> (StateMatrix, InputMatrix) {
    let f = |x: &ErrorVector, u: &nalgebra::SVector<f64, CONTROL_DIM>| {
        error_dynamics(
            &ErrorState::from_vector(x),
            &ErrorControl::from_vector(u),
            &pt.r,
            pt.c,
            params,
        )
    };
    let x0 = pt.dx.to_vector();
    let u0 = pt.du.to_vector();
    let mut a = StateMatrix::zeros();
    for j in 0..STATE_DIM {
        let mut e = ErrorVector::zeros();
        e[j] = h;
        a.set_column(j, &((f(&(x0 + e), &u0) - f(&(x0 - e), &u0)) / (2.0 * h)));
    }
    let mut b = InputMatrix::zeros();
    for j in 0..CONTROL_DIM {
        let mut e = nalgebra::SVector::<f64, CONTROL_DIM>::zeros();
        e[j] = h;
        b.set_column(j, &((f(&x0, &(u0 + e)) - f(&x0, &(u0 - e))) / (2.0 * h)));
    }
    (a, b)
}

/// Analytic `A`, `B` against central differences of the error dynamics.
pub fn jacobian_suite(points: usize) -> SuiteReport {
    let params = VehicleParams::default();
    let errs = par::map(&random_points(points, SEED), |pt| {
        let (a_fd, b_fd) = fd_jacobians(pt, &params, 1e-6);
        let a = jacobian_a(&pt.dx, &pt.du, &pt.r, pt.c, &params);
        let b = jacobian_b(&pt.dx, &pt.r, &params);
        ((a - a_fd).norm() / a.norm(), (b - b_fd).norm() / b.norm())
    });
    let max_a = errs.iter().map(|e| e.0).fold(0.0, f64::max);
    let max_b = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    SuiteReport {
        name: "jacobians vs finite differences",
        checks: vec![
            Check::below(format!("A max relative error ({points} points)"), max_a, 1e-5),
            Check::below(format!("B max relative error ({points} points)"), max_b, 1e-5),
        ],
    }
}

/// Linearization residual at zero error must shrink quadratically with the step.
pub fn linearization_suite(directions: usize) -> SuiteReport {
    let params = VehicleParams::default();
    let pts = random_points(directions, SEED ^ 1);
    let ratios = par::map(&pts, |pt| {
        let a = jacobian_a(&ErrorState::zero(), &ErrorControl::zero(), &pt.r, pt.c, &params);
        let b = jacobian_b(&ErrorState::zero(), &pt.r, &params);
        let (x, u) = (pt.dx.to_vector(), pt.du.to_vector());
        let residual = |s: f64| {
            let f = error_dynamics(
                &ErrorState::from_vector(&(s * x)),
                &ErrorControl::from_vector(&(s * u)),
                &pt.r,
                pt.c,
                &params,
            );
            (f - s * (a * x + b * u)).norm()
        };
        residual(1e-2) / residual(1e-3)
    });
    SuiteReport {
        name: "linearization fidelity",
        checks: vec![Check::above(
            format!("min residual ratio s=1e-2 / s=1e-3 ({directions} directions)"),
            ratios.iter().copied().fold(f64::INFINITY, f64::min),
            50.0,
        )],
    }
}

/// Riccati residual and stability on the hover linearization and the double integrator.
pub fn care_suite() -> SuiteReport {
    let params = VehicleParams::default();
    let sys = crate::error_state::linearize(
        &ErrorState::zero(),
        &ErrorControl::zero(),
        &Mat3::identity(),
        params.hover_thrust(),
        &params,
    );
    let mut checks = match lqr_gain(&sys, &LqrWeights::default(), DEFAULT_REGULARIZATION) {
        Ok(s) => vec![
            Check::below("hover CARE relative residual", s.residual, RESIDUAL_TOL),
            Check::below("hover closed-loop spectral abscissa", s.closed_loop_abscissa, 0.0),
        ],
        Err(e) => vec![Check::below(
            format!("hover CARE solve failed: {e}"),
            f64::INFINITY,
            RESIDUAL_TOL,
        )],
    };
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let r3 = 3f64.sqrt();
    match solve_care(&a, &b, &DMatrix::identity(2, 2), &DMatrix::identity(1, 1)) {
        Ok(s) => {
            let p = DMatrix::from_row_slice(2, 2, &[r3, 1.0, 1.0, r3]);
            let k = DMatrix::from_row_slice(1, 2, &[1.0, r3]);
            checks.push(Check::below("double integrator |P - P*|", (&s.p - p).amax(), 1e-10));
            checks.push(Check::below("double integrator |K - K*|", (&s.k - k).amax(), 1e-10));
        }
        Err(e) => checks.push(Check::below(
            format!("double integrator solve failed: {e}"),
            f64::INFINITY,
            1e-10,
        )),
    }
    SuiteReport {
        name: "Riccati solver",
        checks,
    }
}

/// Right Jacobian by central differences: `Exp(θ + h e_i) ≈ Exp(θ) Exp(J_r h e_i)`.
fn fd_right_jacobian(theta: &Vec3, h: f64) -> Mat3 {
    let r0t = exp_so3(theta).transpose();
    let mut j = Mat3::zeros();
    for i in 0..3 {
        let mut e = Vec3::zeros();
        e[i] = h;
        let plus = log_so3(&(r0t * exp_so3(&(theta + e)))).unwrap_or_default();
        let minus = log_so3(&(r0t * exp_so3(&(theta - e)))).unwrap_or_default();
        j.set_column(i, &((plus - minus) / (2.0 * h)));
    }
    j
}

/// exp/log round trips and the inverse right Jacobian.
pub fn lie_group_suite(samples: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 2);
    let thetas: Vec<Vec3> = (0..samples).map(|_| ball(&mut rng, PI - 1e-3)).collect();
    let errs = par::map(&thetas, |th| {
        let r = exp_so3(th);
        let back = log_so3(&r).map_or(f64::INFINITY, |t| (t - th).norm());
        let r_back = log_so3(&r).map_or(f64::INFINITY, |t| (exp_so3(&t) - r).norm());
        (back, r_back)
    });
    let jr_thetas: Vec<Vec3> = thetas.iter().take(200).map(|t| t * 0.8).collect();
    let jr_errs = par::map(&jr_thetas, |th| match jr_inv(th) {
        Ok(ji) => (ji * fd_right_jacobian(th, 1e-6) - Mat3::identity()).amax(),
        Err(_) => f64::INFINITY,
    });
    SuiteReport {
        name: "SO(3) exp/log and right Jacobian",
        checks: vec![
            Check::below(
                format!("log(exp(θ)) - θ ({samples} samples)"),
                errs.iter().map(|e| e.0).fold(0.0, f64::max),
                1e-9,
            ),
            Check::below(
                format!("exp(log(R)) - R ({samples} samples)"),
                errs.iter().map(|e| e.1).fold(0.0, f64::max),
                1e-9,
            ),
            Check::below(
                format!("jr_inv · J_r(fd) - I ({} samples)", jr_thetas.len()),
                jr_errs.iter().copied().fold(0.0, f64::max),
                1e-5,
            ),
        ],
    }
}

/// Nominal trajectories satisfy the nominal dynamics.
pub fn flatness_suite() -> SuiteReport {
    let vehicle = VehicleParams::default();
    let modes = [YawMode::Tangent, YawMode::Fixed(0.4), YawMode::Spinning(1.0)];
    let times: Vec<(YawMode, f64)> = modes
        .iter()
        .flat_map(|m| (0..400).map(move |k| (*m, 0.05 * k as f64)))
        .collect();
    let errs = par::map(&times, |&(mode, t)| {
        let l = LemniscateParams {
            yaw_mode: mode,
            ..Default::default()
        };
        let sample = |t| lemniscate_sample(&l, &vehicle, t);
        let (Ok(s), Ok(a), Ok(b)) = (sample(t), sample(t - 1e-5), sample(t + 1e-5)) else {
            return [f64::INFINITY; 4];
        };
        let r = quat_to_rot(&s.nominal.q);
        let acc = vehicle.gravity + r * Vec3::new(0.0, 0.0, s.u_nominal.c) / vehicle.mass;
        let v_fd = (b.nominal.p - a.nominal.p) / 2e-5;
        let q_dot_fd = (b.nominal.q.as_vector4() - a.nominal.q.as_vector4()) / 2e-5;
        let q_dot = s.nominal.q.kinematics(&s.u_nominal.omega);
        // |q̇| = |ω|/2, so this compares rates in rad/s
        let omega_err = 2.0 * (q_dot_fd - q_dot).norm();
        let continuity = sample(t + 1e-2).map_or(-1.0, |n| n.nominal.q.dot(&s.nominal.q));
        [
            (acc - s.flat.acc).norm(),
            (v_fd - s.nominal.v).norm(),
            omega_err,
            continuity,
        ]
    });
    let max = |i: usize| errs.iter().map(|e| e[i]).fold(0.0, f64::max);
    SuiteReport {
        name: "flatness consistency",
        checks: vec![
            Check::below("g + R e3 c/m - acc", max(0), 1e-8),
            Check::below("finite-difference p - v", max(1), 1e-5),
            Check::below("quaternion kinematics ω residual", max(2), 1e-4),
            Check::above(
                "min dot of consecutive quaternions (dt=1e-2)",
                errs.iter().map(|e| e[3]).fold(f64::INFINITY, f64::min),
                f64::MIN_POSITIVE,
            ),
        ],
    }
}

/// All suites, run concurrently.
pub fn run_all() -> Vec<SuiteReport> {
    let suites: [fn() -> SuiteReport; 5] = [
        || jacobian_suite(100),
        || linearization_suite(20),
        care_suite,
        || lie_group_suite(1000),
        flatness_suite,
    ];
    par::map(&suites, |f| f())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        for r in run_all() {
            assert!(r.passed(), "{r}");
        }
    }

    #[test]
    fn reports_are_reproducible() {
        assert_eq!(jacobian_suite(10), jacobian_suite(10));
    }

    #[test]
    fn failed_check_is_reported() {
        let r = SuiteReport {
            name: "x",
            checks: vec![Check::below("a", 2.0, 1.0), Check::above("b", 2.0, 1.0)],
        };
        assert!(!r.passed());
        let text = r.to_string();
        assert!(text.starts_with("[FAIL] x"));
        assert!(text.contains("ok   b"));
    }
}
