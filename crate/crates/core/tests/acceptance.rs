//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Oracles here are independent of the library where
//! practical: nalgebra rotations for exp/log, a Lyapunov certificate for
//! stability, hand-derived Riccati fixtures, closed-form ballistics.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::{DMatrix, Rotation3, SMatrix, SVector, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use eslqr::controllers::{bodyrate_torque, BodyrateGains};
use eslqr::error_state::{error_dynamics, jacobian_a, jacobian_b, linearize, ErrorControl, ErrorState};
use eslqr::riccati::{lqr_gain, solve_care, LqrWeights, DEFAULT_REGULARIZATION};
use eslqr::rotations::{exp_so3, jr_inv, log_so3, Mat3, UnitQuat, Vec3};
use eslqr::simulation::{rk4_step, run_closed_loop, SimConfig, SimLog};
use eslqr::trajectory::{hover_trajectory, lemniscate_sample, LemniscateParams};
use eslqr::vehicle::{TrueState, VehicleParams, Wrench};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn random_in_ball(rng: &mut ChaCha8Rng, radius: f64) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        if v.norm() <= 1.0 {
            return v * radius;
        }
    }
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Mat3 {
    let axis = Vector3::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    );
    *Rotation3::new(axis.normalize() * rng.gen_range(0.0..3.1)).matrix()
}

struct Point {
    dx: ErrorState,
    du: ErrorControl,
    r: Mat3,
    c: f64,
}

fn random_point(rng: &mut ChaCha8Rng) -> Point {
    Point {
        dx: ErrorState {
            dp: random_in_ball(rng, 2.0),
            dtheta: random_in_ball(rng, 0.3),
            dv: random_in_ball(rng, 2.0),
        },
        du: ErrorControl {
            dc: rng.gen_range(-3.0..3.0),
            domega: random_in_ball(rng, 1.0),
        },
        r: random_rotation(rng),
        c: rng.gen_range(1.0..25.0),
    }
}

fn f(pt: &Point, x: &SVector<f64, 9>, u: &SVector<f64, 4>, params: &VehicleParams) -> SVector<f64, 9> {
    error_dynamics(
        &ErrorState::from_vector(x),
        &ErrorControl::from_vector(u),
        &pt.r,
        pt.c,
        params,
    )
}

fn criterion_1() -> Outcome {
    let params = VehicleParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let pt = random_point(&mut rng);
        let (x, u) = (pt.dx.to_vector(), pt.du.to_vector());
        let mut a_fd = SMatrix::<f64, 9, 9>::zeros();
        for j in 0..9 {
            let e = SVector::<f64, 9>::ith(j, h);
            a_fd.set_column(
                j,
                &((f(&pt, &(x + e), &u, &params) - f(&pt, &(x - e), &u, &params)) / (2.0 * h)),
            );
        }
        let mut b_fd = SMatrix::<f64, 9, 4>::zeros();
        for j in 0..4 {
            let e = SVector::<f64, 4>::ith(j, h);
            b_fd.set_column(
                j,
                &((f(&pt, &x, &(u + e), &params) - f(&pt, &x, &(u - e), &params)) / (2.0 * h)),
            );
        }
        let a = jacobian_a(&pt.dx, &pt.du, &pt.r, pt.c, &params);
        let b = jacobian_b(&pt.dx, &pt.r, &params);
        worst = worst
            .max((a - a_fd).norm() / a.norm())
            .max((b - b_fd).norm() / b.norm());
    }
    let elapsed = start.elapsed().as_secs_f64();
    let msg = format!("max relative error {worst:.2e} (< 1e-5), runtime {elapsed:.3} s (< 1 s)");
    if worst < 1e-5 && elapsed < 1.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_2() -> Outcome {
    let params = VehicleParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut min_ratio = f64::INFINITY;
    for _ in 0..20 {
        let pt = random_point(&mut rng);
        let a = jacobian_a(&ErrorState::zero(), &ErrorControl::zero(), &pt.r, pt.c, &params);
        let b = jacobian_b(&ErrorState::zero(), &pt.r, &params);
        let (x, u) = (pt.dx.to_vector(), pt.du.to_vector());
        let residual = |s: f64| (f(&pt, &(s * x), &(s * u), &params) - s * (a * x + b * u)).norm();
        min_ratio = min_ratio.min(residual(1e-2) / residual(1e-3));
    }
    let msg = format!("min residual ratio {min_ratio:.2} over 20 directions (>= 50)");
    if min_ratio >= 50.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// `M` is Hurwitz iff `MᵀX + XM = −I` has a symmetric positive definite solution.
fn lyapunov_certificate(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let kron = |a: &DMatrix<f64>, b: &DMatrix<f64>| a.kronecker(b);
    let op = kron(&eye, &m.transpose()) + kron(&m.transpose(), &eye);
    let rhs = -DMatrix::<f64>::identity(n, n);
    let Some(x) = op.lu().solve(&DMatrix::from_column_slice(n * n, 1, rhs.as_slice())) else {
        return false;
    };
    let x = DMatrix::from_column_slice(n, n, x.as_slice());
    let sym = (&x + x.transpose()) * 0.5;
    sym.cholesky().is_some()
}

fn criterion_3() -> Outcome {
    let params = VehicleParams::default();
    let w = LqrWeights::default();
    let sys = linearize(
        &ErrorState::zero(),
        &ErrorControl::zero(),
        &Mat3::identity(),
        params.hover_thrust(),
        &params,
    );
    let sol = lqr_gain(&sys, &w, DEFAULT_REGULARIZATION).map_err(|e| e.to_string())?;
    let a = DMatrix::from_column_slice(9, 9, sys.a.as_slice());
    let a_reg = &a - DMatrix::<f64>::identity(9, 9) * DEFAULT_REGULARIZATION;
    let b = DMatrix::from_column_slice(9, 4, sys.b.as_slice());
    let q = DMatrix::from_column_slice(9, 9, w.q.as_slice());
    let r_inv = DMatrix::from_column_slice(4, 4, w.r.as_slice()).try_inverse().unwrap();
    let p = &sol.p;
    let res = a_reg.transpose() * p + p * &a_reg - p * &b * &r_inv * b.transpose() * p + &q;
    let rel = res.norm() / q.norm();
    let k_expected = &r_inv * b.transpose() * p;
    let k_err = (&sol.k - k_expected).amax();
    let hurwitz = lyapunov_certificate(&(&a - &b * &sol.k));

    let di = solve_care(
        &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        &DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        &DMatrix::identity(2, 2),
        &DMatrix::identity(1, 1),
    )
    .map_err(|e| e.to_string())?;
    let r3 = 3f64.sqrt();
    let p_err = (&di.p - DMatrix::from_row_slice(2, 2, &[r3, 1.0, 1.0, r3])).amax();
    let kd_err = (&di.k - DMatrix::from_row_slice(1, 2, &[1.0, r3])).amax();

    let msg = format!(
        "hover residual {rel:.2e} (< 1e-8), K = R^-1 B^T P to {k_err:.1e}, Lyapunov-certified Hurwitz: {hurwitz}, \
         reported abscissa {:.3}; double integrator |dP| {p_err:.1e}, |dK| {kd_err:.1e} (< 1e-10)",
        sol.closed_loop_abscissa
    );
    if rel < 1e-8 && k_err < 1e-9 && hurwitz && sol.closed_loop_abscissa < 0.0 && p_err < 1e-10 && kd_err < 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut round_trip: f64 = 0.0;
    let mut vs_oracle: f64 = 0.0;
    for _ in 0..1000 {
        let theta = random_in_ball(&mut rng, 3.1);
        let r = exp_so3(&theta);
        let oracle = Rotation3::new(theta);
        vs_oracle = vs_oracle.max((r - oracle.matrix()).amax());
        let back = log_so3(&r).map_err(|e| e.to_string())?;
        round_trip = round_trip.max((back - theta).norm());
        let oracle_log = UnitQuaternion::from_rotation_matrix(&oracle).scaled_axis();
        vs_oracle = vs_oracle.max((back - oracle_log).norm());
    }
    // right Jacobian via Exp(θ + h e_i) = Exp(θ) Exp(J_r h e_i); the tiny relative
    // rotation is read off its skew part, exact to O(h³) (acos-based logs are not)
    let small_log = |d: Rotation3<f64>| {
        let m = d.matrix();
        Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5
    };
    let h = 1e-6;
    let mut jr_err: f64 = 0.0;
    for _ in 0..200 {
        let theta = random_in_ball(&mut rng, 2.5);
        let r0 = Rotation3::new(theta);
        let mut jr = Mat3::zeros();
        for i in 0..3 {
            let e = Vector3::ith(i, h);
            let plus = small_log(r0.inverse() * Rotation3::new(theta + e));
            let minus = small_log(r0.inverse() * Rotation3::new(theta - e));
            jr.set_column(i, &((plus - minus) / (2.0 * h)));
        }
        let inv = jr_inv(&theta).map_err(|e| e.to_string())?;
        jr_err = jr_err.max((inv * jr - Mat3::identity()).amax());
    }
    let msg = format!(
        "round trip {round_trip:.2e} over 1000 samples (< 1e-9), agreement with nalgebra {vs_oracle:.2e}, \
         jr_inv * J_r(fd) - I {jr_err:.2e} (< 1e-5)"
    );
    if round_trip < 1e-9 && vs_oracle < 1e-9 && jr_err < 1e-5 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn hover_offset_run(dt: f64, divisor: usize) -> Result<SimLog, String> {
    let params = VehicleParams::default();
    let p0 = Vec3::new(0.0, 0.0, 1.0);
    let initial = TrueState {
        p: p0 + Vec3::new(0.5, 0.0, 0.0),
        q: UnitQuat::identity(),
        v: Vec3::zeros(),
        omega: Vec3::zeros(),
    };
    let mut cfg = SimConfig::new(10.0, initial);
    cfg.dt_inner = dt;
    cfg.outer_divisor = divisor;
    run_closed_loop(
        &cfg,
        &hover_trajectory(p0, 0.0),
        &LqrWeights::default(),
        &BodyrateGains::default(),
        &params,
    )
    .map_err(|e| e.to_string())
}

fn criterion_5(log: &SimLog) -> Outcome {
    let target = Vec3::new(0.0, 0.0, 1.0);
    let after: f64 = log
        .rows
        .iter()
        .filter(|r| r.t >= 5.0)
        .map(|r| (r.true_state.p - target).norm())
        .fold(0.0, f64::max);
    let clamps = log.rows.iter().filter(|r| r.saturated).count();
    let drift = log
        .rows
        .iter()
        .map(|r| (r.true_state.q.norm() - 1.0).abs())
        .fold(0.0, f64::max);
    let msg = format!("max |dp| for t >= 5 s {after:.2e} (< 0.01), clamp activations {clamps}, quaternion drift {drift:.1e} (< 1e-12)");
    if after < 0.01 && clamps == 0 && drift < 1e-12 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn yaw(q: &UnitQuat) -> f64 {
    let uq = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q.w(), q.x(), q.y(), q.z()));
    let r = uq.to_rotation_matrix();
    r[(1, 0)].atan2(r[(0, 0)])
}

fn criterion_6() -> Outcome {
    let params = VehicleParams::default();
    let lem = LemniscateParams::default();
    let start = lemniscate_sample(&lem, &params, 0.0).map_err(|e| e.to_string())?;
    let initial = TrueState {
        p: start.nominal.p,
        q: UnitQuat::identity(),
        v: Vec3::zeros(),
        omega: Vec3::zeros(),
    };
    let log = run_closed_loop(
        &SimConfig::new(20.0, initial),
        &lem,
        &LqrWeights::default(),
        &BodyrateGains::default(),
        &params,
    )
    .map_err(|e| e.to_string())?;
    // nominal position from the closed-form parametrization, not the log
    let err = |t: f64, p: &Vec3| {
        let w = lem.omega_traj * t;
        let nominal = Vec3::new(
            lem.amplitude_x * w.sin(),
            lem.amplitude_y * w.sin() * w.cos(),
            lem.altitude,
        );
        (p - nominal).norm()
    };
    let early = log
        .rows
        .iter()
        .filter(|r| r.t < 2.0)
        .map(|r| err(r.t, &r.true_state.p))
        .fold(0.0, f64::max);
    let window: Vec<_> = log.rows.iter().filter(|r| r.t >= 5.0 && r.t <= 20.0).collect();
    let steady = window.iter().map(|r| err(r.t, &r.true_state.p)).fold(0.0, f64::max);
    let rmse = (window.iter().map(|r| err(r.t, &r.true_state.p).powi(2)).sum::<f64>() / window.len() as f64).sqrt();
    let yaw_err = window
        .iter()
        .map(|r| {
            let d = yaw(&r.true_state.q) - yaw(&r.nominal.q);
            d.sin().atan2(d.cos()).abs()
        })
        .fold(0.0, f64::max);
    let msg = format!(
        "early max |dp| {early:.3} m > steady max {steady:.4} m, RMSE [5,20] s {rmse:.4} m (< 0.05), \
         max yaw error {yaw_err:.4} rad (< 0.1)"
    );
    if early > steady && rmse < 0.05 && yaw_err < 0.1 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_7() -> Outcome {
    let params = VehicleParams::default();
    let gains = BodyrateGains::default();
    let cmd = Vec3::new(1.0, 0.0, 0.0);
    let dt = 1e-3;
    let horizon = 5.0 / gains.min();
    let mut s = TrueState {
        p: Vec3::zeros(),
        q: UnitQuat::identity(),
        v: Vec3::zeros(),
        omega: Vec3::zeros(),
    };
    let initial = (cmd - s.omega).norm();
    let mut last_violation = 0.0;
    let steps = (2.0 * horizon / dt).ceil() as usize;
    for k in 0..steps {
        let tau = bodyrate_torque(&cmd, &s.omega, &params, &gains);
        s = rk4_step(
            &s,
            &Wrench {
                c: params.hover_thrust(),
                tau,
            },
            &params,
            dt,
        )
        .ok_or("non-finite state")?;
        if (cmd - s.omega).norm() >= 0.01 * initial {
            last_violation = (k + 1) as f64 * dt;
        }
    }
    let msg = format!("error stays below 1% after {last_violation:.3} s (limit 5/Kp_min = {horizon:.3} s)");
    if last_violation <= horizon {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_8() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_eslqr");
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/lemniscate.json");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut logs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = Command::new(bin)
            .arg("run")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("run {run} exited with {}", status.status));
        }
        logs.push(std::fs::read(out.join("log.csv")).map_err(|e| e.to_string())?);
    }
    let msg = format!(
        "two `run` invocations, log.csv {} bytes each, identical: {}",
        logs[0].len(),
        logs[0] == logs[1]
    );
    if logs[0] == logs[1] && !logs[0].is_empty() {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_9(coarse: &SimLog) -> Outcome {
    let fine = hover_offset_run(5e-4, 20)?;
    let (a, b) = (coarse.rows.last().unwrap(), fine.rows.last().unwrap());
    if (a.t - b.t).abs() > 1e-12 {
        return Err(format!("final times differ: {} vs {}", a.t, b.t));
    }
    let (x, y) = (&a.true_state, &b.true_state);
    let diff = [
        (x.p - y.p).amax(),
        (x.v - y.v).amax(),
        (x.q.as_vector4() - y.q.as_vector4()).amax(),
        (x.omega - y.omega).amax(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let msg = format!("max final-state component change {diff:.2e} when halving dt_inner (< 1e-6)");
    if diff < 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() -> ExitCode {
    let hover = hover_offset_run(1e-3, 10);
    let criteria: Vec<Criterion> = vec![
        ("1 Jacobian correctness", Box::new(criterion_1)),
        ("2 Linearization fidelity", Box::new(criterion_2)),
        ("3 CARE quality", Box::new(criterion_3)),
        ("4 Lie-group suite", Box::new(criterion_4)),
        (
            "5 Hover regulation",
            Box::new(|| criterion_5(hover.as_ref().map_err(Clone::clone)?)),
        ),
        ("6 Lemniscate tracking", Box::new(criterion_6)),
        ("7 Inner-loop tracking", Box::new(criterion_7)),
        ("8 Determinism", Box::new(criterion_8)),
        (
            "9 Integration convergence",
            Box::new(|| criterion_9(hover.as_ref().map_err(Clone::clone)?)),
        ),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let t0 = Instant::now();
        let outcome = check();
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {name}: PASS ({msg}) [{secs:.1} s]"),
            Err(msg) => {
                failed += 1;
                println!("criterion {name}: FAIL ({msg}) [{secs:.1} s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
