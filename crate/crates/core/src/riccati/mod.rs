//! Continuous-time algebraic Riccati equation and LQR gain synthesis.
//!
//! [`solve_care`] extracts the stabilizing solution from the stable invariant
//! subspace of the Hamiltonian `[[A, −B R⁻¹ Bᵀ], [−Q, −Aᵀ]]`, using an
//! ordered real Schur form. [`newton_kleinman`] solves the same equation by
//! repeated Lyapunov solves and serves as an independent cross-check.

mod real_schur;
mod schur;

use nalgebra::{DMatrix, SMatrix, SVector};
use thiserror::Error;

use crate::error_state::{LinearizedSystem, CONTROL_DIM, STATE_DIM};

pub use real_schur::{eigenvalues, real_schur, RealSchur};
pub use schur::OrderedSchur;

/// Accepted solutions have a normalized residual below this.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Shift applied to `A` before every gain synthesis, in 1/s.
pub const DEFAULT_REGULARIZATION: f64 = 1e-6;

const NEWTON_MAX_ITER: usize = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RiccatiError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("Schur decomposition of the Hamiltonian did not converge")]
    SchurFailed,
    #[error(
        "no stabilizing solution: stable subspace has dimension {stable_dim}, need {required} \
         (min |Re λ|/‖H‖ = {min_abs_real:.3e})"
    )]
    NotStabilizable {
        stable_dim: usize,
        required: usize,
        min_abs_real: f64,
    },
    #[error("stable subspace basis is singular; the pair is not stabilizable")]
    SingularBasis,
    #[error("Lyapunov equation is singular at iteration {iterations}")]
    SingularLyapunov { iterations: usize },
    #[error("solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    NotConverged { residual: f64, iterations: usize },
    #[error("closed loop is not Hurwitz (abscissa {abscissa:.3e}, residual {residual:.3e})")]
    Unstable { abscissa: f64, residual: f64 },
}

pub type Result<T> = std::result::Result<T, RiccatiError>;

/// LQR state and control weights for the 9-state / 4-input error system.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrWeights {
    pub q: SMatrix<f64, STATE_DIM, STATE_DIM>,
    pub r: SMatrix<f64, CONTROL_DIM, CONTROL_DIM>,
}

impl Default for LqrWeights {
    fn default() -> Self {
        Self::from_diagonals(&[10.0, 10.0, 10.0, 5.0, 5.0, 5.0, 1.0, 1.0, 1.0], &[0.5, 1.0, 1.0, 1.0])
    }
}

impl LqrWeights {
    pub fn from_diagonals(q: &[f64; STATE_DIM], r: &[f64; CONTROL_DIM]) -> Self {
        Self {
            q: SMatrix::from_diagonal(&SVector::from_column_slice(q)),
            r: SMatrix::from_diagonal(&SVector::from_column_slice(r)),
        }
    }

    pub fn scaled_state(&self, factor: f64) -> Self {
        Self {
            q: self.q * factor,
            r: self.r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_spd(
            &DMatrix::from_column_slice(STATE_DIM, STATE_DIM, self.q.as_slice()),
            "Q",
        )?;
        check_spd(
            &DMatrix::from_column_slice(CONTROL_DIM, CONTROL_DIM, self.r.as_slice()),
            "R",
        )
    }
}

fn check_spd(m: &DMatrix<f64>, name: &str) -> Result<()> {
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 {
        return Err(RiccatiError::InvalidWeights(format!(
            "{name} not symmetric ({asym:.3e})"
        )));
    }
    let min_eig = m.clone().symmetric_eigenvalues().min();
    if !(min_eig > 0.0) {
        return Err(RiccatiError::InvalidWeights(format!(
            "{name} not positive definite (min eigenvalue {min_eig:.3e})"
        )));
    }
    Ok(())
}

/// Riccati solution, gain and diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct CareSolution {
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
    /// `‖AᵀP + PA − PBR⁻¹BᵀP + Q‖_F / ‖Q‖_F` (absolute when `Q = 0`).
    pub residual: f64,
    /// Largest real part over the eigenvalues of the `A` that was solved for.
    pub spectral_abscissa_a: f64,
    /// Largest real part over the eigenvalues of `A − BK`.
    pub closed_loop_abscissa: f64,
    /// `max |P − Pᵀ|` before symmetrization.
    pub asymmetry: f64,
    /// Newton refinement steps taken after the Schur solve (or total Newton steps).
    pub iterations: usize,
}

impl CareSolution {
    /// The gain as a fixed-size 4×9 matrix for the error-state controller.
    pub fn gain(&self) -> SMatrix<f64, CONTROL_DIM, STATE_DIM> {
        SMatrix::from_column_slice(self.k.as_slice())
    }
}

/// Largest real part over the eigenvalues of a square matrix (`+∞` if the
/// eigenvalue iteration fails, so the result never passes as stable).
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m).map_or(f64::INFINITY, |ev| {
        ev.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max)
    })
}

/// `A − εI`; every eigenvalue moves left by exactly `ε`.
pub fn regularize_a<const N: usize>(a: &SMatrix<f64, N, N>, epsilon: f64) -> SMatrix<f64, N, N> {
    a - SMatrix::<f64, N, N>::identity() * epsilon
}

/// Normalized CARE residual.
pub fn care_residual(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    let r_inv = r
        .clone()
        .try_inverse()
        .unwrap_or_else(|| DMatrix::zeros(r.nrows(), r.ncols()));
    let res = a.transpose() * p + p * a - p * b * r_inv * b.transpose() * p + q;
    let qn = q.norm();
    res.norm() / if qn > 0.0 { qn } else { 1.0 }
}

fn check_dims(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<()> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n {
        return Err(RiccatiError::Dimension(format!("A is {}x{}", n, a.ncols())));
    }
    if b.nrows() != n {
        return Err(RiccatiError::Dimension(format!("B has {} rows, A has {n}", b.nrows())));
    }
    if q.shape() != (n, n) {
        return Err(RiccatiError::Dimension(format!(
            "Q is {:?}, expected ({n}, {n})",
            q.shape()
        )));
    }
    if r.shape() != (m, m) {
        return Err(RiccatiError::Dimension(format!(
            "R is {:?}, expected ({m}, {m})",
            r.shape()
        )));
    }
    Ok(())
}

/// Solves `Aᵀ X + X A = −C` through the Kronecker form.
pub fn solve_lyapunov(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let at = a.transpose();
    let mut kron = DMatrix::<f64>::zeros(n * n, n * n);
    // vec(AᵀX) = (I ⊗ Aᵀ) vec X, vec(XA) = (Aᵀ ⊗ I) vec X
    for j in 0..n {
        for i in 0..n {
            let row = j * n + i;
            for k in 0..n {
                kron[(row, j * n + k)] += at[(i, k)];
                kron[(row, k * n + i)] += a[(k, j)];
            }
        }
    }
    let rhs = DMatrix::from_column_slice(n * n, 1, (-c).as_slice());
    let x = kron.lu().solve(&rhs)?;
    let x = DMatrix::from_column_slice(n, n, x.as_slice());
    Some(0.5 * (&x + x.transpose()))
}

/// Bass's stabilizing gain `K₀ = Bᵀ W⁻¹`, with `(A + βI)W + W(A + βI)ᵀ = 2BBᵀ`
/// and `β` above the spectral radius of `A`; every eigenvalue of `A − BK₀` has
/// real part at most `−β`. Requires `(A, B)` controllable.
pub fn bass_stabilizing_gain(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let beta = a.norm() + 1.0;
    let shifted = a + DMatrix::<f64>::identity(n, n) * beta;
    // Written in the Aᵀ X + X A = −C form: Ã = −(A + βI)ᵀ.
    let w = solve_lyapunov(&(-shifted.transpose()), &(2.0 * b * b.transpose()))?;
    let w_inv = w.try_inverse()?;
    Some(b.transpose() * w_inv)
}

fn finish(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p_raw: DMatrix<f64>,
    iterations: usize,
) -> Result<CareSolution> {
    let asymmetry = (&p_raw - p_raw.transpose()).amax();
    let p = 0.5 * (&p_raw + p_raw.transpose());
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| RiccatiError::InvalidWeights("R singular".into()))?;
    let k = &r_inv * b.transpose() * &p;
    let residual = care_residual(a, b, q, r, &p);
    let closed_loop_abscissa = spectral_abscissa(&(a - b * &k));
    Ok(CareSolution {
        p,
        k,
        residual,
        spectral_abscissa_a: spectral_abscissa(a),
        closed_loop_abscissa,
        asymmetry,
        iterations,
    })
}

fn newton_step(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    k: &DMatrix<f64>,
    iterations: usize,
) -> Result<DMatrix<f64>> {
    let acl = a - b * k;
    let c = q + k.transpose() * r * k;
    solve_lyapunov(&acl, &c).ok_or(RiccatiError::SingularLyapunov { iterations })
}

fn accept(sol: CareSolution) -> Result<CareSolution> {
    if !(sol.residual < RESIDUAL_TOL) {
        return Err(RiccatiError::NotConverged {
            residual: sol.residual,
            iterations: sol.iterations,
        });
    }
    if !(sol.closed_loop_abscissa < 0.0) {
        return Err(RiccatiError::Unstable {
            abscissa: sol.closed_loop_abscissa,
            residual: sol.residual,
        });
    }
    Ok(sol)
}

/// Stabilizing solution of `AᵀP + PA − PBR⁻¹BᵀP + Q = 0` via the ordered
/// Schur form of the Hamiltonian, with up to two Newton refinement steps when
/// the direct solution misses [`RESIDUAL_TOL`]/100.
///
/// `Q` only needs to be symmetric positive semidefinite; `R` must be positive definite.
pub fn solve_care(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<CareSolution> {
    check_dims(a, b, q, r)?;
    check_spd(r, "R")?;
    let n = a.nrows();
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| RiccatiError::InvalidWeights("R singular".into()))?;
    let g = b * &r_inv * b.transpose();

    let mut h = DMatrix::<f64>::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let os = schur::ordered_schur(h).map_err(|_| RiccatiError::SchurFailed)?;
    if os.stable_dim != n || os.min_abs_real < 1e-13 {
        return Err(RiccatiError::NotStabilizable {
            stable_dim: os.stable_dim,
            required: n,
            min_abs_real: os.min_abs_real,
        });
    }
    let u11 = os.z.view((0, 0), (n, n)).into_owned();
    let u21 = os.z.view((n, 0), (n, n)).into_owned();
    let lu = u11.transpose().lu();
    let pt = lu.solve(&u21.transpose()).ok_or(RiccatiError::SingularBasis)?;
    let p_raw = pt.transpose();
    if p_raw.iter().any(|v| !v.is_finite()) {
        return Err(RiccatiError::SingularBasis);
    }

    let mut sol = finish(a, b, q, r, p_raw, 0)?;
    let mut it = 0;
    while sol.residual >= RESIDUAL_TOL * 1e-2 && it < 2 && sol.closed_loop_abscissa < 0.0 {
        it += 1;
        let p = newton_step(a, b, q, r, &sol.k, it)?;
        let refined = finish(a, b, q, r, p, it)?;
        if refined.residual < sol.residual {
            sol = refined;
        } else {
            break;
        }
    }
    accept(sol)
}

/// Newton–Kleinman iteration from a stabilizing initial gain `k0`.
pub fn newton_kleinman(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    k0: &DMatrix<f64>,
    tol: f64,
) -> Result<CareSolution> {
    check_dims(a, b, q, r)?;
    check_spd(r, "R")?;
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| RiccatiError::InvalidWeights("R singular".into()))?;
    let mut k = k0.clone();
    let mut p_prev: Option<DMatrix<f64>> = None;
    for it in 1..=NEWTON_MAX_ITER {
        let p = newton_step(a, b, q, r, &k, it)?;
        k = &r_inv * b.transpose() * &p;
        let converged = p_prev
            .as_ref()
            .is_some_and(|prev| (&p - prev).norm() <= tol * p.norm().max(1.0));
        if converged {
            return accept(finish(a, b, q, r, p, it)?);
        }
        p_prev = Some(p);
    }
    let p = p_prev.unwrap_or_else(|| DMatrix::zeros(a.nrows(), a.nrows()));
    let sol = finish(a, b, q, r, p, NEWTON_MAX_ITER)?;
    Err(RiccatiError::NotConverged {
        residual: sol.residual,
        iterations: NEWTON_MAX_ITER,
    })
}

/// Gain for a linearized error system: shift `A` by `−εI`, then solve the CARE.
pub fn lqr_gain(sys: &LinearizedSystem, weights: &LqrWeights, epsilon: f64) -> Result<CareSolution> {
    let a = regularize_a(&sys.a, epsilon);
    let a = DMatrix::from_column_slice(STATE_DIM, STATE_DIM, a.as_slice());
    let b = DMatrix::from_column_slice(STATE_DIM, CONTROL_DIM, sys.b.as_slice());
    let q = DMatrix::from_column_slice(STATE_DIM, STATE_DIM, weights.q.as_slice());
    let r = DMatrix::from_column_slice(CONTROL_DIM, CONTROL_DIM, weights.r.as_slice());
    solve_care(&a, &b, &q, &r)
}
