//! Real Schur decomposition with the stable (left half-plane) eigenvalues
//! moved to the leading block.
//!
//! [`real_schur`] supplies the unordered quasi-triangular form; reordering swaps
//! adjacent 1×1/2×2 diagonal blocks by solving the small Sylvester equation
//! `A11 X − X A22 = A12` and rotating with an orthogonal basis of `[−X; I]`.

use nalgebra::DMatrix;

use super::real_schur::real_schur;

/// `H = Z T Zᵀ` with `T` quasi-upper-triangular and stable eigenvalues first.
#[derive(Debug, Clone)]
pub struct OrderedSchur {
    pub z: DMatrix<f64>,
    pub t: DMatrix<f64>,
    /// Sizes of the diagonal blocks, top-left to bottom-right.
    pub blocks: Vec<usize>,
    /// Dimension of the leading stable invariant subspace.
    pub stable_dim: usize,
    /// Smallest `|Re λ|` over all eigenvalues, relative to `‖H‖`.
    pub min_abs_real: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SchurFailure {
    NoConvergence,
    SingularSwap,
}

fn block_real_part(t: &DMatrix<f64>, start: usize, size: usize) -> f64 {
    if size == 1 {
        t[(start, start)]
    } else {
        0.5 * (t[(start, start)] + t[(start + 1, start + 1)])
    }
}

/// Applies the orthogonal similarity `Qᵀ T Q` on rows/columns `start..start+q.nrows()`.
fn apply_similarity(t: &mut DMatrix<f64>, z: &mut DMatrix<f64>, start: usize, q: &DMatrix<f64>) {
    let k = q.nrows();
    let rows = q.transpose() * t.rows(start, k);
    t.rows_mut(start, k).copy_from(&rows);
    let cols = t.columns(start, k) * q;
    t.columns_mut(start, k).copy_from(&cols);
    let zc = z.columns(start, k) * q;
    z.columns_mut(start, k).copy_from(&zc);
}

/// Swaps the adjacent diagonal blocks of sizes `p` (at `start`) and `q`.
fn swap_blocks(
    t: &mut DMatrix<f64>,
    z: &mut DMatrix<f64>,
    start: usize,
    p: usize,
    q: usize,
) -> Result<(), SchurFailure> {
    let a11 = t.view((start, start), (p, p)).into_owned();
    let a22 = t.view((start + p, start + p), (q, q)).into_owned();
    let a12 = t.view((start, start + p), (p, q)).into_owned();

    // (I_q ⊗ A11 − A22ᵀ ⊗ I_p) vec(X) = vec(A12), column-major vec
    let dim = p * q;
    let mut kron = DMatrix::<f64>::zeros(dim, dim);
    for j in 0..q {
        for i in 0..p {
            let row = j * p + i;
            for k in 0..p {
                kron[(row, j * p + k)] += a11[(i, k)];
            }
            for l in 0..q {
                kron[(row, l * p + i)] -= a22[(l, j)];
            }
        }
    }
    let rhs = DMatrix::from_column_slice(dim, 1, a12.as_slice());
    let x = kron.lu().solve(&rhs).ok_or(SchurFailure::SingularSwap)?;
    let x = DMatrix::from_column_slice(p, q, x.as_slice());

    // Orthogonal Q whose first q columns span [−X; I_q].
    let k = p + q;
    let mut basis = DMatrix::<f64>::zeros(k, k);
    basis.view_mut((0, 0), (p, q)).copy_from(&(-x));
    basis.view_mut((p, 0), (q, q)).fill_with_identity();
    basis.view_mut((0, q), (p, p)).fill_with_identity();
    let qmat = basis.qr().q();
    apply_similarity(t, z, start, &qmat);

    // New layout is (q, p); the lower-left block is zero up to rounding.
    t.view_mut((start + q, start), (p, q)).fill(0.0);
    Ok(())
}

/// Computes the real Schur form of `h` and reorders it so that every
/// eigenvalue with negative real part precedes the rest.
pub(crate) fn ordered_schur(h: DMatrix<f64>) -> Result<OrderedSchur, SchurFailure> {
    let scale = h.amax().max(f64::MIN_POSITIVE);
    let rs = real_schur(&h).ok_or(SchurFailure::NoConvergence)?;
    let mut blocks = rs.blocks();
    let (mut z, mut t) = (rs.z, rs.t);
    let mut placed = 0;
    for idx in 0..blocks.len() {
        let start: usize = blocks[..idx].iter().sum();
        if block_real_part(&t, start, blocks[idx]) >= 0.0 {
            continue;
        }
        let mut j = idx;
        while j > placed {
            let s: usize = blocks[..j - 1].iter().sum();
            swap_blocks(&mut t, &mut z, s, blocks[j - 1], blocks[j])?;
            blocks.swap(j - 1, j);
            j -= 1;
        }
        placed += 1;
    }

    let mut start = 0;
    let mut stable_dim = 0;
    let mut min_abs_real = f64::INFINITY;
    for &size in &blocks {
        let re = block_real_part(&t, start, size);
        if re < 0.0 {
            stable_dim += size;
        }
        min_abs_real = min_abs_real.min(re.abs() / scale);
        start += size;
    }

    Ok(OrderedSchur {
        z,
        t,
        blocks,
        stable_dim,
        min_abs_real,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(h: &DMatrix<f64>, os: &OrderedSchur) {
        let recon = &os.z * &os.t * os.z.transpose();
        assert!((recon - h).amax() < 1e-10 * h.amax().max(1.0));
        let orth = os.z.transpose() * &os.z - DMatrix::identity(h.nrows(), h.nrows());
        assert!(orth.amax() < 1e-12);
        let mut start = 0;
        let mut seen_unstable = false;
        for &size in &os.blocks {
            let re = block_real_part(&os.t, start, size);
            if re >= 0.0 {
                seen_unstable = true;
            } else {
                assert!(!seen_unstable, "stable block after unstable one");
            }
            start += size;
        }
    }

    #[test]
    fn orders_real_spectrum() {
        let h = DMatrix::from_row_slice(
            4,
            4,
            &[
                3.0, 1.0, 0.5, 0.2, 0.0, -1.0, 2.0, 0.1, 0.0, 0.0, 2.0, -1.0, 0.0, 0.0, 0.0, -4.0,
            ],
        );
        let os = ordered_schur(h.clone()).unwrap();
        check(&h, &os);
        assert_eq!(os.stable_dim, 2);
    }

    #[test]
    fn orders_complex_pairs() {
        // Blocks with eigenvalues 1 ± 2i, -0.5 ± i, 3, -2, mixed by a random similarity.
        let d = DMatrix::from_row_slice(
            6,
            6,
            &[
                1.0, 2.0, 0.3, 0.1, 0.0, 0.2, //
                -2.0, 1.0, 0.0, 0.4, 0.1, 0.0, //
                0.0, 0.0, 3.0, 0.5, 0.2, 0.1, //
                0.0, 0.0, 0.0, -0.5, 1.0, 0.3, //
                0.0, 0.0, 0.0, -1.0, -0.5, 0.2, //
                0.0, 0.0, 0.0, 0.0, 0.0, -2.0,
            ],
        );
        let s = DMatrix::from_fn(6, 6, |i, j| {
            if i == j {
                2.0
            } else {
                ((i * 7 + j * 3) % 5) as f64 * 0.1 - 0.2
            }
        });
        let h = &s * d * s.clone().try_inverse().unwrap();
        let os = ordered_schur(h.clone()).unwrap();
        check(&h, &os);
        assert_eq!(os.stable_dim, 3);
    }
}
