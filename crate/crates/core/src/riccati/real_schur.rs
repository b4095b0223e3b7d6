//! Real Schur decomposition by Hessenberg reduction and Francis double-shift QR.
//!
//! The iteration follows the EISPACK `hqr2` scheme (as in JAMA), including the
//! exceptional shifts at iterations 10 and 30 which keep it converging on
//! matrices with repeated or clustered eigenvalues. Real 2×2 pairs are split;
//! only complex-conjugate pairs remain as 2×2 diagonal blocks.

use nalgebra::linalg::Hessenberg;
use nalgebra::Complex;
use nalgebra::DMatrix;

type Complex64 = Complex<f64>;

/// `M = Z T Zᵀ` with `T` quasi-upper-triangular.
#[derive(Debug, Clone)]
pub struct RealSchur {
    /// Orthogonal Schur vectors.
    pub z: DMatrix<f64>,
    pub t: DMatrix<f64>,
    /// Eigenvalues in diagonal order; conjugate pairs occupy consecutive slots.
    pub eigenvalues: Vec<Complex64>,
}

impl RealSchur {
    /// Sizes of the diagonal blocks, top-left to bottom-right.
    pub fn blocks(&self) -> Vec<usize> {
        let mut blocks = Vec::new();
        let mut i = 0;
        while i < self.eigenvalues.len() {
            if self.eigenvalues[i].im != 0.0 {
                blocks.push(2);
                i += 2;
            } else {
                blocks.push(1);
                i += 1;
            }
        }
        blocks
    }
}

pub fn real_schur(m: &DMatrix<f64>) -> Option<RealSchur> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "real_schur needs a square matrix");
    if n == 0 {
        return Some(RealSchur {
            z: DMatrix::zeros(0, 0),
            t: DMatrix::zeros(0, 0),
            eigenvalues: Vec::new(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let (mut v, mut h) = Hessenberg::new(m.clone()).unpack();
    for j in 0..n {
        for i in j + 2..n {
            h[(i, j)] = 0.0;
        }
    }
    let (re, im) = hqr(&mut h, &mut v)?;

    // Zero every subdiagonal entry outside a complex pair.
    let mut i = 0;
    while i + 1 < n {
        if im[i] != 0.0 {
            if i + 2 < n {
                h[(i + 2, i + 1)] = 0.0;
            }
            i += 2;
        } else {
            h[(i + 1, i)] = 0.0;
            i += 1;
        }
    }
    for j in 0..n {
        for i in j + 2..n {
            h[(i, j)] = 0.0;
        }
    }
    let eigenvalues = re.iter().zip(&im).map(|(&r, &c)| Complex64::new(r, c)).collect();
    Some(RealSchur {
        z: v,
        t: h,
        eigenvalues,
    })
}

/// Eigenvalues of a real square matrix.
pub fn eigenvalues(m: &DMatrix<f64>) -> Option<Vec<Complex64>> {
    real_schur(m).map(|s| s.eigenvalues)
}

#[allow(clippy::many_single_char_names)]
fn hqr(h: &mut DMatrix<f64>, v: &mut DMatrix<f64>) -> Option<(Vec<f64>, Vec<f64>)> {
    let nn = h.nrows();
    let mut d = vec![0.0; nn];
    let mut e = vec![0.0; nn];
    let low = 0usize;
    let high = nn - 1;
    let eps = f64::EPSILON;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z);
    let (mut w, mut x, mut y);

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[(i, j)].abs();
        }
    }

    let max_total = 100 * nn.max(10);
    let mut total = 0usize;
    let mut iter = 0usize;
    let mut n = nn as isize - 1;
    while n >= low as isize {
        let nu = n as usize;
        // Look for a single small subdiagonal element.
        let mut l = nu;
        while l > low {
            s = h[(l - 1, l - 1)].abs() + h[(l, l)].abs();
            if s == 0.0 {
                s = norm;
            }
            if h[(l, l - 1)].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == nu {
            // One root.
            h[(nu, nu)] += exshift;
            d[nu] = h[(nu, nu)];
            e[nu] = 0.0;
            n -= 1;
            iter = 0;
        } else if l + 1 == nu {
            // Two roots.
            w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            p = (h[(nu - 1, nu - 1)] - h[(nu, nu)]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            h[(nu, nu)] += exshift;
            h[(nu - 1, nu - 1)] += exshift;
            x = h[(nu, nu)];
            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                d[nu - 1] = x + z;
                d[nu] = d[nu - 1];
                if z != 0.0 {
                    d[nu] = x - w / z;
                }
                e[nu - 1] = 0.0;
                e[nu] = 0.0;
                x = h[(nu, nu - 1)];
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;
                for j in nu - 1..nn {
                    z = h[(nu - 1, j)];
                    h[(nu - 1, j)] = q * z + p * h[(nu, j)];
                    h[(nu, j)] = q * h[(nu, j)] - p * z;
                }
                for i in 0..=nu {
                    z = h[(i, nu - 1)];
                    h[(i, nu - 1)] = q * z + p * h[(i, nu)];
                    h[(i, nu)] = q * h[(i, nu)] - p * z;
                }
                for i in low..=high {
                    z = v[(i, nu - 1)];
                    v[(i, nu - 1)] = q * z + p * v[(i, nu)];
                    v[(i, nu)] = q * v[(i, nu)] - p * z;
                }
                h[(nu, nu - 1)] = 0.0;
            } else {
                d[nu - 1] = x + p;
                d[nu] = x + p;
                e[nu - 1] = z;
                e[nu] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            // No convergence yet: form the shift.
            x = h[(nu, nu)];
            y = 0.0;
            w = 0.0;
            if l < nu {
                y = h[(nu - 1, nu - 1)];
                w = h[(nu, nu - 1)] * h[(nu - 1, nu)];
            }
            if iter == 10 {
                exshift += x;
                for i in low..=nu {
                    h[(i, i)] -= x;
                }
                s = h[(nu, nu - 1)].abs() + h[(nu - 1, nu - 2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in low..=nu {
                        h[(i, i)] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;
            total += 1;
            if total > max_total {
                return None;
            }

            // Look for two consecutive small subdiagonal elements.
            let mut m = nu - 2;
            loop {
                z = h[(m, m)];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[(m + 1, m)] + h[(m, m + 1)];
                q = h[(m + 1, m + 1)] - z - r - s;
                r = h[(m + 2, m + 1)];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if h[(m, m - 1)].abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (h[(m - 1, m - 1)].abs() + z.abs() + h[(m + 1, m + 1)].abs()))
                {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nu {
                h[(i, i - 2)] = 0.0;
                if i > m + 2 {
                    h[(i, i - 3)] = 0.0;
                }
            }

            // Double QR step on rows l..=n, columns m..=n.
            let mut k = m;
            while k < nu {
                let notlast = k != nu - 1;
                if k != m {
                    p = h[(k, k - 1)];
                    q = h[(k + 1, k - 1)];
                    r = if notlast { h[(k + 2, k - 1)] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        h[(k, k - 1)] = -s * x;
                    } else if l != m {
                        h[(k, k - 1)] = -h[(k, k - 1)];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..nn {
                        p = h[(k, j)] + q * h[(k + 1, j)];
                        if notlast {
                            p += r * h[(k + 2, j)];
                            h[(k + 2, j)] -= p * z;
                        }
                        h[(k, j)] -= p * x;
                        h[(k + 1, j)] -= p * y;
                    }
                    for i in 0..=nu.min(k + 3) {
                        p = x * h[(i, k)] + y * h[(i, k + 1)];
                        if notlast {
                            p += z * h[(i, k + 2)];
                            h[(i, k + 2)] -= p * r;
                        }
                        h[(i, k)] -= p;
                        h[(i, k + 1)] -= p * q;
                    }
                    for i in low..=high {
                        p = x * v[(i, k)] + y * v[(i, k + 1)];
                        if notlast {
                            p += z * v[(i, k + 2)];
                            v[(i, k + 2)] -= p * r;
                        }
                        v[(i, k)] -= p;
                        v[(i, k + 1)] -= p * q;
                    }
                }
                k += 1;
            }
        }
    }
    Some((d, e))
}
