//! Hermitian eigensolver: Householder reduction to a real symmetric
//! tridiagonal matrix, then implicit-shift QL (the EISPACK `tql2` scheme).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::dense::CMatrix;
use super::HermitianMatrix;
use crate::error::{Error, Result};

/// Sweep cap per eigenvalue in the QL iteration.
pub const MAX_SWEEPS: usize = 64;

/// Eigenvalues in ascending order with the matching unitary eigenvector matrix
/// (eigenvectors stored as columns).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    /// `Q f(Λ) Q*`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.eigenvalues.len();
        let q = &self.eigenvectors;
        let fl: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, &fk) in fl.iter().enumerate() {
                    acc += q[(i, k)] * q[(j, k)].conj() * fk;
                }
                out[(i, j)] = acc;
                if i != j {
                    out[(j, i)] = acc.conj();
                } else {
                    out[(i, i)] = Complex64::new(acc.re, 0.0);
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.reconstruct_with(|x| x)
    }
}

struct Tridiagonal {
    diag: Vec<f64>,
    /// `off[k]` couples rows `k` and `k+1`; `off[n-1] = 0`.
    off: Vec<f64>,
    /// Unitary `V` with `A = V T V*`, stored transposed (row `k` is column `k`).
    basis_t: Option<Vec<Complex64>>,
}

fn tridiagonalize(a: &CMatrix, want_vectors: bool) -> Tridiagonal {
    let n = a.dim();
    let mut b = a.as_slice().to_vec();
    let mut q = if want_vectors {
        Some(CMatrix::identity(n))
    } else {
        None
    };
    let mut sub = vec![Complex64::new(0.0, 0.0); n];

    let mut v = vec![Complex64::new(0.0, 0.0); n];
    let mut p = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n.saturating_sub(1) {
        let m = n - k - 1;
        let x0 = b[(k + 1) * n + k];
        let xnorm = (0..m)
            .map(|r| b[(k + 1 + r) * n + k].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if xnorm == 0.0 {
            sub[k] = Complex64::new(0.0, 0.0);
            continue;
        }
        let tail = xnorm * xnorm - x0.norm_sqr();
        if tail <= f64::EPSILON * f64::EPSILON * xnorm * xnorm {
            // Column already reduced.
            sub[k] = x0;
            for r in 1..m {
                b[(k + 1 + r) * n + k] = Complex64::new(0.0, 0.0);
                b[k * n + k + 1 + r] = Complex64::new(0.0, 0.0);
            }
            continue;
        }
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let alpha = -phase * xnorm;
        for r in 0..m {
            v[r] = b[(k + 1 + r) * n + k];
        }
        v[0] -= alpha;
        let vnorm = v[..m].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in v[..m].iter_mut() {
            *z /= vnorm;
        }

        // Trailing block update: B <- B - 2 (v w* + w v*), w = Bv - (v*Bv) v.
        let off = k + 1;
        for r in 0..m {
            let row = &b[(off + r) * n + off..(off + r) * n + off + m];
            p[r] = row.iter().zip(&v[..m]).map(|(a, b)| a * b).sum();
        }
        let kappa: f64 = v[..m]
            .iter()
            .zip(&p[..m])
            .map(|(a, b)| (a.conj() * b).re)
            .sum();
        for r in 0..m {
            p[r] -= v[r] * kappa;
        }
        for r in 0..m {
            let (vr, wr) = (v[r], p[r]);
            let row = &mut b[(off + r) * n + off..(off + r) * n + off + m];
            for (c, entry) in row.iter_mut().enumerate() {
                *entry -= (vr * p[c].conj() + wr * v[c].conj()) * 2.0;
            }
        }
        sub[k] = alpha;
        b[(k + 1) * n + k] = alpha;
        b[k * n + k + 1] = alpha.conj();
        for r in 1..m {
            b[(k + 1 + r) * n + k] = Complex64::new(0.0, 0.0);
            b[k * n + k + 1 + r] = Complex64::new(0.0, 0.0);
        }

        if let Some(q) = q.as_mut() {
            // Q <- Q H on columns off..n.
            let qs = q.as_mut_slice();
            for r in 0..n {
                let row = &mut qs[r * n + off..r * n + off + m];
                let t: Complex64 = row.iter().zip(&v[..m]).map(|(a, b)| a * b).sum();
                for (entry, vc) in row.iter_mut().zip(&v[..m]) {
                    *entry -= t * vc.conj() * 2.0;
                }
            }
        }
    }

    let diag: Vec<f64> = (0..n).map(|i| b[i * n + i].re).collect();
    let mut off = vec![0.0; n];
    let mut phases = vec![Complex64::new(1.0, 0.0); n];
    for k in 0..n.saturating_sub(1) {
        let e = sub[k];
        let mag = e.norm();
        off[k] = mag;
        phases[k + 1] = if mag > 0.0 {
            phases[k] * (e / mag)
        } else {
            phases[k]
        };
    }

    let basis_t = q.map(|q| {
        let mut t = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for c in 0..n {
                t[c * n + r] = q[(r, c)] * phases[c];
            }
        }
        t
    });
    Tridiagonal { diag, off, basis_t }
}

/// Implicit QL on a real symmetric tridiagonal matrix. Rotations are applied
/// to the rows of `basis_t` when present.
fn tql2(d: &mut [f64], e: &mut [f64], mut basis_t: Option<&mut [Complex64]>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_SWEEPS {
                    return Err(Error::EigenNoConvergence {
                        index: l,
                        sweeps: MAX_SWEEPS,
                    });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(vt) = basis_t.as_deref_mut() {
                        let (head, tail) = vt.split_at_mut((i + 1) * n);
                        let row_i = &mut head[i * n..];
                        let row_next = &mut tail[..n];
                        for (a, b) in row_i.iter_mut().zip(row_next.iter_mut()) {
                            let hv = *b;
                            *b = *a * s + hv * c;
                            *a = *a * c - hv * s;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

fn check_input(a: &CMatrix) -> Result<()> {
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Full eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(a: &HermitianMatrix) -> Result<SpectralDecomposition> {
    eigh_matrix(a.matrix())
}

pub(crate) fn eigh_matrix(a: &CMatrix) -> Result<SpectralDecomposition> {
    check_input(a)?;
    let n = a.dim();
    let Tridiagonal {
        mut diag,
        mut off,
        basis_t,
    } = tridiagonalize(a, true);
    let mut vt = basis_t.expect("requested eigenvectors");
    tql2(&mut diag, &mut off, Some(&mut vt))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| diag[x].total_cmp(&diag[y]));
    let eigenvalues = order.iter().map(|&k| diag[k]).collect();
    let eigenvectors = CMatrix::from_fn(n, |r, c| vt[order[c] * n + r]);
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues only (ascending); skips eigenvector accumulation.
pub fn eigvalsh(a: &HermitianMatrix) -> Result<Vec<f64>> {
    eigvalsh_matrix(a.matrix())
}

pub(crate) fn eigvalsh_matrix(a: &CMatrix) -> Result<Vec<f64>> {
    check_input(a)?;
    let Tridiagonal {
        mut diag, mut off, ..
    } = tridiagonalize(a, false);
    tql2(&mut diag, &mut off, None)?;
    diag.sort_by(f64::total_cmp);
    Ok(diag)
}
