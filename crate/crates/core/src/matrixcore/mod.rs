//! Hermitian matrix arithmetic under the normalized trace `tr_n = Tr / n`.
//!
//! Self-adjoint `n x n` matrices carry the real inner product
//! `<A, B> = tr_n(A B)`, and `d`-tuples the sum over components. Everything in
//! the crate is expressed in this geometry: GUE normalization, gradients of
//! trace functionals and the Laplacians all refer to it.

mod dense;
mod eigen;
mod funcalc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use dense::CMatrix;
pub use eigen::{eigh, eigvalsh, SpectralDecomposition, MAX_SWEEPS};
pub use funcalc::{apply_fn, apply_scalar_function, ScalarFunction};

use crate::error::{Error, Result};

/// Asymmetry above which a constructor rejects its input.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Imaginary drift tolerated on a raw diagonal sum before it is reported.
const TRACE_IMAG_TOL: f64 = 1e-12;

/// A self-adjoint `n x n` complex matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CMatrix", into = "CMatrix")]
pub struct HermitianMatrix(CMatrix);

impl TryFrom<CMatrix> for HermitianMatrix {
    type Error = Error;
    fn try_from(m: CMatrix) -> Result<Self> {
        HermitianMatrix::new(m)
    }
}

impl From<HermitianMatrix> for CMatrix {
    fn from(h: HermitianMatrix) -> CMatrix {
        h.0
    }
}

impl HermitianMatrix {
    /// Validates Hermiticity (relative to the entry scale) and finiteness.
    /// Small drift is removed by taking the Hermitian part.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::NonFinite);
        }
        let asym = m.max_asymmetry();
        let scale = 1.0 + m.as_slice().iter().map(|z| z.norm()).fold(0.0, f64::max);
        if asym > 1e-9 * scale {
            return Err(Error::NotHermitian(asym));
        }
        Ok(Self::project(m))
    }

    /// Hermitian part `(A + A*)/2`, applied only when the asymmetry exceeds
    /// [`HERMITIAN_TOL`]; diagonal imaginary parts are always cleared.
    pub fn project(m: CMatrix) -> Self {
        let mut m = if m.max_asymmetry() > HERMITIAN_TOL {
            m.hermitian_part()
        } else {
            m
        };
        let n = m.dim();
        for i in 0..n {
            m[(i, i)].im = 0.0;
        }
        HermitianMatrix(m)
    }

    pub fn zeros(n: usize) -> Self {
        HermitianMatrix(CMatrix::zeros(n))
    }

    pub fn identity(n: usize) -> Self {
        HermitianMatrix(CMatrix::identity(n))
    }

    pub fn scalar(n: usize, s: f64) -> Self {
        HermitianMatrix(CMatrix::scalar(n, Complex64::new(s, 0.0)))
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        HermitianMatrix(CMatrix::from_real_diag(diag))
    }

    /// Real symmetric matrix from rows.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let m = CMatrix::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
                .collect(),
        )?;
        Self::new(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    #[inline]
    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn scale(&self, s: f64) -> Self {
        HermitianMatrix(self.0.scale(s))
    }

    pub fn add(&self, other: &HermitianMatrix) -> Self {
        HermitianMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &HermitianMatrix) -> Self {
        HermitianMatrix(&self.0 - &other.0)
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &HermitianMatrix) {
        self.0.axpy_real(s, &other.0);
    }

    pub fn add_identity(&mut self, s: f64) {
        self.0.add_identity(Complex64::new(s, 0.0));
    }

    pub fn normalized_trace(&self) -> f64 {
        normalized_trace(self)
    }

    /// `tr_n(self * other)`, real for Hermitian arguments.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        self.0.trace_product(&other.0).re
    }

    pub fn operator_norm(&self) -> Result<f64> {
        operator_norm(self)
    }

    /// Unnormalized Frobenius norm; an upper bound for the operator norm.
    pub fn frobenius(&self) -> f64 {
        self.0.frobenius()
    }
}

/// A `d`-tuple of Hermitian matrices of common size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<HermitianMatrix>", into = "Vec<HermitianMatrix>")]
pub struct MatrixTuple {
    comps: Vec<HermitianMatrix>,
}

impl TryFrom<Vec<HermitianMatrix>> for MatrixTuple {
    type Error = Error;
    fn try_from(v: Vec<HermitianMatrix>) -> Result<Self> {
        MatrixTuple::new(v)
    }
}

impl From<MatrixTuple> for Vec<HermitianMatrix> {
    fn from(t: MatrixTuple) -> Self {
        t.comps
    }
}

impl MatrixTuple {
    pub fn new(comps: Vec<HermitianMatrix>) -> Result<Self> {
        let Some(first) = comps.first() else {
            return Err(Error::Precondition(
                "a matrix tuple needs at least one component".into(),
            ));
        };
        let n = first.dim();
        if comps.iter().any(|c| c.dim() != n) {
            return Err(Error::DimensionMismatch(
                "tuple components differ in size".into(),
            ));
        }
        Ok(MatrixTuple { comps })
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        MatrixTuple {
            comps: vec![HermitianMatrix::zeros(n); d],
        }
    }

    pub fn identities(n: usize, d: usize) -> Self {
        MatrixTuple {
            comps: vec![HermitianMatrix::identity(n); d],
        }
    }

    pub fn single(m: HermitianMatrix) -> Self {
        MatrixTuple { comps: vec![m] }
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.comps.len()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.comps[0].dim()
    }

    #[inline]
    pub fn component(&self, j: usize) -> &HermitianMatrix {
        &self.comps[j]
    }

    pub fn components(&self) -> &[HermitianMatrix] {
        &self.comps
    }

    pub fn components_mut(&mut self) -> &mut [HermitianMatrix] {
        &mut self.comps
    }

    pub fn into_components(self) -> Vec<HermitianMatrix> {
        self.comps
    }

    pub fn map(&self, f: impl Fn(&HermitianMatrix) -> HermitianMatrix) -> Self {
        MatrixTuple {
            comps: self.comps.iter().map(f).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|c| c.scale(s))
    }

    pub fn add(&self, other: &MatrixTuple) -> Self {
        MatrixTuple {
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn sub(&self, other: &MatrixTuple) -> Self {
        MatrixTuple {
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &MatrixTuple) {
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            a.axpy(s, b);
        }
    }

    /// Adds `s * 1` to every component.
    pub fn shift_identity(&mut self, s: f64) {
        for c in &mut self.comps {
            c.add_identity(s);
        }
    }

    /// Concatenation `(self, other)` as a `d1 + d2` tuple.
    pub fn concat(&self, other: &MatrixTuple) -> Result<Self> {
        let mut comps = self.comps.clone();
        comps.extend(other.comps.iter().cloned());
        MatrixTuple::new(comps)
    }

    fn check_compatible(&self, other: &MatrixTuple) -> Result<()> {
        if self.d() != other.d() || self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "tuples ({} x {}) and ({} x {})",
                self.d(),
                self.dim(),
                other.d(),
                other.dim()
            )));
        }
        Ok(())
    }
}

/// Real orthonormal basis element `E_ij` of the self-adjoint matrices under
/// `tr_n`, with zero-based indices:
///
/// * `i == j`: `sqrt(n) e_i e_i^T`
/// * `i < j`: `sqrt(n/2) (e_i e_j^T + e_j e_i^T)`
/// * `i > j`: `i sqrt(n/2) (e_i e_j^T - e_j e_i^T)`
pub fn basis_element(n: usize, i: usize, j: usize) -> Result<HermitianMatrix> {
    if i >= n || j >= n {
        return Err(Error::IndexOutOfRange(format!(
            "basis index ({i}, {j}) for n = {n}"
        )));
    }
    let mut m = CMatrix::zeros(n);
    let rn = (n as f64).sqrt();
    let half = rn / std::f64::consts::SQRT_2;
    if i == j {
        m[(i, i)] = Complex64::new(rn, 0.0);
    } else if i < j {
        m[(i, j)] = Complex64::new(half, 0.0);
        m[(j, i)] = Complex64::new(half, 0.0);
    } else {
        m[(i, j)] = Complex64::new(0.0, half);
        m[(j, i)] = Complex64::new(0.0, -half);
    }
    Ok(HermitianMatrix(m))
}

/// `tr_n(A)`. The imaginary part of the raw diagonal sum is checked in debug
/// builds; Hermitian construction already clears it.
pub fn normalized_trace(a: &HermitianMatrix) -> f64 {
    let t = a.matrix().normalized_trace();
    debug_assert!(t.im.abs() < TRACE_IMAG_TOL * (1.0 + t.re.abs()));
    t.re
}

/// `sum_j tr_n(X_j Y_j)`.
pub fn inner_product(x: &MatrixTuple, y: &MatrixTuple) -> Result<f64> {
    x.check_compatible(y)?;
    Ok(x.comps.iter().zip(&y.comps).map(|(a, b)| a.inner(b)).sum())
}

/// `sqrt(<X, X>)`.
pub fn l2_norm(x: &MatrixTuple) -> f64 {
    x.comps.iter().map(|a| a.inner(a)).sum::<f64>().sqrt()
}

/// `sum_j tr_n |X_j|`.
pub fn l1_norm(x: &MatrixTuple) -> Result<f64> {
    let mut total = 0.0;
    for c in &x.comps {
        total += eigvalsh(c)?.iter().map(|l| l.abs()).sum::<f64>() / c.dim() as f64;
    }
    Ok(total)
}

/// Largest absolute eigenvalue.
pub fn operator_norm(a: &HermitianMatrix) -> Result<f64> {
    let ev = eigvalsh(a)?;
    Ok(ev
        .first()
        .map(|l| l.abs())
        .unwrap_or(0.0)
        .max(ev.last().map(|l| l.abs()).unwrap_or(0.0)))
}
