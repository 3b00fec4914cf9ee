use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Sub, SubAssign};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        CMatrix {
            n,
            data: vec![ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn scalar(n: usize, s: Complex64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = s;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        CMatrix { n, data }
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n);
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * n + i] = Complex64::new(v, 0.0);
        }
        m
    }

    /// Builds from row-major entries; `rows.len()` must be a perfect square.
    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(
                "rows must form a square matrix".into(),
            ));
        }
        Ok(CMatrix {
            n,
            data: rows.into_iter().flatten().collect(),
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        Self::from_fn(n, |i, j| self.data[j * n + i].conj())
    }

    /// Raw (unnormalized) trace.
    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self.data[i * self.n + i]).sum()
    }

    /// Normalized trace `tr_n = Tr / n`.
    pub fn normalized_trace(&self) -> Complex64 {
        self.trace() / self.n as f64
    }

    /// `tr_n(self * other)` without forming the product.
    pub fn trace_product(&self, other: &CMatrix) -> Complex64 {
        debug_assert_eq!(self.n, other.n);
        let n = self.n;
        let mut acc = ZERO;
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            for (k, a) in row.iter().enumerate() {
                acc += a * other.data[k * n + i];
            }
        }
        acc / n as f64
    }

    /// Unnormalized Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest `|a_ij - conj(a_ji)|`.
    pub fn max_asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.data[i * n + j] - self.data[j * n + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `(A + A*) / 2`.
    pub fn hermitian_part(&self) -> Self {
        let n = self.n;
        Self::from_fn(n, |i, j| {
            (self.data[i * n + j] + self.data[j * n + i].conj()) * 0.5
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        CMatrix {
            n: self.n,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_complex(&self, s: Complex64) -> Self {
        CMatrix {
            n: self.n,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: Complex64, other: &CMatrix) {
        debug_assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// `self += s * other` for a real scalar.
    pub fn axpy_real(&mut self, s: f64, other: &CMatrix) {
        debug_assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            a.re += s * b.re;
            a.im += s * b.im;
        }
    }

    pub fn add_identity(&mut self, s: Complex64) {
        for i in 0..self.n {
            self.data[i * self.n + i] += s;
        }
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.n, other.n, "matmul dimension mismatch");
        let n = self.n;
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            let out_row = &mut out[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[k * n..(k + 1) * n];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        CMatrix { n, data: out }
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                self.data[i * n..(i + 1) * n]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

impl Add<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.n, rhs.n);
        CMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.n, rhs.n);
        CMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

impl AddAssign<&CMatrix> for CMatrix {
    fn add_assign(&mut self, rhs: &CMatrix) {
        assert_eq!(self.n, rhs.n);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&CMatrix> for CMatrix {
    fn sub_assign(&mut self, rhs: &CMatrix) {
        assert_eq!(self.n, rhs.n);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}
