//! Cylindrical functions `U(X) = g(tr_n phi_1(X), ..., tr_n phi_m(X))` with a
//! commutative polynomial `g` and self-adjoint NC polynomials `phi_o`, their
//! gradients and Hessians, and the GUE and free Laplacians.

mod outer;

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrixcore::{basis_element, CMatrix, HermitianMatrix, MatrixTuple};
use crate::ncpoly::{random_selfadjoint, NCPolynomial, TensorPolynomial};

pub use outer::OuterPolynomial;

/// Upper bound on `d * n^2` for the basis-sum Laplacian.
pub const LAPLACIAN_GUARD: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub struct CylindricalFunction {
    outer: OuterPolynomial,
    inners: Vec<NCPolynomial>,
    d: usize,
    /// `D_j phi_o`, indexed `[o][j]`.
    cyclic: Vec<Vec<NCPolynomial>>,
    /// `g_o` and `g_oq`.
    partials: Vec<OuterPolynomial>,
    second: Vec<Vec<OuterPolynomial>>,
}

/// `A(X), B(X)` for each term `c * a (x) b` of a tensor polynomial.
struct EvaluatedTensor(Vec<(Complex64, CMatrix, CMatrix)>);

impl EvaluatedTensor {
    fn new(t: &TensorPolynomial, x: &MatrixTuple) -> Result<Self> {
        let d = t.d();
        let mut out = Vec::new();
        for ((a, b), c) in t.terms() {
            let one = Complex64::new(1.0, 0.0);
            let am = NCPolynomial::monomial(d, a.clone(), one)?.evaluate(x)?;
            let bm = NCPolynomial::monomial(d, b.clone(), one)?.evaluate(x)?;
            out.push((*c, am, bm));
        }
        Ok(EvaluatedTensor(out))
    }

    /// `tr_n((T # A) B)`.
    fn pair(&self, a: &CMatrix, b: &CMatrix) -> Complex64 {
        self.0
            .iter()
            .map(|(c, l, r)| c * l.matmul(a).matmul(r).trace_product(b))
            .sum()
    }
}

impl CylindricalFunction {
    pub fn new(outer: OuterPolynomial, inners: Vec<NCPolynomial>) -> Result<Self> {
        if outer.m() != inners.len() {
            return Err(Error::DimensionMismatch(format!(
                "outer polynomial in {} variables with {} inner polynomials",
                outer.m(),
                inners.len()
            )));
        }
        let d = inners.iter().map(|p| p.d()).max().unwrap_or(1).max(1);
        let mut lifted = Vec::with_capacity(inners.len());
        for (o, p) in inners.into_iter().enumerate() {
            if !p.is_selfadjoint() {
                return Err(Error::Precondition(format!(
                    "inner polynomial {} is not self-adjoint",
                    o + 1
                )));
            }
            lifted.push(p.with_d(d)?);
        }
        let cyclic = lifted
            .iter()
            .map(|p| {
                (0..d)
                    .map(|j| p.cyclic_derivative(j))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let partials: Vec<OuterPolynomial> = (0..outer.m()).map(|o| outer.partial(o)).collect();
        let second = partials
            .iter()
            .map(|g| (0..outer.m()).map(|q| g.partial(q)).collect())
            .collect();
        Ok(CylindricalFunction {
            outer,
            inners: lifted,
            d,
            cyclic,
            partials,
            second,
        })
    }

    /// Parses `outer` in `u1..um` and each inner in `x1..xd`.
    pub fn parse(outer: &str, inners: &[&str], d: usize) -> Result<Self> {
        let outer = OuterPolynomial::parse(outer, inners.len())?;
        let inners = inners
            .iter()
            .map(|s| NCPolynomial::parse(s, d))
            .collect::<Result<Vec<_>>>()?;
        Self::new(outer, inners)
    }

    pub fn outer(&self) -> &OuterPolynomial {
        &self.outer
    }

    pub fn inners(&self) -> &[NCPolynomial] {
        &self.inners
    }

    pub fn m(&self) -> usize {
        self.inners.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    fn check(&self, x: &MatrixTuple) -> Result<()> {
        if x.d() < self.d {
            return Err(Error::DimensionMismatch(format!(
                "{}-tuple for a function of {} letters",
                x.d(),
                self.d
            )));
        }
        Ok(())
    }

    fn guard(&self, x: &MatrixTuple) -> Result<()> {
        let count = x.d() * x.dim() * x.dim();
        if count > LAPLACIAN_GUARD {
            return Err(Error::GuardExceeded {
                count: count as u128,
                limit: LAPLACIAN_GUARD as u128,
            });
        }
        Ok(())
    }

    /// `tr_n phi_o(X)` for every inner.
    pub fn inner_traces(&self, x: &MatrixTuple) -> Result<Vec<f64>> {
        self.check(x)?;
        self.inners
            .iter()
            .map(|p| Ok(p.evaluate_trace(x)?.re))
            .collect()
    }

    pub fn eval(&self, x: &MatrixTuple) -> Result<f64> {
        Ok(self.outer.eval(&self.inner_traces(x)?))
    }

    /// `D_j phi_o(X)` for `j < x.d()`; letters the function does not use give zero.
    fn cyclic_matrices(&self, x: &MatrixTuple) -> Result<Vec<Vec<CMatrix>>> {
        let n = x.dim();
        self.cyclic
            .iter()
            .map(|p| {
                (0..x.d())
                    .map(|j| {
                        if j < self.d {
                            p[j].evaluate(x)
                        } else {
                            Ok(CMatrix::zeros(n))
                        }
                    })
                    .collect()
            })
            .collect()
    }

    fn first_partials(&self, u: &[f64]) -> Vec<f64> {
        self.partials.iter().map(|g| g.eval(u)).collect()
    }

    fn second_partials(&self, u: &[f64]) -> Vec<Vec<f64>> {
        self.second
            .iter()
            .map(|row| row.iter().map(|g| g.eval(u)).collect())
            .collect()
    }

    /// True when the function is identically zero.
    pub fn is_zero(&self) -> bool {
        self.outer.terms().next().is_none()
    }

    /// `(grad U)^j = sum_o g_o D_j phi_o(X)`.
    pub fn gradient(&self, x: &MatrixTuple) -> Result<MatrixTuple> {
        Ok(self.value_and_gradient(x)?.1)
    }

    /// `U(X)` and its gradient from one set of inner traces. Outer
    /// coefficients that vanish skip their cyclic derivatives.
    pub fn value_and_gradient(&self, x: &MatrixTuple) -> Result<(f64, MatrixTuple)> {
        let u = self.inner_traces(x)?;
        let g1 = self.first_partials(&u);
        let n = x.dim();
        let mut comps = vec![CMatrix::zeros(n); x.d()];
        for (o, go) in g1.iter().enumerate() {
            if *go == 0.0 {
                continue;
            }
            for (j, acc) in comps.iter_mut().enumerate().take(self.d) {
                acc.axpy_real(*go, &self.cyclic[o][j].evaluate(x)?);
            }
        }
        let grad = MatrixTuple::new(comps.into_iter().map(HermitianMatrix::project).collect())?;
        Ok((self.outer.eval(&u), grad))
    }

    /// `d_i D_j phi_o` for letters used by the function.
    fn second_quotients(&self, x: &MatrixTuple) -> Result<Vec<Vec<Vec<EvaluatedTensor>>>> {
        self.cyclic
            .iter()
            .map(|p| {
                (0..self.d)
                    .map(|i| {
                        (0..self.d)
                            .map(|j| EvaluatedTensor::new(&p[j].free_difference_quotient(i)?, x))
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// `Hess U(X)[A, B]`: outer second partials paired with cyclic derivatives,
    /// plus first partials against `tr_n((d_i D_j phi_o # A^i) B^j)`.
    pub fn hessian_bilinear(
        &self,
        x: &MatrixTuple,
        a: &MatrixTuple,
        b: &MatrixTuple,
    ) -> Result<f64> {
        self.check(x)?;
        if a.d() != x.d() || b.d() != x.d() || a.dim() != x.dim() || b.dim() != x.dim() {
            return Err(Error::DimensionMismatch(
                "Hessian directions must match the point".into(),
            ));
        }
        let u = self.inner_traces(x)?;
        let g1 = self.first_partials(&u);
        let g2 = self.second_partials(&u);
        let cyc = self.cyclic_matrices(x)?;
        let quot = self.second_quotients(x)?;
        let pair = |o: usize, t: &MatrixTuple| -> f64 {
            (0..x.d())
                .map(|j| cyc[o][j].trace_product(t.component(j).matrix()).re)
                .sum()
        };
        let ca: Vec<f64> = (0..self.m()).map(|o| pair(o, a)).collect();
        let cb: Vec<f64> = (0..self.m()).map(|o| pair(o, b)).collect();
        let mut total = 0.0;
        for o in 0..self.m() {
            for q in 0..self.m() {
                total += g2[o][q] * ca[o] * cb[q];
            }
            for i in 0..self.d {
                for j in 0..self.d {
                    let t = &quot[o][i][j];
                    total += g1[o] * t.pair(a.component(i).matrix(), b.component(j).matrix()).re;
                }
            }
        }
        Ok(total)
    }

    /// `(1/n^2) sum_{l, E} Hess U(X)[e^l E, e^l E]` over the orthonormal basis `E`.
    pub fn gue_laplacian(&self, x: &MatrixTuple) -> Result<f64> {
        self.check(x)?;
        self.guard(x)?;
        let n = x.dim();
        let u = self.inner_traces(x)?;
        let g1 = self.first_partials(&u);
        let g2 = self.second_partials(&u);
        let cyc = self.cyclic_matrices(x)?;
        let quot = self.second_quotients(x)?;
        let dirs: Vec<(usize, usize, usize)> = (0..self.d)
            .flat_map(|l| (0..n).flat_map(move |i| (0..n).map(move |j| (l, i, j))))
            .collect();
        let terms = dirs
            .par_iter()
            .map(|&(l, i, j)| -> Result<f64> {
                let e = basis_element(n, i, j)?;
                let e = e.matrix();
                let c: Vec<f64> = (0..self.m())
                    .map(|o| cyc[o][l].trace_product(e).re)
                    .collect();
                let mut h = 0.0;
                for o in 0..self.m() {
                    for q in 0..self.m() {
                        h += g2[o][q] * c[o] * c[q];
                    }
                    h += g1[o] * quot[o][l][l].pair(e, e).re;
                }
                Ok(h)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(terms.iter().sum::<f64>() / (n * n) as f64)
    }

    /// `sum_o g_o sum_i (tr_n (x) tr_n)(d_i D_i phi_o)`.
    pub fn free_laplacian(&self, x: &MatrixTuple) -> Result<f64> {
        let u = self.inner_traces(x)?;
        let g1 = self.first_partials(&u);
        let mut total = 0.0;
        for (o, p) in self.cyclic.iter().enumerate() {
            for i in 0..self.d {
                total += g1[o] * p[i].free_difference_quotient(i)?.tensor_trace(x)?.re;
            }
        }
        Ok(total)
    }

    /// `(1/n^2) sum_{l, o, q} g_oq <D_l phi_o, D_l phi_q>`.
    pub fn correction_term(&self, x: &MatrixTuple) -> Result<f64> {
        self.check(x)?;
        self.guard(x)?;
        let n = x.dim();
        let u = self.inner_traces(x)?;
        let g2 = self.second_partials(&u);
        let cyc = self.cyclic_matrices(x)?;
        let mut total = 0.0;
        for l in 0..x.d() {
            for o in 0..self.m() {
                for q in 0..self.m() {
                    total += g2[o][q] * cyc[o][l].trace_product(&cyc[q][l]).re;
                }
            }
        }
        Ok(total / (n * n) as f64)
    }

    /// `GUE Laplacian - free Laplacian - correction`; zero up to rounding.
    pub fn identity_residual(&self, x: &MatrixTuple) -> Result<f64> {
        Ok(self.gue_laplacian(x)? - self.free_laplacian(x)? - self.correction_term(x)?)
    }

    pub fn identity_check(&self, x: &MatrixTuple, tol: f64) -> Result<bool> {
        Ok(self.identity_residual(x)?.abs() < tol)
    }

    /// Central second differences of `eval` along every basis direction,
    /// summed and divided by `n^2`.
    pub fn fd_gue_laplacian(&self, x: &MatrixTuple, h: f64) -> Result<f64> {
        self.check(x)?;
        self.guard(x)?;
        if !(h > 0.0) {
            return Err(Error::Precondition(format!(
                "step must be positive, got {h}"
            )));
        }
        let n = x.dim();
        let u0 = self.eval(x)?;
        let dirs: Vec<(usize, usize, usize)> = (0..x.d())
            .flat_map(|l| (0..n).flat_map(move |i| (0..n).map(move |j| (l, i, j))))
            .collect();
        let terms = dirs
            .par_iter()
            .map(|&(l, i, j)| -> Result<f64> {
                let e = basis_element(n, i, j)?;
                let mut plus = x.clone();
                plus.components_mut()[l].axpy(h, &e);
                let mut minus = x.clone();
                minus.components_mut()[l].axpy(-h, &e);
                Ok(self.eval(&plus)? - 2.0 * u0 + self.eval(&minus)?)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(terms.iter().sum::<f64>() / (h * h * (n * n) as f64))
    }

    /// `m` random self-adjoint inners in `d` letters of degree at most
    /// `inner_degree` under a random outer polynomial of degree at most `outer_degree`.
    pub fn random(
        d: usize,
        m: usize,
        inner_degree: usize,
        outer_degree: usize,
        rng: &mut impl rand::Rng,
    ) -> Result<Self> {
        let inners = (0..m)
            .map(|_| random_selfadjoint(d, inner_degree, 4, rng))
            .collect();
        let outer = OuterPolynomial::random(m, outer_degree, 4, rng);
        Self::new(outer, inners)
    }
}

impl fmt::Display for CylindricalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.outer)?;
        for (o, p) in self.inners.iter().enumerate() {
            write!(f, "; u{} = tr({p})", o + 1)?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct CylindricalDoc {
    outer: String,
    inners: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d: Option<usize>,
}

impl Serialize for CylindricalFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CylindricalDoc {
            outer: self.outer.to_string(),
            inners: self.inners.iter().map(|p| p.to_string()).collect(),
            d: Some(self.d),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CylindricalFunction {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let doc = CylindricalDoc::deserialize(de)?;
        let d = match doc.d {
            Some(d) => d,
            None => infer_letters(&doc.inners),
        };
        let inners: Vec<&str> = doc.inners.iter().map(String::as_str).collect();
        CylindricalFunction::parse(&doc.outer, &inners, d).map_err(serde::de::Error::custom)
    }
}

/// Largest `k` in any `xk` token, at least 1.
fn infer_letters(texts: &[String]) -> usize {
    let mut top = 1;
    for t in texts {
        let chars: Vec<char> = t.chars().collect();
        let mut k = 0;
        while k < chars.len() {
            if chars[k] == 'x' {
                let digits: String = chars[k + 1..]
                    .iter()
                    .take_while(|c| c.is_ascii_digit())
                    .collect();
                if let Ok(v) = digits.parse::<usize>() {
                    top = top.max(v);
                }
                k += 1 + digits.len();
            } else {
                k += 1;
            }
        }
    }
    top
}

#[cfg(test)]
mod tests;
