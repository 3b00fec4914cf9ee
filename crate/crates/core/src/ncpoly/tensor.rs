use std::collections::BTreeMap;

use num_complex::Complex64;

use super::{prefix_products, prune, trace_word, Word};
use crate::error::{Error, Result};
use crate::matrixcore::{CMatrix, MatrixTuple};

/// Element of `NCP_d (x) NCP_d`, stored as `(left, right) -> coefficient`.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorPolynomial {
    d: usize,
    terms: BTreeMap<(Word, Word), Complex64>,
}

impl TensorPolynomial {
    pub fn zero(d: usize) -> Self {
        TensorPolynomial {
            d,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_terms(
        d: usize,
        terms: impl IntoIterator<Item = ((Word, Word), Complex64)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for ((a, b), c) in terms {
            if a.max_letter().max(b.max_letter()).is_some_and(|j| j >= d) {
                return Err(Error::IndexOutOfRange(format!(
                    "tensor letter beyond d = {d}"
                )));
            }
            *map.entry((a, b)).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        prune(&mut map);
        Ok(TensorPolynomial { d, terms: map })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(Word, Word), &Complex64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, a: &Word, b: &Word) -> Complex64 {
        self.terms
            .get(&(a.clone(), b.clone()))
            .copied()
            .unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &TensorPolynomial) -> TensorPolynomial {
        let mut terms = self.terms.clone();
        for (k, c) in &other.terms {
            *terms.entry(k.clone()).or_default() += c;
        }
        prune(&mut terms);
        TensorPolynomial {
            d: self.d.max(other.d),
            terms,
        }
    }

    pub fn scale(&self, s: Complex64) -> TensorPolynomial {
        let mut terms: BTreeMap<_, _> =
            self.terms.iter().map(|(k, c)| (k.clone(), c * s)).collect();
        prune(&mut terms);
        TensorPolynomial { d: self.d, terms }
    }

    fn check_tuple(&self, x: &MatrixTuple) -> Result<()> {
        let top = self
            .terms
            .keys()
            .filter_map(|(a, b)| a.max_letter().max(b.max_letter()))
            .max();
        if top.is_some_and(|j| j >= x.d()) {
            return Err(Error::IndexOutOfRange(format!(
                "tensor letters exceed a {}-tuple",
                x.d()
            )));
        }
        Ok(())
    }

    /// `T # C = sum coef * a(X) C b(X)`.
    pub fn sharp(&self, x: &MatrixTuple, c: &CMatrix) -> Result<CMatrix> {
        self.check_tuple(x)?;
        if c.dim() != x.dim() {
            return Err(Error::DimensionMismatch(format!(
                "sharp argument {} vs tuple {}",
                c.dim(),
                x.dim()
            )));
        }
        let words = self.terms.keys().flat_map(|(a, b)| [a, b]);
        let cache = prefix_products(words, x, false);
        let mut out = CMatrix::zeros(x.dim());
        for ((a, b), coef) in &self.terms {
            let left = cache[a].matmul(c);
            out.axpy(*coef, &left.matmul(&cache[b]));
        }
        Ok(out)
    }

    /// `(tr_n (x) tr_n)(T) = sum coef * tr_n a(X) * tr_n b(X)`.
    pub fn tensor_trace(&self, x: &MatrixTuple) -> Result<Complex64> {
        self.check_tuple(x)?;
        let words = self.terms.keys().flat_map(|(a, b)| [a, b]);
        let cache = prefix_products(words, x, true);
        let mut traces: BTreeMap<&Word, Complex64> = BTreeMap::new();
        let mut acc = Complex64::new(0.0, 0.0);
        for ((a, b), coef) in &self.terms {
            let ta = *traces.entry(a).or_insert_with(|| trace_word(&cache, a, x));
            let tb = *traces.entry(b).or_insert_with(|| trace_word(&cache, b, x));
            acc += coef * ta * tb;
        }
        Ok(acc)
    }
}

/// `T # C` with `T` as a free function.
pub fn tensor_sharp(t: &TensorPolynomial, x: &MatrixTuple, c: &CMatrix) -> Result<CMatrix> {
    t.sharp(x, c)
}

/// `(tr_n (x) tr_n)(T)` with `T` as a free function.
pub fn tensor_trace(t: &TensorPolynomial, x: &MatrixTuple) -> Result<Complex64> {
    t.tensor_trace(x)
}
