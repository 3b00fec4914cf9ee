//! Non-commutative polynomials over `d` self-adjoint letters.
//!
//! Letters are zero-based in the API (`0..d`) and printed as `x1..xd`.
//! Words are ordered graded-lexicographically (length first, then letters),
//! which fixes the iteration order of every map in this module.

mod parse;
pub(crate) use parse::parse_with_letter;
mod tensor;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrixcore::{CMatrix, MatrixTuple};

pub use tensor::{tensor_sharp, tensor_trace, TensorPolynomial};

/// Coefficients below this magnitude are dropped after arithmetic.
pub const PRUNE_TOL: f64 = 1e-15;

/// A monomial; the empty word is the unit.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(pub Vec<usize>);

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Word {
    pub fn unit() -> Self {
        Word(Vec::new())
    }

    pub fn letter(j: usize) -> Self {
        Word(vec![j])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[usize] {
        &self.0
    }

    pub fn reversed(&self) -> Word {
        Word(self.0.iter().rev().copied().collect())
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// Rotation by `k`: `w[k..] w[..k]`.
    pub fn rotate(&self, k: usize) -> Word {
        let mut v = self.0.clone();
        if !v.is_empty() {
            v.rotate_left(k % self.0.len());
        }
        Word(v)
    }

    /// Lexicographically smallest rotation.
    pub fn cyclic_representative(&self) -> Word {
        (0..self.len().max(1))
            .map(|k| self.rotate(k))
            .min_by(|a, b| a.0.cmp(&b.0))
            .unwrap_or_default()
    }

    pub fn max_letter(&self) -> Option<usize> {
        self.0.iter().copied().max()
    }

    /// All words over `d` letters of length `1..=max_len`, in graded-lex order.
    pub fn enumerate(d: usize, max_len: usize) -> Vec<Word> {
        let mut out = Vec::new();
        let mut layer = vec![Word::unit()];
        for _ in 0..max_len {
            let mut next = Vec::with_capacity(layer.len() * d);
            for w in &layer {
                for j in 0..d {
                    let mut v = w.0.clone();
                    v.push(j);
                    next.push(Word(v));
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self.0.iter().map(|j| format!("x{}", j + 1)).collect();
        write!(f, "{}", parts.join("*"))
    }
}

/// A non-commutative polynomial in `d` letters with complex coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct NCPolynomial {
    d: usize,
    terms: BTreeMap<Word, Complex64>,
}

fn prune<K: Ord>(terms: &mut BTreeMap<K, Complex64>) {
    terms.retain(|_, c| c.norm() >= PRUNE_TOL);
}

impl NCPolynomial {
    pub fn zero(d: usize) -> Self {
        NCPolynomial {
            d,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(d: usize, c: f64) -> Self {
        Self::from_terms(d, [(Word::unit(), Complex64::new(c, 0.0))]).expect("unit word")
    }

    /// The letter `x_{j+1}`.
    pub fn var(d: usize, j: usize) -> Result<Self> {
        Self::monomial(d, Word::letter(j), Complex64::new(1.0, 0.0))
    }

    pub fn monomial(d: usize, w: Word, c: Complex64) -> Result<Self> {
        Self::from_terms(d, [(w, c)])
    }

    /// Collects coefficients of repeated words and validates letters.
    pub fn from_terms(
        d: usize,
        terms: impl IntoIterator<Item = (Word, Complex64)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (w, c) in terms {
            if let Some(j) = w.max_letter() {
                if j >= d {
                    return Err(Error::IndexOutOfRange(format!(
                        "letter x{} with d = {d}",
                        j + 1
                    )));
                }
            }
            *map.entry(w).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        prune(&mut map);
        Ok(NCPolynomial { d, terms: map })
    }

    /// Parses the textual format, e.g. `"2.0*x1*x2*x1 - 0.5*x2"`.
    pub fn parse(text: &str, d: usize) -> Result<Self> {
        parse::parse(text, d)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Same polynomial viewed in `d2 >= d` letters.
    pub fn with_d(&self, d2: usize) -> Result<Self> {
        Self::from_terms(d2, self.terms.iter().map(|(w, c)| (w.clone(), *c)))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &Complex64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, w: &Word) -> Complex64 {
        self.terms.get(w).copied().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Length of the longest stored word; 0 for constants and the zero polynomial.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(Word::len).max().unwrap_or(0)
    }

    pub fn max_letter(&self) -> Option<usize> {
        self.terms.keys().filter_map(Word::max_letter).max()
    }

    pub fn add(&self, other: &NCPolynomial) -> NCPolynomial {
        let mut terms = self.terms.clone();
        for (w, c) in &other.terms {
            *terms.entry(w.clone()).or_default() += c;
        }
        prune(&mut terms);
        NCPolynomial {
            d: self.d.max(other.d),
            terms,
        }
    }

    pub fn sub(&self, other: &NCPolynomial) -> NCPolynomial {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> NCPolynomial {
        let mut terms: BTreeMap<_, _> =
            self.terms.iter().map(|(w, c)| (w.clone(), c * s)).collect();
        prune(&mut terms);
        NCPolynomial { d: self.d, terms }
    }

    pub fn scale_real(&self, s: f64) -> NCPolynomial {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn mul(&self, other: &NCPolynomial) -> NCPolynomial {
        let mut terms = BTreeMap::new();
        for (w1, c1) in &self.terms {
            for (w2, c2) in &other.terms {
                *terms
                    .entry(w1.concat(w2))
                    .or_insert(Complex64::new(0.0, 0.0)) += c1 * c2;
            }
        }
        prune(&mut terms);
        NCPolynomial {
            d: self.d.max(other.d),
            terms,
        }
    }

    pub fn pow(&self, k: u32) -> NCPolynomial {
        let mut out = NCPolynomial::constant(self.d, 1.0);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// Word reversal with conjugated coefficients.
    pub fn star(&self) -> NCPolynomial {
        let mut terms: BTreeMap<_, _> = self
            .terms
            .iter()
            .map(|(w, c)| (w.reversed(), c.conj()))
            .collect();
        prune(&mut terms);
        NCPolynomial { d: self.d, terms }
    }

    pub fn is_selfadjoint(&self) -> bool {
        let s = self.star();
        let scale = self.terms.values().map(|c| c.norm()).fold(1.0, f64::max);
        self.sub(&s)
            .terms
            .values()
            .all(|c| c.norm() <= 1e-12 * scale)
    }

    /// `(p + p*) / 2`.
    pub fn selfadjoint_part(&self) -> NCPolynomial {
        self.add(&self.star()).scale_real(0.5)
    }

    /// Free difference quotient in letter `j`:
    /// `d_j(x_{i_1}...x_{i_m}) = sum_{i_k = j} x_{i_1}..x_{i_{k-1}} (x) x_{i_{k+1}}..x_{i_m}`.
    pub fn free_difference_quotient(&self, j: usize) -> Result<TensorPolynomial> {
        self.check_letter(j)?;
        let mut terms = Vec::new();
        for (w, c) in &self.terms {
            for (k, &l) in w.0.iter().enumerate() {
                if l == j {
                    terms.push(((Word(w.0[..k].to_vec()), Word(w.0[k + 1..].to_vec())), *c));
                }
            }
        }
        TensorPolynomial::from_terms(self.d, terms)
    }

    /// Cyclic derivative in letter `j`:
    /// `D_j(x_{i_1}...x_{i_m}) = sum_{i_k = j} x_{i_{k+1}}..x_{i_m} x_{i_1}..x_{i_{k-1}}`.
    pub fn cyclic_derivative(&self, j: usize) -> Result<NCPolynomial> {
        self.check_letter(j)?;
        let mut terms = Vec::new();
        for (w, c) in &self.terms {
            for (k, &l) in w.0.iter().enumerate() {
                if l == j {
                    let mut v = w.0[k + 1..].to_vec();
                    v.extend_from_slice(&w.0[..k]);
                    terms.push((Word(v), *c));
                }
            }
        }
        NCPolynomial::from_terms(self.d, terms)
    }

    fn check_letter(&self, j: usize) -> Result<()> {
        if j >= self.d {
            return Err(Error::IndexOutOfRange(format!(
                "letter index {j} with d = {}",
                self.d
            )));
        }
        Ok(())
    }

    fn check_tuple(&self, x: &MatrixTuple) -> Result<()> {
        if let Some(j) = self.max_letter() {
            if j >= x.d() {
                return Err(Error::IndexOutOfRange(format!(
                    "letter x{} on a {}-tuple",
                    j + 1,
                    x.d()
                )));
            }
        }
        Ok(())
    }

    /// `p(X)` as a complex matrix.
    pub fn evaluate(&self, x: &MatrixTuple) -> Result<CMatrix> {
        self.check_tuple(x)?;
        let n = x.dim();
        let cache = prefix_products(self.terms.keys(), x, false);
        let mut out = CMatrix::zeros(n);
        for (w, c) in &self.terms {
            let m = cache.get(w).expect("every word is cached");
            out.axpy(*c, m);
        }
        Ok(out)
    }

    /// `tr_n p(X)`. The last factor of every word is folded into a trace of a
    /// product, so only proper prefixes are ever multiplied out.
    pub fn evaluate_trace(&self, x: &MatrixTuple) -> Result<Complex64> {
        self.check_tuple(x)?;
        let cache = prefix_products(self.terms.keys(), x, true);
        let mut acc = Complex64::new(0.0, 0.0);
        for (w, c) in &self.terms {
            acc += c * trace_word(&cache, w, x);
        }
        Ok(acc)
    }
}

/// Random self-adjoint polynomial: `terms` words of length `1..=max_deg`
/// with real coefficients in `[-1, 1]`, symmetrized by `(p + p*)/2`.
pub fn random_selfadjoint(
    d: usize,
    max_deg: usize,
    terms: usize,
    rng: &mut impl Rng,
) -> NCPolynomial {
    let mut out = Vec::with_capacity(terms);
    for _ in 0..terms {
        let len = rng.random_range(1..=max_deg.max(1));
        let w = Word((0..len).map(|_| rng.random_range(0..d)).collect());
        out.push((w, Complex64::new(rng.random_range(-1.0..1.0), 0.0)));
    }
    NCPolynomial::from_terms(d, out)
        .expect("letters below d")
        .selfadjoint_part()
}

/// `tr_n` of a single word, using products of its proper prefixes from `cache`.
pub(crate) fn trace_word(cache: &BTreeMap<Word, CMatrix>, w: &Word, x: &MatrixTuple) -> Complex64 {
    match w.0.split_last() {
        None => Complex64::new(1.0, 0.0),
        Some((&last, [])) => Complex64::new(x.component(last).normalized_trace(), 0.0),
        Some((&last, head)) => {
            let prefix = cache.get(&Word(head.to_vec())).expect("prefix cached");
            prefix.trace_product(x.component(last).matrix())
        }
    }
}

/// Products `X_{w_1} ... X_{w_k}` for every needed prefix of the given words.
/// With `proper_only`, the full words themselves are not multiplied out.
pub(crate) fn prefix_products<'a>(
    words: impl Iterator<Item = &'a Word>,
    x: &MatrixTuple,
    proper_only: bool,
) -> BTreeMap<Word, CMatrix> {
    let mut needed = BTreeSet::new();
    for w in words {
        let top = if proper_only {
            w.len().saturating_sub(1)
        } else {
            w.len()
        };
        for k in 0..=top {
            needed.insert(Word(w.0[..k].to_vec()));
        }
    }
    let n = x.dim();
    let mut cache: BTreeMap<Word, CMatrix> = BTreeMap::new();
    // Graded order guarantees that a prefix is computed before its extensions.
    for w in needed {
        let m = match w.0.split_last() {
            None => CMatrix::identity(n),
            Some((&last, [])) => x.component(last).matrix().clone(),
            Some((&last, head)) => {
                let prefix = &cache[&Word(head.to_vec())];
                prefix.matmul(x.component(last).matrix())
            }
        };
        cache.insert(w, m);
    }
    cache
}

impl fmt::Display for NCPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (w, c)) in self.terms.iter().enumerate() {
            let (sign, coef) = parse::format_coefficient(*c, k == 0);
            if k > 0 {
                write!(f, " {sign} ")?;
            } else if sign == "-" {
                write!(f, "-")?;
            }
            match (coef.as_str(), w.is_empty()) {
                ("1", true) => write!(f, "1")?,
                ("1", false) => write!(f, "{w}")?,
                (_, true) => write!(f, "{coef}")?,
                (_, false) => write!(f, "{coef}*{w}")?,
            }
        }
        Ok(())
    }
}

/// Serialized as `{d, text}` in the textual format.
#[derive(Serialize, Deserialize)]
struct PolyDoc {
    d: usize,
    text: String,
}

impl Serialize for NCPolynomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolyDoc {
            d: self.d,
            text: self.to_string(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for NCPolynomial {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let doc = PolyDoc::deserialize(de)?;
        NCPolynomial::parse(&doc.text, doc.d).map_err(serde::de::Error::custom)
    }
}
