//! Real commutative polynomials in `u1..um`.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ncpoly::{parse_with_letter, Word, PRUNE_TOL};

/// Monomials are sorted letter lists, e.g. `[0, 0, 1]` for `u1^2 u2`.
#[derive(Clone, Debug, PartialEq)]
pub struct OuterPolynomial {
    m: usize,
    terms: BTreeMap<Word, f64>,
}

impl OuterPolynomial {
    pub fn from_terms(
        m: usize,
        terms: impl IntoIterator<Item = (Vec<usize>, f64)>,
    ) -> Result<Self> {
        let mut map: BTreeMap<Word, f64> = BTreeMap::new();
        for (mut w, c) in terms {
            if let Some(&v) = w.iter().find(|&&v| v >= m) {
                return Err(Error::IndexOutOfRange(format!(
                    "variable u{} with m = {m}",
                    v + 1
                )));
            }
            if !c.is_finite() {
                return Err(Error::NonFinite);
            }
            w.sort_unstable();
            *map.entry(Word(w)).or_insert(0.0) += c;
        }
        map.retain(|_, c| c.abs() > PRUNE_TOL);
        Ok(OuterPolynomial { m, terms: map })
    }

    /// Parses text in `u1..um`; coefficients must be real.
    pub fn parse(text: &str, m: usize) -> Result<Self> {
        let p = parse_with_letter(text, m.max(1), 'u')?;
        let mut terms = Vec::new();
        for (w, c) in p.terms() {
            if c.im != 0.0 {
                return Err(Error::Parse(format!("outer coefficient {c} is not real")));
            }
            terms.push((w.0.clone(), c.re));
        }
        Self::from_terms(m, terms)
    }

    /// `u_o`.
    pub fn var(m: usize, o: usize) -> Result<Self> {
        Self::from_terms(m, [(vec![o], 1.0)])
    }

    /// Random polynomial of total degree `1..=max_deg` with `terms` monomials
    /// and coefficients in `[-1, 1]`.
    pub fn random(m: usize, max_deg: usize, terms: usize, rng: &mut impl Rng) -> Self {
        let items: Vec<(Vec<usize>, f64)> = (0..terms)
            .map(|_| {
                let len = rng.random_range(1..=max_deg.max(1));
                (
                    (0..len).map(|_| rng.random_range(0..m)).collect(),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        Self::from_terms(m, items).expect("variables below m")
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[usize], f64)> {
        self.terms.iter().map(|(w, c)| (w.0.as_slice(), *c))
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Word::len).max().unwrap_or(0)
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(w, c)| c * w.0.iter().map(|&v| u[v]).product::<f64>())
            .sum()
    }

    /// `d g / d u_o`, exact.
    pub fn partial(&self, o: usize) -> OuterPolynomial {
        let mut terms: BTreeMap<Word, f64> = BTreeMap::new();
        for (w, c) in &self.terms {
            let k = w.0.iter().filter(|&&v| v == o).count();
            if k == 0 {
                continue;
            }
            let pos = w.0.iter().position(|&v| v == o).expect("present");
            let mut rest = w.0.clone();
            rest.remove(pos);
            *terms.entry(Word(rest)).or_insert(0.0) += c * k as f64;
        }
        OuterPolynomial { m: self.m, terms }
    }
}

impl fmt::Display for OuterPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (w, c)) in self.terms.iter().enumerate() {
            let sign = if *c < 0.0 { "-" } else { "+" };
            if k > 0 {
                write!(f, " {sign} ")?;
            } else if *c < 0.0 {
                write!(f, "-")?;
            }
            let mag = c.abs();
            let vars: Vec<String> = w.0.iter().map(|v| format!("u{}", v + 1)).collect();
            match (mag == 1.0, vars.is_empty()) {
                (true, true) => write!(f, "1")?,
                (true, false) => write!(f, "{}", vars.join("*"))?,
                (false, true) => write!(f, "{mag:?}")?,
                (false, false) => write!(f, "{mag:?}*{}", vars.join("*"))?,
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct OuterDoc {
    m: usize,
    text: String,
}

impl Serialize for OuterPolynomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        OuterDoc {
            m: self.m,
            text: self.to_string(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for OuterPolynomial {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let doc = OuterDoc::deserialize(de)?;
        OuterPolynomial::parse(&doc.text, doc.m).map_err(serde::de::Error::custom)
    }
}
