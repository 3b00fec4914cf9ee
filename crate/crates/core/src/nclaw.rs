//! Truncated non-commutative laws and the diagnostics built on them.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrixcore::{apply_scalar_function, operator_norm, MatrixTuple, ScalarFunction};
use crate::ncpoly::{prefix_products, trace_word, NCPolynomial, Word};
use crate::quad::adaptive_simpson;

/// Moments `word -> tau(word)` of all words up to `max_degree`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LawDoc", into = "LawDoc")]
pub struct NCLaw {
    pub d: usize,
    pub max_degree: usize,
    moments: BTreeMap<Word, Complex64>,
    pub radius_bound: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct MomentDoc {
    word: Vec<usize>,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct LawDoc {
    d: usize,
    #[serde(rename = "D")]
    max_degree: usize,
    moments: Vec<MomentDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius_bound: Option<f64>,
}

impl From<NCLaw> for LawDoc {
    fn from(l: NCLaw) -> Self {
        LawDoc {
            d: l.d,
            max_degree: l.max_degree,
            moments: l
                .moments
                .into_iter()
                .map(|(w, z)| MomentDoc {
                    word: w.0,
                    re: z.re,
                    im: z.im,
                })
                .collect(),
            radius_bound: l.radius_bound,
        }
    }
}

impl TryFrom<LawDoc> for NCLaw {
    type Error = Error;
    fn try_from(doc: LawDoc) -> Result<Self> {
        let moments = doc
            .moments
            .into_iter()
            .map(|m| (Word(m.word), Complex64::new(m.re, m.im)))
            .collect();
        NCLaw::new(doc.d, doc.max_degree, moments, doc.radius_bound)
    }
}

impl NCLaw {
    /// Validates the stored moments against the law invariants.
    pub fn new(
        d: usize,
        max_degree: usize,
        moments: BTreeMap<Word, Complex64>,
        radius_bound: Option<f64>,
    ) -> Result<Self> {
        let law = NCLaw {
            d,
            max_degree,
            moments,
            radius_bound,
        };
        law.check_invariants(1e-9)?;
        Ok(law)
    }

    pub fn moment(&self, w: &Word) -> Option<Complex64> {
        self.moments.get(w).copied()
    }

    pub fn moments(&self) -> impl Iterator<Item = (&Word, &Complex64)> {
        self.moments.iter()
    }

    /// Unit mass, cyclic invariance, conjugate symmetry and the radius bound.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let unit = self.moment(&Word::unit()).unwrap_or_default();
        if (unit - Complex64::new(1.0, 0.0)).norm() > tol {
            return Err(Error::Precondition(format!("moment of the unit is {unit}")));
        }
        for (w, z) in &self.moments {
            if w.max_letter().is_some_and(|j| j >= self.d) || w.len() > self.max_degree {
                return Err(Error::Precondition(format!(
                    "word {w} outside the law's range"
                )));
            }
            let scale = tol * (1.0 + z.norm());
            if let Some(r) = self.moment(&w.reversed()) {
                if (r - z.conj()).norm() > scale {
                    return Err(Error::Precondition(format!(
                        "moment of {w} is not conjugate symmetric"
                    )));
                }
            }
            if let Some(c) = self.moment(&w.cyclic_representative()) {
                if (c - z).norm() > scale {
                    return Err(Error::Precondition(format!("moment of {w} is not cyclic")));
                }
            }
            if let Some(rb) = self.radius_bound {
                if z.norm() > rb.powi(w.len() as i32) * (1.0 + tol) + tol {
                    return Err(Error::Precondition(format!(
                        "moment of {w} exceeds the radius bound"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Moments of every word up to degree `max_degree` of the tuple `X`.
pub fn empirical_law(x: &MatrixTuple, max_degree: usize) -> Result<NCLaw> {
    let d = x.d();
    let words = Word::enumerate(d, max_degree);
    let cache = prefix_products(words.iter(), x, true);
    let mut moments = BTreeMap::new();
    moments.insert(Word::unit(), Complex64::new(1.0, 0.0));
    for w in words {
        let t = trace_word(&cache, &w, x);
        moments.insert(w, t);
    }
    let mut radius = 0.0f64;
    for c in x.components() {
        radius = radius.max(operator_norm(c)?);
    }
    Ok(NCLaw {
        d,
        max_degree,
        moments,
        radius_bound: Some(radius),
    })
}

/// Law of the componentwise `arctan(X)`.
pub fn arctan_law(x: &MatrixTuple, max_degree: usize) -> Result<NCLaw> {
    let comps = x
        .components()
        .iter()
        .map(|c| apply_scalar_function(c, &ScalarFunction::Arctan))
        .collect::<Result<Vec<_>>>()?;
    let mut law = empirical_law(&MatrixTuple::new(comps)?, max_degree)?;
    law.radius_bound = law.radius_bound.map(|r| r.min(FRAC_PI_2));
    Ok(law)
}

/// `sum_k 2^-k (pi/2)^-deg(p_k) |l1(p_k) - l2(p_k)|` over non-constant words
/// of degree `<= max_degree`, `k = 1, 2, ...` in graded-lex order.
///
/// Both laws are expected to be laws of arctan-transformed tuples. The
/// omitted tail is at most `2^-K` where `K` is the number of listed words.
pub fn law_metric(l1: &NCLaw, l2: &NCLaw, max_degree: usize) -> Result<f64> {
    if l1.d != l2.d {
        return Err(Error::DimensionMismatch(format!(
            "laws over {} and {} letters",
            l1.d, l2.d
        )));
    }
    if l1.max_degree < max_degree || l2.max_degree < max_degree {
        return Err(Error::Precondition(format!(
            "metric degree {max_degree} exceeds stored degrees {} and {}",
            l1.max_degree, l2.max_degree
        )));
    }
    let mut total = 0.0;
    let mut weight = 1.0;
    for w in Word::enumerate(l1.d, max_degree) {
        weight *= 0.5;
        let a = l1
            .moment(&w)
            .ok_or_else(|| Error::Precondition(format!("missing moment {w}")))?;
        let b = l2
            .moment(&w)
            .ok_or_else(|| Error::Precondition(format!("missing moment {w}")))?;
        total += weight * FRAC_PI_2.powi(-(w.len() as i32)) * (a - b).norm();
    }
    Ok(total)
}

/// `tr_n prod_i (f_i(X_{j_i}) - tr_n f_i(X_{j_i}))`, real part.
///
/// `groups[j]` is the tuple the polynomials with index `j` are evaluated on.
/// Consecutive indices must differ.
pub fn freeness_statistic(
    groups: &[MatrixTuple],
    index_sequence: &[usize],
    polys: &[NCPolynomial],
) -> Result<f64> {
    if index_sequence.len() != polys.len() || index_sequence.is_empty() {
        return Err(Error::Precondition(
            "one polynomial per index is required".into(),
        ));
    }
    if index_sequence.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Precondition(
            "consecutive indices must differ".into(),
        ));
    }
    if let Some(&j) = index_sequence.iter().find(|&&j| j >= groups.len()) {
        return Err(Error::IndexOutOfRange(format!(
            "group {j} of {}",
            groups.len()
        )));
    }
    if polys.iter().any(|p| !p.is_selfadjoint()) {
        return Err(Error::Precondition(
            "freeness polynomials must be self-adjoint".into(),
        ));
    }
    let mut acc: Option<crate::matrixcore::CMatrix> = None;
    for (&j, p) in index_sequence.iter().zip(polys) {
        let mut m = p.evaluate(&groups[j])?;
        let t = m.normalized_trace();
        m.add_identity(-t);
        acc = Some(match acc {
            None => m,
            Some(prev) => prev.matmul(&m),
        });
    }
    let z = acc.expect("non-empty sequence").normalized_trace();
    debug_assert!(z.im.abs() < 1e-9 * (1.0 + z.re.abs()));
    Ok(z.re)
}

/// Catalan number `C_{k/2}` for even `k`, zero for odd `k`.
pub fn semicircle_moment(k: usize) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    let m = k / 2;
    let mut c = 1.0f64;
    for i in 0..m {
        c = c * 2.0 * (2 * i + 1) as f64 / (i + 2) as f64;
    }
    c
}

/// `int arctan(x)^m d rho_sc(x)`, computed in the angle variable
/// `x = 2 cos(theta)` where the density becomes `(2/pi) sin^2(theta)`.
pub fn semicircle_arctan_moment(m: usize) -> Result<f64> {
    if m % 2 == 1 {
        return Ok(0.0);
    }
    adaptive_simpson(
        |th: f64| {
            let s = th.sin();
            (2.0 * th.cos()).atan().powi(m as i32) * s * s * 2.0 / PI
        },
        0.0,
        PI,
        1e-10,
    )
}

/// Arctan law of a single standard semicircular variable.
pub fn semicircle_arctan_law(max_degree: usize) -> Result<NCLaw> {
    let mut moments = BTreeMap::new();
    moments.insert(Word::unit(), Complex64::new(1.0, 0.0));
    for m in 1..=max_degree {
        moments.insert(
            Word(vec![0; m]),
            Complex64::new(semicircle_arctan_moment(m)?, 0.0),
        );
    }
    Ok(NCLaw {
        d: 1,
        max_degree,
        moments,
        radius_bound: Some(2.0f64.atan()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixcore::HermitianMatrix;
    use crate::randmat::{map_samples, sample_gue, sample_gue_tuple_with, RngStream};

    #[test]
    fn empirical_examples() {
        let zero = empirical_law(&MatrixTuple::zeros(3, 2), 4).unwrap();
        assert!(zero.moments().all(|(w, z)| w.is_empty() || z.norm() == 0.0));
        let id = empirical_law(&MatrixTuple::identities(3, 1), 5).unwrap();
        assert!(id
            .moments()
            .all(|(_, z)| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        let pm = empirical_law(
            &MatrixTuple::single(HermitianMatrix::from_real_diag(&[1.0, -1.0])),
            6,
        )
        .unwrap();
        for m in 1..=6 {
            let want = if m % 2 == 0 { 1.0 } else { 0.0 };
            assert!((pm.moment(&Word(vec![0; m])).unwrap().re - want).abs() < 1e-15);
        }
    }

    #[test]
    fn empirical_law_is_valid_and_radius_consistent() {
        let x = sample_gue_tuple_with(6, 2, 1.0, &mut RngStream::new(3).rng());
        let law = empirical_law(&x, 5).unwrap();
        law.check_invariants(1e-9).unwrap();
        let r = law.radius_bound.unwrap();
        for (w, z) in law.moments() {
            if !w.is_empty() {
                assert!(r >= z.norm().powf(1.0 / w.len() as f64) - 1e-12);
            }
        }
    }

    #[test]
    fn arctan_examples() {
        let zero = arctan_law(&MatrixTuple::zeros(2, 1), 4).unwrap();
        assert!(zero
            .moments()
            .all(|(w, z)| w.is_empty() || z.norm() < 1e-15));
        let id = arctan_law(&MatrixTuple::identities(2, 1), 4).unwrap();
        for m in 1..=4 {
            let z = id.moment(&Word(vec![0; m])).unwrap();
            assert!((z.re - std::f64::consts::FRAC_PI_4.powi(m as i32)).abs() < 1e-14);
        }
        let x = sample_gue_tuple_with(5, 2, 3.0, &mut RngStream::new(4).rng());
        let law = arctan_law(&x, 5).unwrap();
        for (w, z) in law.moments() {
            assert!(z.norm() <= FRAC_PI_2.powi(w.len() as i32) + 1e-12);
        }
    }

    #[test]
    fn metric_examples() {
        let z = arctan_law(&MatrixTuple::zeros(2, 1), 8).unwrap();
        let i = arctan_law(&MatrixTuple::identities(2, 1), 8).unwrap();
        assert_eq!(law_metric(&z, &z, 8).unwrap(), 0.0);
        let v = law_metric(&z, &i, 8).unwrap();
        let want: f64 = (1..=8).map(|m| 0.25f64.powi(m)).sum();
        assert!((v - want).abs() < 1e-12);
        assert!((v - 0.333328).abs() < 1e-6);
        assert!(law_metric(&z, &i, 9).is_err());
        let two = arctan_law(&MatrixTuple::zeros(2, 2), 8).unwrap();
        assert!(law_metric(&z, &two, 4).is_err());
    }

    #[test]
    fn metric_triangle_inequality() {
        let mut rng = RngStream::new(5).rng();
        for _ in 0..10 {
            let laws: Vec<_> = (0..3)
                .map(|_| arctan_law(&sample_gue_tuple_with(4, 2, 1.5, &mut rng), 4).unwrap())
                .collect();
            let ab = law_metric(&laws[0], &laws[1], 4).unwrap();
            let bc = law_metric(&laws[1], &laws[2], 4).unwrap();
            let ac = law_metric(&laws[0], &laws[2], 4).unwrap();
            assert!(ac <= ab + bc + 1e-12);
            assert!((ab - law_metric(&laws[1], &laws[0], 4).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn freeness_examples() {
        let mut rng = RngStream::new(6).rng();
        let a = sample_gue_tuple_with(6, 1, 1.0, &mut rng);
        let b = sample_gue_tuple_with(6, 1, 1.0, &mut rng);
        let sq = NCPolynomial::parse("x1^2", 1).unwrap();
        let one = freeness_statistic(&[a.clone(), b.clone()], &[0], &[sq.clone()]).unwrap();
        assert!(one.abs() < 1e-14);
        assert!(
            freeness_statistic(&[a.clone(), b.clone()], &[0, 0], &[sq.clone(), sq.clone()])
                .is_err()
        );
        let ns = NCPolynomial::parse("i*x1", 1).unwrap();
        assert!(freeness_statistic(&[a, b], &[0, 1], &[sq, ns]).is_err());
    }

    #[test]
    fn freeness_of_independent_gue() {
        let sq = NCPolynomial::parse("x1^2", 1).unwrap();
        let stats = map_samples(&RngStream::new(7), 50, |_, s| {
            let a = MatrixTuple::single(sample_gue(128, &s.split(0)));
            let b = MatrixTuple::single(sample_gue(128, &s.split(1)));
            freeness_statistic(&[a, b], &[0, 1], &[sq.clone(), sq.clone()])
                .unwrap()
                .abs()
        });
        assert!(stats.iter().sum::<f64>() / 50.0 < 0.05);
    }

    #[test]
    fn catalan_moments() {
        assert_eq!(semicircle_moment(0), 1.0);
        assert_eq!(semicircle_moment(2), 1.0);
        assert_eq!(semicircle_moment(3), 0.0);
        assert_eq!(semicircle_moment(4), 2.0);
        assert_eq!(semicircle_moment(8), 14.0);
        assert_eq!(semicircle_moment(12), 132.0);
    }

    #[test]
    fn semicircle_arctan_reference() {
        assert!((semicircle_arctan_moment(0).unwrap() - 1.0).abs() < 1e-10);
        // Independent check by a plain midpoint rule in x.
        let m = 10_000;
        let h = 4.0 / m as f64;
        let mid: f64 = (0..m)
            .map(|k| {
                let x = -2.0 + (k as f64 + 0.5) * h;
                x.atan().powi(2) * (4.0 - x * x).sqrt() / (2.0 * PI) * h
            })
            .sum();
        assert!((semicircle_arctan_moment(2).unwrap() - mid).abs() < 1e-6);
        semicircle_arctan_law(6)
            .unwrap()
            .check_invariants(1e-12)
            .unwrap();
    }

    #[test]
    fn json_round_trip() {
        let x = sample_gue_tuple_with(3, 2, 1.0, &mut RngStream::new(8).rng());
        let law = empirical_law(&x, 3).unwrap();
        let s = serde_json::to_string(&law).unwrap();
        assert!(s.contains("\"D\":3"));
        let back: NCLaw = serde_json::from_str(&s).unwrap();
        assert_eq!(back, law);
    }
}
