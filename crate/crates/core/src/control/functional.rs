//! Trace functionals used as running and terminal costs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplacian::CylindricalFunction;
use crate::matrixcore::{eigh, HermitianMatrix, MatrixTuple};

/// A real function of a matrix tuple with an analytic gradient in the
/// `tr_n` geometry: `d/de F(X + e H) = <grad F(X), H>`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceFunctional {
    Zero,
    /// Polynomial outer function of traced NC polynomials.
    Cylindrical {
        function: CylindricalFunction,
    },
    /// `sum_l w_l tr_n(sqrt(1 + X_l^2) - 1)`; each term is `|w_l|`-Lipschitz in `L^1`.
    PseudoHuber {
        weights: Vec<f64>,
    },
    /// `sum_l tr_n p_l(arctan X_l)` with `coeffs[l]` ascending in degree.
    ArctanSpectral {
        coeffs: Vec<Vec<f64>>,
    },
}

fn horner(c: &[f64], s: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, a| acc * s + a)
}

fn horner_derivative(c: &[f64], s: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (k, a)| acc * s + k as f64 * a)
}

/// `sqrt(1 + s^2) - 1` without cancellation near zero.
fn pseudo_huber(s: f64) -> f64 {
    s * s / ((1.0 + s * s).sqrt() + 1.0)
}

impl TraceFunctional {
    pub fn cylindrical(function: CylindricalFunction) -> Self {
        TraceFunctional::Cylindrical { function }
    }

    /// Parses a cylindrical functional in `d` letters.
    pub fn parse(outer: &str, inners: &[&str], d: usize) -> Result<Self> {
        Ok(Self::cylindrical(CylindricalFunction::parse(
            outer, inners, d,
        )?))
    }

    /// Number of letters read; spectral variants need exactly this many.
    pub fn d(&self) -> usize {
        match self {
            TraceFunctional::Zero => 0,
            TraceFunctional::Cylindrical { function } => function.d(),
            TraceFunctional::PseudoHuber { weights } => weights.len(),
            TraceFunctional::ArctanSpectral { coeffs } => coeffs.len(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            TraceFunctional::Zero => true,
            TraceFunctional::Cylindrical { function } => function.is_zero(),
            TraceFunctional::PseudoHuber { weights } => weights.iter().all(|w| *w == 0.0),
            TraceFunctional::ArctanSpectral { coeffs } => {
                coeffs.iter().flatten().all(|c| *c == 0.0)
            }
        }
    }

    /// `L^1` Lipschitz constant of the spectral variants; `None` otherwise.
    pub fn spectral_lipschitz(&self) -> Option<f64> {
        match self {
            TraceFunctional::Zero => Some(0.0),
            TraceFunctional::PseudoHuber { weights } => {
                Some(weights.iter().fold(0.0, |m, w| m.max(w.abs())))
            }
            _ => None,
        }
    }

    fn check(&self, x: &MatrixTuple) -> Result<()> {
        let ok = match self {
            TraceFunctional::Zero => true,
            TraceFunctional::Cylindrical { function } => x.d() >= function.d(),
            _ => x.d() == self.d(),
        };
        if !ok {
            return Err(Error::DimensionMismatch(format!(
                "{}-tuple for a functional of {} letters",
                x.d(),
                self.d()
            )));
        }
        Ok(())
    }

    pub fn value(&self, x: &MatrixTuple) -> Result<f64> {
        self.check(x)?;
        match self {
            TraceFunctional::Zero => Ok(0.0),
            TraceFunctional::Cylindrical { function } => function.eval(x),
            TraceFunctional::PseudoHuber { weights } => {
                let mut v = 0.0;
                for (c, w) in x.components().iter().zip(weights) {
                    if *w != 0.0 {
                        let ev = eigh(c)?.eigenvalues;
                        v += w * ev.iter().map(|&l| pseudo_huber(l)).sum::<f64>() / ev.len() as f64;
                    }
                }
                Ok(v)
            }
            TraceFunctional::ArctanSpectral { coeffs } => {
                let mut v = 0.0;
                for (c, p) in x.components().iter().zip(coeffs) {
                    let ev = eigh(c)?.eigenvalues;
                    v += ev.iter().map(|&l| horner(p, l.atan())).sum::<f64>() / ev.len() as f64;
                }
                Ok(v)
            }
        }
    }

    /// Value and gradient; the gradient has `x.d()` components.
    pub fn value_and_gradient(&self, x: &MatrixTuple) -> Result<(f64, MatrixTuple)> {
        self.check(x)?;
        let n = x.dim();
        match self {
            TraceFunctional::Zero => Ok((0.0, MatrixTuple::zeros(n, x.d()))),
            TraceFunctional::Cylindrical { function } => function.value_and_gradient(x),
            TraceFunctional::PseudoHuber { weights } => spectral(x, |l, s| {
                let w = weights[l];
                (w * pseudo_huber(s), w * s / (1.0 + s * s).sqrt())
            }),
            TraceFunctional::ArctanSpectral { coeffs } => spectral(x, |l, s| {
                let p = &coeffs[l];
                let a = s.atan();
                (horner(p, a), horner_derivative(p, a) / (1.0 + s * s))
            }),
        }
    }
}

/// `sum_l tr_n f_l(X_l)` and its gradient `f_l'(X_l)`, with `f(l, s)`
/// returning `(f_l(s), f_l'(s))`.
fn spectral(x: &MatrixTuple, f: impl Fn(usize, f64) -> (f64, f64)) -> Result<(f64, MatrixTuple)> {
    let n = x.dim();
    let mut value = 0.0;
    let mut grads = Vec::with_capacity(x.d());
    for (l, c) in x.components().iter().enumerate() {
        let sd = eigh(c)?;
        value += sd.eigenvalues.iter().map(|&s| f(l, s).0).sum::<f64>() / n as f64;
        grads.push(HermitianMatrix::project(sd.reconstruct_with(|s| f(l, s).1)));
    }
    Ok((value, MatrixTuple::new(grads)?))
}
