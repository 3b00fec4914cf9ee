use serde::{Deserialize, Serialize};

use super::eigen::eigh;
use super::HermitianMatrix;
use crate::error::Result;

/// Real functions applied to Hermitian matrices through their spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarFunction {
    Arctan,
    /// `phi_R(s) = s` on `[-R, R]`, `sign(s) R` outside.
    Clip {
        r: f64,
    },
    Abs,
    /// Real coefficients in ascending degree.
    Polynomial {
        coeffs: Vec<f64>,
    },
}

impl ScalarFunction {
    pub fn identity() -> Self {
        ScalarFunction::Polynomial {
            coeffs: vec![0.0, 1.0],
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            ScalarFunction::Arctan => s.atan(),
            ScalarFunction::Clip { r } => s.clamp(-r, *r),
            ScalarFunction::Abs => s.abs(),
            ScalarFunction::Polynomial { coeffs } => {
                coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
            }
        }
    }
}

/// `Q f(Λ) Q*`.
pub fn apply_scalar_function(a: &HermitianMatrix, f: &ScalarFunction) -> Result<HermitianMatrix> {
    apply_fn(a, |s| f.eval(s))
}

/// Functional calculus with an arbitrary real function.
pub fn apply_fn(a: &HermitianMatrix, f: impl Fn(f64) -> f64) -> Result<HermitianMatrix> {
    let sd = eigh(a)?;
    Ok(HermitianMatrix::project(sd.reconstruct_with(f)))
}
