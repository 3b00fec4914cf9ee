//! Log-Laplace functionals of the GUE at time 1 and their variational form.

use serde::{Deserialize, Serialize};

use super::discrete::{optimize_discrete_value, OptConfig, OptimizationResult};
use super::policy::InfoStructure;
use super::{ControlProblem, CostSpec, TraceFunctional};
use crate::error::{Error, Result};
use crate::matrixcore::MatrixTuple;
use crate::nclaw::NCLaw;
use crate::ncpoly::Word;
use crate::randmat::{sample_gue_tuple_with, try_map_samples, RngStream};

/// Operator-norm cap used where the variational problem has none.
const UNCAPPED: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogLaplaceEstimate {
    pub value: f64,
    /// Delta-method standard error.
    pub std_error: f64,
    pub samples: usize,
}

/// `-(1/n^2) log mean exp(-n^2 psi(W_hat_1))` over `mc_samples` GUE tuples.
pub fn boue_dupuis_lhs(
    psi: &TraceFunctional,
    n: usize,
    d: usize,
    mc_samples: usize,
    stream: &RngStream,
) -> Result<LogLaplaceEstimate> {
    if mc_samples == 0 {
        return Err(Error::Precondition("mc_samples must be at least 1".into()));
    }
    let n2 = (n * n) as f64;
    let logs = try_map_samples(stream, mc_samples, |_, s| {
        let w = sample_gue_tuple_with(n, d, 1.0, &mut s.rng());
        Ok(-n2 * psi.value(&w)?)
    })?;
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(Error::Underflow);
    }
    let m = mc_samples as f64;
    let weights: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let mean = weights.iter().sum::<f64>() / m;
    let var = if mc_samples > 1 {
        weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    Ok(LogLaplaceEstimate {
        value: -(top + mean.ln()) / n2,
        std_error: (var / m).sqrt() / mean / n2,
        samples: mc_samples,
    })
}

/// `inf E[1/2 int_0^1 ||a||^2 dt + psi(W_hat_1 + int_0^1 a dt)]` over predictable
/// polynomial policies on `time_steps` uniform steps, started from zero.
pub fn boue_dupuis_rhs(
    psi: &TraceFunctional,
    n: usize,
    d: usize,
    time_steps: usize,
    cfg: &OptConfig,
    stream: &RngStream,
) -> Result<OptimizationResult> {
    let problem = ControlProblem::new(
        MatrixTuple::zeros(n, d),
        0.0,
        1.0,
        0.0,
        1.0,
        CostSpec::energy_with_terminal(psi.clone()),
    )?;
    let mut cfg = cfg.clone();
    cfg.basis.info = InfoStructure::Predictable;
    optimize_discrete_value(&problem, time_steps, 1, UNCAPPED, &cfg, stream)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    /// Maximum over the family; a lower bound for the supremum over all test functions.
    pub value: f64,
    /// `phi(target) + Lambda(-phi)` per family member.
    pub members: Vec<f64>,
    pub best: usize,
}

/// `max_phi { phi(target) + Lambda_n(-phi) }` over test functions
/// `phi(X) = sum_l tr p_l(arctan X_l)`, given by their coefficient lists.
/// `target` holds arctan moments; `Lambda_n` is approximated by
/// [`boue_dupuis_rhs`].
pub fn rate_function_candidate(
    target: &NCLaw,
    family: &[Vec<Vec<f64>>],
    n: usize,
    time_steps: usize,
    cfg: &OptConfig,
    stream: &RngStream,
) -> Result<RateEstimate> {
    if family.is_empty() {
        return Err(Error::Precondition("the test family is empty".into()));
    }
    let mut members = Vec::with_capacity(family.len());
    for (idx, coeffs) in family.iter().enumerate() {
        let d = coeffs.len();
        if d == 0 || d > target.d {
            return Err(Error::DimensionMismatch(format!(
                "test function in {d} letters for a law in {}",
                target.d
            )));
        }
        let mut at_target = 0.0;
        for (l, p) in coeffs.iter().enumerate() {
            for (k, c) in p.iter().enumerate() {
                let m = target.moment(&Word(vec![l; k])).ok_or_else(|| {
                    Error::Precondition(format!("target law lacks the moment of x{}^{k}", l + 1))
                })?;
                at_target += c * m.re;
            }
        }
        let neg: Vec<Vec<f64>> = coeffs
            .iter()
            .map(|p| p.iter().map(|c| -c).collect())
            .collect();
        let psi = TraceFunctional::ArctanSpectral { coeffs: neg };
        let rhs = boue_dupuis_rhs(&psi, n, d, time_steps, cfg, &stream.split(idx as u64))?;
        members.push(at_target + rhs.value);
    }
    let best = members
        .iter()
        .enumerate()
        .fold(0, |b, (i, v)| if *v > members[b] { i } else { b });
    Ok(RateEstimate {
        value: members[best],
        members,
        best,
    })
}
