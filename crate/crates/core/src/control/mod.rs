//! Matrix control problems driven by common and GUE noise: cost
//! specifications, discrete bin-path policies, cost evaluation and
//! optimization, analytic linear-quadratic oracles, continuous-time
//! simulation and the Boué–Dupuis functionals.

mod continuous;
mod discrete;
mod functional;
mod ldp;
mod policy;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrixcore::{l1_norm, l2_norm, MatrixTuple};
use crate::randmat::{sample_gue_tuple_with, try_map_samples, RngStream};

pub use continuous::{
    coarsen_control, euler_maruyama, euler_maruyama_with, truncation_inequality_check,
    CoarsenResult, FeedbackState, FineSample, SampledTrajectory, TruncationReport,
};
pub use discrete::{
    check_guard, discrete_cost, lq_discrete_reference, lq_reference, noise_table,
    optimize_discrete_value, simulate_discrete, CostEstimate, IterationRecord, OptConfig,
    OptimizationResult, TrajectoryBundle, TrajectoryEntry, BIN_PATH_GUARD,
};
pub use functional::TraceFunctional;
pub use ldp::{
    boue_dupuis_lhs, boue_dupuis_rhs, rate_function_candidate, LogLaplaceEstimate, RateEstimate,
};
pub use policy::{
    clip_policy, clip_tuple, clip_with_pullback, ClipPullback, DiscretePolicy, FeatureBasis,
    InfoStructure, PolicyNode,
};

/// `L(X, a) = L0(X, a) + c ||a||^2` with a terminal cost `g(X)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    /// `L0` over the joint `2d`-tuple `(X, a)`.
    pub running: TraceFunctional,
    pub quad_coef: f64,
    pub terminal: TraceFunctional,
    /// Lipschitz constant of `L0` in `L^1`, as declared.
    pub lip_const: f64,
    pub convexity_declared: bool,
    /// Growth constant `C1` with `-C1 + ||a||^2 / C1 <= L <= C1 (1 + ||X|| + ||a||^2)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
}

/// Outcome of a sampled inequality check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub trials: usize,
    pub violations: usize,
    /// Largest `lhs - rhs` seen; non-positive when every trial passes.
    pub worst_gap: f64,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    fn from_gaps(gaps: &[f64], tol: f64) -> Self {
        CheckReport {
            trials: gaps.len(),
            violations: gaps.iter().filter(|&&g| g > tol).count(),
            worst_gap: gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

impl CostSpec {
    /// `L = 1/2 ||a||^2`, `g = ||X||^2`.
    pub fn lq(d: usize) -> Result<Self> {
        let inner: Vec<String> = (1..=d).map(|l| format!("x{l}^2")).collect();
        Ok(CostSpec {
            running: TraceFunctional::Zero,
            quad_coef: 0.5,
            terminal: TraceFunctional::parse("u1", &[&inner.join(" + ")], d)?,
            lip_const: 0.0,
            convexity_declared: true,
            c1: Some(2.0),
        })
    }

    /// `L = 1/2 ||a||^2` with the given terminal cost.
    pub fn energy_with_terminal(terminal: TraceFunctional) -> Self {
        CostSpec {
            running: TraceFunctional::Zero,
            quad_coef: 0.5,
            terminal,
            lip_const: 0.0,
            convexity_declared: true,
            c1: None,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.quad_coef >= 0.0) || !self.quad_coef.is_finite() {
            return Err(Error::Precondition(format!(
                "quad_coef must be non-negative, got {}",
                self.quad_coef
            )));
        }
        if !(self.lip_const >= 0.0) {
            return Err(Error::Precondition("lip_const must be non-negative".into()));
        }
        let fits = |f: &TraceFunctional, letters: usize| match f {
            TraceFunctional::Zero => true,
            TraceFunctional::Cylindrical { .. } => f.d() <= letters,
            _ => f.d() == letters,
        };
        if !fits(&self.running, 2 * d) {
            return Err(Error::DimensionMismatch(format!(
                "running cost reads {} letters, expected 2d = {}",
                self.running.d(),
                2 * d
            )));
        }
        if !fits(&self.terminal, d) {
            return Err(Error::DimensionMismatch(format!(
                "terminal cost reads {} letters, expected d = {d}",
                self.terminal.d()
            )));
        }
        Ok(())
    }

    /// `L0(X, a)`, `grad_X L0` and `grad_a L0`.
    pub fn running_value_and_gradient(
        &self,
        x: &MatrixTuple,
        a: &MatrixTuple,
    ) -> Result<(f64, MatrixTuple, MatrixTuple)> {
        let joint = x.concat(a)?;
        let (v, g) = self.running.value_and_gradient(&joint)?;
        let mut comps = g.into_components();
        let ga = comps.split_off(x.d());
        Ok((v, MatrixTuple::new(comps)?, MatrixTuple::new(ga)?))
    }

    /// `L(X, a)`.
    pub fn lagrangian(&self, x: &MatrixTuple, a: &MatrixTuple) -> Result<f64> {
        let l0 = if self.running.is_zero() {
            0.0
        } else {
            self.running.value(&x.concat(a)?)?
        };
        let norm = l2_norm(a);
        Ok(l0 + self.quad_coef * norm * norm)
    }

    /// Midpoint convexity of `L` and `g` on `segments` random segments between
    /// GUE tuples of size `n`.
    pub fn check_convexity(
        &self,
        n: usize,
        d: usize,
        segments: usize,
        stream: &RngStream,
    ) -> Result<CheckReport> {
        let gaps = try_map_samples(stream, segments, |_, s| {
            let mut rng = s.rng();
            let (x1, a1) = (
                sample_gue_tuple_with(n, d, 1.0, &mut rng),
                sample_gue_tuple_with(n, d, 1.0, &mut rng),
            );
            let (x2, a2) = (
                sample_gue_tuple_with(n, d, 1.0, &mut rng),
                sample_gue_tuple_with(n, d, 1.0, &mut rng),
            );
            let xm = x1.add(&x2).scale(0.5);
            let am = a1.add(&a2).scale(0.5);
            let (l1, l2, lm) = (
                self.lagrangian(&x1, &a1)?,
                self.lagrangian(&x2, &a2)?,
                self.lagrangian(&xm, &am)?,
            );
            let (g1, g2, gm) = (
                self.terminal.value(&x1)?,
                self.terminal.value(&x2)?,
                self.terminal.value(&xm)?,
            );
            let scale = 1.0 + l1.abs() + l2.abs() + g1.abs() + g2.abs();
            Ok(((lm - 0.5 * (l1 + l2)).max(gm - 0.5 * (g1 + g2))) / scale)
        })?;
        Ok(CheckReport::from_gaps(&gaps, 1e-12))
    }

    /// Spot check of `|L0(X, a) - L0(Y, b)| <= kappa (||X - Y||_1 + ||a - b||_1)`
    /// on `pairs` random pairs.
    pub fn check_lipschitz(
        &self,
        n: usize,
        d: usize,
        pairs: usize,
        stream: &RngStream,
    ) -> Result<CheckReport> {
        let gaps = try_map_samples(stream, pairs, |_, s| {
            let mut rng = s.rng();
            let x = sample_gue_tuple_with(n, 2 * d, 1.0, &mut rng);
            let y = x.add(&sample_gue_tuple_with(n, 2 * d, 0.5, &mut rng));
            let lhs = (self.running.value(&x)? - self.running.value(&y)?).abs();
            Ok(lhs - self.lip_const * l1_norm(&x.sub(&y))?)
        })?;
        Ok(CheckReport::from_gaps(&gaps, 1e-12))
    }
}

/// `dX = a dt + beta_C 1 dW0 + beta_F dW_hat` on `[t0, T]` from `x0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlProblem {
    pub n: usize,
    pub d: usize,
    pub x0: MatrixTuple,
    pub beta_c: f64,
    pub beta_f: f64,
    pub t0: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub cost: CostSpec,
}

impl ControlProblem {
    pub fn new(
        x0: MatrixTuple,
        beta_c: f64,
        beta_f: f64,
        t0: f64,
        t_end: f64,
        cost: CostSpec,
    ) -> Result<Self> {
        let p = ControlProblem {
            n: x0.dim(),
            d: x0.d(),
            x0,
            beta_c,
            beta_f,
            t0,
            t_end,
            cost,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x0.dim() != self.n || self.x0.d() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "x0 is a {}-tuple of size {}, problem declares d = {}, n = {}",
                self.x0.d(),
                self.x0.dim(),
                self.d,
                self.n
            )));
        }
        if !(self.t_end > self.t0) || !self.t0.is_finite() || !self.t_end.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "need t0 < T, got [{}, {}]",
                self.t0, self.t_end
            )));
        }
        if !(self.beta_c >= 0.0 && self.beta_f >= 0.0) {
            return Err(Error::Precondition(
                "noise strengths must be non-negative".into(),
            ));
        }
        self.cost.validate(self.d)
    }

    pub fn horizon(&self) -> f64 {
        self.t_end - self.t0
    }

    /// The same problem at another matrix size, with `x0` rebuilt by `x0_at`.
    pub fn with_size(&self, n: usize, x0_at: impl Fn(usize, usize) -> MatrixTuple) -> Self {
        ControlProblem {
            n,
            x0: x0_at(n, self.d),
            ..self.clone()
        }
    }

    /// `(C1 + ||x0|| + (beta_C + beta_F) sqrt(T)) (T + 1)`, the value bound of
    /// the zero policy.
    pub fn zero_policy_bound(&self) -> Option<f64> {
        let c1 = self.cost.c1?;
        let t = self.horizon();
        Some((c1 + l2_norm(&self.x0) + (self.beta_c + self.beta_f) * t.sqrt()) * (t + 1.0))
    }

    /// `C1 (eps + 2 T C1 + V)`, the bound on the expected control energy of an
    /// `eps`-optimal policy with value `V`.
    pub fn a_priori_energy_bound(&self, eps: f64, value: f64) -> Option<f64> {
        let c1 = self.cost.c1?;
        Some(c1 * (eps + 2.0 * self.horizon() * c1 + value))
    }
}

#[cfg(test)]
mod tests;
