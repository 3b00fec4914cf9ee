//! Optimized discrete values, single-grid (`value`) and across `(K, N)` (`sweep`).

use freelab_core::control::{
    check_guard, lq_discrete_reference, lq_reference, optimize_discrete_value, ControlProblem,
    CostSpec, OptConfig, OptimizationResult,
};
use freelab_core::gaussdisc::bin_count;
use freelab_core::matrixcore::MatrixTuple;
use freelab_core::randmat::{sample_gue_tuple_with, RngStream};
use freelab_core::Error;
use serde::{Deserialize, Serialize};

use super::{Experiment, Outcome};
use crate::config::{nonempty_sizes, positive};
use crate::error::{Context, HarnessError, Result};
use crate::table::{Check, Table};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    #[default]
    Zero,
    /// `scale` times the identity in every component.
    Identity { scale: f64 },
    /// A GUE tuple of the given scale, drawn once per `n`.
    Gue { scale: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostTemplate {
    /// `L = 1/2 ||a||^2`, `g = sum_l tr_n(x_l^2)`.
    Lq,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CostConfig {
    Template(CostTemplate),
    Spec(CostSpec),
}

/// A control problem without its matrix size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "one")]
    pub d: usize,
    #[serde(default)]
    pub x0: InitialState,
    pub beta_c: f64,
    pub beta_f: f64,
    #[serde(default)]
    pub t0: f64,
    #[serde(rename = "T", default = "one_f")]
    pub t_end: f64,
    pub cost: CostConfig,
}

fn one() -> usize {
    1
}

fn one_f() -> f64 {
    1.0
}

impl ProblemConfig {
    pub fn cost(&self) -> freelab_core::Result<CostSpec> {
        match &self.cost {
            CostConfig::Template(CostTemplate::Lq) => CostSpec::lq(self.d),
            CostConfig::Spec(c) => Ok(c.clone()),
        }
    }

    /// The problem at size `n`; a random `x0` is drawn from `stream`.
    pub fn build(&self, n: usize, stream: &RngStream) -> freelab_core::Result<ControlProblem> {
        let x0 = match self.x0 {
            InitialState::Zero => MatrixTuple::zeros(n, self.d),
            InitialState::Identity { scale } => MatrixTuple::identities(n, self.d).scale(scale),
            InitialState::Gue { scale } => {
                sample_gue_tuple_with(n, self.d, scale, &mut stream.rng())
            }
        };
        ControlProblem::new(
            x0,
            self.beta_c,
            self.beta_f,
            self.t0,
            self.t_end,
            self.cost()?,
        )
    }

    fn validate(&self) -> Result<()> {
        positive("d", self.d)?;
        self.build(1, &RngStream::new(0))
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }

    fn branching(&self, n_bins: usize) -> usize {
        if self.beta_c == 0.0 {
            1
        } else {
            bin_count(n_bins)
        }
    }
}

fn validate_grid(
    problem: &ProblemConfig,
    k: usize,
    n_bins: usize,
    r: f64,
    opt: &OptConfig,
) -> Result<()> {
    positive("K", k)?;
    positive("N", n_bins)?;
    if !(r > 0.0) {
        return Err(HarnessError::Config(format!("R must be positive, got {r}")));
    }
    check_guard(problem.branching(n_bins), k)
        .map_err(|e| HarnessError::Config(format!("(K, N) = ({k}, {n_bins}): {e}")))?;
    if let Some(f) = opt.coupling_steps {
        if f == 0 || f % k != 0 {
            return Err(HarnessError::Config(format!(
                "coupling_steps = {f} is not a multiple of K = {k}"
            )));
        }
    }
    Ok(())
}

fn validate_optimizer(problem: &ProblemConfig, opt: &OptConfig) -> Result<()> {
    positive("optimizer.batch", opt.batch)?;
    positive("optimizer.validation", opt.validation)?;
    if !problem
        .cost()
        .map_err(|e| HarnessError::Config(e.to_string()))?
        .convexity_declared
    {
        return Err(HarnessError::Config(
            "the optimizer requires convexity_declared".into(),
        ));
    }
    Ok(())
}

/// Child 0 drives the optimizer, child 1 draws `x0`.
fn solve(
    problem: &ProblemConfig,
    n: usize,
    k: usize,
    n_bins: usize,
    r: f64,
    opt: &OptConfig,
    stream: &RngStream,
    context: &str,
) -> Result<(ControlProblem, OptimizationResult)> {
    let p = problem.build(n, &stream.split(1)).ctx(context)?;
    let res = optimize_discrete_value(&p, k, n_bins, r, opt, &stream.split(0))
        .ctx(&format!("{context} (n = {n}, K = {k}, N = {n_bins})"))?;
    Ok((p, res))
}

/// The continuous Riccati value, or `None` outside the LQ template.
fn reference(p: &ControlProblem, context: &str) -> Result<Option<f64>> {
    match lq_reference(p) {
        Ok(v) => Ok(Some(v)),
        Err(Error::TemplateMismatch(_)) => Ok(None),
        Err(e) => Err(HarnessError::core(context, e)),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueChecks {
    /// Sizes compared with the continuous reference; all sizes when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_n: Option<usize>,
    #[serde(default = "five_percent")]
    pub reference_rel_tol: f64,
    /// Smallest and largest `n` agree within this fraction plus three standard errors.
    #[serde(default = "two_percent")]
    pub consistency_rel_tol: f64,
    /// Agreement with the exact discrete optimum, plus three standard errors.
    #[serde(default = "two_percent")]
    pub discrete_rel_tol: f64,
}

impl Default for ValueChecks {
    fn default() -> Self {
        ValueChecks {
            reference_n: None,
            reference_rel_tol: 0.05,
            consistency_rel_tol: 0.02,
            discrete_rel_tol: 0.02,
        }
    }
}

fn five_percent() -> f64 {
    0.05
}

fn two_percent() -> f64 {
    0.02
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueParams {
    pub n: Vec<usize>,
    pub problem: ProblemConfig,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n_bins: usize,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(default)]
    pub optimizer: OptConfig,
    #[serde(default)]
    pub checks: ValueChecks,
}

impl Experiment for ValueParams {
    fn validate(&self) -> Result<()> {
        nonempty_sizes(&self.n)?;
        self.problem.validate()?;
        validate_optimizer(&self.problem, &self.optimizer)?;
        validate_grid(&self.problem, self.k, self.n_bins, self.r, &self.optimizer)
    }

    fn run(&self, context: &str, stream: &RngStream) -> Result<Outcome> {
        let info = self.optimizer.basis.info;
        let mut table = Table::new(
            "",
            &[
                "n",
                "K",
                "N",
                "R",
                "info",
                "value",
                "std_error",
                "control_energy",
                "zero_policy_value",
                "used_zero_policy",
                "converged",
                "iterations",
                "reference",
                "discrete_reference",
            ],
        );
        let mut log = Table::new(
            "iterations",
            &["n", "iter", "batch_cost", "step_size", "max_grad_norm"],
        );
        let mut checks = Vec::new();
        let mut results = Vec::with_capacity(self.n.len());
        for (j, &n) in self.n.iter().enumerate() {
            let (p, res) = solve(
                &self.problem,
                n,
                self.k,
                self.n_bins,
                self.r,
                &self.optimizer,
                &stream.split(j as u64),
                context,
            )?;
            let cont = reference(&p, context)?;
            let disc = match cont {
                Some(_) => Some(lq_discrete_reference(&p, self.k, self.n_bins, info).ctx(context)?),
                None => None,
            };
            table.push(vec![
                n.into(),
                self.k.into(),
                self.n_bins.into(),
                self.r.into(),
                serde_json::to_value(info)
                    .expect("enum")
                    .as_str()
                    .unwrap_or_default()
                    .into(),
                res.value.into(),
                res.std_error.into(),
                res.control_energy.into(),
                res.zero_policy_value.into(),
                res.used_zero_policy.into(),
                res.converged.into(),
                res.iterations.into(),
                cont.into(),
                disc.into(),
            ]);
            for rec in &res.log {
                log.push(vec![
                    n.into(),
                    rec.iter.into(),
                    rec.batch_cost.into(),
                    rec.step_size.into(),
                    rec.max_grad_norm.into(),
                ]);
            }
            if let Some(c) = cont {
                if self.checks.reference_n.is_none_or(|m| m == n) {
                    checks.push(Check::rel(
                        format!("reference_n{n}"),
                        res.value,
                        c,
                        self.checks.reference_rel_tol,
                    ));
                }
            }
            if let Some(dv) = disc {
                let tol = self.checks.discrete_rel_tol * dv.abs() + 3.0 * res.std_error;
                checks.push(Check::new(
                    format!("discrete_reference_n{n}"),
                    res.value,
                    format!("{dv:.6}"),
                    format!(
                        "{}% rel + 3 se = {tol:.3e}",
                        self.checks.discrete_rel_tol * 100.0
                    ),
                    (res.value - dv).abs() <= tol,
                ));
            }
            results.push((n, res));
        }
        if results.len() >= 2 {
            let lo = results.iter().min_by_key(|(n, _)| *n).expect("non-empty");
            let hi = results.iter().max_by_key(|(n, _)| *n).expect("non-empty");
            let gap = (hi.1.value - lo.1.value).abs();
            let tol = self.checks.consistency_rel_tol * 0.5 * (hi.1.value + lo.1.value).abs()
                + 3.0 * lo.1.std_error.hypot(hi.1.std_error);
            checks.push(Check::new(
                format!("consistency_n{}_n{}", lo.0, hi.0),
                gap,
                "0",
                format!(
                    "{}% rel + 3 se = {tol:.3e}",
                    self.checks.consistency_rel_tol * 100.0
                ),
                gap <= tol,
            ));
        }
        Ok(Outcome {
            tables: vec![table, log],
            checks,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    pub n: Vec<usize>,
    pub problem: ProblemConfig,
    /// `(K, N)` pairs in order of refinement.
    pub grid: Vec<(usize, usize)>,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(default)]
    pub optimizer: OptConfig,
}

impl Experiment for SweepParams {
    fn validate(&self) -> Result<()> {
        nonempty_sizes(&self.n)?;
        self.problem.validate()?;
        validate_optimizer(&self.problem, &self.optimizer)?;
        if self.grid.is_empty() {
            return Err(HarnessError::Config("the (K, N) grid is empty".into()));
        }
        for &(k, n_bins) in &self.grid {
            validate_grid(&self.problem, k, n_bins, self.r, &self.optimizer)?;
        }
        Ok(())
    }

    /// Stream child `(g, j)` serves grid point `g` at size index `j`.
    fn run(&self, context: &str, stream: &RngStream) -> Result<Outcome> {
        let mut table = Table::new("", &["K", "N", "R", "n", "value", "stderr"]);
        let mut values = vec![vec![(0.0, 0.0); self.n.len()]; self.grid.len()];
        for (g, &(k, n_bins)) in self.grid.iter().enumerate() {
            for (j, &n) in self.n.iter().enumerate() {
                let s = stream.split_path(&[g as u64, j as u64]);
                let (_, res) = solve(
                    &self.problem,
                    n,
                    k,
                    n_bins,
                    self.r,
                    &self.optimizer,
                    &s,
                    context,
                )?;
                table.push(vec![
                    k.into(),
                    n_bins.into(),
                    self.r.into(),
                    n.into(),
                    res.value.into(),
                    res.std_error.into(),
                ]);
                values[g][j] = (res.value, res.std_error);
            }
        }
        let mut checks = Vec::new();
        if self.grid.len() >= 3 {
            for (j, &n) in self.n.iter().enumerate() {
                let diffs: Vec<f64> = values
                    .windows(2)
                    .map(|w| (w[1][j].0 - w[0][j].0).abs())
                    .collect();
                let worst = diffs.windows(2).map(|w| w[1] / w[0]).fold(0.0f64, f64::max);
                let pass = diffs.windows(2).all(|w| w[1] < w[0]);
                checks.push(Check::new(
                    format!("monotone_decay_n{n}"),
                    worst,
                    "< 1",
                    "0",
                    pass,
                ));
            }
        }
        if self.n.len() >= 3 {
            let mut order: Vec<usize> = (0..self.n.len()).collect();
            order.sort_by_key(|&j| self.n[j]);
            let (a, b, c) = (
                order[order.len() - 3],
                order[order.len() - 2],
                order[order.len() - 1],
            );
            for (g, &(k, n_bins)) in self.grid.iter().enumerate() {
                let v = &values[g];
                let fine = (v[c].0 - v[b].0).abs();
                let coarse = (v[b].0 - v[a].0).abs();
                let margin = 3.0 * v[c].1.hypot(v[b].1);
                checks.push(Check::new(
                    format!("n_convergence_K{k}_N{n_bins}"),
                    fine,
                    format!("<= {coarse:.6}"),
                    format!("3 se = {margin:.3e}"),
                    fine <= coarse + margin,
                ));
            }
        }
        Ok(Outcome {
            tables: vec![table],
            checks,
        })
    }
}
