//! Fine-grid simulation, coarsening of fine controls onto bin paths, and the
//! operator-norm truncation inequality.

use serde::{Deserialize, Serialize};

use super::policy::{clip_tuple, DiscretePolicy, InfoStructure, PolicyNode};
use super::ControlProblem;
use crate::error::{Error, Result};
use crate::gaussdisc::{bin_count, bin_index, bin_slot, TimeGrid};
use crate::matrixcore::{l2_norm, MatrixTuple};
use crate::randmat::{brownian_increments, gue_increments, GuePath, RngStream};

/// What a feedback policy sees at grid time `t_k`.
pub struct FeedbackState<'a> {
    pub step: usize,
    pub t: f64,
    pub state: &'a MatrixTuple,
    /// `W0_t - W0_{t0}`.
    pub common: f64,
    /// `W_hat_t - W_hat_{t0}`.
    pub gue: &'a MatrixTuple,
}

/// One simulated path with its pathwise cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<MatrixTuple>,
    pub controls: Vec<MatrixTuple>,
    pub common_increments: Vec<f64>,
    pub gue_increments: Vec<MatrixTuple>,
    /// `sum_k (t_{k+1} - t_k) L(X_{k+1}, a_k)`.
    pub running_cost: f64,
    pub terminal_cost: f64,
}

impl SampledTrajectory {
    pub fn cost(&self) -> f64 {
        self.running_cost + self.terminal_cost
    }
}

/// Euler scheme on a uniform grid of `steps` steps with exact Gaussian and
/// GUE increments (common noise from child stream 0, GUE from child stream 1).
pub fn euler_maruyama<F>(
    problem: &ControlProblem,
    policy: F,
    steps: usize,
    stream: &RngStream,
) -> Result<SampledTrajectory>
where
    F: Fn(&FeedbackState) -> Result<MatrixTuple>,
{
    let times = TimeGrid::new(problem.t0, problem.t_end, steps)?.times();
    let common = brownian_increments(&times, &stream.split(0))?;
    let gue = gue_increments(problem.n, problem.d, &times, &stream.split(1))?;
    euler_maruyama_with(problem, policy, &common, &gue)
}

/// Euler scheme driven by given increments on the GUE path's grid:
/// `X_{k+1} = X_k + a_k dt_k + beta_C dW0_k 1 + beta_F dW_hat_k`, `a_k` read at `t_k`.
pub fn euler_maruyama_with<F>(
    problem: &ControlProblem,
    policy: F,
    common_increments: &[f64],
    gue: &GuePath,
) -> Result<SampledTrajectory>
where
    F: Fn(&FeedbackState) -> Result<MatrixTuple>,
{
    problem.validate()?;
    let steps = gue.steps();
    if common_increments.len() != steps || gue.n != problem.n || gue.d != problem.d {
        return Err(Error::DimensionMismatch(
            "increments do not match the problem".into(),
        ));
    }
    let times = gue.time_grid.clone();
    let mut x = problem.x0.clone();
    let mut states = vec![x.clone()];
    let mut controls = Vec::with_capacity(steps);
    let mut w0 = 0.0;
    let mut w_hat = MatrixTuple::zeros(problem.n, problem.d);
    let mut running_cost = 0.0;
    for k in 0..steps {
        let dt = times[k + 1] - times[k];
        let a = policy(&FeedbackState {
            step: k,
            t: times[k],
            state: &x,
            common: w0,
            gue: &w_hat,
        })?;
        if a.d() != problem.d || a.dim() != problem.n {
            return Err(Error::DimensionMismatch(
                "feedback returned a tuple of the wrong shape".into(),
            ));
        }
        x.axpy(dt, &a);
        x.shift_identity(problem.beta_c * common_increments[k]);
        x.axpy(problem.beta_f, &gue.increments[k]);
        w0 += common_increments[k];
        w_hat.axpy(1.0, &gue.increments[k]);
        running_cost += dt * problem.cost.lagrangian(&x, &a)?;
        states.push(x.clone());
        controls.push(a);
    }
    let terminal_cost = problem.cost.terminal.value(&x)?;
    Ok(SampledTrajectory {
        times,
        states,
        controls,
        common_increments: common_increments.to_vec(),
        gue_increments: gue.increments.clone(),
        running_cost,
        terminal_cost,
    })
}

/// A fine-grid control path with the common-noise increments it was driven by.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FineSample {
    pub common_increments: Vec<f64>,
    pub controls: Vec<MatrixTuple>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoarsenResult {
    pub policy: DiscretePolicy,
    /// Cells `(i, J)` that no sample reached; they hold the step's global mean.
    pub empty_cells: usize,
    pub cells: usize,
}

/// Constant-node policy whose node `(i, J)` is the mean over samples in
/// `O_{i,J}` of the control averaged over `(t_{i-1}, t_i]`. Every fine path
/// must have a multiple of `K` steps; the result branches `2N + 2` ways.
pub fn coarsen_control(
    fine_samples: &[FineSample],
    grid: &TimeGrid,
    n_bins: usize,
    r: f64,
) -> Result<CoarsenResult> {
    let first = fine_samples
        .first()
        .ok_or_else(|| Error::Precondition("no fine samples".into()))?;
    let k = grid.k;
    let fine_steps = first.controls.len();
    if fine_steps == 0 || fine_steps % k != 0 {
        return Err(Error::InvalidGrid(format!(
            "{fine_steps} fine steps do not refine K = {k}"
        )));
    }
    let m = fine_steps / k;
    let (n, d) = (first.controls[0].dim(), first.controls[0].d());
    let b = bin_count(n_bins);
    let mut sums: Vec<Vec<Option<(MatrixTuple, usize)>>> = (1..=k)
        .map(|i| vec![None; DiscretePolicy::layer_len(b, InfoStructure::Anticipating, i)])
        .collect();
    let mut globals = vec![(MatrixTuple::zeros(n, d), 0usize); k];
    for s in fine_samples {
        if s.controls.len() != fine_steps || s.common_increments.len() != fine_steps {
            return Err(Error::DimensionMismatch(
                "fine samples differ in length".into(),
            ));
        }
        let mut key = 0;
        for i in 1..=k {
            let range = (i - 1) * m..i * m;
            let dw: f64 = s.common_increments[range.clone()].iter().sum();
            key = key * b + bin_slot(n_bins, bin_index(n_bins, dw))?;
            let mut avg = MatrixTuple::zeros(n, d);
            for a in &s.controls[range] {
                avg.axpy(1.0 / m as f64, a);
            }
            globals[i - 1].0.axpy(1.0, &avg);
            globals[i - 1].1 += 1;
            match &mut sums[i - 1][key] {
                Some((acc, c)) => {
                    acc.axpy(1.0, &avg);
                    *c += 1;
                }
                slot => *slot = Some((avg, 1)),
            }
        }
    }
    let mut empty_cells = 0;
    let mut cells = 0;
    let mut policy = DiscretePolicy::constant(
        k,
        n_bins,
        b,
        r,
        &MatrixTuple::zeros(n, d),
        InfoStructure::Anticipating,
    );
    for (i, layer) in sums.into_iter().enumerate() {
        let global = globals[i].0.scale(1.0 / globals[i].1 as f64);
        for (key, cell) in layer.into_iter().enumerate() {
            cells += 1;
            let value = match cell {
                Some((acc, c)) => acc.scale(1.0 / c as f64),
                None => {
                    empty_cells += 1;
                    global.clone()
                }
            };
            policy.nodes[i][key] = PolicyNode::Constant { value };
        }
    }
    Ok(CoarsenResult {
        policy,
        empty_cells,
        cells,
    })
}

/// Both sides of the truncation inequality on one path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    /// Running cost with `phi_R(a)`.
    pub lhs: f64,
    /// Running cost with `a`.
    pub rhs: f64,
    /// `(1 + T) kappa / R * sum_i delta ||a_i||^2`.
    pub penalty: f64,
    pub holds: bool,
}

/// `sum_i delta L(Y_i + A~_i, phi_R(a_i)) <= sum_i delta L(Y_i + A_i, a_i) + penalty`
/// for piecewise-constant `a` on a uniform grid, with `A_i = delta sum_{i' <= i} a_{i'}`,
/// `A~_i` the same for `phi_R(a)` and `Y_i` the path at the right endpoints.
pub fn truncation_inequality_check(
    problem: &ControlProblem,
    y_path: &[MatrixTuple],
    control_path: &[MatrixTuple],
    r: f64,
) -> Result<TruncationReport> {
    problem.validate()?;
    if y_path.len() != control_path.len() || control_path.is_empty() {
        return Err(Error::DimensionMismatch(
            "Y and the control need the same positive number of steps".into(),
        ));
    }
    if !(r > 0.0) {
        return Err(Error::Precondition(format!("R must be positive, got {r}")));
    }
    let delta = problem.horizon() / control_path.len() as f64;
    let (n, d) = (problem.n, problem.d);
    let mut a_sum = MatrixTuple::zeros(n, d);
    let mut c_sum = MatrixTuple::zeros(n, d);
    let (mut lhs, mut rhs, mut energy) = (0.0, 0.0, 0.0);
    for (y, a) in y_path.iter().zip(control_path) {
        let (clipped, _) = clip_tuple(a, r)?;
        a_sum.axpy(delta, a);
        c_sum.axpy(delta, &clipped);
        rhs += delta * problem.cost.lagrangian(&y.add(&a_sum), a)?;
        lhs += delta * problem.cost.lagrangian(&y.add(&c_sum), &clipped)?;
        energy += delta * l2_norm(a).powi(2);
    }
    let penalty = (1.0 + problem.horizon()) * problem.cost.lip_const / r * energy;
    let slack = 1e-12 * (1.0 + lhs.abs() + rhs.abs());
    Ok(TruncationReport {
        lhs,
        rhs,
        penalty,
        holds: lhs <= rhs + penalty + slack,
    })
}
