//! Discrete dynamics over bin paths, their cost, the sample-average
//! optimizer and the linear-quadratic oracles.
//!
//! For a GUE sample the common-noise expectation is exact: the bin tree is
//! walked depth first, and the same walk carries the adjoint state back up so
//! that the cost gradient in every node parameter comes out of one pass.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::policy::{ClipPullback, DiscretePolicy, FeatureBasis, InfoStructure, PolicyNode};
use super::{ControlProblem, TraceFunctional};
use crate::error::{Error, Result};
use crate::gaussdisc::{slot_bin, NoiseTable, TimeGrid};
use crate::matrixcore::{l2_norm, HermitianMatrix, MatrixTuple};
use crate::ncpoly::NCPolynomial;
use crate::randmat::{gue_increments, GuePath, RngStream};

/// Upper bound on the number of full bin paths `B^K`.
pub const BIN_PATH_GUARD: u128 = 1_000_000;

/// Samples per ordered reduction block; fixed so results do not depend on
/// the number of worker threads.
const CHUNK: usize = 8;

/// Per-step bin table; without common noise the tree collapses to one branch.
pub fn noise_table(problem: &ControlProblem, delta: f64, n_bins: usize) -> Result<NoiseTable> {
    if problem.beta_c == 0.0 {
        Ok(NoiseTable::degenerate(delta))
    } else {
        NoiseTable::new(n_bins, delta)
    }
}

/// Rejects bin trees with more than [`BIN_PATH_GUARD`] leaves.
pub fn check_guard(branching: usize, k: usize) -> Result<()> {
    let count = (branching as u128)
        .checked_pow(k as u32)
        .unwrap_or(u128::MAX);
    if count > BIN_PATH_GUARD {
        return Err(Error::GuardExceeded {
            count,
            limit: BIN_PATH_GUARD,
        });
    }
    Ok(())
}

/// Monte Carlo estimate over GUE samples of an exact bin-path expectation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// `sum_i sum_J P(O_{i,J}) ||a_{i,J}||^2 delta`, averaged the same way.
    pub control_energy: f64,
    pub samples: usize,
}

impl CostEstimate {
    fn from_samples(costs: &[f64], energies: &[f64]) -> Self {
        let m = costs.len() as f64;
        let mean = costs.iter().sum::<f64>() / m;
        let var = if costs.len() > 1 {
            costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        CostEstimate {
            mean,
            std_error: (var / m).sqrt(),
            control_energy: energies.iter().sum::<f64>() / m,
            samples: costs.len(),
        }
    }
}

/// GUE increments and the policy inputs derived from them.
struct Sample {
    increments: Vec<MatrixTuple>,
    features: Vec<Vec<HermitianMatrix>>,
    gates: Vec<bool>,
}

/// Offsets of the polynomial coefficients in the flat parameter vector.
struct Layout {
    offsets: Vec<usize>,
    widths: Vec<usize>,
    total: usize,
}

impl Layout {
    fn new(policy: &DiscretePolicy) -> Self {
        let mut offsets = Vec::with_capacity(policy.k);
        let mut widths = Vec::with_capacity(policy.k);
        let mut total = 0;
        for i in 1..=policy.k {
            let w = policy.d * policy.basis.len(policy.d, i);
            offsets.push(total);
            widths.push(w);
            total += w * policy.nodes[i - 1].len();
        }
        Layout {
            offsets,
            widths,
            total,
        }
    }
}

fn params(policy: &DiscretePolicy) -> Vec<f64> {
    let mut out = Vec::new();
    for layer in &policy.nodes {
        for node in layer {
            if let PolicyNode::Polynomial { coeffs } = node {
                out.extend(coeffs.iter().flatten());
            }
        }
    }
    out
}

fn set_params(policy: &mut DiscretePolicy, theta: &[f64]) {
    let mut k = 0;
    for layer in &mut policy.nodes {
        for node in layer.iter_mut() {
            if let PolicyNode::Polynomial { coeffs } = node {
                for v in coeffs.iter_mut().flatten() {
                    *v = theta[k];
                    k += 1;
                }
            }
        }
    }
}

#[derive(Default)]
struct PassOut {
    cost: f64,
    energy: f64,
}

struct Engine<'a> {
    problem: &'a ControlProblem,
    policy: &'a DiscretePolicy,
    table: NoiseTable,
    grid: TimeGrid,
    coupling: Option<usize>,
    layout: Layout,
}

impl<'a> Engine<'a> {
    fn new(
        problem: &'a ControlProblem,
        policy: &'a DiscretePolicy,
        coupling: Option<usize>,
    ) -> Result<Self> {
        problem.validate()?;
        policy.validate()?;
        let grid = TimeGrid::new(problem.t0, problem.t_end, policy.k)?;
        let table = noise_table(problem, grid.delta(), policy.n_bins)?;
        if table.len() != policy.branching {
            return Err(Error::DimensionMismatch(format!(
                "policy branches {} ways, the noise table has {} bins",
                policy.branching,
                table.len()
            )));
        }
        if policy.d != problem.d {
            return Err(Error::DimensionMismatch(format!(
                "policy d = {} vs problem d = {}",
                policy.d, problem.d
            )));
        }
        check_guard(table.len(), policy.k)?;
        if let Some(f) = coupling {
            if f == 0 || f % policy.k != 0 {
                return Err(Error::InvalidGrid(format!(
                    "coupling grid of {f} steps does not refine K = {}",
                    policy.k
                )));
            }
        }
        Ok(Engine {
            problem,
            policy,
            table,
            grid,
            coupling,
            layout: Layout::new(policy),
        })
    }

    fn delta(&self) -> f64 {
        self.grid.delta()
    }

    /// GUE increments on the policy grid, optionally aggregated from a finer
    /// grid so that different `K` share the same Brownian path.
    fn draw(&self, stream: &RngStream) -> Result<Sample> {
        let p = self.problem;
        let k = self.policy.k;
        let increments = match self.coupling {
            None => gue_increments(p.n, p.d, &self.grid.times(), stream)?.increments,
            Some(f) => {
                let fine =
                    gue_increments(p.n, p.d, &TimeGrid::new(p.t0, p.t_end, f)?.times(), stream)?;
                fine.increments
                    .chunks(f / k)
                    .map(|c| {
                        let mut acc = c[0].clone();
                        for inc in &c[1..] {
                            acc.axpy(1.0, inc);
                        }
                        acc
                    })
                    .collect()
            }
        };
        self.prepare(increments)
    }

    fn prepare(&self, increments: Vec<MatrixTuple>) -> Result<Sample> {
        let pol = self.policy;
        let mut features = Vec::with_capacity(pol.k);
        let mut gates = Vec::with_capacity(pol.k);
        for i in 1..=pol.k {
            features.push(pol.basis.features(
                &self.problem.x0,
                &increments,
                self.problem.beta_f,
                i,
            ));
            gates.push(pol.gate_open(&increments[..pol.info().visible(i)])?);
        }
        Ok(Sample {
            increments,
            features,
            gates,
        })
    }

    fn pass(&self, s: &Sample, grad: Option<&mut [f64]>) -> Result<PassOut> {
        let mut out = PassOut::default();
        self.visit(s, 1, &self.problem.x0, 1.0, 0, grad, &mut out)?;
        Ok(out)
    }

    fn accumulate(
        &self,
        s: &Sample,
        i: usize,
        key: usize,
        g_alpha: &MatrixTuple,
        clip: &ClipPullback,
        grad: &mut [f64],
    ) {
        if !s.gates[i - 1] || !matches!(self.policy.node(i, key), PolicyNode::Polynomial { .. }) {
            return;
        }
        let pulled;
        let g_alpha = if clip.is_identity() {
            g_alpha
        } else {
            pulled = clip.pull(g_alpha);
            &pulled
        };
        let feats = &s.features[i - 1];
        let m = feats.len();
        let off = self.layout.offsets[i - 1] + key * self.layout.widths[i - 1];
        for (l, g) in g_alpha.components().iter().enumerate() {
            for (f, feat) in feats.iter().enumerate() {
                grad[off + l * m + f] += g.inner(feat);
            }
        }
    }

    /// Visits the children of a node at depth `i - 1`; returns the adjoint of
    /// `X_{i-1}` when a gradient is requested.
    #[allow(clippy::too_many_arguments)]
    fn visit(
        &self,
        s: &Sample,
        i: usize,
        x_prev: &MatrixTuple,
        p_prev: f64,
        key_prev: usize,
        mut grad: Option<&mut [f64]>,
        out: &mut PassOut,
    ) -> Result<Option<MatrixTuple>> {
        let pb = self.problem;
        let pol = self.policy;
        let cost = &pb.cost;
        let delta = self.delta();
        let want = grad.is_some();
        let (n, d) = (pb.n, pb.d);
        let predictable = pol.info() == InfoStructure::Predictable;
        let feats = &s.features[i - 1];
        let shared = if predictable {
            Some(pol.control_with_pullback(i, key_prev, feats, s.gates[i - 1])?)
        } else {
            None
        };
        let mut g_prev = want.then(|| MatrixTuple::zeros(n, d));
        let mut g_shared = (want && predictable).then(|| MatrixTuple::zeros(n, d));
        for slot in 0..self.table.len() {
            let p = p_prev * self.table.probs[slot];
            if p == 0.0 {
                continue;
            }
            let key = key_prev * self.table.len() + slot;
            let owned;
            let (alpha, clip) = match &shared {
                Some((a, c)) => (a, c),
                None => {
                    owned = pol.control_with_pullback(i, key, feats, s.gates[i - 1])?;
                    (&owned.0, &owned.1)
                }
            };
            let mut x = x_prev.clone();
            x.axpy(delta, alpha);
            x.shift_identity(pb.beta_c * self.table.omegas[slot]);
            x.axpy(pb.beta_f, &s.increments[i - 1]);

            let a2 = l2_norm(alpha).powi(2);
            out.energy += p * delta * a2;
            out.cost += p * delta * cost.quad_coef * a2;
            let mut g_x = want.then(|| MatrixTuple::zeros(n, d));
            let mut g_alpha = want.then(|| alpha.scale(2.0 * cost.quad_coef * p * delta));
            if !cost.running.is_zero() {
                if want {
                    let (l0, gx, ga) = cost.running_value_and_gradient(&x, alpha)?;
                    out.cost += p * delta * l0;
                    g_x.as_mut().expect("requested").axpy(p * delta, &gx);
                    g_alpha.as_mut().expect("requested").axpy(p * delta, &ga);
                } else {
                    out.cost += p * delta * cost.running.value(&x.concat(alpha)?)?;
                }
            }
            if i == pol.k {
                if want {
                    let (v, g) = cost.terminal.value_and_gradient(&x)?;
                    out.cost += p * v;
                    g_x.as_mut().expect("requested").axpy(p, &g);
                } else {
                    out.cost += p * cost.terminal.value(&x)?;
                }
            } else if let Some(child) =
                self.visit(s, i + 1, &x, p, key, grad.as_deref_mut(), out)?
            {
                g_x.as_mut().expect("requested").axpy(1.0, &child);
            }
            if let (Some(gx), Some(ga)) = (g_x, g_alpha.as_mut()) {
                ga.axpy(delta, &gx);
                g_prev.as_mut().expect("requested").axpy(1.0, &gx);
                match g_shared.as_mut() {
                    Some(acc) => acc.axpy(1.0, ga),
                    None => self.accumulate(
                        s,
                        i,
                        key,
                        ga,
                        clip,
                        grad.as_deref_mut().expect("requested"),
                    ),
                }
            }
        }
        if let (Some(acc), Some((_, clip))) = (g_shared, &shared) {
            self.accumulate(s, i, key_prev, &acc, clip, grad.expect("requested"));
        }
        Ok(g_prev)
    }

    /// Mean cost over prepared samples with the mean gradient.
    fn batch(&self, samples: &[Sample]) -> Result<(CostEstimate, Vec<f64>)> {
        let total = self.layout.total;
        let parts: Vec<Result<(Vec<f64>, Vec<f64>, Vec<f64>)>> = samples
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut grad = vec![0.0; total];
                let mut costs = Vec::with_capacity(chunk.len());
                let mut energies = Vec::with_capacity(chunk.len());
                for s in chunk {
                    let o = self.pass(s, Some(&mut grad))?;
                    costs.push(o.cost);
                    energies.push(o.energy);
                }
                Ok((costs, energies, grad))
            })
            .collect();
        let mut grad = vec![0.0; total];
        let mut costs = Vec::with_capacity(samples.len());
        let mut energies = Vec::with_capacity(samples.len());
        for part in parts {
            let (c, e, g) = part?;
            costs.extend(c);
            energies.extend(e);
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        let m = samples.len() as f64;
        grad.iter_mut().for_each(|g| *g /= m);
        Ok((CostEstimate::from_samples(&costs, &energies), grad))
    }

    /// Cost on `count` fresh samples drawn from child streams of `stream`.
    fn estimate(&self, count: usize, stream: &RngStream) -> Result<CostEstimate> {
        let chunks = count.div_ceil(CHUNK);
        let parts: Vec<Result<Vec<(f64, f64)>>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                (c * CHUNK..((c + 1) * CHUNK).min(count))
                    .map(|idx| {
                        let o = self.pass(&self.draw(&stream.split(idx as u64))?, None)?;
                        Ok((o.cost, o.energy))
                    })
                    .collect()
            })
            .collect();
        let mut costs = Vec::with_capacity(count);
        let mut energies = Vec::with_capacity(count);
        for part in parts {
            for (c, e) in part? {
                costs.push(c);
                energies.push(e);
            }
        }
        Ok(CostEstimate::from_samples(&costs, &energies))
    }
}

/// `sum_i sum_J P(O_{i,J}) E[L(X_{i,J}, a_{i,J})] delta + sum_J P(O_{K,J}) E[g(X_{K,J})]`
/// with the GUE expectation over `mc_samples` samples.
pub fn discrete_cost(
    problem: &ControlProblem,
    policy: &DiscretePolicy,
    mc_samples: usize,
    stream: &RngStream,
) -> Result<CostEstimate> {
    if mc_samples == 0 {
        return Err(Error::Precondition("mc_samples must be at least 1".into()));
    }
    Engine::new(problem, policy, None)?.estimate(mc_samples, stream)
}

/// States along one full bin path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEntry {
    /// Bin index per step (`-1` for every step without common noise).
    pub bins: Vec<i64>,
    pub probability: f64,
    /// `X_{0}, X_{1,J}, ..., X_{K,J}`.
    pub states: Vec<MatrixTuple>,
    /// `a_{1,J}, ..., a_{K,J}`.
    pub controls: Vec<MatrixTuple>,
}

/// All bin paths for one GUE path, in lexicographic slot order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryBundle {
    pub entries: Vec<TrajectoryEntry>,
}

/// `X_{i,J} = x0 + sum_{i' <= i} a_{i',J} delta + beta_C 1 W0_{i,J} + beta_F (W_hat_{t_i} - W_hat_{t_0})`
/// for every full bin path.
pub fn simulate_discrete(
    problem: &ControlProblem,
    policy: &DiscretePolicy,
    gue_path: &GuePath,
) -> Result<TrajectoryBundle> {
    let engine = Engine::new(problem, policy, None)?;
    if gue_path.steps() != policy.k || gue_path.n != problem.n || gue_path.d != problem.d {
        return Err(Error::DimensionMismatch(format!(
            "GUE path with {} steps of {} x {} tuples for K = {}, n = {}, d = {}",
            gue_path.steps(),
            gue_path.d,
            gue_path.n,
            policy.k,
            problem.n,
            problem.d
        )));
    }
    let grid_times = engine.grid.times();
    if gue_path
        .time_grid
        .iter()
        .zip(&grid_times)
        .any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(Error::InvalidGrid(
            "GUE path is not on the policy grid".into(),
        ));
    }
    let s = engine.prepare(gue_path.increments.clone())?;
    let b = engine.table.len();
    let k = policy.k;
    let delta = engine.delta();
    let mut entries = Vec::with_capacity(b.pow(k as u32));
    for code in 0..b.pow(k as u32) {
        let slots: Vec<usize> = (0..k)
            .map(|i| code / b.pow((k - 1 - i) as u32) % b)
            .collect();
        let mut x = problem.x0.clone();
        let mut states = vec![x.clone()];
        let mut controls = Vec::with_capacity(k);
        let mut probability = 1.0;
        for i in 1..=k {
            let slot = slots[i - 1];
            let a = policy.control(i, policy.key(i, &slots), &s.features[i - 1], s.gates[i - 1])?;
            x.axpy(delta, &a);
            x.shift_identity(problem.beta_c * engine.table.omegas[slot]);
            x.axpy(problem.beta_f, &s.increments[i - 1]);
            probability *= engine.table.probs[slot];
            states.push(x.clone());
            controls.push(a);
        }
        let bins = slots
            .iter()
            .map(|&sl| slot_bin(engine.table.n_bins, sl))
            .collect();
        entries.push(TrajectoryEntry {
            bins,
            probability,
            states,
            controls,
        });
    }
    Ok(TrajectoryBundle { entries })
}

/// Settings of the sample-average descent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptConfig {
    /// Frozen training batch size.
    pub batch: usize,
    /// Fresh samples used for the reported value.
    pub validation: usize,
    pub max_iter: usize,
    pub initial_step: f64,
    /// Consecutive rejected steps tolerated before giving up.
    pub patience: usize,
    /// Improvements below `rel_tol (1 + |cost|)` for three accepted steps stop the run.
    pub rel_tol: f64,
    pub basis: FeatureBasis,
    pub gate: Option<f64>,
    /// Draw GUE paths on this many steps and aggregate them onto the policy grid.
    pub coupling_steps: Option<usize>,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            batch: 64,
            validation: 256,
            max_iter: 200,
            initial_step: 0.5,
            patience: 30,
            rel_tol: 1e-9,
            basis: FeatureBasis::default(),
            gate: None,
            coupling_steps: None,
        }
    }
}

/// One accepted descent step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub batch_cost: f64,
    pub step_size: f64,
    pub max_grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    /// Validation cost of the returned policy.
    pub value: f64,
    pub std_error: f64,
    pub control_energy: f64,
    pub train_cost: f64,
    pub zero_policy_value: f64,
    pub zero_policy_std_error: f64,
    /// The optimized policy lost to the zero policy on validation and was discarded.
    pub used_zero_policy: bool,
    pub converged: bool,
    pub iterations: usize,
    pub policy: DiscretePolicy,
    pub log: Vec<IterationRecord>,
}

/// Minimizes the discrete cost over polynomial policies with `K` steps, `N`
/// bins and cap `R`. Training uses child stream 0 of `stream`, validation
/// child stream 1.
pub fn optimize_discrete_value(
    problem: &ControlProblem,
    k: usize,
    n_bins: usize,
    r: f64,
    cfg: &OptConfig,
    stream: &RngStream,
) -> Result<OptimizationResult> {
    problem.validate()?;
    if !problem.cost.convexity_declared {
        return Err(Error::Precondition(
            "the optimizer requires a cost declared convex".into(),
        ));
    }
    if cfg.batch == 0 || cfg.validation == 0 {
        return Err(Error::Precondition(
            "batch and validation sizes must be positive".into(),
        ));
    }
    let grid = TimeGrid::new(problem.t0, problem.t_end, k)?;
    let delta = grid.delta();
    let table = noise_table(problem, delta, n_bins)?;
    check_guard(table.len(), k)?;
    let mut zero = DiscretePolicy::zero(k, n_bins, table.len(), r, problem.d, cfg.basis.clone());
    zero.gate = cfg.gate;
    let mut policy = zero.clone();

    let train_stream = stream.split(0);
    let samples: Vec<Sample> = {
        let engine = Engine::new(problem, &zero, cfg.coupling_steps)?;
        (0..cfg.batch)
            .into_par_iter()
            .map(|s| engine.draw(&train_stream.split(s as u64)))
            .collect::<Vec<_>>()
            .into_iter()
            .collect::<Result<_>>()?
    };
    let precond = preconditioner(&zero, &table, delta, &samples);
    let eval = |theta: &[f64]| -> Result<(CostEstimate, Vec<f64>)> {
        let mut p = zero.clone();
        set_params(&mut p, theta);
        Engine::new(problem, &p, cfg.coupling_steps)?.batch(&samples)
    };

    let mut theta = params(&zero);
    let (mut est, mut grad) = eval(&theta)?;
    let mut step = cfg.initial_step;
    let mut log = Vec::new();
    let mut first_norm = None;
    let mut stall = 0;
    let mut converged = false;
    let mut iterations = 0;
    'outer: for iter in 1..=cfg.max_iter {
        iterations = iter;
        let dir: Vec<f64> = grad.iter().zip(&precond).map(|(g, p)| g * p).collect();
        let norm = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let raw_norm = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let norm0 = *first_norm.get_or_insert(norm);
        if norm <= 1e-13 * (1.0 + est.mean.abs()) {
            converged = true;
            break;
        }
        let mut failures = 0;
        loop {
            let trial: Vec<f64> = theta.iter().zip(&dir).map(|(t, g)| t - step * g).collect();
            let (e2, g2) = eval(&trial)?;
            if e2.mean < est.mean {
                let gain = est.mean - e2.mean;
                stall = if gain <= cfg.rel_tol * (1.0 + e2.mean.abs()) {
                    stall + 1
                } else {
                    0
                };
                theta = trial;
                est = e2;
                grad = g2;
                step *= 1.25;
                break;
            }
            failures += 1;
            step *= 0.5;
            if failures >= cfg.patience {
                if norm <= 1e-4 * norm0 {
                    converged = true;
                    break 'outer;
                }
                return Err(Error::StepSizeFailure(cfg.patience));
            }
        }
        log.push(IterationRecord {
            iter,
            batch_cost: est.mean,
            step_size: step,
            max_grad_norm: raw_norm,
        });
        if stall >= 3 {
            converged = true;
            break;
        }
    }
    set_params(&mut policy, &theta);

    let val_stream = stream.split(1);
    let val =
        Engine::new(problem, &policy, cfg.coupling_steps)?.estimate(cfg.validation, &val_stream)?;
    let zero_val =
        Engine::new(problem, &zero, cfg.coupling_steps)?.estimate(cfg.validation, &val_stream)?;
    let used_zero_policy = val.mean > zero_val.mean;
    let (chosen, final_policy) = if used_zero_policy {
        (&zero_val, zero.clone())
    } else {
        (&val, policy)
    };
    Ok(OptimizationResult {
        value: chosen.mean,
        std_error: chosen.std_error,
        control_energy: chosen.control_energy,
        train_cost: est.mean,
        zero_policy_value: zero_val.mean,
        zero_policy_std_error: zero_val.std_error,
        used_zero_policy,
        converged,
        iterations,
        policy: final_policy,
        log,
    })
}

/// Diagonal scaling `1 / (P(node) delta E tr_n F_f^2)`, the inverse curvature
/// of the energy term in each coefficient. Features that vanish on the whole
/// batch are frozen.
fn preconditioner(
    policy: &DiscretePolicy,
    table: &NoiseTable,
    delta: f64,
    samples: &[Sample],
) -> Vec<f64> {
    let mut out = Vec::new();
    // Prefix probabilities by prefix length.
    let mut prefix: Vec<Vec<f64>> = vec![vec![1.0]];
    for len in 1..=policy.k {
        let prev = &prefix[len - 1];
        let next = prev
            .iter()
            .flat_map(|p| table.probs.iter().map(move |q| p * q))
            .collect();
        prefix.push(next);
    }
    for i in 1..=policy.k {
        let m = policy.basis.len(policy.d, i);
        let scale: Vec<f64> = (0..m)
            .map(|f| {
                samples
                    .iter()
                    .map(|s| s.features[i - 1][f].inner(&s.features[i - 1][f]))
                    .sum::<f64>()
                    / samples.len() as f64
            })
            .collect();
        for &p in &prefix[policy.info().visible(i)] {
            for _ in 0..policy.d {
                for &sf in &scale {
                    out.push(if sf > 1e-14 && p > 0.0 {
                        1.0 / (p * delta * sf)
                    } else {
                        0.0
                    });
                }
            }
        }
    }
    out
}

/// Checks `L = 1/2 ||a||^2`, `g = ||X||^2` and returns nothing on success.
fn check_lq_template(problem: &ControlProblem) -> Result<()> {
    let cost = &problem.cost;
    if !cost.running.is_zero() {
        return Err(Error::TemplateMismatch(
            "running cost must be 1/2 ||a||^2 only".into(),
        ));
    }
    if cost.quad_coef != 0.5 {
        return Err(Error::TemplateMismatch(format!(
            "quad_coef {} is not 1/2",
            cost.quad_coef
        )));
    }
    let TraceFunctional::Cylindrical { function } = &cost.terminal else {
        return Err(Error::TemplateMismatch(
            "terminal cost must be the cylindrical ||X||^2".into(),
        ));
    };
    let d = problem.d;
    let mut sum = NCPolynomial::zero(d);
    for (w, c) in function.outer().terms() {
        match w {
            [] => sum = sum.add(&NCPolynomial::constant(d, c)),
            [o] => sum = sum.add(&function.inners()[*o].with_d(d)?.scale_real(c)),
            _ => {
                return Err(Error::TemplateMismatch(
                    "outer polynomial is not affine".into(),
                ))
            }
        }
    }
    let mut target = NCPolynomial::zero(d);
    for l in 0..d {
        let x = NCPolynomial::var(d, l)?;
        target = target.add(&x.mul(&x));
    }
    let diff = sum.sub(&target);
    if diff.terms().any(|(_, c)| c.norm() > 1e-12) {
        return Err(Error::TemplateMismatch(format!(
            "terminal cost is not ||X||^2 for d = {d}"
        )));
    }
    Ok(())
}

/// Continuous-time value `p(t0) ||x0||^2 + ((beta_C^2 + beta_F^2) d / 2) ln(1 + 2 (T - t0))`
/// with `p(t) = 1 / (1 + 2 (T - t))`.
pub fn lq_reference(problem: &ControlProblem) -> Result<f64> {
    problem.validate()?;
    check_lq_template(problem)?;
    let tau = problem.horizon();
    let x2 = l2_norm(&problem.x0).powi(2);
    let noise = problem.beta_c.powi(2) + problem.beta_f.powi(2);
    Ok(x2 / (1.0 + 2.0 * tau) + 0.5 * noise * problem.d as f64 * (2.0 * tau).ln_1p())
}

/// Exact optimum of the discrete problem over unrestricted controls with the
/// given information structure, by backward induction on `q ||x||^2`.
pub fn lq_discrete_reference(
    problem: &ControlProblem,
    k: usize,
    n_bins: usize,
    info: InfoStructure,
) -> Result<f64> {
    problem.validate()?;
    check_lq_template(problem)?;
    let grid = TimeGrid::new(problem.t0, problem.t_end, k)?;
    let delta = grid.delta();
    let table = noise_table(problem, delta, n_bins)?;
    let noise = problem.d as f64
        * (problem.beta_f.powi(2) * delta + problem.beta_c.powi(2) * table.omega_second_moment());
    // q_i is the value coefficient after step i; q_K = 1.
    let q = |i: usize| 1.0 / (1.0 + 2.0 * delta * (k - i) as f64);
    let x2 = l2_norm(&problem.x0).powi(2);
    let noise_sum: f64 = (1..=k)
        .map(|i| match info {
            InfoStructure::Anticipating => q(i - 1),
            InfoStructure::Predictable => q(i),
        })
        .sum();
    Ok(q(0) * x2 + noise * noise_sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::CostSpec;
    use crate::randmat::sample_gue_tuple_with;

    fn random_theta(len: usize, seed: u64) -> Vec<f64> {
        use rand::Rng;
        let mut rng = RngStream::new(seed).rng();
        (0..len).map(|_| rng.random_range(-0.5..0.5)).collect()
    }

    /// Central differences of the batch cost against the adjoint gradient.
    fn gradient_matches(
        problem: &ControlProblem,
        basis: FeatureBasis,
        k: usize,
        n_bins: usize,
        r: f64,
    ) {
        let table = noise_table(problem, problem.horizon() / k as f64, n_bins).unwrap();
        let mut policy = DiscretePolicy::zero(k, n_bins, table.len(), r, problem.d, basis);
        let theta = random_theta(params(&policy).len(), 3);
        set_params(&mut policy, &theta);
        let engine = Engine::new(problem, &policy, None).unwrap();
        let stream = RngStream::new(11);
        let samples: Vec<Sample> = (0..3)
            .map(|s| engine.draw(&stream.split(s)).unwrap())
            .collect();
        let (_, grad) = engine.batch(&samples).unwrap();
        let h = 1e-5;
        for idx in (0..theta.len()).step_by(theta.len().div_ceil(25)) {
            let cost_at = |shift: f64| {
                let mut t = theta.clone();
                t[idx] += shift;
                let mut p = policy.clone();
                set_params(&mut p, &t);
                Engine::new(problem, &p, None)
                    .unwrap()
                    .batch(&samples)
                    .unwrap()
                    .0
                    .mean
            };
            let fd = (cost_at(h) - cost_at(-h)) / (2.0 * h);
            assert!(
                (fd - grad[idx]).abs() < 1e-6 * (1.0 + fd.abs()),
                "param {idx}: fd {fd} vs adjoint {}",
                grad[idx]
            );
        }
    }

    fn quartic_problem(n: usize, d: usize, beta_c: f64) -> ControlProblem {
        let mut rng = RngStream::new(5).rng();
        let x0 = sample_gue_tuple_with(n, d, 0.5, &mut rng);
        let cost = CostSpec {
            running: TraceFunctional::PseudoHuber {
                weights: vec![0.7; 2 * d],
            },
            quad_coef: 0.3,
            terminal: TraceFunctional::parse("u1 + 0.5*u2^2", &["x1^4", "x1*x1"], d).unwrap(),
            lip_const: 0.7,
            convexity_declared: true,
            c1: None,
        };
        ControlProblem::new(x0, beta_c, 0.8, 0.0, 1.0, cost).unwrap()
    }

    #[test]
    fn adjoint_gradient_anticipating() {
        let basis = FeatureBasis {
            degree: 2,
            state_powers: 3,
            info: InfoStructure::Anticipating,
        };
        gradient_matches(&quartic_problem(3, 1, 0.6), basis, 3, 1, 100.0);
    }

    #[test]
    fn adjoint_gradient_predictable() {
        let basis = FeatureBasis {
            degree: 1,
            state_powers: 2,
            info: InfoStructure::Predictable,
        };
        gradient_matches(&quartic_problem(3, 2, 0.6), basis, 2, 1, 100.0);
    }

    #[test]
    fn adjoint_gradient_without_common_noise() {
        let basis = FeatureBasis {
            degree: 1,
            state_powers: 1,
            info: InfoStructure::Anticipating,
        };
        gradient_matches(&quartic_problem(4, 1, 0.0), basis, 4, 2, 100.0);
    }

    #[test]
    fn adjoint_gradient_through_the_clip() {
        let basis = FeatureBasis {
            degree: 2,
            state_powers: 2,
            info: InfoStructure::Anticipating,
        };
        gradient_matches(&quartic_problem(3, 1, 0.6), basis.clone(), 2, 1, 0.3);
        let basis = FeatureBasis {
            info: InfoStructure::Predictable,
            ..basis
        };
        gradient_matches(&quartic_problem(3, 2, 0.6), basis, 2, 1, 0.3);
    }

    #[test]
    fn guard_rejects_large_trees() {
        let p = quartic_problem(2, 1, 1.0);
        let err =
            optimize_discrete_value(&p, 8, 16, 8.0, &OptConfig::default(), &RngStream::new(1))
                .unwrap_err();
        assert!(matches!(err, Error::GuardExceeded { .. }));
    }
}
