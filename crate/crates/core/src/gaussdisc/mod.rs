//! Binning of the common-noise increments.
//!
//! Each step increment `dW ~ N(0, delta)` is assigned to a bin `j` in
//! `[N] = {-N-1, ..., N}`: bin `j` is `(j/N, (j+1)/N]` for `-N <= j <= N-1`,
//! and the two tails are `(-inf, -1]` and `(1, inf)`. The bin width does not
//! depend on `delta`. Within a bin the increment is replaced by its
//! conditional mean `omega_j`.

mod bridge;
mod truncated;

use serde::{Deserialize, Serialize};

pub use bridge::{bridge_bound_check, bridge_bound_check_matrix, BridgeReport};
pub use truncated::{
    normal_cdf, normal_interval, normal_pdf, normal_sf, truncated_gaussian_mean,
    truncated_gaussian_variance, ASYMPTOTIC_THRESHOLD,
};

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;

/// Probability below which a bin is treated as numerically empty.
pub const MIN_BIN_PROBABILITY: f64 = 1e-300;

/// Uniform grid `t0 < t0 + delta < ... < T` with `K` steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(rename = "K")]
    pub k: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t_end: f64, k: usize) -> Result<Self> {
        if !(t_end > t0) || !t0.is_finite() || !t_end.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "need t0 < T, got [{t0}, {t_end}]"
            )));
        }
        if k == 0 {
            return Err(Error::InvalidGrid("K must be at least 1".into()));
        }
        Ok(TimeGrid { t0, t_end, k })
    }

    pub fn delta(&self) -> f64 {
        (self.t_end - self.t0) / self.k as f64
    }

    /// `t_i = t0 + i delta` for `i = 0..=K`; the last point is exactly `T`.
    pub fn times(&self) -> Vec<f64> {
        let d = self.delta();
        (0..=self.k)
            .map(|i| {
                if i == self.k {
                    self.t_end
                } else {
                    self.t0 + i as f64 * d
                }
            })
            .collect()
    }

    /// Grid refined by an integer factor.
    pub fn refine(&self, factor: usize) -> Result<Self> {
        TimeGrid::new(self.t0, self.t_end, self.k * factor)
    }
}

/// Number of bins `2N + 2`.
pub fn bin_count(n_bins: usize) -> usize {
    2 * n_bins + 2
}

/// Bin index `j` to array slot `j + N + 1`.
pub fn bin_slot(n_bins: usize, j: i64) -> Result<usize> {
    let n = n_bins as i64;
    if j < -n - 1 || j > n {
        return Err(Error::IndexOutOfRange(format!("bin {j} for N = {n_bins}")));
    }
    Ok((j + n + 1) as usize)
}

/// Inverse of [`bin_slot`].
pub fn slot_bin(n_bins: usize, slot: usize) -> i64 {
    slot as i64 - n_bins as i64 - 1
}

/// Interval `(lo, hi]` of bin `j`; infinite ends are `+-inf`.
pub fn bin_boundaries(n_bins: usize, j: i64) -> Result<(f64, f64)> {
    if n_bins == 0 {
        return Err(Error::Precondition("N must be at least 1".into()));
    }
    bin_slot(n_bins, j)?;
    let n = n_bins as i64;
    let nf = n_bins as f64;
    Ok(if j == -n - 1 {
        (f64::NEG_INFINITY, -1.0)
    } else if j == n {
        (1.0, f64::INFINITY)
    } else {
        (j as f64 / nf, (j + 1) as f64 / nf)
    })
}

/// Bin containing the increment `x`.
pub fn bin_index(n_bins: usize, x: f64) -> i64 {
    let n = n_bins as i64;
    if x > 1.0 {
        n
    } else if x <= -1.0 {
        -n - 1
    } else {
        // Bin j is (j/N, (j+1)/N].
        ((x * n_bins as f64).ceil() as i64 - 1).clamp(-n, n - 1)
    }
}

pub fn is_tail(n_bins: usize, j: i64) -> bool {
    j == -(n_bins as i64) - 1 || j == n_bins as i64
}

/// `P(dW in bin j)` for `dW ~ N(0, delta)`.
pub fn bin_probability(j: i64, delta: f64, n_bins: usize) -> Result<f64> {
    check_delta(delta)?;
    let (lo, hi) = bin_boundaries(n_bins, j)?;
    let s = delta.sqrt();
    Ok(normal_interval(lo / s, hi / s))
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Precondition(format!(
            "delta must be positive, got {delta}"
        )));
    }
    Ok(())
}

/// `omega_j = E[dW | dW in bin j]`
/// `= sqrt(delta) (phi(a) - phi(b)) / (Phi(b) - Phi(a))` with standardized ends.
pub fn bin_conditional_mean(j: i64, delta: f64, n_bins: usize) -> Result<f64> {
    let p = bin_probability(j, delta, n_bins)?;
    if !(p > MIN_BIN_PROBABILITY) {
        return Err(Error::VanishingProbability { bin: j, prob: p });
    }
    let (lo, hi) = bin_boundaries(n_bins, j)?;
    let s = delta.sqrt();
    let (a, b) = (lo / s, hi / s);
    if b.is_infinite() {
        return Ok(s * truncated_gaussian_mean(a));
    }
    if a.is_infinite() {
        return Ok(-s * truncated_gaussian_mean(-b));
    }
    Ok(s * (normal_pdf(a) - normal_pdf(b)) / p)
}

/// `E[g(X) | X in (lo, hi]]` for `X ~ N(0, delta)` by panelled adaptive
/// Simpson. The window is cut 40 standard deviations from the conditional
/// mode and `kink` (if inside) is added as a breakpoint.
fn conditional_expectation(
    lo: f64,
    hi: f64,
    delta: f64,
    kink: Option<f64>,
    g: impl Fn(f64) -> f64,
) -> Result<f64> {
    check_delta(delta)?;
    let s = delta.sqrt();
    let p = normal_interval(lo / s, hi / s);
    if !(p > MIN_BIN_PROBABILITY) {
        return Err(Error::Quadrature("interval carries no mass".into()));
    }
    let mode = 0f64.clamp(lo, hi);
    let lo = lo.max(mode - 40.0 * s);
    let hi = hi.min(mode + 40.0 * s);
    // Density relative to its value at the mode, so the integrand is O(1).
    let shift = mode / s;
    let f = |x: f64| {
        let z = x / s;
        g(x) * (-0.5 * (z - shift) * (z + shift)).exp() / ((2.0 * std::f64::consts::PI).sqrt() * s)
    };
    let rel_mass = p * (0.5 * shift * shift).exp();
    let panels = ((hi - lo) / s).ceil().max(1.0) as usize;
    let mut cuts: Vec<f64> = (0..=panels)
        .map(|k| lo + k as f64 * (hi - lo) / panels as f64)
        .collect();
    cuts[panels] = hi;
    if let Some(c) = kink.filter(|c| lo < *c && *c < hi) {
        cuts.push(c);
        cuts.sort_by(f64::total_cmp);
    }
    let tol = 1e-12 * rel_mass.max(1e-300) * (s + mode.abs()) / panels as f64;
    let mut v = 0.0;
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            v += adaptive_simpson(f, w[0], w[1], tol)?;
        }
    }
    Ok(v / rel_mass)
}

/// `E[|X - c| | X in (lo, hi]]` for `X ~ N(0, delta)`, by quadrature.
pub fn conditional_absdev_interval(lo: f64, hi: f64, c: f64, delta: f64) -> Result<f64> {
    conditional_expectation(lo, hi, delta, Some(c), |x| (x - c).abs())
}

/// Conditional mean of bin `j` by quadrature; a cross-check of the closed form.
pub fn bin_conditional_mean_quadrature(j: i64, delta: f64, n_bins: usize) -> Result<f64> {
    let (lo, hi) = bin_boundaries(n_bins, j)?;
    conditional_expectation(lo, hi, delta, None, |x| x)
}

/// Oscillation of the increment inside a bin, with the bound it must obey.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbsDev {
    pub value: f64,
    /// `1/N` for interior bins, `sqrt(delta)` for tails.
    pub bound: f64,
}

impl AbsDev {
    pub fn within_bound(&self) -> bool {
        self.value <= self.bound * (1.0 + 1e-12)
    }
}

/// `E[|dW - omega_j| | bin j]` by quadrature.
pub fn bin_conditional_absdev(j: i64, delta: f64, n_bins: usize) -> Result<AbsDev> {
    let (lo, hi) = bin_boundaries(n_bins, j)?;
    let omega = bin_conditional_mean(j, delta, n_bins)?;
    let value = conditional_absdev_interval(lo, hi, omega, delta)?;
    let bound = if is_tail(n_bins, j) {
        delta.sqrt()
    } else {
        1.0 / n_bins as f64
    };
    Ok(AbsDev { value, bound })
}

/// Per-step probabilities and conditional means, shared by all steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseTable {
    pub n_bins: usize,
    pub delta: f64,
    /// Indexed by slot `j + N + 1`.
    pub probs: Vec<f64>,
    pub omegas: Vec<f64>,
}

impl NoiseTable {
    pub fn new(n_bins: usize, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        if n_bins == 0 {
            return Err(Error::Precondition("N must be at least 1".into()));
        }
        let mut probs = Vec::with_capacity(bin_count(n_bins));
        let mut omegas = Vec::with_capacity(bin_count(n_bins));
        for slot in 0..bin_count(n_bins) {
            let j = slot_bin(n_bins, slot);
            probs.push(bin_probability(j, delta, n_bins)?);
            omegas.push(bin_conditional_mean(j, delta, n_bins)?);
        }
        Ok(NoiseTable {
            n_bins,
            delta,
            probs,
            omegas,
        })
    }

    /// The table of a noise that is switched off: one bin of mass 1 at 0.
    pub fn degenerate(delta: f64) -> Self {
        NoiseTable {
            n_bins: 0,
            delta,
            probs: vec![1.0],
            omegas: vec![0.0],
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// `sum_j p_j omega_j^2`, the per-step variance of the binned noise.
    pub fn omega_second_moment(&self) -> f64 {
        self.probs
            .iter()
            .zip(&self.omegas)
            .map(|(p, w)| p * w * w)
            .sum()
    }
}

/// Sequence of bin indices, one per step.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinPath {
    pub n_bins: usize,
    pub indices: Vec<i64>,
}

impl BinPath {
    pub fn new(n_bins: usize, indices: Vec<i64>) -> Result<Self> {
        for &j in &indices {
            bin_slot(n_bins, j)?;
        }
        Ok(BinPath { n_bins, indices })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn prefix(&self, i: usize) -> BinPath {
        BinPath {
            n_bins: self.n_bins,
            indices: self.indices[..i.min(self.indices.len())].to_vec(),
        }
    }
}

fn check_table(path: &BinPath, table: &NoiseTable) -> Result<()> {
    if path.n_bins != table.n_bins {
        return Err(Error::DimensionMismatch(format!(
            "path N = {} vs table N = {}",
            path.n_bins, table.n_bins
        )));
    }
    Ok(())
}

/// `P(O_{i,J})`: product of the per-step bin probabilities of the prefix.
pub fn path_probability(path: &BinPath, table: &NoiseTable) -> Result<f64> {
    check_table(path, table)?;
    let mut p = 1.0;
    for &j in &path.indices {
        p *= table.probs[bin_slot(path.n_bins, j)?];
    }
    Ok(p)
}

/// `W0_{i,J} = sum_{i' <= i} omega_{j_{i'}}`.
pub fn discrete_noise_value(path: &BinPath, i: usize, table: &NoiseTable) -> Result<f64> {
    check_table(path, table)?;
    if i > path.len() {
        return Err(Error::IndexOutOfRange(format!(
            "prefix {i} of a length-{} path",
            path.len()
        )));
    }
    let mut v = 0.0;
    for &j in &path.indices[..i] {
        v += table.omegas[bin_slot(path.n_bins, j)?];
    }
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathClass {
    Bulk,
    Edge,
}

/// A path is on the edge iff it visits a tail bin.
pub fn classify_bulk_edge(path: &BinPath) -> PathClass {
    if path.indices.iter().any(|&j| is_tail(path.n_bins, j)) {
        PathClass::Edge
    } else {
        PathClass::Bulk
    }
}

/// `1 - (1 - 2 q)^K` with `q` the probability of one tail, together with the
/// union bound `2 K q`.
pub fn edge_mass(k: usize, n_bins: usize, delta: f64) -> Result<(f64, f64)> {
    let q = bin_probability(n_bins as i64, delta, n_bins)?;
    // 1 - (1 - 2q)^K without cancellation for small q.
    let mass = -f64::exp_m1(k as f64 * f64::ln_1p(-2.0 * q));
    let union = 2.0 * k as f64 * q;
    debug_assert!(mass <= union * (1.0 + 1e-12));
    Ok((mass, union))
}

#[cfg(test)]
mod tests;
