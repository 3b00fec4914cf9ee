//! Monte Carlo checks of the conditional bridge bounds
//! `E[|W_b - W_a| | W_c - W_a = x] <= (b-a)/(c-a) |x| + C sqrt(b-a)`.
//!
//! Paths are simulated forward (`W_b - W_a` and `W_c - W_b` independent),
//! sorted by the conditioning variable and split into equal-count cells. A
//! cell passes when its mean of the left side stays below its mean of the
//! right side.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrixcore::operator_norm;
use crate::randmat::{sample_gue_with, try_map_samples, RngStream};

/// Samples per conditioning cell.
const CELL_SIZE: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeReport {
    pub cells: usize,
    pub passing_cells: usize,
    /// Largest `lhs - rhs` over the cells.
    pub worst_gap: f64,
}

impl BridgeReport {
    pub fn pass_fraction(&self) -> f64 {
        if self.cells == 0 {
            1.0
        } else {
            self.passing_cells as f64 / self.cells as f64
        }
    }

    /// At least 99% of the cells satisfy the inequality.
    pub fn holds(&self) -> bool {
        self.pass_fraction() >= 0.99
    }
}

fn check_interval(a: f64, b: f64, c: f64) -> Result<()> {
    if !(0.0 <= a && a <= b && b <= c && a < c) {
        return Err(Error::Precondition(format!(
            "need 0 <= a <= b <= c and a < c, got ({a}, {b}, {c})"
        )));
    }
    Ok(())
}

/// `pairs[k] = (conditioning magnitude |x|, left-side sample)`.
fn cell_report(mut pairs: Vec<(f64, f64)>, ratio: f64, constant: f64) -> BridgeReport {
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut cells = 0;
    let mut passing = 0;
    let mut worst = f64::NEG_INFINITY;
    for chunk in pairs.chunks(CELL_SIZE) {
        let m = chunk.len() as f64;
        let lhs = chunk.iter().map(|p| p.1).sum::<f64>() / m;
        let rhs = chunk.iter().map(|p| ratio * p.0 + constant).sum::<f64>() / m;
        cells += 1;
        if lhs <= rhs {
            passing += 1;
        }
        worst = worst.max(lhs - rhs);
    }
    BridgeReport {
        cells,
        passing_cells: passing,
        worst_gap: worst,
    }
}

/// Scalar bound with the constant `sqrt((c-b)(b-a)/(c-a))`, the standard
/// deviation of the bridge fluctuation.
pub fn bridge_bound_check(
    a: f64,
    b: f64,
    c: f64,
    samples: usize,
    stream: &RngStream,
) -> Result<BridgeReport> {
    check_interval(a, b, c)?;
    let (s, t) = (b - a, c - a);
    let ratio = s / t;
    let constant = ((c - b) * s / t).sqrt();
    let pairs = try_map_samples(stream, samples, |_, st| {
        let mut rng = st.rng();
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        let y = s.sqrt() * z1;
        let x = y + (c - b).sqrt() * z2;
        Ok((x.abs(), y.abs()))
    })?;
    Ok(cell_report(pairs, ratio, constant))
}

/// Matrix analogue in operator norm for GUE(`n`) Brownian motion, with the
/// constant `3 sqrt(b-a)`.
pub fn bridge_bound_check_matrix(
    a: f64,
    b: f64,
    c: f64,
    n: usize,
    samples: usize,
    stream: &RngStream,
) -> Result<BridgeReport> {
    check_interval(a, b, c)?;
    let (s, t) = (b - a, c - a);
    let ratio = s / t;
    let constant = 3.0 * s.sqrt();
    let pairs = try_map_samples(stream, samples, |_, st| {
        let mut rng = st.rng();
        let y = sample_gue_with(n, s.sqrt(), &mut rng);
        let x = y.add(&sample_gue_with(n, (c - b).sqrt(), &mut rng));
        Ok((operator_norm(&x)?, operator_norm(&y)?))
    })?;
    Ok(cell_report(pairs, ratio, constant))
}
