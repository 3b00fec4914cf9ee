//! Even moments and operator norms of single GUE samples.

use freelab_core::matrixcore::operator_norm;
use freelab_core::nclaw::semicircle_moment;
use freelab_core::randmat::{sample_gue, try_map_samples, RngStream};
use serde::{Deserialize, Serialize};

use super::{mean, Experiment, Outcome};
use crate::config::{nonempty_sizes, positive};
use crate::error::{Context, HarnessError, Result};
use crate::table::{Cell, Check, Table};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumParams {
    pub n: Vec<usize>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Largest `k` of the moments `tr_n S^{2k}`; zero skips them.
    #[serde(default = "default_moments")]
    pub moments: usize,
    #[serde(default = "default_moment_tol")]
    pub moment_rel_tol: f64,
    /// Interval the median operator norm must fall in; absent skips the norms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator_norm: Option<[f64; 2]>,
}

fn default_samples() -> usize {
    20
}

fn default_moments() -> usize {
    4
}

fn default_moment_tol() -> f64 {
    0.05
}

impl Experiment for SpectrumParams {
    fn validate(&self) -> Result<()> {
        nonempty_sizes(&self.n)?;
        positive("samples", self.samples)?;
        if self.moments == 0 && self.operator_norm.is_none() {
            return Err(HarnessError::Config(
                "nothing to measure: moments = 0 and no operator_norm interval".into(),
            ));
        }
        Ok(())
    }

    fn run(&self, context: &str, stream: &RngStream) -> Result<Outcome> {
        let mut table = Table::new("", &["n", "statistic", "order", "value", "reference"]);
        let mut checks = Vec::new();
        for (j, &n) in self.n.iter().enumerate() {
            let kmax = self.moments;
            let want_norm = self.operator_norm.is_some();
            let per_sample = try_map_samples(&stream.split(j as u64), self.samples, |_, s| {
                let g = sample_gue(n, s);
                let sq = g.matrix().matmul(g.matrix());
                let mut moments = Vec::with_capacity(kmax);
                let mut p = sq.clone();
                for k in 1..=kmax {
                    moments.push(p.normalized_trace().re);
                    if k < kmax {
                        p = p.matmul(&sq);
                    }
                }
                let norm = if want_norm {
                    Some(operator_norm(&g)?)
                } else {
                    None
                };
                Ok((moments, norm))
            })
            .ctx(context)?;
            let mut worst = 0.0f64;
            for k in 1..=kmax {
                let avg = mean(&per_sample.iter().map(|(m, _)| m[k - 1]).collect::<Vec<_>>());
                let c = semicircle_moment(2 * k);
                worst = worst.max((avg - c).abs() / c);
                table.push(vec![
                    n.into(),
                    "moment".into(),
                    (2 * k).into(),
                    avg.into(),
                    c.into(),
                ]);
            }
            if kmax > 0 {
                checks.push(Check::at_most(
                    format!("moment_rel_error_n{n}"),
                    worst,
                    self.moment_rel_tol,
                ));
            }
            if let Some([lo, hi]) = self.operator_norm {
                let mut norms: Vec<f64> = per_sample.iter().filter_map(|(_, x)| *x).collect();
                norms.sort_by(f64::total_cmp);
                let m = norms.len();
                let median = if m % 2 == 1 {
                    norms[m / 2]
                } else {
                    0.5 * (norms[m / 2 - 1] + norms[m / 2])
                };
                table.push(vec![
                    n.into(),
                    "operator_norm_median".into(),
                    Cell::Empty,
                    median.into(),
                    2.0.into(),
                ]);
                checks.push(Check::within(format!("operator_norm_n{n}"), median, lo, hi));
            }
        }
        Ok(Outcome {
            tables: vec![table],
            checks,
        })
    }
}
