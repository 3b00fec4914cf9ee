//! Decay of the centered-squares freeness statistic of two independent GUEs.

use freelab_core::matrixcore::MatrixTuple;
use freelab_core::nclaw::freeness_statistic;
use freelab_core::ncpoly::NCPolynomial;
use freelab_core::randmat::{sample_gue, try_map_samples, RngStream};
use serde::{Deserialize, Serialize};

use super::{mean, std_error, Experiment, Outcome};
use crate::config::{nonempty_sizes, positive};
use crate::error::{Context, Result};
use crate::table::{Check, Table};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreenessParams {
    #[serde(default = "default_n")]
    pub n: Vec<usize>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Bound on the statistic at the largest `n`.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_n() -> Vec<usize> {
    vec![8, 32, 128]
}

fn default_samples() -> usize {
    50
}

fn default_threshold() -> f64 {
    0.05
}

impl Experiment for FreenessParams {
    fn validate(&self) -> Result<()> {
        nonempty_sizes(&self.n)?;
        positive("samples", self.samples)
    }

    /// Per sample `|tr_n[(A^2 - tr_n A^2)(B^2 - tr_n B^2)]|`; rows hold the mean.
    fn run(&self, context: &str, stream: &RngStream) -> Result<Outcome> {
        let square = NCPolynomial::parse("x1^2", 1).ctx(context)?;
        let mut table = Table::new("", &["n", "statistic", "std_error"]);
        let mut means = Vec::with_capacity(self.n.len());
        for (j, &n) in self.n.iter().enumerate() {
            let values = try_map_samples(&stream.split(j as u64), self.samples, |_, s| {
                let groups = [
                    MatrixTuple::single(sample_gue(n, &s.split(0))),
                    MatrixTuple::single(sample_gue(n, &s.split(1))),
                ];
                Ok(freeness_statistic(&groups, &[0, 1], &[square.clone(), square.clone()])?.abs())
            })
            .ctx(context)?;
            let m = mean(&values);
            table.push(vec![n.into(), m.into(), std_error(&values).into()]);
            means.push(m);
        }
        let worst_ratio = means.windows(2).map(|w| w[1] / w[0]).fold(0.0f64, f64::max);
        let checks = vec![
            Check::new(
                "strictly_decreasing",
                worst_ratio,
                "< 1",
                "0",
                means.windows(2).all(|w| w[1] < w[0]),
            ),
            Check::below(
                format!("below_threshold_n{}", self.n[self.n.len() - 1]),
                means[means.len() - 1],
                self.threshold,
            ),
        ];
        Ok(Outcome {
            tables: vec![table],
            checks,
        })
    }
}
