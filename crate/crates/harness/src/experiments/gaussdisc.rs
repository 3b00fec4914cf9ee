//! Truncated-Gaussian bounds and the Brownian-bridge bound.

use freelab_core::gaussdisc::{
    bridge_bound_check, truncated_gaussian_mean, truncated_gaussian_variance,
};
use freelab_core::randmat::RngStream;
use serde::{Deserialize, Serialize};

use super::{grid, Experiment, Outcome};
use crate::config::positive;
use crate::error::{Context, HarnessError, Result};
use crate::table::{Check, Table};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussdiscParams {
    /// `[lo, hi, step]` for the conditional variance.
    #[serde(default = "default_z")]
    pub z_grid: [f64; 3],
    /// `[lo, hi, step]` for the conditional mean.
    #[serde(default = "default_k")]
    pub k_grid: [f64; 3],
    /// `(a, b, c)` of the bridge check.
    #[serde(default = "default_bridge")]
    pub bridge: [f64; 3],
    #[serde(default = "default_samples")]
    pub bridge_samples: usize,
}

fn default_z() -> [f64; 3] {
    [0.0, 5.0, 0.1]
}

fn default_k() -> [f64; 3] {
    [1.0, 5.0, 0.1]
}

fn default_bridge() -> [f64; 3] {
    [0.0, 0.5, 1.0]
}

fn default_samples() -> usize {
    10_000
}

fn check_grid(what: &str, g: &[f64; 3]) -> Result<()> {
    let [lo, hi, step] = *g;
    if !(step > 0.0 && lo <= hi && lo.is_finite() && hi.is_finite()) {
        return Err(HarnessError::Config(format!(
            "{what} needs lo <= hi and a positive step"
        )));
    }
    Ok(())
}

impl Experiment for GaussdiscParams {
    fn validate(&self) -> Result<()> {
        check_grid("z_grid", &self.z_grid)?;
        check_grid("k_grid", &self.k_grid)?;
        if self.k_grid[0] <= 0.0 {
            return Err(HarnessError::Config("k_grid must be positive".into()));
        }
        positive("bridge_samples", self.bridge_samples)?;
        let [a, b, c] = self.bridge;
        if !(0.0 <= a && a <= b && b <= c && a < c) {
            return Err(HarnessError::Config(format!(
                "bridge needs 0 <= a <= b <= c, a < c; got {:?}",
                self.bridge
            )));
        }
        Ok(())
    }

    fn run(&self, context: &str, stream: &RngStream) -> Result<Outcome> {
        let mut table = Table::new("", &["check", "parameter", "value", "bound", "pass"]);
        let mut worst_var = f64::NEG_INFINITY;
        let [lo, hi, step] = self.z_grid;
        for z in grid(lo, hi, step) {
            let v = truncated_gaussian_variance(z);
            worst_var = worst_var.max(v);
            table.push(vec![
                "truncated_variance".into(),
                z.into(),
                v.into(),
                1.0.into(),
                (v <= 1.0).into(),
            ]);
        }
        let mut worst_ratio = f64::NEG_INFINITY;
        let [lo, hi, step] = self.k_grid;
        for k in grid(lo, hi, step) {
            let m = truncated_gaussian_mean(k);
            worst_ratio = worst_ratio.max(m / (2.0 * k));
            table.push(vec![
                "truncated_mean".into(),
                k.into(),
                m.into(),
                (2.0 * k).into(),
                (m <= 2.0 * k).into(),
            ]);
        }
        let [a, b, c] = self.bridge;
        let report = bridge_bound_check(a, b, c, self.bridge_samples, stream).ctx(context)?;
        let label = format!("{a}/{b}/{c}");
        table.push(vec![
            "bridge".into(),
            label.into(),
            report.pass_fraction().into(),
            0.99.into(),
            report.holds().into(),
        ]);
        let checks = vec![
            Check::at_most("truncated_variance", worst_var, 1.0),
            Check::at_most("truncated_mean_over_2k", worst_ratio, 1.0),
            Check::new(
                "bridge_pass_fraction",
                report.pass_fraction(),
                ">= 0.99",
                "0",
                report.holds(),
            ),
        ];
        Ok(Outcome {
            tables: vec![table],
            checks,
        })
    }
}
