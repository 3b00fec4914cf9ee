//! Both sides of the Boué–Dupuis formula for a trace functional of `W_hat_1`.

use freelab_core::control::{boue_dupuis_lhs, boue_dupuis_rhs, OptConfig, TraceFunctional};
use freelab_core::randmat::RngStream;
use serde::{Deserialize, Serialize};

use super::{Experiment, Outcome};
use crate::config::positive;
use crate::error::{Context, HarnessError, Result};
use crate::table::{Cell, Check, Table};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdpParams {
    pub psi: TraceFunctional,
    pub n: usize,
    #[serde(default = "one")]
    pub d: usize,
    #[serde(default = "default_samples")]
    pub lhs_samples: usize,
    #[serde(default = "default_steps")]
    pub time_steps: usize,
    #[serde(default)]
    pub optimizer: OptConfig,
    /// Known value of the functional, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
    #[serde(default = "default_lhs_tol")]
    pub lhs_abs_tol: f64,
    #[serde(default = "default_rhs_tol")]
    pub rhs_rel_tol: f64,
}

fn one() -> usize {
    1
}

fn default_samples() -> usize {
    10_000
}

fn default_steps() -> usize {
    16
}

fn default_lhs_tol() -> f64 {
    0.02
}

fn default_rhs_tol() -> f64 {
    0.05
}

impl Experiment for LdpParams {
    fn validate(&self) -> Result<()> {
        positive("n", self.n)?;
        positive("d", self.d)?;
        positive("lhs_samples", self.lhs_samples)?;
        positive("time_steps", self.time_steps)?;
        positive("optimizer.batch", self.optimizer.batch)?;
        positive("optimizer.validation", self.optimizer.validation)?;
        let probe = freelab_core::matrixcore::MatrixTuple::zeros(1, self.d);
        self.psi
            .value(&probe)
            .map_err(|e| HarnessError::Config(format!("psi: {e}")))?;
        Ok(())
    }

    /// The left side uses child stream 0, the optimizer child stream 1.
    fn run(&self, context: &str, stream: &RngStream) -> Result<Outcome> {
        let lhs = boue_dupuis_lhs(
            &self.psi,
            self.n,
            self.d,
            self.lhs_samples,
            &stream.split(0),
        )
        .ctx(context)?;
        let rhs = boue_dupuis_rhs(
            &self.psi,
            self.n,
            self.d,
            self.time_steps,
            &self.optimizer,
            &stream.split(1),
        )
        .ctx(context)?;
        let mut table = Table::new("", &["n", "side", "value", "std_error", "reference"]);
        table.push(vec![
            self.n.into(),
            "lhs".into(),
            lhs.value.into(),
            lhs.std_error.into(),
            Cell::from(self.reference),
        ]);
        table.push(vec![
            self.n.into(),
            "rhs".into(),
            rhs.value.into(),
            rhs.std_error.into(),
            Cell::from(self.reference),
        ]);
        let mut checks = Vec::new();
        if let Some(r) = self.reference {
            checks.push(Check::abs("lhs_reference", lhs.value, r, self.lhs_abs_tol));
            checks.push(Check::rel("rhs_reference", rhs.value, r, self.rhs_rel_tol));
        }
        let floor = lhs.value - 3.0 * lhs.std_error.hypot(rhs.std_error);
        checks.push(Check::new(
            "rhs_above_lhs",
            rhs.value,
            format!(">= {floor:.6}"),
            "3 se",
            rhs.value >= floor,
        ));
        Ok(Outcome {
            tables: vec![table],
            checks,
        })
    }
}
