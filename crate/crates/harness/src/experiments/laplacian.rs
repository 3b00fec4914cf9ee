//! The GUE/free Laplacian comparison identity and a finite-difference
//! cross-check on random cylindrical functions.

use freelab_core::laplacian::{CylindricalFunction, LAPLACIAN_GUARD};
use freelab_core::randmat::{sample_gue_tuple_with, try_map_samples, RngStream};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Experiment, Outcome};
use crate::config::{nonempty_sizes, positive};
use crate::error::{Context, HarnessError, Result};
use crate::table::{Check, Table};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaplacianParams {
    #[serde(default = "default_instances")]
    pub instances: usize,
    /// Instance `i` uses `n[i % len]`.
    #[serde(default = "default_n")]
    pub n: Vec<usize>,
    #[serde(default = "two")]
    pub d: usize,
    /// Inner count drawn uniformly from `1..=max_inners`.
    #[serde(default = "two")]
    pub max_inners: usize,
    #[serde(default = "four")]
    pub inner_degree: usize,
    #[serde(default = "three")]
    pub outer_degree: usize,
    #[serde(default = "default_step")]
    pub fd_step: f64,
    #[serde(default = "default_identity_tol")]
    pub identity_tol: f64,
    #[serde(default = "default_fd_tol")]
    pub fd_tol: f64,
}

fn default_instances() -> usize {
    50
}

fn default_n() -> Vec<usize> {
    vec![3, 4, 6]
}

fn two() -> usize {
    2
}

fn three() -> usize {
    3
}

fn four() -> usize {
    4
}

fn default_step() -> f64 {
    1e-3
}

fn default_identity_tol() -> f64 {
    1e-10
}

fn default_fd_tol() -> f64 {
    1e-5
}

struct Row {
    n: usize,
    m: usize,
    gue: f64,
    free: f64,
    correction: f64,
    residual: f64,
    fd: f64,
}

impl Experiment for LaplacianParams {
    fn validate(&self) -> Result<()> {
        nonempty_sizes(&self.n)?;
        positive("instances", self.instances)?;
        positive("d", self.d)?;
        positive("max_inners", self.max_inners)?;
        positive("inner_degree", self.inner_degree)?;
        if let Some(&n) = self.n.iter().find(|&&n| self.d * n * n > LAPLACIAN_GUARD) {
            return Err(HarnessError::Config(format!(
                "d n^2 = {} exceeds the Laplacian guard {LAPLACIAN_GUARD}",
                self.d * n * n
            )));
        }
        if !(self.fd_step > 0.0) {
            return Err(HarnessError::Config("fd_step must be positive".into()));
        }
        Ok(())
    }

    fn run(&self, context: &str, stream: &RngStream) -> Result<Outcome> {
        let rows = try_map_samples(stream, self.instances, |i, s| {
            let n = self.n[i % self.n.len()];
            let mut rng = s.rng();
            let m = rng.random_range(1..=self.max_inners);
            let u = CylindricalFunction::random(
                self.d,
                m,
                self.inner_degree,
                self.outer_degree,
                &mut rng,
            )?;
            let x = sample_gue_tuple_with(n, self.d, 1.0, &mut rng);
            let gue = u.gue_laplacian(&x)?;
            let free = u.free_laplacian(&x)?;
            let correction = u.correction_term(&x)?;
            Ok(Row {
                n,
                m,
                gue,
                free,
                correction,
                residual: gue - free - correction,
                fd: u.fd_gue_laplacian(&x, self.fd_step)?,
            })
        })
        .ctx(context)?;
        let mut table = Table::new(
            "",
            &[
                "instance",
                "n",
                "m",
                "gue_laplacian",
                "free_laplacian",
                "correction",
                "identity_residual",
                "fd_laplacian",
                "fd_rel_error",
            ],
        );
        let (mut worst_residual, mut worst_fd) = (0.0f64, 0.0f64);
        for (i, r) in rows.iter().enumerate() {
            let rel = (r.gue - r.fd).abs() / (1.0 + r.gue.abs());
            worst_residual = worst_residual.max(r.residual.abs());
            worst_fd = worst_fd.max(rel);
            table.push(vec![
                i.into(),
                r.n.into(),
                r.m.into(),
                r.gue.into(),
                r.free.into(),
                r.correction.into(),
                r.residual.into(),
                r.fd.into(),
                rel.into(),
            ]);
        }
        let checks = vec![
            Check::below("identity_residual", worst_residual, self.identity_tol),
            Check::below("fd_rel_error", worst_fd, self.fd_tol),
        ];
        Ok(Outcome {
            tables: vec![table],
            checks,
        })
    }
}
