//! The operator-norm truncation inequality on random convex, Lipschitz costs.

use freelab_core::control::{
    truncation_inequality_check, ControlProblem, CostSpec, TraceFunctional,
};
use freelab_core::matrixcore::MatrixTuple;
use freelab_core::randmat::{sample_gue_tuple_with, try_map_samples, RngStream};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Experiment, Outcome};
use crate::config::positive;
use crate::error::{Context, HarnessError, Result};
use crate::table::{Check, Table};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationParams {
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "two")]
    pub d_max: usize,
    #[serde(default = "default_steps")]
    pub steps_max: usize,
    /// Range of the cap `R`.
    #[serde(default = "default_r")]
    pub r_range: [f64; 2],
    /// Range of the GUE scale of the control path.
    #[serde(default = "default_scale")]
    pub control_scale: [f64; 2],
}

fn default_instances() -> usize {
    100
}

fn default_n_max() -> usize {
    4
}

fn two() -> usize {
    2
}

fn default_steps() -> usize {
    8
}

fn default_r() -> [f64; 2] {
    [0.1, 3.0]
}

fn default_scale() -> [f64; 2] {
    [0.1, 6.0]
}

struct Instance {
    n: usize,
    d: usize,
    steps: usize,
    r: f64,
    t: f64,
    lhs: f64,
    rhs: f64,
    penalty: f64,
    holds: bool,
}

/// Running cost `sum_l w_l tr_n(sqrt(1 + Z_l^2) - 1) + c ||a||^2` over `(X, a)`,
/// convex and `max |w|`-Lipschitz.
fn instance(p: &TruncationParams, s: &RngStream) -> freelab_core::Result<Instance> {
    let mut rng = s.rng();
    let n = rng.random_range(1..=p.n_max);
    let d = rng.random_range(1..=p.d_max);
    let steps = rng.random_range(1..=p.steps_max);
    let r = rng.random_range(p.r_range[0]..=p.r_range[1]);
    let scale = rng.random_range(p.control_scale[0]..=p.control_scale[1]);
    let t = rng.random_range(0.2..3.0);
    let weights: Vec<f64> = (0..2 * d).map(|_| rng.random_range(0.0..2.0)).collect();
    let kappa = weights.iter().fold(0.0f64, |m, w| m.max(*w));
    let cost = CostSpec {
        running: TraceFunctional::PseudoHuber { weights },
        quad_coef: rng.random_range(0.0..2.0),
        terminal: TraceFunctional::Zero,
        lip_const: kappa,
        convexity_declared: true,
        c1: None,
    };
    let problem = ControlProblem::new(MatrixTuple::zeros(n, d), 0.0, 1.0, 0.0, t, cost)?;
    let alpha: Vec<MatrixTuple> = (0..steps)
        .map(|_| sample_gue_tuple_with(n, d, scale, &mut rng))
        .collect();
    let y: Vec<MatrixTuple> = (0..steps)
        .map(|_| sample_gue_tuple_with(n, d, 1.0, &mut rng))
        .collect();
    let rep = truncation_inequality_check(&problem, &y, &alpha, r)?;
    Ok(Instance {
        n,
        d,
        steps,
        r,
        t,
        lhs: rep.lhs,
        rhs: rep.rhs,
        penalty: rep.penalty,
        holds: rep.holds,
    })
}

impl Experiment for TruncationParams {
    fn validate(&self) -> Result<()> {
        positive("instances", self.instances)?;
        positive("n_max", self.n_max)?;
        positive("d_max", self.d_max)?;
        positive("steps_max", self.steps_max)?;
        let ok = |[lo, hi]: [f64; 2]| lo > 0.0 && lo <= hi && hi.is_finite();
        if !ok(self.r_range) || !ok(self.control_scale) {
            return Err(HarnessError::Config(
                "r_range and control_scale need 0 < lo <= hi".into(),
            ));
        }
        Ok(())
    }

    fn run(&self, context: &str, stream: &RngStream) -> Result<Outcome> {
        let rows =
            try_map_samples(stream, self.instances, |_, s| instance(self, s)).ctx(context)?;
        let mut table = Table::new(
            "",
            &[
                "instance", "n", "d", "steps", "R", "T", "lhs", "rhs", "penalty", "holds",
            ],
        );
        for (i, r) in rows.iter().enumerate() {
            table.push(vec![
                i.into(),
                r.n.into(),
                r.d.into(),
                r.steps.into(),
                r.r.into(),
                r.t.into(),
                r.lhs.into(),
                r.rhs.into(),
                r.penalty.into(),
                r.holds.into(),
            ]);
        }
        let violations = rows.iter().filter(|r| !r.holds).count();
        let checks = vec![Check::new(
            "violations",
            violations as f64,
            "0",
            "0",
            violations == 0,
        )];
        Ok(Outcome {
            tables: vec![table],
            checks,
        })
    }
}
