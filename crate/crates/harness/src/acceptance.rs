//! The acceptance suite: twelve criteria, each run through the ordinary
//! experiment machinery with a fixed seed.

use std::path::Path;

use freelab_core::control::{CostSpec, FeatureBasis, OptConfig, TraceFunctional};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExperimentSpec, RunConfig};
use crate::error::{HarnessError, Result};
use crate::experiments::freeness::FreenessParams;
use crate::experiments::gaussdisc::GaussdiscParams;
use crate::experiments::laplacian::LaplacianParams;
use crate::experiments::ldp::LdpParams;
use crate::experiments::spectrum::SpectrumParams;
use crate::experiments::truncation::TruncationParams;
use crate::experiments::value::{
    CostConfig, CostTemplate, InitialState, ProblemConfig, SweepParams, ValueChecks, ValueParams,
};
use crate::runner::{run, Format, RunOptions};
use crate::table::Check;

pub const CRITERIA: [(u32, &str); 12] = [
    (1, "semicircle moments"),
    (2, "operator norm"),
    (3, "asymptotic freeness decay"),
    (4, "Laplacian identity"),
    (5, "Laplacian vs finite differences"),
    (6, "LQ value oracle"),
    (7, "Boue-Dupuis consistency"),
    (8, "discretization shape"),
    (9, "convergence in n"),
    (10, "truncation inequality"),
    (11, "truncated Gaussian and bridge bounds"),
    (12, "determinism across workers"),
];

/// Master seed of every acceptance run.
pub const ACCEPTANCE_SEED: u64 = 20_250_601;

/// Criteria whose CSV output must not depend on the worker count.
pub const DETERMINISM_SOURCES: [u32; 3] = [1, 4, 6];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub title: String,
    pub checks: Vec<Check>,
}

impl CriterionResult {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }

    /// One line: id, verdict, then every check with measured, target and tolerance.
    pub fn line(&self) -> String {
        let parts: Vec<String> = self
            .checks
            .iter()
            .map(|c| {
                format!(
                    "{}: measured={:.6e} target={} tol={} {}",
                    c.id,
                    c.measured,
                    c.target,
                    c.tolerance,
                    if c.pass { "pass" } else { "FAIL" }
                )
            })
            .collect();
        format!(
            "[{:>2}] {} {} | {}",
            self.id,
            if self.passed() { "PASS" } else { "FAIL" },
            self.title,
            parts.join("; ")
        )
    }
}

fn title(id: u32) -> &'static str {
    CRITERIA
        .iter()
        .find(|(i, _)| *i == id)
        .map_or("unknown", |(_, t)| t)
}

fn lq_value() -> ValueParams {
    ValueParams {
        n: vec![4, 8, 16],
        problem: ProblemConfig {
            d: 1,
            x0: InitialState::Zero,
            beta_c: 0.5,
            beta_f: 1.0,
            t0: 0.0,
            t_end: 1.0,
            cost: CostConfig::Template(CostTemplate::Lq),
        },
        k: 4,
        n_bins: 2,
        r: 8.0,
        optimizer: OptConfig::default(),
        checks: ValueChecks {
            reference_n: Some(8),
            ..ValueChecks::default()
        },
    }
}

fn quartic_sweep() -> SweepParams {
    let quartic = TraceFunctional::parse("u1", &["x1^4"], 1).expect("valid functional");
    SweepParams {
        n: vec![4, 8, 16],
        problem: ProblemConfig {
            d: 1,
            x0: InitialState::Zero,
            beta_c: 0.0,
            beta_f: 1.0,
            t0: 0.0,
            t_end: 1.0,
            cost: CostConfig::Spec(CostSpec::energy_with_terminal(quartic)),
        },
        grid: vec![(2, 4), (4, 8), (8, 16)],
        r: 8.0,
        optimizer: OptConfig {
            basis: FeatureBasis {
                degree: 1,
                state_powers: 3,
                ..FeatureBasis::default()
            },
            coupling_steps: Some(8),
            ..OptConfig::default()
        },
    }
}

/// The experiment behind criteria 1 to 11. Criteria sharing an experiment
/// share its name, so a resumed directory computes it once.
pub fn experiment(id: u32) -> Option<ExperimentConfig> {
    let (name, spec) = match id {
        1 => (
            "spectrum",
            ExperimentSpec::Spectrum(SpectrumParams {
                n: vec![256],
                samples: 20,
                moments: 4,
                moment_rel_tol: 0.05,
                operator_norm: None,
            }),
        ),
        2 => (
            "operator-norm",
            ExperimentSpec::Spectrum(SpectrumParams {
                n: vec![512],
                samples: 10,
                moments: 0,
                moment_rel_tol: 0.05,
                operator_norm: Some([1.90, 2.15]),
            }),
        ),
        3 => (
            "freeness",
            ExperimentSpec::Freeness(FreenessParams {
                n: vec![8, 32, 128],
                samples: 50,
                threshold: 0.05,
            }),
        ),
        4 | 5 => (
            "laplacian",
            ExperimentSpec::LaplacianCheck(
                serde_json::from_str::<LaplacianParams>("{}").expect("defaults"),
            ),
        ),
        6 => ("lq-value", ExperimentSpec::Value(lq_value())),
        7 => (
            "boue-dupuis",
            ExperimentSpec::Ldp(LdpParams {
                psi: TraceFunctional::parse("0.5*u1", &["x1^2"], 1).expect("valid functional"),
                n: 8,
                d: 1,
                lhs_samples: 10_000,
                time_steps: 16,
                optimizer: OptConfig::default(),
                reference: Some(0.5 * std::f64::consts::LN_2),
                lhs_abs_tol: 0.02,
                rhs_rel_tol: 0.05,
            }),
        ),
        8 | 9 => ("quartic-sweep", ExperimentSpec::Sweep(quartic_sweep())),
        10 => (
            "truncation",
            ExperimentSpec::TruncationCheck(
                serde_json::from_str::<TruncationParams>("{}").expect("defaults"),
            ),
        ),
        11 => (
            "gaussdisc",
            ExperimentSpec::GaussdiscCheck(
                serde_json::from_str::<GaussdiscParams>("{}").expect("defaults"),
            ),
        ),
        _ => return None,
    };
    Some(ExperimentConfig::new(name, spec))
}

/// The checks of the shared experiment that belong to criterion `id`.
fn belongs(id: u32, check: &Check) -> bool {
    match id {
        4 => check.id == "identity_residual",
        5 => check.id == "fd_rel_error",
        6 => check.id == "reference_n8" || check.id.starts_with("consistency_"),
        8 => check.id == "monotone_decay_n8",
        9 => check.id.starts_with("n_convergence_"),
        _ => true,
    }
}

fn run_experiment(id: u32, dir: &Path, threads: usize) -> Result<(Vec<Check>, Vec<String>)> {
    let exp = experiment(id)
        .ok_or_else(|| HarnessError::Config(format!("criterion {id} has no experiment")))?;
    let config = RunConfig {
        seed: Some(ACCEPTANCE_SEED),
        out_dir: None,
        experiments: vec![exp],
    };
    let opts = RunOptions {
        seed: ACCEPTANCE_SEED,
        out_dir: dir.to_path_buf(),
        threads,
        format: Format::Csv,
        only: None,
    };
    let report = run(&config, &opts)?;
    let entry = report
        .manifest
        .experiments
        .into_iter()
        .next()
        .expect("one experiment");
    Ok((entry.checks, entry.artifacts))
}

fn determinism(out_dir: &Path) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for source in DETERMINISM_SOURCES {
        let one = out_dir.join(format!("criterion-{source}-workers-1"));
        let eight = out_dir.join(format!("criterion-{source}-workers-8"));
        let (_, files) = run_experiment(source, &one, 1)?;
        run_experiment(source, &eight, 8)?;
        let mut differing = 0;
        for f in &files {
            let a = std::fs::read(one.join(f)).map_err(|e| HarnessError::io(&one.join(f), e))?;
            let b =
                std::fs::read(eight.join(f)).map_err(|e| HarnessError::io(&eight.join(f), e))?;
            if a != b || a.is_empty() {
                differing += 1;
            }
        }
        checks.push(Check::new(
            format!("identical_csv_criterion_{source}"),
            differing as f64,
            format!("0 of {} files differ", files.len()),
            "0",
            differing == 0 && !files.is_empty(),
        ));
    }
    Ok(checks)
}

/// Runs criterion `id`, writing its artifacts under `out_dir`.
pub fn run_criterion(id: u32, out_dir: &Path, threads: usize) -> Result<CriterionResult> {
    let checks = if id == 12 {
        determinism(&out_dir.join("determinism"))?
    } else {
        let name = experiment(id)
            .and_then(|e| e.name)
            .ok_or_else(|| HarnessError::Config(format!("unknown criterion {id}")))?;
        let (checks, _) = run_experiment(id, &out_dir.join(name), threads)?;
        checks.into_iter().filter(|c| belongs(id, c)).collect()
    };
    Ok(CriterionResult {
        id,
        title: title(id).to_string(),
        checks,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceSummary {
    pub seed: u64,
    pub criteria: Vec<CriterionResult>,
    pub all_passed: bool,
}

/// Runs the selected criteria (all when `only` is empty) and writes
/// `acceptance.json` under `out_dir`.
pub fn run_all(
    out_dir: &Path,
    threads: usize,
    only: &[u32],
    mut on_result: impl FnMut(&CriterionResult),
) -> Result<AcceptanceSummary> {
    if let Some(bad) = only.iter().find(|i| !CRITERIA.iter().any(|(c, _)| c == *i)) {
        return Err(HarnessError::Config(format!("unknown criterion {bad}")));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| HarnessError::io(out_dir, e))?;
    let mut criteria = Vec::new();
    for (id, _) in CRITERIA {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let r = run_criterion(id, out_dir, threads)?;
        on_result(&r);
        criteria.push(r);
    }
    let all_passed = criteria.iter().all(CriterionResult::passed);
    let summary = AcceptanceSummary {
        seed: ACCEPTANCE_SEED,
        criteria,
        all_passed,
    };
    crate::manifest::write_json(&out_dir.join("acceptance.json"), &summary)?;
    Ok(summary)
}
