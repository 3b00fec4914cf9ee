//! One module per experiment kind. Each turns its parameters into tables and
//! checks; persistence is the runner's job.

pub mod freeness;
pub mod gaussdisc;
pub mod laplacian;
pub mod ldp;
pub mod spectrum;
pub mod truncation;
pub mod value;

use freelab_core::randmat::RngStream;

use crate::config::ExperimentSpec;
use crate::error::Result;
use crate::table::{Check, Table};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
}

pub trait Experiment {
    /// Guards and parameter ranges, checked before any experiment runs.
    fn validate(&self) -> Result<()>;
    /// `context` labels errors; `stream` is the experiment's own child stream.
    fn run(&self, context: &str, stream: &RngStream) -> Result<Outcome>;
}

impl ExperimentSpec {
    fn inner(&self) -> &dyn Experiment {
        match self {
            ExperimentSpec::Spectrum(p) => p,
            ExperimentSpec::Freeness(p) => p,
            ExperimentSpec::LaplacianCheck(p) => p,
            ExperimentSpec::Value(p) => p,
            ExperimentSpec::Sweep(p) => p,
            ExperimentSpec::Ldp(p) => p,
            ExperimentSpec::GaussdiscCheck(p) => p,
            ExperimentSpec::TruncationCheck(p) => p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.inner().validate()
    }

    pub fn run(&self, context: &str, stream: &RngStream) -> Result<Outcome> {
        self.inner().run(context, stream)
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean; zero for fewer than two values.
pub(crate) fn std_error(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (var / xs.len() as f64).sqrt()
}

/// `lo, lo + step, ...` up to `hi` inclusive, robust to rounding in `step`.
pub(crate) fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=count).map(|i| lo + i as f64 * step).collect()
}
