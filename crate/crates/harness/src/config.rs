use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::experiments::{
    freeness::FreenessParams, gaussdisc::GaussdiscParams, laplacian::LaplacianParams,
    ldp::LdpParams, spectrum::SpectrumParams, truncation::TruncationParams, value::SweepParams,
    value::ValueParams,
};

/// A run: master seed, output directory and experiments in order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub experiments: Vec<ExperimentConfig>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Names default to `<index>-<kind>`.
    pub fn names(&self) -> Vec<String> {
        self.experiments
            .iter()
            .enumerate()
            .map(|(i, e)| e.name(i))
            .collect()
    }

    /// Names are unique and file-safe; every experiment passes its guards.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for (i, e) in self.experiments.iter().enumerate() {
            let name = e.name(i);
            if name.is_empty()
                || !name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
                || name.starts_with('.')
            {
                return Err(HarnessError::Config(format!(
                    "experiment name {name:?} must be non-empty [A-Za-z0-9._-]"
                )));
            }
            if !seen.insert(name.clone()) {
                return Err(HarnessError::Config(format!(
                    "duplicate experiment name {name:?}"
                )));
            }
            e.spec.validate().map_err(|err| match err {
                HarnessError::Config(m) => HarnessError::Config(format!("{name}: {m}")),
                other => other,
            })?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub spec: ExperimentSpec,
}

impl ExperimentConfig {
    pub fn new(name: &str, spec: ExperimentSpec) -> Self {
        ExperimentConfig {
            name: Some(name.to_string()),
            spec,
        }
    }

    pub fn name(&self, index: usize) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| format!("{index:02}-{}", self.spec.kind()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentSpec {
    Spectrum(SpectrumParams),
    Freeness(FreenessParams),
    LaplacianCheck(LaplacianParams),
    Value(ValueParams),
    Sweep(SweepParams),
    Ldp(LdpParams),
    GaussdiscCheck(GaussdiscParams),
    TruncationCheck(TruncationParams),
}

impl ExperimentSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentSpec::Spectrum(_) => "spectrum",
            ExperimentSpec::Freeness(_) => "freeness",
            ExperimentSpec::LaplacianCheck(_) => "laplacian-check",
            ExperimentSpec::Value(_) => "value",
            ExperimentSpec::Sweep(_) => "sweep",
            ExperimentSpec::Ldp(_) => "ldp",
            ExperimentSpec::GaussdiscCheck(_) => "gaussdisc-check",
            ExperimentSpec::TruncationCheck(_) => "truncation-check",
        }
    }
}

pub(crate) fn positive(what: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(HarnessError::Config(format!("{what} must be at least 1")));
    }
    Ok(())
}

pub(crate) fn nonempty_sizes(ns: &[usize]) -> Result<()> {
    if ns.is_empty() || ns.contains(&0) {
        return Err(HarnessError::Config(
            "n must be a non-empty list of positive sizes".into(),
        ));
    }
    Ok(())
}
