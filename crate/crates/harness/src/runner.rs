//! Executes a configuration: validation, per-experiment child streams, a
//! local worker pool, artifact output and resume.

use std::path::{Path, PathBuf};

use freelab_core::randmat::RngStream;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::experiments::Outcome;
use crate::manifest::{
    now_ms, sha256_hex, write_atomic, write_json, ManifestEntry, RunManifest, Status,
};
use crate::table::{Check, Table};

pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub threads: usize,
    pub format: Format,
    /// Run only these experiment names; the rest keep their previous entries.
    pub only: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub name: String,
    pub kind: String,
    pub status: Status,
    pub artifacts: Vec<String>,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub config_hash: String,
    pub experiments: Vec<SummaryEntry>,
    /// Every listed check passed and every listed experiment completed.
    pub all_passed: bool,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub manifest: RunManifest,
    pub summary: Summary,
    pub executed: Vec<String>,
    pub skipped: Vec<String>,
}

fn run_hash(config: &RunConfig, opts: &RunOptions) -> String {
    sha256_hex(
        &json!({ "seed": opts.seed, "format": opts.format, "experiments": config.experiments }),
    )
}

fn experiment_hash(config: &RunConfig, index: usize, name: &str, opts: &RunOptions) -> String {
    sha256_hex(&json!({
        "index": index,
        "name": name,
        "seed": opts.seed,
        "format": opts.format,
        "spec": config.experiments[index].spec,
    }))
}

fn artifact_name(name: &str, table: &Table, format: Format) -> String {
    if table.suffix.is_empty() {
        format!("{name}.{}", format.extension())
    } else {
        format!("{name}_{}.{}", table.suffix, format.extension())
    }
}

fn csv_bytes(table: &Table, path: &Path) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.header)
        .map_err(|e| HarnessError::io(path, e))?;
    for row in &table.rows {
        w.write_record(row.iter().map(|c| c.to_csv()))
            .map_err(|e| HarnessError::io(path, e))?;
    }
    w.into_inner().map_err(|e| HarnessError::io(path, e))
}

fn write_outcome(dir: &Path, name: &str, outcome: &Outcome, format: Format) -> Result<Vec<String>> {
    let mut artifacts = Vec::with_capacity(outcome.tables.len());
    for table in &outcome.tables {
        let file = artifact_name(name, table, format);
        let path = dir.join(&file);
        match format {
            Format::Csv => write_atomic(&path, &csv_bytes(table, &path)?)?,
            Format::Json => write_json(&path, &table.to_json())?,
        }
        artifacts.push(file);
    }
    Ok(artifacts)
}

fn summary(manifest: &RunManifest) -> Summary {
    let experiments: Vec<SummaryEntry> = manifest
        .experiments
        .iter()
        .map(|e| SummaryEntry {
            name: e.name.clone(),
            kind: e.kind.clone(),
            status: e.status,
            artifacts: e.artifacts.clone(),
            checks: e.checks.clone(),
        })
        .collect();
    let all_passed = experiments
        .iter()
        .all(|e| e.status == Status::Completed && e.checks.iter().all(|c| c.pass));
    Summary {
        seed: manifest.seed,
        config_hash: manifest.config_hash.clone(),
        experiments,
        all_passed,
    }
}

fn finish(
    dir: &Path,
    hash: &str,
    opts: &RunOptions,
    entries: Vec<ManifestEntry>,
) -> Result<(RunManifest, Summary)> {
    let manifest = RunManifest::new(hash.to_string(), opts.seed, opts.format, entries);
    manifest.save(dir)?;
    let s = summary(&manifest);
    write_json(&dir.join(SUMMARY_FILE), &s)?;
    Ok((manifest, s))
}

/// Runs every experiment in order. Experiment `i` draws from child `i` of the
/// master stream, so results do not depend on which other experiments run.
pub fn run(config: &RunConfig, opts: &RunOptions) -> Result<RunReport> {
    config.validate()?;
    if opts.threads == 0 {
        return Err(HarnessError::Config("threads must be at least 1".into()));
    }
    let names = config.names();
    if let Some(only) = &opts.only {
        if let Some(missing) = only.iter().find(|o| !names.contains(o)) {
            return Err(HarnessError::Config(format!(
                "no experiment named {missing:?}"
            )));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start {} workers: {e}", opts.threads)))?;
    let dir = opts.out_dir.as_path();
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let previous = RunManifest::load(dir);
    let hash = run_hash(config, opts);
    let master = RngStream::new(opts.seed);
    let mut entries: Vec<ManifestEntry> = Vec::with_capacity(names.len());
    let (mut executed, mut skipped) = (Vec::new(), Vec::new());
    for (index, name) in names.iter().enumerate() {
        let exp_hash = experiment_hash(config, index, name, opts);
        if let Some(prev) = previous
            .as_ref()
            .and_then(|m| m.reusable(dir, index, name, &exp_hash))
        {
            entries.push(prev.clone());
            skipped.push(name.clone());
            continue;
        }
        if opts.only.as_ref().is_some_and(|o| !o.contains(name)) {
            continue;
        }
        let spec = &config.experiments[index].spec;
        let started = now_ms();
        let result = pool.install(|| spec.run(name, &master.split(index as u64)));
        let (status, artifacts, checks, error) = match result {
            Ok(outcome) => {
                let artifacts = write_outcome(dir, name, &outcome, opts.format)?;
                (Status::Completed, artifacts, outcome.checks, None)
            }
            Err(e) => (Status::Failed, vec![], vec![], Some(e)),
        };
        entries.push(ManifestEntry {
            index,
            name: name.clone(),
            kind: spec.kind().to_string(),
            config_hash: exp_hash,
            status,
            started_unix_ms: started,
            finished_unix_ms: now_ms(),
            artifacts,
            checks,
            error: error.as_ref().map(ToString::to_string),
        });
        if let Some(e) = error {
            finish(dir, &hash, opts, entries)?;
            return Err(e);
        }
        // Progress survives an interrupted run.
        RunManifest::new(hash.clone(), opts.seed, opts.format, entries.clone()).save(dir)?;
        executed.push(name.clone());
    }
    let (manifest, summary) = finish(dir, &hash, opts, entries)?;
    Ok(RunReport {
        manifest,
        summary,
        executed,
        skipped,
    })
}
