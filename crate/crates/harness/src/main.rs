use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use freelab::acceptance::run_all;
use freelab::{run, Format, HarnessError, RunConfig, RunOptions};

/// Exit status when every experiment ran but an acceptance check failed.
const CHECK_FAILURE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "freelab",
    version,
    about = "Run freelab experiments and the acceptance suite"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments of a JSON configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Master seed; overrides the configuration.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "FREELAB_OUT_DIR")]
        out_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Comma-separated experiment names to (re)run.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<String>>,
    },
    /// Run the acceptance criteria and print one line per criterion.
    Acceptance {
        #[arg(long, env = "FREELAB_OUT_DIR")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Comma-separated criterion ids.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
}

fn execute(cli: Cli) -> Result<bool, HarnessError> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out_dir,
            threads,
            format,
            only,
        } => {
            let cfg = RunConfig::load(&config)?;
            let seed = seed.or(cfg.seed).ok_or_else(|| {
                HarnessError::Config(
                    "no seed: pass --seed or set \"seed\" in the configuration".into(),
                )
            })?;
            let out_dir = out_dir.or_else(|| cfg.out_dir.clone()).ok_or_else(|| {
                HarnessError::Config(
                    "no output directory: pass --out-dir, set FREELAB_OUT_DIR or \"out_dir\""
                        .into(),
                )
            })?;
            let report = run(
                &cfg,
                &RunOptions {
                    seed,
                    out_dir: out_dir.clone(),
                    threads,
                    format,
                    only,
                },
            )?;
            for e in &report.summary.experiments {
                for c in &e.checks {
                    println!(
                        "{} {}: measured={:.6e} target={} tol={} {}",
                        e.name,
                        c.id,
                        c.measured,
                        c.target,
                        c.tolerance,
                        if c.pass { "pass" } else { "FAIL" }
                    );
                }
            }
            println!(
                "{} executed, {} reused, results in {}",
                report.executed.len(),
                report.skipped.len(),
                out_dir.display()
            );
            Ok(report.summary.all_passed)
        }
        Command::Acceptance {
            out_dir,
            threads,
            only,
        } => {
            let summary = run_all(&out_dir, threads, &only, |r| println!("{}", r.line()))?;
            let passed = summary.criteria.iter().filter(|c| c.passed()).count();
            println!("{passed}/{} criteria passed", summary.criteria.len());
            Ok(summary.all_passed)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(CHECK_FAILURE),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
