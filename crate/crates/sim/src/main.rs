//! `sat`: run scenarios, ablations, and entropy benchmarks from the
//! command line.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration
//! error. Failures print a machine-readable JSON object on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use sat_sim::ablate::{run_ablation, Variant};
use sat_sim::bench::{run_mi_bench, Estimator, SweepKind};
use sat_sim::episode::run_with_reference;
use sat_sim::report::{self, OutputFormat};
use sat_sim::scenario::{Scenario, ScenarioConfig, ScenarioError};

#[derive(Parser)]
#[command(name = "sat", version, about = "Probabilistic target search and tracking simulator")]
struct Cli {
    /// Override the scenario's random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for result files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Output format for metrics and tables.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one closed-loop episode and write metrics + trajectory.
    Run { scenario: PathBuf },
    /// Run ablation variants over shared seeds.
    Ablate {
        scenario: PathBuf,
        /// Comma-separated subset of: van, van+r, van+h, full.
        #[arg(long, value_delimiter = ',', default_values_t = ["van".to_string(), "van+r".to_string(), "van+h".to_string(), "full".to_string()])]
        variants: Vec<String>,
        #[arg(long, default_value_t = 3)]
        trials: usize,
    },
    /// Sweep the entropy estimators against the Monte Carlo oracle.
    BenchMi {
        /// Sweep parameter: alpha (particle dispersion) or beta (sensor noise).
        #[arg(long)]
        sweep: String,
        #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5, 1.0, 2.0, 4.0])]
        values: Vec<f64>,
        /// Comma-separated subset of: sp, sp-s, sp-st, mc.
        #[arg(long, value_delimiter = ',', default_values_t = ["sp".to_string(), "sp-s".to_string(), "sp-st".to_string(), "mc".to_string()])]
        estimators: Vec<String>,
        #[arg(long, default_value_t = 500)]
        particles: usize,
        #[arg(long, default_value_t = 1_000_000)]
        mc_samples: usize,
    },
    /// Check a scenario file without running it.
    Validate { scenario: PathBuf },
}

fn fail(code: u8, msg: &str) -> ExitCode {
    eprintln!("{}", json!({ "error": msg }));
    ExitCode::from(code)
}

fn load_scenario(path: &Path, seed: Option<u64>) -> Result<Scenario, ScenarioError> {
    let mut cfg = ScenarioConfig::from_path(path)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    cfg.load(base)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => fail(2, &msg),
        Err(CliError::Runtime(msg)) => fail(1, &msg),
    }
}

enum CliError {
    Config(String),
    Runtime(String),
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Run { scenario } => {
            let scn = load_scenario(&scenario, cli.seed)?;
            let out = run_with_reference(&scn)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            let metrics_path = report::write_metrics(&cli.out, cli.format, &out.metrics)?;
            let traj_path = report::write_trajectory(&cli.out, &out.records)?;
            let timing_path = report::write_timing(&cli.out, &out.metrics)?;
            println!(
                "wrote {}, {}, {}",
                metrics_path.display(),
                traj_path.display(),
                timing_path.display()
            );
            Ok(())
        }
        Cmd::Ablate {
            scenario,
            variants,
            trials,
        } => {
            if trials < 1 {
                return Err(CliError::Config("trials must be >= 1".into()));
            }
            let parsed: Result<Vec<Variant>, String> = variants
                .iter()
                .map(|v| Variant::parse(v).ok_or_else(|| format!("unknown variant {v:?}")))
                .collect();
            let parsed = parsed.map_err(CliError::Config)?;
            let scn = load_scenario(&scenario, cli.seed)?;
            let out = run_ablation(&scn, &parsed, trials)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            let paths = report::write_ablation(&cli.out, cli.format, &out)?;
            for p in paths {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
        Cmd::BenchMi {
            sweep,
            values,
            estimators,
            particles,
            mc_samples,
        } => {
            let kind = SweepKind::parse(&sweep)
                .ok_or_else(|| CliError::Config(format!("unknown sweep {sweep:?}")))?;
            if values.is_empty() {
                return Err(CliError::Config("sweep values must be nonempty".into()));
            }
            let parsed: Result<Vec<Estimator>, String> = estimators
                .iter()
                .filter(|s| !s.is_empty())
                .map(|s| Estimator::parse(s).ok_or_else(|| format!("unknown estimator {s:?}")))
                .collect();
            let parsed = parsed.map_err(CliError::Config)?;
            let rows = run_mi_bench(
                kind,
                &values,
                &parsed,
                particles,
                cli.seed.unwrap_or(0),
                mc_samples,
            );
            let path = report::write_bench(&cli.out, cli.format, &rows)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Cmd::Validate { scenario } => {
            load_scenario(&scenario, cli.seed)?;
            Ok(())
        }
    }
}
