//! CSV and JSON output files. Columns are fixed and versioned; floats are
//! printed with Rust's shortest round-trip formatting so logs can be
//! re-parsed without loss.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::ablate::AblationOutput;
use crate::bench::BenchRow;
use crate::episode::{EpisodeMetrics, Stage, StepRecord};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_file(path: &Path, contents: &str) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(contents.as_bytes())
}

/// Deterministic episode summary. The never-found sentinel for
/// `steps_to_find` is `inf` in CSV and `null` in JSON.
pub fn write_metrics(
    dir: &Path,
    fmt: OutputFormat,
    metrics: &EpisodeMetrics,
) -> std::io::Result<PathBuf> {
    match fmt {
        OutputFormat::Csv => {
            let path = dir.join("metrics.csv");
            let mut s = String::from(
                "version,steps,steps_to_find,t_s,r_los,eps_est,full_rollouts,reuses,degenerate_events,stuck_events\n",
            );
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                SCHEMA_VERSION,
                metrics.steps,
                metrics
                    .steps_to_find
                    .map(|v| v.to_string())
                    .unwrap_or_else(|| "inf".into()),
                opt(metrics.t_s),
                opt(metrics.r_los),
                opt(metrics.eps_est),
                metrics.full_rollouts,
                metrics.reuses,
                metrics.degenerate_events,
                metrics.stuck_events,
            ));
            write_file(&path, &s)?;
            Ok(path)
        }
        OutputFormat::Json => {
            let path = dir.join("metrics.json");
            let doc = json!({
                "version": SCHEMA_VERSION,
                "metrics": metrics,
            });
            write_file(&path, &serde_json::to_string_pretty(&doc)?)?;
            Ok(path)
        }
    }
}

/// Wall-clock planning summary; machine dependent, kept out of the
/// deterministic metrics file.
pub fn write_timing(dir: &Path, metrics: &EpisodeMetrics) -> std::io::Result<PathBuf> {
    let path = dir.join("timing.csv");
    let s = format!(
        "version,plan_ms_mean,plan_ms_median,cycles\n{},{},{},{}\n",
        SCHEMA_VERSION,
        metrics.plan_ms_mean(),
        metrics.plan_ms_median(),
        metrics.plan_times_ms.len(),
    );
    write_file(&path, &s)?;
    Ok(path)
}

/// Per-step trajectory log, always CSV.
pub fn write_trajectory(dir: &Path, records: &[StepRecord]) -> std::io::Result<PathBuf> {
    let path = dir.join("trajectory.csv");
    let mut s = String::from(
        "step,robot_x,robot_y,robot_theta,target_x,target_y,est_x,est_y,detected,meas_range,meas_bearing,stage,horizon,plan_ms,nodes,rollouts,reuses,v,w,degenerate,stuck\n",
    );
    for r in records {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.step,
            r.robot_x,
            r.robot_y,
            r.robot_theta,
            r.target_x,
            r.target_y,
            r.est_x,
            r.est_y,
            r.detected,
            opt(r.meas_range),
            opt(r.meas_bearing),
            match r.stage {
                Stage::Search => "search",
                Stage::Tracking => "tracking",
            },
            r.horizon,
            r.plan_ms,
            r.nodes,
            r.rollouts,
            r.reuses,
            r.v,
            r.w,
            r.degenerate,
            r.stuck,
        ));
    }
    write_file(&path, &s)?;
    Ok(path)
}

pub fn write_ablation(
    dir: &Path,
    fmt: OutputFormat,
    out: &AblationOutput,
) -> std::io::Result<Vec<PathBuf>> {
    match fmt {
        OutputFormat::Csv => {
            let rows_path = dir.join("ablation.csv");
            let mut s = String::from(
                "version,variant,trial,seed,steps_to_find,found,r_los,eps_est,full_rollouts,reuses,plan_ms_mean\n",
            );
            for r in &out.rows {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{}\n",
                    SCHEMA_VERSION,
                    r.variant,
                    r.trial,
                    r.seed,
                    r.steps_to_find
                        .map(|v| v.to_string())
                        .unwrap_or_else(|| "inf".into()),
                    r.found,
                    opt(r.r_los),
                    opt(r.eps_est),
                    r.full_rollouts,
                    r.reuses,
                    r.plan_ms_mean,
                ));
            }
            write_file(&rows_path, &s)?;

            let sum_path = dir.join("ablation_summary.csv");
            let mut s = String::from(
                "version,variant,trials,found,search_steps_mean,search_steps_std,plan_ms_mean,plan_ms_std,full_rollouts_mean,reuses_mean\n",
            );
            for r in &out.summaries {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    SCHEMA_VERSION,
                    r.variant,
                    r.trials,
                    r.found,
                    r.search_steps_mean,
                    r.search_steps_std,
                    r.plan_ms_mean,
                    r.plan_ms_std,
                    r.full_rollouts_mean,
                    r.reuses_mean,
                ));
            }
            write_file(&sum_path, &s)?;
            Ok(vec![rows_path, sum_path])
        }
        OutputFormat::Json => {
            let path = dir.join("ablation.json");
            let doc = json!({
                "version": SCHEMA_VERSION,
                "rows": out.rows,
                "summaries": out.summaries,
            });
            write_file(&path, &serde_json::to_string_pretty(&doc)?)?;
            Ok(vec![path])
        }
    }
}

pub fn write_bench(
    dir: &Path,
    fmt: OutputFormat,
    rows: &[BenchRow],
) -> std::io::Result<PathBuf> {
    match fmt {
        OutputFormat::Csv => {
            let path = dir.join("mi_bench.csv");
            let mut s = String::from(
                "version,estimator,param,param_value,entropy_nats,abs_err_vs_mc,mc_se,wall_time_ns\n",
            );
            for r in rows {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    SCHEMA_VERSION,
                    r.estimator,
                    r.param,
                    r.param_value,
                    r.entropy_nats,
                    opt(r.abs_err_vs_mc),
                    opt(r.mc_se),
                    r.wall_time_ns,
                ));
            }
            write_file(&path, &s)?;
            Ok(path)
        }
        OutputFormat::Json => {
            let path = dir.join("mi_bench.json");
            let doc = json!({
                "version": SCHEMA_VERSION,
                "rows": rows,
            });
            write_file(&path, &serde_json::to_string_pretty(&doc)?)?;
            Ok(path)
        }
    }
}
