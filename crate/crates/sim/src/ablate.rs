//! Ablation harness: run the planner variants over shared seeds and
//! tabulate search time, planning effort, and wall time.

use rayon::prelude::*;
use serde::Serialize;

use crate::episode::{run_episode, PlannerMode};
use crate::scenario::{Scenario, ScenarioError};

/// The four ablation configurations: vanilla tree search, plus recycling,
/// plus hierarchy, and the full stack.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Variant {
    Van,
    VanR,
    VanH,
    Full,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Van, Variant::VanR, Variant::VanH, Variant::Full];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Van => "van",
            Variant::VanR => "van+r",
            Variant::VanH => "van+h",
            Variant::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        match s.to_ascii_lowercase().as_str() {
            "van" => Some(Variant::Van),
            "van+r" | "van-r" | "vanr" => Some(Variant::VanR),
            "van+h" | "van-h" | "vanh" => Some(Variant::VanH),
            "full" => Some(Variant::Full),
            _ => None,
        }
    }

    pub fn hierarchy(&self) -> bool {
        matches!(self, Variant::VanH | Variant::Full)
    }

    pub fn recycling(&self) -> bool {
        matches!(self, Variant::VanR | Variant::Full)
    }
}

/// One episode's row in the ablation table.
#[derive(Clone, Debug, Serialize)]
pub struct AblationRow {
    pub variant: &'static str,
    pub trial: usize,
    pub seed: u64,
    pub steps_to_find: Option<usize>,
    pub found: bool,
    pub r_los: Option<f64>,
    pub eps_est: Option<f64>,
    pub full_rollouts: usize,
    pub reuses: usize,
    pub plan_ms_mean: f64,
}

/// Mean and standard deviation per variant, in the shape of the ablation
/// comparison: search steps (cap-filled when not found) and plan time.
#[derive(Clone, Debug, Serialize)]
pub struct AblationSummary {
    pub variant: &'static str,
    pub trials: usize,
    pub found: usize,
    pub search_steps_mean: f64,
    pub search_steps_std: f64,
    pub plan_ms_mean: f64,
    pub plan_ms_std: f64,
    pub full_rollouts_mean: f64,
    pub reuses_mean: f64,
}

pub struct AblationOutput {
    pub rows: Vec<AblationRow>,
    pub summaries: Vec<AblationSummary>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Run `trials` episodes per variant over shared seeds `seed + t`.
/// Episodes are independent, so they run in parallel; the output order is
/// fixed regardless of the thread count.
pub fn run_ablation(
    base: &Scenario,
    variants: &[Variant],
    trials: usize,
) -> Result<AblationOutput, ScenarioError> {
    assert!(trials >= 1);
    let jobs: Vec<(Variant, usize)> = variants
        .iter()
        .flat_map(|v| (0..trials).map(move |t| (*v, t)))
        .collect();
    let results: Vec<Result<AblationRow, ScenarioError>> = jobs
        .par_iter()
        .map(|(variant, trial)| {
            let mut cfg = base.config.clone();
            cfg.seed = base.config.seed + *trial as u64;
            cfg.ablation.hierarchy = variant.hierarchy();
            cfg.ablation.recycling = variant.recycling();
            let scn = base.with_config(cfg)?;
            let out = run_episode(&scn, PlannerMode::Tree)?;
            Ok(AblationRow {
                variant: variant.name(),
                trial: *trial,
                seed: scn.config.seed,
                steps_to_find: out.metrics.steps_to_find,
                found: out.metrics.steps_to_find.is_some(),
                r_los: out.metrics.r_los,
                eps_est: out.metrics.eps_est,
                full_rollouts: out.metrics.full_rollouts,
                reuses: out.metrics.reuses,
                plan_ms_mean: out.metrics.plan_ms_mean(),
            })
        })
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        rows.push(r?);
    }

    let cap = base.config.steps;
    let mut summaries = Vec::new();
    for variant in variants {
        let vrows: Vec<&AblationRow> = rows.iter().filter(|r| r.variant == variant.name()).collect();
        let steps: Vec<f64> = vrows
            .iter()
            .map(|r| r.steps_to_find.unwrap_or(cap) as f64)
            .collect();
        let times: Vec<f64> = vrows.iter().map(|r| r.plan_ms_mean).collect();
        let (sm, ss) = mean_std(&steps);
        let (tm, ts) = mean_std(&times);
        summaries.push(AblationSummary {
            variant: variant.name(),
            trials: vrows.len(),
            found: vrows.iter().filter(|r| r.found).count(),
            search_steps_mean: sm,
            search_steps_std: ss,
            plan_ms_mean: tm,
            plan_ms_std: ts,
            full_rollouts_mean: vrows.iter().map(|r| r.full_rollouts as f64).sum::<f64>()
                / vrows.len().max(1) as f64,
            reuses_mean: vrows.iter().map(|r| r.reuses as f64).sum::<f64>()
                / vrows.len().max(1) as f64,
        });
    }
    Ok(AblationOutput { rows, summaries })
}
