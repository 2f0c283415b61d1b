//! Entropy-estimator benchmark: sweep particle dispersion or sensor noise
//! and compare the sigma-point estimator and its simplified / truncated
//! variants against the Monte Carlo oracle.

use std::time::{Duration, Instant};

use nalgebra::Matrix2;
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use sat_core::belief::{JointBeliefState, ParticleBelief};
use sat_core::env::{CellState, OccupancyGrid, SensorConfig, SensorKind};
use sat_core::geom::Point2;
use sat_core::mi::{mc_entropy, predict_gmm, sp_entropy, MiConfig, PredictedGmm};
use sat_core::models::{NoiseModel, RobotControl, RobotPose, TargetState};

/// Which quantity the sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepKind {
    /// Particle dispersion: particles from `N([10, 0], alpha * I)`,
    /// sensor noise fixed at `diag(0.1, 0.01)`.
    Dispersion,
    /// Sensor noise scale: particles from `N([10, 0], I)`, sensor noise
    /// `beta * diag(0.1, 0.01)`.
    Noise,
}

impl SweepKind {
    pub fn param_name(&self) -> &'static str {
        match self {
            SweepKind::Dispersion => "alpha",
            SweepKind::Noise => "beta",
        }
    }

    pub fn parse(s: &str) -> Option<SweepKind> {
        match s.to_ascii_lowercase().as_str() {
            "alpha" | "dispersion" => Some(SweepKind::Dispersion),
            "beta" | "noise" => Some(SweepKind::Noise),
            _ => None,
        }
    }
}

/// Estimators the benchmark can evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Estimator {
    Sp,
    SpS,
    SpSt,
    Mc,
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Sp => "sp",
            Estimator::SpS => "sp-s",
            Estimator::SpSt => "sp-st",
            Estimator::Mc => "mc",
        }
    }

    pub fn parse(s: &str) -> Option<Estimator> {
        match s.to_ascii_lowercase().as_str() {
            "sp" => Some(Estimator::Sp),
            "sp-s" | "sps" => Some(Estimator::SpS),
            "sp-st" | "spst" => Some(Estimator::SpSt),
            "mc" => Some(Estimator::Mc),
            _ => None,
        }
    }
}

/// One benchmark measurement.
#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub estimator: &'static str,
    pub param: &'static str,
    pub param_value: f64,
    pub entropy_nats: f64,
    pub abs_err_vs_mc: Option<f64>,
    pub mc_se: Option<f64>,
    pub wall_time_ns: u128,
}

/// One sweep point with everything needed to evaluate any estimator.
pub struct BenchPoint {
    pub kind: SweepKind,
    pub param: f64,
    pub belief: ParticleBelief,
    pub sigma: Matrix2<f64>,
    /// Fine-grid cell: half the smallest noise scale mapped to state space.
    pub simplify_cell: f64,
    /// Truncation radius: five times the largest mapped noise scale.
    pub truncation_radius: f64,
}

/// Nominal range of the benchmark's particle cloud center.
const NOMINAL_RANGE: f64 = 10.0;

impl BenchPoint {
    /// Build the sweep point: 500 (or `n`) particles around `[10, 0]`.
    pub fn new(kind: SweepKind, param: f64, n_particles: usize, seed: u64) -> Self {
        let (alpha, beta) = match kind {
            SweepKind::Dispersion => (param, 1.0),
            SweepKind::Noise => (1.0, param),
        };
        let mut rng = StdRng::seed_from_u64(seed);
        let spread = Normal::new(0.0, alpha.sqrt()).unwrap();
        let states: Vec<TargetState> = (0..n_particles)
            .map(|_| {
                TargetState::new(
                    NOMINAL_RANGE + spread.sample(&mut rng),
                    spread.sample(&mut rng),
                )
            })
            .collect();
        let sigma = Matrix2::new(0.1 * beta, 0.0, 0.0, 0.01 * beta);
        // Noise scales in state space: radial sigma_r, lateral r * sigma_b.
        let sigma_r = (0.1 * beta).sqrt();
        let lateral = NOMINAL_RANGE * (0.01 * beta).sqrt();
        Self {
            kind,
            param,
            belief: ParticleBelief::uniform(states),
            sigma,
            simplify_cell: 0.5 * sigma_r.min(lateral),
            truncation_radius: 5.0 * sigma_r.max(lateral),
        }
    }

    fn world_map(&self) -> OccupancyGrid {
        OccupancyGrid::new(240, 240, 1.0, Point2::new(-120.0, -120.0), CellState::Free)
    }

    fn sensor(&self) -> SensorConfig {
        SensorConfig::new(200.0, std::f64::consts::PI, SensorKind::Camera)
    }

    fn noise(&self) -> NoiseModel {
        NoiseModel::new(Matrix2::new(0.01, 0.0, 0.0, 0.01), self.sigma)
    }

    fn mi_config(&self, estimator: Estimator) -> MiConfig {
        MiConfig {
            lambda: 2.0,
            simplify_cell: match estimator {
                Estimator::SpS | Estimator::SpSt => self.simplify_cell,
                _ => 0.0,
            },
            truncation_radius: match estimator {
                Estimator::SpSt => self.truncation_radius,
                _ => f64::INFINITY,
            },
            fold_process_noise: false,
        }
    }

    /// The predicted measurement mixture for a belief (optionally
    /// simplified) observed by the benchmark sensor from the origin.
    pub fn gmm(&self, cfg: &MiConfig) -> PredictedGmm {
        let map = self.world_map();
        let sensor = self.sensor();
        let noise = self.noise();
        let belief = if cfg.simplify_cell > 0.0 {
            sat_core::mi::simplify_particles(&self.belief, cfg.simplify_cell)
        } else {
            self.belief.clone()
        };
        let state = JointBeliefState {
            robot: RobotPose::new(0.0, 0.0, 0.0),
            belief,
        };
        predict_gmm(
            &state,
            RobotControl { v: 0.0, w: 0.0 },
            0.5,
            &sensor,
            &map,
            &noise,
            false,
        )
    }

    /// Evaluate one estimator, timing the full pipeline (simplification,
    /// mixture construction, entropy).
    pub fn evaluate(&self, estimator: Estimator, mc_samples: usize, mc_seed: u64) -> (f64, Option<f64>, Duration) {
        let start = Instant::now();
        match estimator {
            Estimator::Mc => {
                let g = self.gmm(&self.mi_config(Estimator::Sp));
                let mc = mc_entropy(&g, mc_samples, &mut StdRng::seed_from_u64(mc_seed))
                    .expect("benchmark mixtures are valid");
                (mc.entropy, Some(mc.std_err), start.elapsed())
            }
            _ => {
                let cfg = self.mi_config(estimator);
                let g = self.gmm(&cfg);
                let h = sp_entropy(&g, &cfg).expect("benchmark mixtures are valid");
                (h, None, start.elapsed())
            }
        }
    }
}

/// Run the sweep and emit one row per (point, estimator), plus the MC
/// reference used for the error column.
pub fn run_mi_bench(
    kind: SweepKind,
    values: &[f64],
    estimators: &[Estimator],
    n_particles: usize,
    seed: u64,
    mc_samples: usize,
) -> Vec<BenchRow> {
    let mut rows = Vec::new();
    for (i, &value) in values.iter().enumerate() {
        let point = BenchPoint::new(kind, value, n_particles, seed.wrapping_add(i as u64));
        // The MC reference is always computed (it anchors the error
        // column), but only reported as a row when requested.
        let (mc_h, mc_se, mc_wall) = point.evaluate(Estimator::Mc, mc_samples, seed ^ 0x5eed);
        for est in estimators {
            match est {
                Estimator::Mc => rows.push(BenchRow {
                    estimator: "mc",
                    param: kind.param_name(),
                    param_value: value,
                    entropy_nats: mc_h,
                    abs_err_vs_mc: Some(0.0),
                    mc_se,
                    wall_time_ns: mc_wall.as_nanos(),
                }),
                _ => {
                    let (h, _, wall) = point.evaluate(*est, mc_samples, 0);
                    rows.push(BenchRow {
                        estimator: est.name(),
                        param: kind.param_name(),
                        param_value: value,
                        entropy_nats: h,
                        abs_err_vs_mc: Some((h - mc_h).abs()),
                        mc_se,
                        wall_time_ns: wall.as_nanos(),
                    });
                }
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_point_builds_full_fov_mixture() {
        let p = BenchPoint::new(SweepKind::Dispersion, 1.0, 200, 9);
        let g = p.gmm(&p.mi_config(Estimator::Sp));
        assert_eq!(g.components(), 200);
        assert!(g.p_empty() < 1e-12);
    }

    #[test]
    fn simplified_mixture_is_smaller_when_clustered() {
        let p = BenchPoint::new(SweepKind::Dispersion, 0.25, 500, 9);
        let plain = p.gmm(&p.mi_config(Estimator::Sp));
        let simplified = p.gmm(&p.mi_config(Estimator::SpS));
        assert!(simplified.components() < plain.components());
        assert!(simplified.components() > 0);
    }

    #[test]
    fn estimators_agree_at_moderate_dispersion() {
        let p = BenchPoint::new(SweepKind::Dispersion, 1.0, 300, 4);
        let (sp, _, _) = p.evaluate(Estimator::Sp, 0, 0);
        let (sps, _, _) = p.evaluate(Estimator::SpS, 0, 0);
        let (spst, _, _) = p.evaluate(Estimator::SpSt, 0, 0);
        let (mc, se, _) = p.evaluate(Estimator::Mc, 150_000, 11);
        let se = se.unwrap();
        assert!((sp - mc).abs() < 3.0 * se + 0.01, "sp {sp} mc {mc} se {se}");
        assert!((sps - sp).abs() < 0.05, "sp-s {sps} vs sp {sp}");
        assert!((spst - sp).abs() < 0.05, "sp-st {spst} vs sp {sp}");
    }

    #[test]
    fn empty_estimator_list_yields_no_rows() {
        let rows = run_mi_bench(SweepKind::Noise, &[1.0], &[], 50, 0, 1000);
        assert!(rows.is_empty());
    }

    #[test]
    fn rows_carry_sweep_metadata() {
        let rows = run_mi_bench(
            SweepKind::Noise,
            &[0.5, 1.0],
            &[Estimator::Sp, Estimator::Mc],
            80,
            3,
            20_000,
        );
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.param == "beta"));
        let sp_rows: Vec<&BenchRow> = rows.iter().filter(|r| r.estimator == "sp").collect();
        assert_eq!(sp_rows.len(), 2);
        for r in sp_rows {
            assert!(r.abs_err_vs_mc.unwrap() < 0.05);
        }
    }
}
