//! Weighted-particle representation of the target belief and its
//! predict / update / resample cycle.
//!
//! All likelihood math runs in log space with max-subtraction so that
//! hundreds of particles with tiny densities never underflow.

use nalgebra::{Matrix2, Vector2};
use rand::Rng;

use crate::env::{is_inside_fov, OccupancyGrid, SensorConfig};
use crate::models::{obs_log_likelihood, Measurement, NoiseModel, RobotPose, TargetState};

/// Weighted particle set over target states. Weights sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleBelief {
    pub states: Vec<TargetState>,
    pub weights: Vec<f64>,
}

/// Robot pose plus target belief: the state the planner searches over.
#[derive(Clone, Debug)]
pub struct JointBeliefState {
    pub robot: RobotPose,
    pub belief: ParticleBelief,
}

/// What happened during a weight update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateOutcome {
    Normal,
    /// Every particle was inconsistent with the measurement; weights were
    /// reset by the recovery policy.
    DegenerateRecovered,
}

impl ParticleBelief {
    pub fn new(states: Vec<TargetState>, weights: Vec<f64>) -> Self {
        assert!(!states.is_empty(), "belief needs at least one particle");
        assert_eq!(states.len(), weights.len());
        let b = Self { states, weights };
        debug_assert!(b.is_normalized());
        b
    }

    /// Equal weights over the given states.
    pub fn uniform(states: Vec<TargetState>) -> Self {
        let n = states.len();
        assert!(n >= 1);
        Self {
            states,
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        (self.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-9
            && self.weights.iter().all(|w| *w >= 0.0)
    }

    /// Effective sample size, `1 / sum(w^2)`.
    pub fn ess(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Weighted mean of the particle states.
    pub fn mean_estimate(&self) -> TargetState {
        let mut m = Vector2::zeros();
        for (s, w) in self.states.iter().zip(&self.weights) {
            m += s.vector() * *w;
        }
        TargetState::new(m.x, m.y)
    }

    /// Weighted covariance of the particle states.
    pub fn covariance(&self) -> Matrix2<f64> {
        let mean = self.mean_estimate().vector();
        let mut c = Matrix2::zeros();
        for (s, w) in self.states.iter().zip(&self.weights) {
            let d = s.vector() - mean;
            c += d * d.transpose() * *w;
        }
        c
    }
}

/// Forward-predict every particle through the assumed random-walk dynamics
/// with process noise `Q`. Weights are untouched.
pub fn predict<R: Rng + ?Sized>(
    b: &ParticleBelief,
    noise: &NoiseModel,
    rng: &mut R,
) -> ParticleBelief {
    let states = b
        .states
        .iter()
        .map(|s| {
            let eta = noise.sample_process(rng);
            TargetState::new(s.x + eta.x, s.y + eta.y)
        })
        .collect();
    ParticleBelief {
        states,
        weights: b.weights.clone(),
    }
}

/// Reweight particles by an arbitrary per-particle log-likelihood, in log
/// space. Returns `None` when the posterior is degenerate (total weight 0).
pub fn update_with(
    b: &ParticleBelief,
    log_lik: impl Fn(&TargetState) -> f64,
) -> Option<ParticleBelief> {
    let mut logs: Vec<f64> = Vec::with_capacity(b.len());
    let mut max = f64::NEG_INFINITY;
    for (s, w) in b.states.iter().zip(&b.weights) {
        let lw = if *w > 0.0 {
            w.ln() + log_lik(s)
        } else {
            f64::NEG_INFINITY
        };
        if lw > max {
            max = lw;
        }
        logs.push(lw);
    }
    if !max.is_finite() {
        return None;
    }
    let mut weights: Vec<f64> = logs.into_iter().map(|lw| (lw - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Some(ParticleBelief {
        states: b.states.clone(),
        weights,
    })
}

/// Measurement update for the range-bearing sensor. States are unchanged;
/// weights are multiplied by the observation likelihood and re-normalized.
/// `None` signals a degenerate posterior.
pub fn update(
    b: &ParticleBelief,
    z: &Measurement,
    pose: &RobotPose,
    sensor: &SensorConfig,
    map: &OccupancyGrid,
    sigma: &Matrix2<f64>,
) -> Option<ParticleBelief> {
    update_with(b, |s| {
        obs_log_likelihood(z, s, pose, sensor, map, sigma).unwrap_or(f64::NEG_INFINITY)
    })
}

/// Recovery policy for a degenerate posterior.
///
/// An empty measurement that zeroes everything means the belief wrongly
/// sits inside the FOV: reset to uniform weights over the particles
/// outside it (full uniform when none exist). A detection that zeroes
/// everything means the whole belief escaped the FOV while the target is
/// plainly visible: re-anchor the weights toward the measured location by
/// a widened-covariance likelihood, ignoring the FOV gate that produced
/// the zeros.
pub fn recover_degenerate(
    b: &ParticleBelief,
    z: &Measurement,
    pose: &RobotPose,
    sensor: &SensorConfig,
    map: &OccupancyGrid,
    sigma: &Matrix2<f64>,
) -> ParticleBelief {
    if let Measurement::Detection { .. } = z {
        // Widened covariance keeps the re-anchoring soft; the grading of
        // weights toward the detection is what matters, not its scale.
        let wide = sigma * 100.0;
        if let Some(re_anchored) = update_with(b, |s| {
            let (r, bearing) = crate::models::range_bearing(pose, s);
            let (zr, zb) = match z {
                Measurement::Detection { range, bearing } => (*range, *bearing),
                Measurement::Empty => unreachable!(),
            };
            let resid = Vector2::new(zr - r, crate::geom::angle_diff(zb, bearing));
            crate::models::gaussian_log_density(&resid, &wide)
        }) {
            return re_anchored;
        }
    }
    let outside: Vec<bool> = b
        .states
        .iter()
        .map(|s| {
            !map.contains(s.point())
                || !is_inside_fov(pose, s.point(), sensor, map).unwrap_or(false)
        })
        .collect();
    let n_out = outside.iter().filter(|o| **o).count();
    let weights = if n_out > 0 {
        outside
            .iter()
            .map(|o| if *o { 1.0 / n_out as f64 } else { 0.0 })
            .collect()
    } else {
        vec![1.0 / b.len() as f64; b.len()]
    };
    ParticleBelief {
        states: b.states.clone(),
        weights,
    }
}

/// Measurement update with the degenerate-posterior recovery applied.
pub fn update_with_recovery(
    b: &ParticleBelief,
    z: &Measurement,
    pose: &RobotPose,
    sensor: &SensorConfig,
    map: &OccupancyGrid,
    noise: &NoiseModel,
) -> (ParticleBelief, UpdateOutcome) {
    match update(b, z, pose, sensor, map, &noise.sigma) {
        Some(next) => (next, UpdateOutcome::Normal),
        None => (
            recover_degenerate(b, z, pose, sensor, map, &noise.sigma),
            UpdateOutcome::DegenerateRecovered,
        ),
    }
}

/// Source indices chosen by systematic resampling: `n` draws at positions
/// `offset + k/n` against the cumulative weights, `offset` in `[0, 1/n)`.
pub fn systematic_indices(weights: &[f64], n: usize, offset: f64) -> Vec<usize> {
    debug_assert!(offset >= 0.0 && offset < 1.0 / n as f64);
    let mut out = Vec::with_capacity(n);
    let mut cumulative = weights[0];
    let mut idx = 0;
    for k in 0..n {
        let pos = offset + k as f64 / n as f64;
        while pos >= cumulative && idx + 1 < weights.len() {
            idx += 1;
            cumulative += weights[idx];
        }
        out.push(idx);
    }
    out
}

/// Systematic (low-variance) resampling with a single random offset.
/// Preserves the particle count and returns uniform weights.
pub fn resample_low_variance<R: Rng + ?Sized>(b: &ParticleBelief, rng: &mut R) -> ParticleBelief {
    let n = b.len();
    let offset: f64 = rng.gen::<f64>() / n as f64;
    let states = systematic_indices(&b.weights, n, offset)
        .into_iter()
        .map(|i| b.states[i])
        .collect();
    ParticleBelief {
        states,
        weights: vec![1.0 / n as f64; n],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{CellState, SensorKind};
    use crate::geom::Point2;
    use nalgebra::Matrix2;
    use rand::rngs::StdRng;
    use rand::SeedableRng;
    use std::f64::consts::PI;

    fn open_map() -> OccupancyGrid {
        OccupancyGrid::new(120, 120, 0.25, Point2::new(-15.0, -15.0), CellState::Free)
    }

    fn noise(q: f64) -> NoiseModel {
        NoiseModel::new(
            Matrix2::new(q, 0.0, 0.0, q),
            Matrix2::new(0.1, 0.0, 0.0, 0.01),
        )
    }

    #[test]
    fn predict_keeps_weights_and_noiseless_states() {
        let b = ParticleBelief::new(
            vec![TargetState::new(1.0, 2.0), TargetState::new(-1.0, 0.5)],
            vec![0.3, 0.7],
        );
        let nm = noise(1e-18);
        let mut rng = StdRng::seed_from_u64(1);
        let out = predict(&b, &nm, &mut rng);
        assert_eq!(out.weights, b.weights);
        for (a, b) in out.states.iter().zip(&b.states) {
            assert!((a.x - b.x).abs() < 1e-6 && (a.y - b.y).abs() < 1e-6);
        }
    }

    #[test]
    fn predict_cloud_covariance_matches_q() {
        // Replicate one particle many times; the predicted cloud's sample
        // covariance must approach Q.
        let n = 100_000;
        let b = ParticleBelief::uniform(vec![TargetState::new(0.0, 0.0); n]);
        let nm = NoiseModel::new(
            Matrix2::new(0.5, 0.2, 0.2, 0.8),
            Matrix2::new(0.1, 0.0, 0.0, 0.01),
        );
        let mut rng = StdRng::seed_from_u64(5);
        let out = predict(&b, &nm, &mut rng);
        let cov = out.covariance();
        for (a, b) in cov.iter().zip(nm.q.iter()) {
            assert!((a - b).abs() < 0.02, "cov {cov:?}");
        }
    }

    #[test]
    fn update_empty_measurement_outside_fov_keeps_weights() {
        let map = open_map();
        let sensor = SensorConfig::new(6.0, PI / 4.0, SensorKind::Camera);
        let b = ParticleBelief::new(
            vec![TargetState::new(-10.0, 0.0), TargetState::new(-8.0, 3.0)],
            vec![0.4, 0.6],
        );
        let pose = RobotPose::new(0.0, 0.0, 0.0);
        let out = update(
            &b,
            &Measurement::Empty,
            &pose,
            &sensor,
            &map,
            &Matrix2::new(0.1, 0.0, 0.0, 0.01),
        )
        .unwrap();
        assert!((out.weights[0] - 0.4).abs() < 1e-12);
        assert!((out.weights[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn update_empty_measurement_zeroes_in_fov_particle() {
        let map = open_map();
        let sensor = SensorConfig::new(6.0, PI / 4.0, SensorKind::Camera);
        let b = ParticleBelief::new(
            vec![TargetState::new(4.0, 0.0), TargetState::new(-8.0, 0.0)],
            vec![0.5, 0.5],
        );
        let pose = RobotPose::new(0.0, 0.0, 0.0);
        let out = update(
            &b,
            &Measurement::Empty,
            &pose,
            &sensor,
            &map,
            &Matrix2::new(0.1, 0.0, 0.0, 0.01),
        )
        .unwrap();
        assert_eq!(out.weights, vec![0.0, 1.0]);
    }

    #[test]
    fn update_detection_prefers_consistent_particle() {
        // Two particles at ranges 10 and 11, detection at range 10: the
        // posterior ratio is the Gaussian ratio 1 / (1 + e^{-5}).
        let map = open_map();
        let sensor = SensorConfig::new(20.0, PI, SensorKind::Camera);
        let b = ParticleBelief::new(
            vec![TargetState::new(10.0, 0.0), TargetState::new(11.0, 0.0)],
            vec![0.5, 0.5],
        );
        let pose = RobotPose::new(0.0, 0.0, 0.0);
        let out = update(
            &b,
            &Measurement::Detection { range: 10.0, bearing: 0.0 },
            &pose,
            &sensor,
            &map,
            &Matrix2::new(0.1, 0.0, 0.0, 0.01),
        )
        .unwrap();
        let expect = 1.0 / (1.0 + (-5.0f64).exp());
        assert!((out.weights[0] - expect).abs() < 1e-9, "w = {:?}", out.weights);
        assert!((out.weights[0] - 0.9933).abs() < 1e-4);
    }

    #[test]
    fn update_signals_degenerate_posterior() {
        // Empty measurement with every particle in the FOV.
        let map = open_map();
        let sensor = SensorConfig::new(12.0, PI, SensorKind::Camera);
        let b = ParticleBelief::uniform(vec![
            TargetState::new(3.0, 0.0),
            TargetState::new(4.0, 1.0),
        ]);
        let pose = RobotPose::new(0.0, 0.0, 0.0);
        assert!(update(
            &b,
            &Measurement::Empty,
            &pose,
            &sensor,
            &map,
            &Matrix2::new(0.1, 0.0, 0.0, 0.01)
        )
        .is_none());
        let (rec, outcome) = update_with_recovery(
            &b,
            &Measurement::Empty,
            &pose,
            &sensor,
            &map,
            &noise(0.01),
        );
        assert_eq!(outcome, UpdateOutcome::DegenerateRecovered);
        // No particle is outside the FOV, so a full uniform reset.
        assert_eq!(rec.weights, vec![0.5, 0.5]);
    }

    #[test]
    fn recovery_prefers_outside_fov_particles() {
        let map = open_map();
        let sensor = SensorConfig::new(6.0, PI / 4.0, SensorKind::Camera);
        let b = ParticleBelief::new(
            vec![
                TargetState::new(3.0, 0.0),
                TargetState::new(-8.0, 0.0),
                TargetState::new(-9.0, 2.0),
            ],
            vec![1.0, 0.0, 0.0],
        );
        let pose = RobotPose::new(0.0, 0.0, 0.0);
        let rec = recover_degenerate(
            &b,
            &Measurement::Empty,
            &pose,
            &sensor,
            &map,
            &Matrix2::new(0.1, 0.0, 0.0, 0.01),
        );
        assert_eq!(rec.weights, vec![0.0, 0.5, 0.5]);
    }

    #[test]
    fn recovery_on_detection_re_anchors_toward_measurement() {
        // Whole belief outside the FOV, target detected ahead: the particle
        // closest to the detection in measurement space takes the weight.
        let map = open_map();
        let sensor = SensorConfig::new(6.0, PI / 4.0, SensorKind::Camera);
        let b = ParticleBelief::uniform(vec![
            TargetState::new(0.0, 3.0),   // just left of the cone
            TargetState::new(-6.0, -6.0), // far behind
        ]);
        let pose = RobotPose::new(0.0, 0.0, 0.0);
        let z = Measurement::Detection { range: 3.5, bearing: 0.3 };
        assert!(update(&b, &z, &pose, &sensor, &map, &Matrix2::new(0.1, 0.0, 0.0, 0.01)).is_none());
        let rec = recover_degenerate(
            &b,
            &z,
            &pose,
            &sensor,
            &map,
            &Matrix2::new(0.1, 0.0, 0.0, 0.01),
        );
        assert!(
            rec.weights[0] > 0.9,
            "near particle should dominate: {:?}",
            rec.weights
        );
    }

    #[test]
    fn resample_uniform_weights_copies_each_particle_once() {
        let states: Vec<TargetState> =
            (0..8).map(|i| TargetState::new(i as f64, 0.0)).collect();
        let b = ParticleBelief::uniform(states.clone());
        for seed in 0..20 {
            let out = resample_low_variance(&b, &mut StdRng::seed_from_u64(seed));
            assert_eq!(out.states, states);
        }
    }

    #[test]
    fn resample_all_weight_on_one_particle() {
        let b = ParticleBelief::new(
            vec![TargetState::new(1.0, 1.0), TargetState::new(2.0, 2.0)],
            vec![1.0, 0.0],
        );
        let out = resample_low_variance(&b, &mut StdRng::seed_from_u64(4));
        assert!(out.states.iter().all(|s| *s == TargetState::new(1.0, 1.0)));
    }

    #[test]
    fn resample_copy_counts_match_enumeration_oracle() {
        // Weights (0.75, 0.25) with 4 draws: every offset in [0, 1/4)
        // yields exactly 3 copies of particle 0 and 1 copy of particle 1.
        for k in 0..1000 {
            let offset = k as f64 / 1000.0 * 0.25;
            let idx = systematic_indices(&[0.75, 0.25], 4, offset);
            let zeros = idx.iter().filter(|i| **i == 0).count();
            assert_eq!(zeros, 3, "offset {offset}");
            assert_eq!(idx.len() - zeros, 1);
        }
    }

    #[test]
    fn resample_preserves_weighted_mean_over_offsets() {
        // Averaged over a dense enumeration of offsets, the resampled mean
        // equals the weighted mean exactly (systematic resampling is
        // unbiased).
        let b = ParticleBelief::new(
            vec![
                TargetState::new(0.0, 0.0),
                TargetState::new(1.0, 0.0),
                TargetState::new(0.0, 2.0),
                TargetState::new(-3.0, 1.0),
            ],
            vec![0.1, 0.4, 0.3, 0.2],
        );
        let n = b.len();
        let step = 1.0 / n as f64;
        let k = 4000;
        let mut acc = Vector2::zeros();
        for i in 0..k {
            // Mid-point enumeration of the offset interval [0, 1/n).
            let offset = (i as f64 + 0.5) / k as f64 * step;
            let states: Vec<TargetState> = systematic_indices(&b.weights, n, offset)
                .into_iter()
                .map(|j| b.states[j])
                .collect();
            let mean = ParticleBelief::uniform(states).mean_estimate();
            acc += mean.vector();
        }
        let avg = acc / k as f64;
        let want = b.mean_estimate().vector();
        assert!((avg - want).norm() < 1e-9, "avg {avg:?} want {want:?}");
    }

    #[test]
    fn ess_and_mean_basics() {
        let b = ParticleBelief::uniform(vec![
            TargetState::new(0.0, 0.0),
            TargetState::new(2.0, 0.0),
        ]);
        assert!((b.ess() - 2.0).abs() < 1e-12);
        let m = b.mean_estimate();
        assert!((m.x - 1.0).abs() < 1e-12 && m.y.abs() < 1e-12);

        let single = ParticleBelief::new(
            vec![TargetState::new(0.0, 0.0), TargetState::new(2.0, 0.0)],
            vec![1.0, 0.0],
        );
        assert!((single.ess() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn update_keeps_normalization() {
        let map = open_map();
        let sensor = SensorConfig::new(8.0, PI / 2.0, SensorKind::Camera);
        let sigma = Matrix2::new(0.1, 0.0, 0.0, 0.01);
        let mut rng = StdRng::seed_from_u64(2);
        let states: Vec<TargetState> = (0..100)
            .map(|_| {
                TargetState::new(
                    rng.gen::<f64>() * 20.0 - 10.0,
                    rng.gen::<f64>() * 20.0 - 10.0,
                )
            })
            .collect();
        let mut b = ParticleBelief::uniform(states);
        let pose = RobotPose::new(0.0, 0.0, 0.0);
        for step in 0..20 {
            let z = if step % 3 == 0 {
                Measurement::Detection { range: 5.0 + step as f64 * 0.1, bearing: 0.1 }
            } else {
                Measurement::Empty
            };
            if let Some(next) = update(&b, &z, &pose, &sensor, &map, &sigma) {
                b = next;
            }
            assert!(b.is_normalized(), "step {step}");
            b = resample_low_variance(&b, &mut rng);
            assert!(b.is_normalized());
        }
    }
}
