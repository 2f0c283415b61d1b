//! Robot and target dynamics plus the intermittent range-bearing
//! observation model.
//!
//! The robot follows a discrete-time unicycle model. The true target
//! dynamics are unknown to the estimator; the filter assumes a random walk
//! with process covariance `Q` (configured, see [`NoiseModel`]), while the
//! simulated ground-truth target is scripted by the harness.

use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{is_inside_fov, GridError, OccupancyGrid, SensorConfig};
use crate::geom::{angle_diff, wrap_angle, Point2};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("control (v={v}, w={w}) violates limits")]
    ControlLimits { v: f64, w: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Robot pose; `theta` is kept normalized in `(-pi, pi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotPose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl RobotPose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// Linear and angular velocity command.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotControl {
    pub v: f64,
    pub w: f64,
}

/// Admissible control box, from configuration.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ControlLimits {
    pub v_min: f64,
    pub v_max: f64,
    pub w_min: f64,
    pub w_max: f64,
}

impl ControlLimits {
    pub fn contains(&self, u: RobotControl) -> bool {
        u.v >= self.v_min && u.v <= self.v_max && u.w >= self.w_min && u.w <= self.w_max
    }

    pub fn check(&self, u: RobotControl) -> Result<RobotControl, ModelError> {
        if self.contains(u) {
            Ok(u)
        } else {
            Err(ModelError::ControlLimits { v: u.v, w: u.w })
        }
    }
}

impl Default for ControlLimits {
    fn default() -> Self {
        Self {
            v_min: 0.0,
            v_max: 3.0,
            w_min: -std::f64::consts::FRAC_PI_3,
            w_max: std::f64::consts::FRAC_PI_3,
        }
    }
}

/// Target position, meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    pub x: f64,
    pub y: f64,
}

impl TargetState {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn point(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn vector(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }
}

/// Process and measurement noise covariances. Both must be symmetric
/// positive definite.
#[derive(Clone, Debug)]
pub struct NoiseModel {
    pub q: Matrix2<f64>,
    pub sigma: Matrix2<f64>,
    q_chol: Matrix2<f64>,
}

impl NoiseModel {
    pub fn new(q: Matrix2<f64>, sigma: Matrix2<f64>) -> Self {
        let q_chol = q
            .cholesky()
            .expect("process covariance Q must be positive definite")
            .l();
        sigma
            .cholesky()
            .expect("measurement covariance must be positive definite");
        Self { q, sigma, q_chol }
    }

    /// One sample of process noise, `N(0, Q)`.
    pub fn sample_process<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector2<f64> {
        let z = Vector2::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal));
        self.q_chol * z
    }
}

/// A camera measurement: either a noisy range-bearing detection or nothing
/// when the target is outside the field of view.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Measurement {
    Detection { range: f64, bearing: f64 },
    Empty,
}

impl Measurement {
    pub fn is_detection(&self) -> bool {
        matches!(self, Measurement::Detection { .. })
    }
}

/// Unicycle step: explicit Euler at interval `dt`, heading re-wrapped.
pub fn step_robot(pose: &RobotPose, u: RobotControl, dt: f64) -> RobotPose {
    debug_assert!(dt > 0.0);
    RobotPose {
        x: pose.x + u.v * pose.theta.cos() * dt,
        y: pose.y + u.v * pose.theta.sin() * dt,
        theta: wrap_angle(pose.theta + u.w * dt),
    }
}

/// Validated unicycle step: rejects controls outside the limits.
pub fn step_robot_checked(
    pose: &RobotPose,
    u: RobotControl,
    dt: f64,
    limits: &ControlLimits,
) -> Result<RobotPose, ModelError> {
    limits.check(u)?;
    Ok(step_robot(pose, u, dt))
}

/// One step of the filter-assumed target model: random walk plus Gaussian
/// process noise.
pub fn step_target_model<R: Rng + ?Sized>(
    s: &TargetState,
    noise: &NoiseModel,
    rng: &mut R,
) -> TargetState {
    let eta = noise.sample_process(rng);
    TargetState::new(s.x + eta.x, s.y + eta.y)
}

/// Noiseless range-bearing observation function.
pub fn range_bearing(pose: &RobotPose, target: &TargetState) -> (f64, f64) {
    let dx = target.x - pose.x;
    let dy = target.y - pose.y;
    (dx.hypot(dy), wrap_angle(dy.atan2(dx) - pose.theta))
}

/// Simulate one camera measurement of the target: `Empty` outside the FOV,
/// otherwise a range-bearing detection corrupted by `N(0, Sigma)` noise.
pub fn observe<R: Rng + ?Sized>(
    pose: &RobotPose,
    target: &TargetState,
    sensor: &SensorConfig,
    map: &OccupancyGrid,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Measurement, ModelError> {
    if !is_inside_fov(pose, target.point(), sensor, map)? {
        return Ok(Measurement::Empty);
    }
    let (r, b) = range_bearing(pose, target);
    let l = noise
        .sigma
        .cholesky()
        .expect("measurement covariance must be positive definite")
        .l();
    let z = Vector2::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal));
    let eps = l * z;
    Ok(Measurement::Detection {
        range: (r + eps.x).max(0.0),
        bearing: wrap_angle(b + eps.y),
    })
}

/// Log-likelihood of a measurement given a hypothetical target position.
///
/// The four cases follow the intermittent observation model: a detection is
/// impossible for a target outside the FOV, and an empty measurement is
/// impossible for a target inside it.
pub fn obs_log_likelihood(
    z: &Measurement,
    target: &TargetState,
    pose: &RobotPose,
    sensor: &SensorConfig,
    map: &OccupancyGrid,
    sigma: &Matrix2<f64>,
) -> Result<f64, ModelError> {
    let in_fov = map.contains(target.point())
        && is_inside_fov(pose, target.point(), sensor, map)?;
    Ok(match (in_fov, z) {
        (false, Measurement::Empty) => 0.0,
        (false, Measurement::Detection { .. }) => f64::NEG_INFINITY,
        (true, Measurement::Empty) => f64::NEG_INFINITY,
        (true, Measurement::Detection { range, bearing }) => {
            let (r, b) = range_bearing(pose, target);
            let resid = Vector2::new(range - r, angle_diff(*bearing, b));
            gaussian_log_density(&resid, sigma)
        }
    })
}

/// Log-density of `N(0, sigma)` evaluated at `resid`.
pub fn gaussian_log_density(resid: &Vector2<f64>, sigma: &Matrix2<f64>) -> f64 {
    let chol = sigma
        .cholesky()
        .expect("measurement covariance must be positive definite");
    let log_det = 2.0 * (chol.l()[(0, 0)].ln() + chol.l()[(1, 1)].ln());
    let y = chol.solve(resid);
    -(2.0 * std::f64::consts::PI).ln() - 0.5 * log_det - 0.5 * resid.dot(&y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{CellState, SensorKind};
    use rand::rngs::StdRng;
    use rand::SeedableRng;
    use std::f64::consts::{FRAC_PI_3, PI};

    fn open_map() -> OccupancyGrid {
        OccupancyGrid::new(
            120,
            120,
            0.25,
            Point2::new(-15.0, -15.0),
            CellState::Free,
        )
    }

    fn noise(q: f64, sr: f64, sb: f64) -> NoiseModel {
        NoiseModel::new(
            Matrix2::new(q, 0.0, 0.0, q),
            Matrix2::new(sr, 0.0, 0.0, sb),
        )
    }

    #[test]
    fn step_robot_straight_at_full_speed() {
        let next = step_robot(
            &RobotPose::new(0.0, 0.0, 0.0),
            RobotControl { v: 3.0, w: 0.0 },
            0.5,
        );
        assert!((next.x - 1.5).abs() < 1e-12);
        assert!(next.y.abs() < 1e-12);
        assert!(next.theta.abs() < 1e-12);
    }

    #[test]
    fn step_robot_identity_on_zero_control() {
        let pose = RobotPose::new(2.0, -3.0, 1.1);
        let next = step_robot(&pose, RobotControl { v: 0.0, w: 0.0 }, 0.5);
        assert_eq!(pose, next);
    }

    #[test]
    fn step_robot_pure_rotation() {
        let next = step_robot(
            &RobotPose::new(0.0, 0.0, 0.0),
            RobotControl { v: 0.0, w: FRAC_PI_3 },
            0.5,
        );
        assert!((next.theta - PI / 6.0).abs() < 1e-12);
        assert!(next.x.abs() < 1e-12 && next.y.abs() < 1e-12);
    }

    #[test]
    fn step_robot_keeps_theta_wrapped_and_bounds_displacement() {
        let mut pose = RobotPose::new(0.0, 0.0, 3.0);
        for i in 0..100 {
            let u = RobotControl {
                v: (i % 4) as f64,
                w: FRAC_PI_3 * if i % 2 == 0 { 1.0 } else { -1.0 },
            };
            let next = step_robot(&pose, u, 0.5);
            assert!(next.theta > -PI && next.theta <= PI);
            let d = pose.position().distance(next.position());
            assert!(d <= 3.0 * 0.5 + 1e-12);
            pose = next;
        }
    }

    #[test]
    fn checked_step_rejects_out_of_limits() {
        let limits = ControlLimits::default();
        let err = step_robot_checked(
            &RobotPose::new(0.0, 0.0, 0.0),
            RobotControl { v: 4.0, w: 0.0 },
            0.5,
            &limits,
        );
        assert!(matches!(err, Err(ModelError::ControlLimits { .. })));
    }

    #[test]
    fn target_model_is_identity_in_noiseless_limit() {
        let nm = noise(1e-18, 0.1, 0.01);
        let mut rng = StdRng::seed_from_u64(3);
        let s = TargetState::new(1.0, -2.0);
        let out = step_target_model(&s, &nm, &mut rng);
        assert!((out.x - s.x).abs() < 1e-6 && (out.y - s.y).abs() < 1e-6);
    }

    #[test]
    fn target_model_is_reproducible_per_seed() {
        let nm = noise(0.5, 0.1, 0.01);
        let s = TargetState::new(0.0, 0.0);
        let a = step_target_model(&s, &nm, &mut StdRng::seed_from_u64(9));
        let b = step_target_model(&s, &nm, &mut StdRng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn target_model_sample_mean_matches_law_of_large_numbers() {
        let nm = noise(1.0, 0.1, 0.01);
        let s = TargetState::new(0.0, 0.0);
        let mut rng = StdRng::seed_from_u64(42);
        let n = 100_000;
        let (mut sx, mut sy) = (0.0, 0.0);
        for _ in 0..n {
            let out = step_target_model(&s, &nm, &mut rng);
            sx += out.x;
            sy += out.y;
        }
        assert!((sx / n as f64).abs() < 0.02);
        assert!((sy / n as f64).abs() < 0.02);
    }

    #[test]
    fn observe_noiseless_straight_ahead() {
        let map = open_map();
        let sensor = SensorConfig::new(12.0, PI / 4.0, SensorKind::Camera);
        let nm = noise(0.01, 1e-18, 1e-18);
        let mut rng = StdRng::seed_from_u64(0);
        let z = observe(
            &RobotPose::new(0.0, 0.0, 0.0),
            &TargetState::new(10.0, 0.0),
            &sensor,
            &map,
            &nm,
            &mut rng,
        )
        .unwrap();
        match z {
            Measurement::Detection { range, bearing } => {
                assert!((range - 10.0).abs() < 1e-6);
                assert!(bearing.abs() < 1e-6);
            }
            Measurement::Empty => panic!("target is in FOV"),
        }
    }

    #[test]
    fn observe_full_circle_sensor_sees_sideways() {
        let map = open_map();
        let sensor = SensorConfig::new(12.0, PI, SensorKind::Camera);
        let nm = noise(0.01, 1e-18, 1e-18);
        let mut rng = StdRng::seed_from_u64(0);
        let z = observe(
            &RobotPose::new(0.0, 0.0, 0.0),
            &TargetState::new(0.0, 10.0),
            &sensor,
            &map,
            &nm,
            &mut rng,
        )
        .unwrap();
        match z {
            Measurement::Detection { range, bearing } => {
                assert!((range - 10.0).abs() < 1e-6);
                assert!((bearing - PI / 2.0).abs() < 1e-6);
            }
            Measurement::Empty => panic!("360-degree sensor sees everything in range"),
        }
    }

    #[test]
    fn observe_returns_empty_behind_robot() {
        let map = open_map();
        let sensor = SensorConfig::new(12.0, PI / 4.0, SensorKind::Camera);
        let nm = noise(0.01, 0.1, 0.01);
        let mut rng = StdRng::seed_from_u64(0);
        let z = observe(
            &RobotPose::new(0.0, 0.0, 0.0),
            &TargetState::new(-5.0, 0.0),
            &sensor,
            &map,
            &nm,
            &mut rng,
        )
        .unwrap();
        assert_eq!(z, Measurement::Empty);
    }

    #[test]
    fn empty_tag_agrees_with_fov_regardless_of_noise() {
        let map = open_map();
        let sensor = SensorConfig::new(6.0, PI / 4.0, SensorKind::Camera);
        let nm = noise(0.01, 0.5, 0.05);
        let mut rng = StdRng::seed_from_u64(7);
        let pose = RobotPose::new(0.0, 0.0, 0.3);
        for i in 0..200 {
            let t = TargetState::new(-12.0 + (i % 25) as f64, -12.0 + (i / 25) as f64 * 3.0);
            let inside = is_inside_fov(&pose, t.point(), &sensor, &map).unwrap();
            let z = observe(&pose, &t, &sensor, &map, &nm, &mut rng).unwrap();
            assert_eq!(z.is_detection(), inside);
        }
    }

    #[test]
    fn log_likelihood_branches() {
        let map = open_map();
        let sensor = SensorConfig::new(12.0, PI / 4.0, SensorKind::Camera);
        let sigma = Matrix2::new(0.1, 0.0, 0.0, 0.01);
        let pose = RobotPose::new(0.0, 0.0, 0.0);
        let inside = TargetState::new(5.0, 0.0);
        let outside = TargetState::new(-5.0, 0.0);

        // Outside FOV, empty measurement: probability one.
        assert_eq!(
            obs_log_likelihood(&Measurement::Empty, &outside, &pose, &sensor, &map, &sigma)
                .unwrap(),
            0.0
        );
        // Impossible pairings.
        assert_eq!(
            obs_log_likelihood(&Measurement::Empty, &inside, &pose, &sensor, &map, &sigma)
                .unwrap(),
            f64::NEG_INFINITY
        );
        assert_eq!(
            obs_log_likelihood(
                &Measurement::Detection { range: 5.0, bearing: 0.0 },
                &outside,
                &pose,
                &sensor,
                &map,
                &sigma
            )
            .unwrap(),
            f64::NEG_INFINITY
        );
        // Detection at the exact mean: closed-form Gaussian peak density.
        let ll = obs_log_likelihood(
            &Measurement::Detection { range: 5.0, bearing: 0.0 },
            &inside,
            &pose,
            &sensor,
            &map,
            &sigma,
        )
        .unwrap();
        let expect = -(2.0 * PI).ln() - 0.5 * (0.001f64).ln();
        assert!((ll - expect).abs() < 1e-9);
        assert!((ll - 1.6160).abs() < 1e-4);
    }

    #[test]
    fn likelihood_integrates_to_one() {
        // Monte Carlo quadrature of exp(log-likelihood) over measurement
        // space plus the empty atom, for a fixed in-FOV target.
        let map = open_map();
        let sensor = SensorConfig::new(12.0, PI / 4.0, SensorKind::Camera);
        let sigma = Matrix2::new(0.02, 0.0, 0.0, 0.004);
        let pose = RobotPose::new(0.0, 0.0, 0.0);
        let target = TargetState::new(6.0, 0.5);
        let (r0, b0) = range_bearing(&pose, &target);
        // Uniform box around the mean, wide enough to capture all mass.
        let (rw, bw) = (12.0 * 0.02f64.sqrt(), 12.0 * 0.004f64.sqrt());
        let mut rng = StdRng::seed_from_u64(11);
        let n = 200_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let r = r0 + (rng.gen::<f64>() - 0.5) * rw;
            let b = b0 + (rng.gen::<f64>() - 0.5) * bw;
            let ll = obs_log_likelihood(
                &Measurement::Detection { range: r, bearing: b },
                &target,
                &pose,
                &sensor,
                &map,
                &sigma,
            )
            .unwrap();
            acc += ll.exp();
        }
        let integral = acc / n as f64 * rw * bw;
        assert!(
            (integral - 1.0).abs() < 0.01,
            "density integral = {integral}"
        );
        // The empty atom contributes probability zero for an in-FOV target.
        assert_eq!(
            obs_log_likelihood(&Measurement::Empty, &target, &pose, &sensor, &map, &sigma)
                .unwrap(),
            f64::NEG_INFINITY
        );
    }
}
