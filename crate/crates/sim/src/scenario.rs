//! Scenario files: the JSON schema, validation, and conversion into the
//! core types an episode needs.

use std::path::{Path, PathBuf};

use nalgebra::Matrix2;
use rand::rngs::StdRng;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use sat_core::belief::ParticleBelief;
use sat_core::env::{CellState, OccupancyGrid, SensorConfig, SensorKind};
use sat_core::geom::Point2;
use sat_core::hierarchy::HierarchyConfig;
use sat_core::mi::MiConfig;
use sat_core::models::{ControlLimits, NoiseModel, RobotControl, TargetState};
use sat_core::planner::PlannerConfig;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid map: {0}")]
    Map(#[from] sat_core::env::GridError),
    #[error("scenario validation failed: {0}")]
    Invalid(String),
}

fn default_dt() -> f64 {
    0.5
}
fn default_particles() -> usize {
    500
}
fn default_steps() -> usize {
    200
}
fn default_robot_radius() -> f64 {
    0.3
}
fn default_speed() -> f64 {
    0.5
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PoseSpec {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub theta: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointSpec {
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TargetSpec {
    pub start: PointSpec,
    #[serde(default)]
    pub waypoints: Vec<PointSpec>,
    #[serde(default = "default_speed")]
    pub speed: f64,
    #[serde(default)]
    pub jitter_std: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GmmComponentSpec {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
    pub weight: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InitialBeliefSpec {
    pub components: Vec<GmmComponentSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub q: [[f64; 2]; 2],
    pub sigma: [[f64; 2]; 2],
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            q: [[0.01, 0.0], [0.0, 0.01]],
            sigma: [[0.1, 0.0], [0.0, 0.01]],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SensorSpec {
    pub max_range: f64,
    pub half_angle: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            max_range: 6.0,
            half_angle: std::f64::consts::FRAC_PI_4,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LimitsSpec {
    pub v_min: f64,
    pub v_max: f64,
    pub w_min: f64,
    pub w_max: f64,
}

impl Default for LimitsSpec {
    fn default() -> Self {
        let l = ControlLimits::default();
        Self {
            v_min: l.v_min,
            v_max: l.v_max,
            w_min: l.w_min,
            w_max: l.w_max,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlannerSpec {
    #[serde(default = "PlannerSpec::default_max_nodes")]
    pub max_nodes: usize,
    #[serde(default = "PlannerSpec::default_horizon_search")]
    pub horizon_search: usize,
    #[serde(default = "PlannerSpec::default_horizon_track")]
    pub horizon_track: usize,
    #[serde(default = "PlannerSpec::default_gamma")]
    pub gamma: f64,
    #[serde(default = "PlannerSpec::default_c_ucb")]
    pub c_ucb: f64,
    #[serde(default = "PlannerSpec::default_d_thr")]
    pub d_thr: f64,
    #[serde(default = "PlannerSpec::default_o_thr")]
    pub o_thr: f64,
    #[serde(default = "PlannerSpec::default_pw_k")]
    pub pw_k: f64,
    #[serde(default = "PlannerSpec::default_pw_alpha")]
    pub pw_alpha: f64,
    /// Motion primitives: the cross product of these lists.
    #[serde(default = "PlannerSpec::default_velocities")]
    pub velocities: Vec<f64>,
    #[serde(default = "PlannerSpec::default_turn_rates")]
    pub turn_rates: Vec<f64>,
}

impl PlannerSpec {
    fn default_max_nodes() -> usize {
        100
    }
    fn default_horizon_search() -> usize {
        10
    }
    fn default_horizon_track() -> usize {
        5
    }
    fn default_gamma() -> f64 {
        0.95
    }
    fn default_c_ucb() -> f64 {
        std::f64::consts::SQRT_2
    }
    fn default_d_thr() -> f64 {
        0.375
    }
    fn default_o_thr() -> f64 {
        0.1
    }
    fn default_pw_k() -> f64 {
        1.0
    }
    fn default_pw_alpha() -> f64 {
        0.5
    }
    fn default_velocities() -> Vec<f64> {
        vec![0.0, 1.5, 3.0]
    }
    fn default_turn_rates() -> Vec<f64> {
        vec![
            -std::f64::consts::FRAC_PI_3,
            0.0,
            std::f64::consts::FRAC_PI_3,
        ]
    }
}

impl Default for PlannerSpec {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HierarchySpec {
    #[serde(default = "HierarchySpec::default_coarse")]
    pub coarse_cell: f64,
    #[serde(default = "HierarchySpec::default_fine")]
    pub fine_cell: f64,
    #[serde(default = "HierarchySpec::default_min_mass")]
    pub min_waypoint_mass: f64,
}

impl HierarchySpec {
    fn default_coarse() -> f64 {
        10.0
    }
    fn default_fine() -> f64 {
        1.0
    }
    fn default_min_mass() -> f64 {
        0.1
    }
}

impl Default for HierarchySpec {
    fn default() -> Self {
        Self {
            coarse_cell: 10.0,
            fine_cell: 1.0,
            min_waypoint_mass: 0.1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MiSpec {
    #[serde(default = "MiSpec::default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub simplify_cell: f64,
    /// `null` disables truncation.
    #[serde(default)]
    pub truncation_radius: Option<f64>,
    #[serde(default)]
    pub fold_process_noise: bool,
}

impl MiSpec {
    fn default_lambda() -> f64 {
        2.0
    }
}

impl Default for MiSpec {
    fn default() -> Self {
        Self {
            lambda: 2.0,
            simplify_cell: 0.0,
            truncation_radius: None,
            fold_process_noise: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AblationSpec {
    #[serde(default = "default_true")]
    pub hierarchy: bool,
    #[serde(default = "default_true")]
    pub recycling: bool,
}

impl Default for AblationSpec {
    fn default() -> Self {
        Self {
            hierarchy: true,
            recycling: true,
        }
    }
}

/// A full scenario file. Unknown keys are rejected so typos fail loudly.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub map: PathBuf,
    pub robot: PoseSpec,
    pub target: TargetSpec,
    pub initial_belief: InitialBeliefSpec,
    #[serde(default = "default_particles")]
    pub particles: usize,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub camera: SensorSpec,
    #[serde(default)]
    pub lidar: SensorSpec,
    #[serde(default)]
    pub limits: LimitsSpec,
    #[serde(default)]
    pub planner: PlannerSpec,
    #[serde(default)]
    pub hierarchy: HierarchySpec,
    #[serde(default)]
    pub mi: MiSpec,
    #[serde(default)]
    pub ablation: AblationSpec,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_robot_radius")]
    pub robot_radius: f64,
    #[serde(default)]
    pub stop_on_find: bool,
    /// Baseline for the search-time difference metric; `"nbv"` runs the
    /// greedy depth-1 planner on the same seed.
    #[serde(default)]
    pub ts_reference: Option<String>,
}

/// Scenario with its map loaded and core configs materialized.
#[derive(Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub truth: OccupancyGrid,
    pub camera: SensorConfig,
    pub lidar: SensorConfig,
    pub noise: NoiseModel,
    pub limits: ControlLimits,
    pub planner: PlannerConfig,
    pub hierarchy: HierarchyConfig,
    pub mi: MiConfig,
}

fn matrix(a: [[f64; 2]; 2]) -> Matrix2<f64> {
    Matrix2::new(a[0][0], a[0][1], a[1][0], a[1][1])
}

fn check_spd(a: &Matrix2<f64>, what: &str) -> Result<(), ScenarioError> {
    if (a[(0, 1)] - a[(1, 0)]).abs() > 1e-12 || a.cholesky().is_none() {
        return Err(ScenarioError::Invalid(format!(
            "{what} must be symmetric positive definite"
        )));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn from_path(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Resolve the map path, load it, validate everything, and build the
    /// core configuration types. `base` anchors relative map paths (the
    /// scenario file's directory).
    pub fn load(self, base: &Path) -> Result<Scenario, ScenarioError> {
        let map_path = if self.map.is_absolute() {
            self.map.clone()
        } else {
            base.join(&self.map)
        };
        let text = std::fs::read_to_string(&map_path).map_err(|source| ScenarioError::Io {
            path: map_path.clone(),
            source,
        })?;
        let truth = OccupancyGrid::parse(&text)?;
        build_scenario(self, truth)
    }

    fn validate_against(&self, truth: &OccupancyGrid) -> Result<(), ScenarioError> {
        let fail = |msg: String| Err(ScenarioError::Invalid(msg));
        if self.steps < 1 {
            return fail("steps must be >= 1".into());
        }
        if self.particles < 1 {
            return fail("particles must be >= 1".into());
        }
        if self.dt <= 0.0 {
            return fail("dt must be positive".into());
        }
        if self.robot_radius < 0.0 {
            return fail("robot_radius must be nonnegative".into());
        }
        let robot = Point2::new(self.robot.x, self.robot.y);
        if !truth.contains(robot) {
            return fail(format!("robot start ({}, {}) is outside the map", robot.x, robot.y));
        }
        if truth.query(robot).unwrap() == CellState::Occupied {
            return fail("robot start lies inside an obstacle".into());
        }
        let target = Point2::new(self.target.start.x, self.target.start.y);
        if !truth.contains(target) {
            return fail("target start is outside the map".into());
        }
        if truth.query(target).unwrap() == CellState::Occupied {
            return fail("target start lies inside an obstacle".into());
        }
        for (i, wp) in self.target.waypoints.iter().enumerate() {
            if !truth.contains(Point2::new(wp.x, wp.y)) {
                return fail(format!("target waypoint {i} is outside the map"));
            }
        }
        if self.target.speed < 0.0 || self.target.jitter_std < 0.0 {
            return fail("target speed and jitter must be nonnegative".into());
        }
        if self.initial_belief.components.is_empty() {
            return fail("initial belief needs at least one component".into());
        }
        let wsum: f64 = self.initial_belief.components.iter().map(|c| c.weight).sum();
        if (wsum - 1.0).abs() > 1e-6 {
            return fail(format!("initial belief weights sum to {wsum}, expected 1"));
        }
        for (i, c) in self.initial_belief.components.iter().enumerate() {
            if c.weight < 0.0 {
                return fail(format!("initial belief component {i} has negative weight"));
            }
            check_spd(&matrix(c.cov), &format!("initial belief component {i} covariance"))?;
        }
        check_spd(&matrix(self.noise.q), "process noise Q")?;
        check_spd(&matrix(self.noise.sigma), "measurement noise Sigma")?;
        if self.limits.v_min > self.limits.v_max || self.limits.w_min > self.limits.w_max {
            return fail("control limits are inverted".into());
        }
        for &v in &self.planner.velocities {
            if v < self.limits.v_min || v > self.limits.v_max {
                return fail(format!("primitive velocity {v} violates the limits"));
            }
        }
        for &w in &self.planner.turn_rates {
            if w < self.limits.w_min || w > self.limits.w_max {
                return fail(format!("primitive turn rate {w} violates the limits"));
            }
        }
        if self.planner.velocities.is_empty() || self.planner.turn_rates.is_empty() {
            return fail("the planner needs at least one motion primitive".into());
        }
        if self.planner.max_nodes < 1 || self.planner.horizon_search < 1 || self.planner.horizon_track < 1
        {
            return fail("planner budget and horizons must be >= 1".into());
        }
        if self.planner.gamma <= 0.0 || self.planner.gamma > 1.0 {
            return fail("gamma must lie in (0, 1]".into());
        }
        if self.hierarchy.coarse_cell <= self.hierarchy.fine_cell || self.hierarchy.fine_cell <= 0.0 {
            return fail("hierarchy needs coarse_cell > fine_cell > 0".into());
        }
        if let Some(r) = &self.ts_reference {
            if r != "nbv" {
                return fail(format!("unknown ts_reference {r:?}; only \"nbv\" is supported"));
            }
        }
        Ok(())
    }
}

/// Build the runnable scenario from a validated config and a loaded map.
fn build_scenario(config: ScenarioConfig, truth: OccupancyGrid) -> Result<Scenario, ScenarioError> {
    config.validate_against(&truth)?;
    let mut primitives = Vec::new();
    for &v in &config.planner.velocities {
        for &w in &config.planner.turn_rates {
            primitives.push(RobotControl { v, w });
        }
    }
    let planner = PlannerConfig {
        max_nodes: config.planner.max_nodes,
        horizon: config.planner.horizon_search,
        gamma: config.planner.gamma,
        c_ucb: config.planner.c_ucb,
        d_thr: config.planner.d_thr,
        o_thr: config.planner.o_thr,
        pw_k: config.planner.pw_k,
        pw_alpha: config.planner.pw_alpha,
        primitives,
        recycling: config.ablation.recycling,
    };
    Ok(Scenario {
        camera: SensorConfig::new(config.camera.max_range, config.camera.half_angle, SensorKind::Camera),
        lidar: SensorConfig::new(config.lidar.max_range, config.lidar.half_angle, SensorKind::Lidar),
        noise: NoiseModel::new(matrix(config.noise.q), matrix(config.noise.sigma)),
        limits: ControlLimits {
            v_min: config.limits.v_min,
            v_max: config.limits.v_max,
            w_min: config.limits.w_min,
            w_max: config.limits.w_max,
        },
        planner,
        hierarchy: HierarchyConfig {
            coarse_cell: config.hierarchy.coarse_cell,
            fine_cell: config.hierarchy.fine_cell,
            min_waypoint_mass: config.hierarchy.min_waypoint_mass,
        },
        mi: MiConfig {
            lambda: config.mi.lambda,
            simplify_cell: config.mi.simplify_cell,
            truncation_radius: config.mi.truncation_radius.unwrap_or(f64::INFINITY),
            fold_process_noise: config.mi.fold_process_noise,
        },
        config,
        truth,
    })
}

impl Scenario {
    /// Rebuild the scenario around a modified config, reusing the loaded
    /// map. Used by the ablation harness to flip flags and reseed.
    pub fn with_config(&self, config: ScenarioConfig) -> Result<Scenario, ScenarioError> {
        build_scenario(config, self.truth.clone())
    }
}

/// Draw the initial particle set from the configured Gaussian mixture.
pub fn sample_initial_belief(
    spec: &InitialBeliefSpec,
    n: usize,
    rng: &mut StdRng,
) -> ParticleBelief {
    let mut cum = Vec::with_capacity(spec.components.len());
    let mut acc = 0.0;
    for c in &spec.components {
        acc += c.weight;
        cum.push(acc);
    }
    let chols: Vec<Matrix2<f64>> = spec
        .components
        .iter()
        .map(|c| matrix(c.cov).cholesky().expect("validated SPD").l())
        .collect();
    let mut states = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.gen::<f64>() * acc;
        let k = cum.partition_point(|c| *c < u).min(spec.components.len() - 1);
        let xi = nalgebra::Vector2::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let s = chols[k] * xi;
        states.push(TargetState::new(
            spec.components[k].mean[0] + s.x,
            spec.components[k].mean[1] + s.y,
        ));
    }
    ParticleBelief::uniform(states)
}

/// Ground-truth target simulator: a constant-speed waypoint follower with
/// optional Gaussian jitter; never steps into occupied cells.
pub struct TargetSim {
    pub pos: TargetState,
    waypoints: Vec<Point2>,
    next: usize,
    speed: f64,
    jitter: f64,
    dt: f64,
}

impl TargetSim {
    pub fn new(spec: &TargetSpec, dt: f64) -> Self {
        Self {
            pos: TargetState::new(spec.start.x, spec.start.y),
            waypoints: spec.waypoints.iter().map(|p| Point2::new(p.x, p.y)).collect(),
            next: 0,
            speed: spec.speed,
            jitter: spec.jitter_std,
            dt,
        }
    }

    pub fn step(&mut self, truth: &OccupancyGrid, rng: &mut StdRng) {
        let mut p = self.pos.point();
        if self.next < self.waypoints.len() && self.speed > 0.0 {
            let wp = self.waypoints[self.next];
            let d = p.distance(wp);
            let step_len = self.speed * self.dt;
            if d <= step_len {
                p = wp;
                self.next += 1;
            } else {
                p = Point2::new(
                    p.x + (wp.x - p.x) / d * step_len,
                    p.y + (wp.y - p.y) / d * step_len,
                );
            }
        }
        if self.jitter > 0.0 {
            p = Point2::new(
                p.x + self.jitter * rng.sample::<f64, _>(StandardNormal),
                p.y + self.jitter * rng.sample::<f64, _>(StandardNormal),
            );
        }
        // Stay put rather than walking into a wall or off the map.
        if truth.contains(p) && truth.query(p).unwrap() != CellState::Occupied {
            self.pos = TargetState::new(p.x, p.y);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> serde_json::Value {
        serde_json::json!({
            "map": "m.map",
            "robot": {"x": 2.0, "y": 2.0, "theta": 0.0},
            "target": {"start": {"x": 8.0, "y": 8.0}},
            "initial_belief": {"components": [
                {"mean": [8.0, 8.0], "cov": [[4.0, 0.0], [0.0, 4.0]], "weight": 1.0}
            ]}
        })
    }

    fn write_scenario(dir: &Path, mutate: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
        let mut v = minimal_json();
        mutate(&mut v);
        let map = "12 12 1.0 0 0\n".to_string() + &"............\n".repeat(12);
        std::fs::write(dir.join("m.map"), map).unwrap();
        let path = dir.join("s.json");
        std::fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
        path
    }

    #[test]
    fn minimal_scenario_loads_with_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_scenario(dir.path(), |_| {});
        let cfg = ScenarioConfig::from_path(&path).unwrap();
        let scn = cfg.load(dir.path()).unwrap();
        assert_eq!(scn.config.particles, 500);
        assert_eq!(scn.planner.max_nodes, 100);
        assert_eq!(scn.planner.primitives.len(), 9);
        assert!(scn.mi.truncation_radius.is_infinite());
        assert_eq!(scn.config.steps, 200);
    }

    #[test]
    fn bad_weight_sum_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_scenario(dir.path(), |v| {
            v["initial_belief"]["components"][0]["weight"] = 0.5f64.into();
        });
        let cfg = ScenarioConfig::from_path(&path).unwrap();
        let err = cfg.load(dir.path()).unwrap_err();
        assert!(matches!(err, ScenarioError::Invalid(_)));
    }

    #[test]
    fn robot_inside_obstacle_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut v = minimal_json();
        // Wall column at x in [0, 1); put the robot inside it.
        v["robot"]["x"] = 0.5.into();
        let map = "12 12 1.0 0 0\n".to_string() + &"#...........\n".repeat(12);
        std::fs::write(dir.path().join("m.map"), map).unwrap();
        let path = dir.path().join("s.json");
        std::fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
        let cfg = ScenarioConfig::from_path(&path).unwrap();
        let err = cfg.load(dir.path()).unwrap_err();
        assert!(matches!(err, ScenarioError::Invalid(_)));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_scenario(dir.path(), |v| {
            v["no_such_key"] = 1.into();
        });
        assert!(ScenarioConfig::from_path(&path).is_err());
    }

    #[test]
    fn primitive_outside_limits_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_scenario(dir.path(), |v| {
            v["planner"] = serde_json::json!({"velocities": [0.0, 5.0]});
        });
        let cfg = ScenarioConfig::from_path(&path).unwrap();
        assert!(cfg.load(dir.path()).is_err());
    }

    #[test]
    fn initial_belief_sampling_matches_mixture_moments() {
        let spec = InitialBeliefSpec {
            components: vec![
                GmmComponentSpec {
                    mean: [0.0, 0.0],
                    cov: [[1.0, 0.0], [0.0, 1.0]],
                    weight: 0.5,
                },
                GmmComponentSpec {
                    mean: [10.0, 0.0],
                    cov: [[1.0, 0.0], [0.0, 1.0]],
                    weight: 0.5,
                },
            ],
        };
        let mut rng = StdRng::seed_from_u64(1);
        let b = sample_initial_belief(&spec, 50_000, &mut rng);
        let m = b.mean_estimate();
        assert!((m.x - 5.0).abs() < 0.1, "mixture mean x = {}", m.x);
        assert!(m.y.abs() < 0.1);
        let near_each: usize = b
            .states
            .iter()
            .filter(|s| s.x < 5.0)
            .count();
        let frac = near_each as f64 / b.len() as f64;
        assert!((frac - 0.5).abs() < 0.02);
    }

    #[test]
    fn target_sim_follows_waypoints_and_respects_walls() {
        let spec = TargetSpec {
            start: PointSpec { x: 2.0, y: 2.0 },
            waypoints: vec![PointSpec { x: 5.0, y: 2.0 }],
            speed: 1.0,
            jitter_std: 0.0,
        };
        let truth = OccupancyGrid::new(20, 20, 0.5, Point2::new(0.0, 0.0), CellState::Free);
        let mut sim = TargetSim::new(&spec, 0.5);
        let mut rng = StdRng::seed_from_u64(0);
        for _ in 0..5 {
            sim.step(&truth, &mut rng);
        }
        assert!((sim.pos.x - 4.5).abs() < 1e-9);
        for _ in 0..3 {
            sim.step(&truth, &mut rng);
        }
        // Arrived and stays.
        assert!((sim.pos.x - 5.0).abs() < 1e-9);
        let before = sim.pos;
        sim.step(&truth, &mut rng);
        assert_eq!(sim.pos, before);
    }

    use rand::SeedableRng;
}
