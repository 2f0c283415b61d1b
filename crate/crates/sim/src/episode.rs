//! Closed-loop episode execution: sense, filter, plan, act, and the
//! search/tracking metrics computed along the way.

use std::time::Instant;

/// Tree values below this defer to the navigation field during search.
const FIELD_MARGIN: f64 = 0.25;

use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::Serialize;

use sat_core::belief::{
    resample_low_variance, update_with_recovery, JointBeliefState, ParticleBelief, UpdateOutcome,
};
use sat_core::env::{update_map, CellState, OccupancyGrid};
use sat_core::geom::Point2;
use sat_core::hierarchy::particle_hierarchy;
use sat_core::mi::MiConfig;
use sat_core::models::{observe, step_robot, Measurement, RobotControl, RobotPose, TargetState};
use sat_core::planner::{
    build_tree, feasible_actions, nbv_action, GoalGuide, MiRewardFn, PlannerConfig, World,
};

use crate::scenario::{sample_initial_belief, Scenario, ScenarioError, TargetSim};

/// Search or tracking; flips at the first detection and stays.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Stage {
    Search,
    Tracking,
}

/// Which planner drives the episode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlannerMode {
    /// Full belief tree search (hierarchy and recycling per the scenario).
    Tree,
    /// Greedy depth-1 baseline maximizing immediate reward.
    Nbv,
}

/// One row of the trajectory log.
#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub robot_x: f64,
    pub robot_y: f64,
    pub robot_theta: f64,
    pub target_x: f64,
    pub target_y: f64,
    pub est_x: f64,
    pub est_y: f64,
    pub detected: bool,
    pub meas_range: Option<f64>,
    pub meas_bearing: Option<f64>,
    pub stage: Stage,
    pub horizon: usize,
    pub plan_ms: f64,
    pub nodes: usize,
    pub rollouts: usize,
    pub reuses: usize,
    pub v: f64,
    pub w: f64,
    pub degenerate: bool,
    pub stuck: bool,
}

/// Episode summary in the shape of the evaluation metrics: steps to find,
/// loss rate and estimation error over the tracking stage, and planner
/// effort counters.
#[derive(Clone, Debug, Default, Serialize)]
pub struct EpisodeMetrics {
    pub steps: usize,
    pub steps_to_find: Option<usize>,
    /// Search-time difference vs the configured reference run.
    pub t_s: Option<f64>,
    pub r_los: Option<f64>,
    pub eps_est: Option<f64>,
    pub full_rollouts: usize,
    pub reuses: usize,
    pub degenerate_events: usize,
    pub stuck_events: usize,
    /// Wall-clock planning times per cycle, milliseconds. Machine
    /// dependent; excluded from the deterministic metrics file.
    #[serde(skip)]
    pub plan_times_ms: Vec<f64>,
}

impl EpisodeMetrics {
    pub fn plan_ms_mean(&self) -> f64 {
        if self.plan_times_ms.is_empty() {
            0.0
        } else {
            self.plan_times_ms.iter().sum::<f64>() / self.plan_times_ms.len() as f64
        }
    }

    pub fn plan_ms_median(&self) -> f64 {
        if self.plan_times_ms.is_empty() {
            return 0.0;
        }
        let mut v = self.plan_times_ms.clone();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    }
}

pub struct EpisodeResult {
    pub metrics: EpisodeMetrics,
    pub records: Vec<StepRecord>,
}

/// Transit move for an uninformative planning cycle: descend the goal's
/// navigation field; once arrived (no strictly descending neighbor), scan
/// in place so the camera sweeps out the remaining local mass.
fn transit_action(
    nav: &sat_core::env::OccupancyGrid,
    robot: &RobotPose,
    planner_cfg: &PlannerConfig,
    dt: f64,
    guide: &GoalGuide,
) -> Option<RobotControl> {
    let field = guide.field.as_ref()?;
    let here = nav
        .cell_of(robot.position())
        .map(|(cx, cy)| field[cy * nav.width() + cx])
        .unwrap_or(f64::INFINITY);
    if let Some(i) = sat_core::planner::descend_field(
        nav,
        robot,
        &planner_cfg.primitives,
        dt,
        field,
        guide.point,
    ) {
        let a = planner_cfg.primitives[i];
        let next = sat_core::models::step_robot(robot, a, dt);
        let next_val = nav
            .cell_of(next.position())
            .map(|(cx, cy)| field[cy * nav.width() + cx])
            .unwrap_or(f64::INFINITY);
        if next_val + 1e-9 < here {
            return Some(a);
        }
    }
    // Arrived: rotate at the fastest feasible turn rate.
    let feasible =
        sat_core::planner::feasible_actions(nav, robot, &planner_cfg.primitives, dt);
    feasible
        .into_iter()
        .map(|i| planner_cfg.primitives[i])
        .filter(|a| a.v == 0.0)
        .max_by(|a, b| {
            a.w.abs()
                .partial_cmp(&b.w.abs())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(b.w.partial_cmp(&a.w).unwrap_or(std::cmp::Ordering::Equal))
        })
}

/// Recompute the loss rate and estimation error from trajectory records;
/// the reported metrics must match this pass exactly.
pub fn recompute_tracking_metrics(records: &[StepRecord]) -> (Option<f64>, Option<f64>) {
    let tracking: Vec<&StepRecord> = records
        .iter()
        .filter(|r| r.stage == Stage::Tracking)
        .collect();
    if tracking.is_empty() {
        return (None, None);
    }
    let t_tra = tracking.len() as f64;
    let t_los = tracking.iter().filter(|r| !r.detected).count() as f64;
    let err: f64 = tracking
        .iter()
        .map(|r| (r.target_x - r.est_x).hypot(r.target_y - r.est_y))
        .sum();
    (Some(t_los / t_tra), Some(err / t_tra))
}

/// Run one closed-loop episode. Deterministic for a given scenario + seed.
pub fn run_episode(scn: &Scenario, mode: PlannerMode) -> Result<EpisodeResult, ScenarioError> {
    let cfg = &scn.config;
    let truth = &scn.truth;
    let mut rng = StdRng::seed_from_u64(cfg.seed);

    let mut known = OccupancyGrid::new(
        truth.width(),
        truth.height(),
        truth.resolution(),
        truth.origin(),
        CellState::Unknown,
    );
    let mut robot = RobotPose::new(cfg.robot.x, cfg.robot.y, cfg.robot.theta);
    let mut target = TargetSim::new(&cfg.target, cfg.dt);
    let mut belief = sample_initial_belief(&cfg.initial_belief, cfg.particles, &mut rng);

    let mut metrics = EpisodeMetrics::default();
    let mut records: Vec<StepRecord> = Vec::with_capacity(cfg.steps);
    let mut stage = Stage::Search;
    let mut t_tra = 0usize;
    let mut t_los = 0usize;
    let mut err_sum = 0.0f64;

    for step in 0..cfg.steps {
        // Sense: lidar sweeps the truth map into the known map, the camera
        // observes the true target.
        known = update_map(&known, &robot, &scn.lidar, truth)?;
        let z = observe(&robot, &target.pos, &scn.camera, truth, &scn.noise, &mut rng)
            .map_err(|e| ScenarioError::Invalid(format!("observation failed: {e}")))?;

        if z.is_detection() && metrics.steps_to_find.is_none() {
            metrics.steps_to_find = Some(step);
        }
        if metrics.steps_to_find.is_some() {
            stage = Stage::Tracking;
        }

        // Filter: predict (after the target has had a chance to move) and
        // reweight against the measurement.
        if step > 0 {
            belief = sat_core::belief::predict(&belief, &scn.noise, &mut rng);
        }
        let (updated, outcome) =
            update_with_recovery(&belief, &z, &robot, &scn.camera, &known, &scn.noise);
        belief = updated;
        if outcome == UpdateOutcome::DegenerateRecovered {
            metrics.degenerate_events += 1;
        }
        if belief.ess() < belief.len() as f64 / 2.0 {
            belief = resample_low_variance(&belief, &mut rng);
        }

        let estimate = belief.mean_estimate();
        if stage == Stage::Tracking {
            t_tra += 1;
            if !z.is_detection() {
                t_los += 1;
            }
            err_sum += estimate.point().distance(target.pos.point());
        }

        // Plan on the known map with an inflated copy for collisions.
        let horizon = if stage == Stage::Tracking {
            cfg.planner.horizon_track
        } else {
            cfg.planner.horizon_search
        };
        let inflated = known.inflate(cfg.robot_radius);
        let world = World {
            known: &known,
            nav: &inflated,
            camera: &scn.camera,
            noise: &scn.noise,
            dt: cfg.dt,
        };
        let planner_cfg = PlannerConfig {
            horizon,
            ..scn.planner.clone()
        };
        let (plan_state, guide) = if cfg.ablation.hierarchy {
            let (h, _report) = particle_hierarchy(&belief, &robot, &inflated, &scn.hierarchy);
            // During tracking the rollouts chase the live belief mean; the
            // coarse waypoint only matters while searching.
            let guide = if stage == Stage::Search {
                Some(GoalGuide {
                    point: h.goal.point,
                    field: h.goal_field,
                })
            } else {
                None
            };
            (
                JointBeliefState {
                    robot,
                    belief: h.simplified,
                },
                guide,
            )
        } else {
            (
                JointBeliefState {
                    robot,
                    belief: belief.clone(),
                },
                None,
            )
        };
        let reward = MiRewardFn::new(&world, scn.mi);
        let t0 = Instant::now();
        let plan = match mode {
            PlannerMode::Tree => {
                build_tree(&world, &plan_state, z, guide.as_ref(), &planner_cfg, &reward, &mut rng)
            }
            PlannerMode::Nbv => nbv_action(&world, &plan_state, &planner_cfg, &reward),
        };
        let plan_ms = t0.elapsed().as_secs_f64() * 1e3;
        metrics.plan_times_ms.push(plan_ms);

        let (action, diag, stuck) = match plan {
            Ok(p) => {
                // An all-zero value landscape means no information is
                // reachable within the horizon; transit toward the goal
                // along the navigation field instead of dithering.
                let informative = p.root_values.iter().any(|(_, q, _)| *q > FIELD_MARGIN);
                let act = if !informative {
                    guide.as_ref().and_then(|g| {
                        transit_action(&inflated, &robot, &planner_cfg, cfg.dt, g)
                    })
                } else {
                    None
                };
                (act.unwrap_or(p.action), p.diagnostics, false)
            }
            Err(_) => {
                metrics.stuck_events += 1;
                (RobotControl { v: 0.0, w: 0.0 }, Default::default(), true)
            }
        };
        metrics.full_rollouts += diag.full_rollouts;
        metrics.reuses += diag.reuses;

        records.push(StepRecord {
            step,
            robot_x: robot.x,
            robot_y: robot.y,
            robot_theta: robot.theta,
            target_x: target.pos.x,
            target_y: target.pos.y,
            est_x: estimate.x,
            est_y: estimate.y,
            detected: z.is_detection(),
            meas_range: match z {
                Measurement::Detection { range, .. } => Some(range),
                Measurement::Empty => None,
            },
            meas_bearing: match z {
                Measurement::Detection { bearing, .. } => Some(bearing),
                Measurement::Empty => None,
            },
            stage,
            horizon,
            plan_ms,
            nodes: diag.nodes,
            rollouts: diag.full_rollouts,
            reuses: diag.reuses,
            v: action.v,
            w: action.w,
            degenerate: outcome == UpdateOutcome::DegenerateRecovered,
            stuck,
        });

        // Act: the planner only proposes collision-free primitives against
        // the known map; physical walls the robot has not seen yet still
        // stop it in place.
        let next = step_robot(&robot, action, cfg.dt);
        let physical_ok = !feasible_actions(truth, &robot, &[action], cfg.dt).is_empty();
        if physical_ok && truth.contains(next.position()) {
            robot = next;
        }

        // The world moves last.
        target.step(truth, &mut rng);

        if cfg.stop_on_find && metrics.steps_to_find.is_some() {
            break;
        }
    }

    metrics.steps = records.len();
    if t_tra > 0 {
        metrics.r_los = Some(t_los as f64 / t_tra as f64);
        metrics.eps_est = Some(err_sum / t_tra as f64);
    }
    Ok(EpisodeResult { metrics, records })
}

/// Run the scenario and, when a reference is configured, the reference
/// planner on the same seed to fill in the search-time difference.
pub fn run_with_reference(scn: &Scenario) -> Result<EpisodeResult, ScenarioError> {
    let mut result = run_episode(scn, PlannerMode::Tree)?;
    if scn.config.ts_reference.as_deref() == Some("nbv") {
        let reference = run_episode(scn, PlannerMode::Nbv)?;
        if let (Some(own), Some(base)) = (result.metrics.steps_to_find, reference.metrics.steps_to_find)
        {
            result.metrics.t_s = Some(own as f64 - base as f64);
        }
    }
    Ok(result)
}

/// Convenience: joint belief state helpers for tests and benches.
pub fn joint(robot: RobotPose, belief: ParticleBelief) -> JointBeliefState {
    JointBeliefState { robot, belief }
}

/// Expose the per-episode MI configuration for reuse by benches.
pub fn mi_config(scn: &Scenario) -> MiConfig {
    scn.mi
}

/// Quick helper for tests: a static target sitting at `p` observed as the
/// camera would from `pose` (noiseless geometry).
pub fn target_at(p: Point2) -> TargetState {
    TargetState::new(p.x, p.y)
}
