// Replay search printing the hierarchy's goal point and belief drain.
use nalgebra::Matrix2;
use rand::rngs::StdRng;
use rand::SeedableRng;
use sat_core::belief::{self};
use sat_core::env::{update_map, CellState, OccupancyGrid};
use sat_core::hierarchy::{particle_hierarchy, HierarchyConfig};
use sat_core::models::{observe, step_robot, RobotPose, TargetState, NoiseModel};
use sat_core::planner::{descend_field, feasible_actions, PlannerConfig};
use sat_sim::scenario::{sample_initial_belief, ScenarioConfig};
use std::path::Path;

fn main() {
    let arg = std::env::args().nth(1).expect("scenario path");
    let path = Path::new(&arg);
    let cfg = ScenarioConfig::from_path(path).unwrap();
    let scn = cfg.load(path.parent().unwrap()).unwrap();
    let c = &scn.config;
    let truth = &scn.truth;
    let mut rng = StdRng::seed_from_u64(c.seed);
    let mut known = OccupancyGrid::new(truth.width(), truth.height(), truth.resolution(), truth.origin(), CellState::Unknown);
    let mut robot = RobotPose::new(c.robot.x, c.robot.y, c.robot.theta);
    let target = TargetState::new(c.target.start.x, c.target.start.y);
    let mut bel = sample_initial_belief(&c.initial_belief, c.particles, &mut rng);
    let nm: &NoiseModel = &scn.noise;
    let pcfg: &PlannerConfig = &scn.planner;
    for k in 0..200 {
        known = update_map(&known, &robot, &scn.lidar, truth).unwrap();
        let z = observe(&robot, &target, &scn.camera, truth, nm, &mut rng).unwrap();
        if z.is_detection() {
            println!("k={k}: FOUND");
            return;
        }
        if k > 0 { bel = belief::predict(&bel, nm, &mut rng); }
        let (b2, _) = belief::update_with_recovery(&bel, &z, &robot, &scn.camera, &known, nm);
        bel = b2;
        if bel.ess() < bel.len() as f64 / 2.0 { bel = belief::resample_low_variance(&bel, &mut rng); }
        let inflated = known.inflate(c.robot_radius);
        let (h, rep) = particle_hierarchy(&bel, &robot, &inflated, &scn.hierarchy);
        // Pure transit: descend the goal field.
        let action = h
            .goal_field
            .as_ref()
            .and_then(|f| descend_field(&inflated, &robot, &pcfg.primitives, c.dt, f, h.goal.point))
            .map(|i| pcfg.primitives[i]);
        if k % 8 == 0 {
            let mass_near_target: f64 = bel
                .states.iter().zip(&bel.weights)
                .filter(|(s, _)| (s.x - target.x).hypot(s.y - target.y) < 8.0)
                .map(|(_, w)| w).sum();
            println!(
                "k={k:>3} robot=({:4.1},{:4.1},{:+.2}) goal=({:4.1},{:4.1}) goal_mass={:.2} tgt_mass={:.2} act={:?} unreachable={} fallback={} hl={}",
                robot.x, robot.y, robot.theta, h.goal.point.x, h.goal.point.y,
                h.goal.members.iter().map(|&i| bel.weights[i]).sum::<f64>(),
                mass_near_target,
                action.map(|a| (a.v, (a.w * 100.0).round() / 100.0)),
                rep.unreachable.len(),
                rep.straight_line_fallback,
                h.high_level.len(),
            );
        }
        let a = action.unwrap_or(sat_core::models::RobotControl { v: 0.0, w: 0.0 });
        let next = step_robot(&robot, a, c.dt);
        if !feasible_actions(truth, &robot, &[a], c.dt).is_empty() && truth.contains(next.position()) {
            robot = next;
        }
    }
    println!("NOT FOUND in 200 steps");
}
