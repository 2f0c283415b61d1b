// Replay a tracking episode printing the planner's intended in-FOV mass
// (detection probability of the chosen action) against what happened.
use nalgebra::Matrix2;
use rand::rngs::StdRng;
use rand::SeedableRng;
use sat_core::belief::{self, JointBeliefState, ParticleBelief};
use sat_core::env::{is_inside_fov, CellState, OccupancyGrid, SensorConfig, SensorKind};
use sat_core::geom::Point2;
use sat_core::hierarchy::{particle_hierarchy, HierarchyConfig};
use sat_core::mi::MiConfig;
use sat_core::models::{observe, step_robot, NoiseModel, RobotPose, TargetState};
use sat_core::planner::{build_tree, MiRewardFn, PlannerConfig, World};

fn fov_mass(b: &ParticleBelief, pose: &RobotPose, cam: &SensorConfig, map: &OccupancyGrid) -> f64 {
    b.states
        .iter()
        .zip(&b.weights)
        .filter(|(s, _)| {
            map.contains(s.point()) && is_inside_fov(pose, s.point(), cam, map).unwrap_or(false)
        })
        .map(|(_, w)| w)
        .sum()
}

fn main() {
    let map = OccupancyGrid::new(100, 100, 0.5, Point2::new(0.0, 0.0), CellState::Free);
    let camera = SensorConfig::new(6.0, std::f64::consts::FRAC_PI_4, SensorKind::Camera);
    let nm = NoiseModel::new(Matrix2::new(0.04, 0.0, 0.0, 0.04), Matrix2::new(0.1, 0.0, 0.0, 0.01));
    let mi_cfg = MiConfig::default();
    let hier = HierarchyConfig { coarse_cell: 10.0, fine_cell: 0.5, ..HierarchyConfig::default() };
    let cfg = PlannerConfig { gamma: 0.6, horizon: 5, ..PlannerConfig::default() };
    let mut rng = StdRng::seed_from_u64(0);

    let mut robot = RobotPose::new(10.0, 25.0, 0.0);
    let mut target = TargetState::new(14.0, 25.0);
    let mut bel = ParticleBelief::uniform(
        (0..500)
            .map(|i| {
                let a = i as f64 * 0.7;
                TargetState::new(14.0 + (a.sin()), 25.0 + (a.cos()))
            })
            .collect(),
    );
    let mut missed_intents = 0;
    let mut boundary_intents = 0;
    for k in 0..60 {
        let z = observe(&robot, &target, &camera, &map, &nm, &mut rng).unwrap();
        if k > 0 {
            bel = belief::predict(&bel, &nm, &mut rng);
        }
        let (b2, _) = belief::update_with_recovery(&bel, &z, &robot, &camera, &map, &nm);
        bel = b2;
        if bel.ess() < bel.len() as f64 / 2.0 {
            bel = belief::resample_low_variance(&bel, &mut rng);
        }
        let (h, _) = particle_hierarchy(&bel, &robot, &map, &hier);
        let world = World { known: &map, nav: &map, camera: &camera, noise: &nm, dt: 0.5 };
        let reward = MiRewardFn::new(&world, mi_cfg);
        let st = JointBeliefState { robot, belief: h.simplified.clone() };
        let plan = build_tree(&world, &st, z, Some(h.goal.point), &cfg, &reward, &mut rng).unwrap();
        let next = step_robot(&robot, plan.action, 0.5);
        // Intended detection probability: full-belief mass in FOV at the
        // post-action pose (before the target moves).
        let intended = fov_mass(&bel, &next, &camera, &map);
        let planned = fov_mass(&h.simplified, &next, &camera, &map);
        if intended < 0.9 {
            missed_intents += 1;
        }
        if (0.15..0.85).contains(&planned) {
            boundary_intents += 1;
        }
        println!(
            "k={k:>2} z={} intended_mass={intended:.2} planned_mass={planned:.2} a=({:.1},{:+.2})",
            if z.is_detection() { "D" } else { "-" },
            plan.action.v,
            plan.action.w
        );
        robot = next;
        // Slow target drifting right.
        target = TargetState::new(target.x + 0.15, target.y);
    }
    println!("steps with intended mass < 0.9: {missed_intents}/60");
    println!("steps planned near the boundary (planned mass in 0.15..0.85): {boundary_intents}/60");
}
