// For each step: every root action's mean Q, visits, edge MI, and the
// post-action FOV mass of the full belief; flag steps where the executed
// action lost the target.
use nalgebra::Matrix2;
use rand::rngs::StdRng;
use rand::SeedableRng;
use sat_core::belief::{self, JointBeliefState, ParticleBelief};
use sat_core::env::{is_inside_fov, CellState, OccupancyGrid, SensorConfig, SensorKind};
use sat_core::geom::Point2;
use sat_core::hierarchy::{particle_hierarchy, HierarchyConfig};
use sat_core::mi::MiConfig;
use sat_core::models::{observe, step_robot, NoiseModel, RobotPose, TargetState};
use sat_core::planner::{build_tree, MiRewardFn, PlannerConfig, Reward, World};

fn fov_mass(b: &ParticleBelief, pose: &RobotPose, cam: &SensorConfig, map: &OccupancyGrid) -> f64 {
    b.states.iter().zip(&b.weights)
        .filter(|(s, _)| map.contains(s.point()) && is_inside_fov(pose, s.point(), cam, map).unwrap_or(false))
        .map(|(_, w)| w).sum()
}

fn main() {
    let map = OccupancyGrid::new(100, 100, 0.5, Point2::new(0.0, 0.0), CellState::Free);
    let camera = SensorConfig::new(6.0, std::f64::consts::FRAC_PI_4, SensorKind::Camera);
    let nm = NoiseModel::new(Matrix2::new(0.04, 0.0, 0.0, 0.04), Matrix2::new(0.1, 0.0, 0.0, 0.01));
    let mi_cfg = MiConfig::default();
    let hier = HierarchyConfig { coarse_cell: 10.0, fine_cell: 0.5, ..HierarchyConfig::default() };
    let cfg = PlannerConfig { gamma: 0.8, horizon: 5, ..PlannerConfig::default() };
    let mut rng = StdRng::seed_from_u64(3);

    let mut robot = RobotPose::new(10.0, 25.0, 0.0);
    let mut target = TargetState::new(14.0, 25.0);
    let mut bel = ParticleBelief::uniform(
        (0..500).map(|i| {
            let a = i as f64 * 0.77;
            TargetState::new(14.0 + a.sin(), 25.0 + a.cos())
        }).collect(),
    );
    let mut losses = 0;
    for k in 0..120 {
        let z = observe(&robot, &target, &camera, &map, &nm, &mut rng).unwrap();
        if k > 0 { bel = belief::predict(&bel, &nm, &mut rng); }
        let (b2, _) = belief::update_with_recovery(&bel, &z, &robot, &camera, &map, &nm);
        bel = b2;
        if bel.ess() < bel.len() as f64 / 2.0 { bel = belief::resample_low_variance(&bel, &mut rng); }
        let (h, _) = particle_hierarchy(&bel, &robot, &map, &hier);
        let world = World { known: &map, nav: &map, camera: &camera, noise: &nm, dt: 0.5 };
        let reward = MiRewardFn::new(&world, mi_cfg);
        let st = JointBeliefState { robot, belief: h.simplified.clone() };
        let plan = build_tree(&world, &st, z, None, &cfg, &reward, &mut rng).unwrap();
        let next = step_robot(&robot, plan.action, 0.5);
        let tgt_next = TargetState::new(target.x + 0.25, target.y); // target will step right after us
        let will_see = map.contains(tgt_next.point())
            && is_inside_fov(&next, tgt_next.point(), &camera, &map).unwrap();
        if !will_see {
            losses += 1;
            if losses <= 6 {
                println!("--- step {k}: executed prim {} loses the target ---", plan.action_idx);
                for (idx, q, w) in &plan.root_values {
                    let a = cfg.primitives[*idx];
                    let p2 = step_robot(&robot, a, 0.5);
                    let mass = fov_mass(&bel, &p2, &camera, &map);
                    let edge = reward.eval(&st, a);
                    println!(
                        "  prim {idx} (v={:.1},w={:+.2}): Q={q:7.3} W={w:<3} edge={edge:.3} postFOVmass={mass:.2}{}",
                        a.v, a.w, if *idx == plan.action_idx { "  <= chosen" } else { "" }
                    );
                }
            }
        }
        robot = next;
        target = tgt_next;
    }
    println!("total losing decisions: {losses}/120");
}
