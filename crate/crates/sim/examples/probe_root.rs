// Probe: root action values for a tight belief at bearing +54, range 2.5.
use nalgebra::Matrix2;
use rand::rngs::StdRng;
use rand::SeedableRng;
use sat_core::belief::{JointBeliefState, ParticleBelief};
use sat_core::env::{CellState, OccupancyGrid, SensorConfig, SensorKind};
use sat_core::geom::Point2;
use sat_core::mi::MiConfig;
use sat_core::models::{Measurement, NoiseModel, RobotPose, TargetState};
use sat_core::planner::{build_tree, MiRewardFn, PlannerConfig, World};

fn main() {
    let map = OccupancyGrid::new(100, 100, 0.5, Point2::new(-25.0, -25.0), CellState::Free);
    let camera = SensorConfig::new(6.0, std::f64::consts::FRAC_PI_4, SensorKind::Camera);
    let nm = NoiseModel::new(Matrix2::new(0.04, 0.0, 0.0, 0.04), Matrix2::new(0.1, 0.0, 0.0, 0.01));
    let world = World { known: &map, nav: &map, camera: &camera, noise: &nm, dt: 0.5 };
    // Tight cloud at bearing 54 deg, range 2.5.
    let ang = 54f64.to_radians();
    let (cx, cy) = (2.5 * ang.cos(), 2.5 * ang.sin());
    let mut rng = StdRng::seed_from_u64(1);
    use rand::Rng;
    let states: Vec<TargetState> = (0..40)
        .map(|_| TargetState::new(cx + 0.3 * (rng.gen::<f64>() - 0.5), cy + 0.3 * (rng.gen::<f64>() - 0.5)))
        .collect();
    let st = JointBeliefState { robot: RobotPose::new(0.0, 0.0, 0.0), belief: ParticleBelief::uniform(states) };
    let cfg = PlannerConfig { horizon: 5, max_nodes: 100, ..PlannerConfig::default() };
    let reward = MiRewardFn::new(&world, MiConfig::default());
    // Immediate rewards per primitive:
    use sat_core::planner::Reward;
    for (i, p) in cfg.primitives.iter().enumerate() {
        let r = reward.eval(&st, *p);
        println!("prim {i} (v={:.1}, w={:+.2}): edge MI = {r:.4}", p.v, p.w);
    }
    for seed in 0..5 {
        let mut rng = StdRng::seed_from_u64(seed);
        let out = build_tree(&world, &st, Measurement::Empty, Some(Point2::new(cx, cy)), &cfg, &reward, &mut rng).unwrap();
        print!("seed {seed}: chose prim {} |", out.action_idx);
        for (idx, q, w) in &out.root_values {
            print!(" {idx}:q={q:.3}/w={w}");
        }
        println!();
    }
}
