// Probe: one-step MI of a tight belief as a function of its bearing
// relative to the +-45 deg FOV edge, and as a function of range.
use nalgebra::Matrix2;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use sat_core::belief::{JointBeliefState, ParticleBelief};
use sat_core::env::{CellState, OccupancyGrid, SensorConfig, SensorKind};
use sat_core::geom::Point2;
use sat_core::mi::{mi_reward, MiConfig};
use sat_core::models::{NoiseModel, RobotControl, RobotPose, TargetState};

fn cloud(cx: f64, cy: f64, spread: f64, n: usize) -> ParticleBelief {
    let mut rng = StdRng::seed_from_u64(7);
    ParticleBelief::uniform(
        (0..n)
            .map(|_| {
                TargetState::new(
                    cx + spread * (rng.gen::<f64>() - 0.5),
                    cy + spread * (rng.gen::<f64>() - 0.5),
                )
            })
            .collect(),
    )
}

fn main() {
    let map = OccupancyGrid::new(100, 100, 0.5, Point2::new(-25.0, -25.0), CellState::Free);
    let camera = SensorConfig::new(6.0, std::f64::consts::FRAC_PI_4, SensorKind::Camera);
    let nm = NoiseModel::new(Matrix2::new(0.04, 0.0, 0.0, 0.04), Matrix2::new(0.1, 0.0, 0.0, 0.01));
    let cfg = MiConfig::default();
    let stay = RobotControl { v: 0.0, w: 0.0 };
    for spread in [0.3, 1.0, 2.0] {
        println!("--- cloud spread {spread} m, range 3 m, bearing sweep ---");
        for deg in [0, 20, 35, 40, 45, 50, 55, 70] {
            let a = (deg as f64).to_radians();
            let st = JointBeliefState {
                robot: RobotPose::new(0.0, 0.0, 0.0),
                belief: cloud(3.0 * a.cos(), 3.0 * a.sin(), spread, 60),
            };
            let v = mi_reward(&st, stay, 0.5, &camera, &map, &nm, &cfg);
            print!(" {deg:>2}deg:{v:.3}");
        }
        println!();
        println!("--- cloud spread {spread} m, bearing 0, range sweep ---");
        for r in [1.0f64, 2.0, 3.0, 4.0, 5.0, 5.8] {
            let st = JointBeliefState {
                robot: RobotPose::new(0.0, 0.0, 0.0),
                belief: cloud(r, 0.0, spread, 60),
            };
            let v = mi_reward(&st, stay, 0.5, &camera, &map, &nm, &cfg);
            print!(" r={r}:{v:.3}");
        }
        println!();
    }
}
