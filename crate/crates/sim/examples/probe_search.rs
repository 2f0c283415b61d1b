// Replay the corner-search scenario, reporting the robot's room coverage
// and the belief mass near the true target over time.
use sat_sim::episode::{run_episode, PlannerMode};
use sat_sim::scenario::{sample_initial_belief, ScenarioConfig};
use std::path::Path;

fn main() {
    let arg = std::env::args().nth(1).expect("scenario path");
    let path = Path::new(&arg);
    let mut cfg = ScenarioConfig::from_path(path).unwrap();
    if let Some(seed) = std::env::args().nth(2) {
        cfg.seed = seed.parse().unwrap();
    }
    let scn = cfg.load(path.parent().unwrap()).unwrap();
    let out = run_episode(&scn, PlannerMode::Tree).unwrap();
    let (tx, ty) = (scn.config.target.start.x, scn.config.target.start.y);
    println!("target at ({tx}, {ty}); found: {:?}", out.metrics.steps_to_find);
    for r in out.records.iter().step_by(8) {
        let d_target = ((r.robot_x - tx).powi(2) + (r.robot_y - ty).powi(2)).sqrt();
        println!(
            "k={:>3} robot=({:5.1},{:5.1}) est=({:5.1},{:5.1}) dist_to_target={:5.1} v={} w={:+.2}",
            r.step, r.robot_x, r.robot_y, r.est_x, r.est_y, d_target, r.v, r.w
        );
    }
    // How much initial belief mass sits near the target at all?
    use rand::SeedableRng;
    let mut rng = rand::rngs::StdRng::seed_from_u64(scn.config.seed);
    let b = sample_initial_belief(&scn.config.initial_belief, scn.config.particles, &mut rng);
    let near: f64 = b
        .states
        .iter()
        .zip(&b.weights)
        .filter(|(s, _)| (s.x - tx).hypot(s.y - ty) < 8.0)
        .map(|(_, w)| w)
        .sum();
    println!("initial belief mass within 8 m of target: {near:.3}");
}
