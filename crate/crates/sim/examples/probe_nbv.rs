// Compare the tree planner against the greedy NBV baseline on a scenario.
use sat_sim::episode::{run_episode, PlannerMode};
use sat_sim::scenario::ScenarioConfig;
use std::path::Path;

fn main() {
    let arg = std::env::args().nth(1).expect("scenario path");
    let path = Path::new(&arg);
    let mut cfg = ScenarioConfig::from_path(path).unwrap();
    if let Some(seed) = std::env::args().nth(2) {
        cfg.seed = seed.parse().unwrap();
    }
    let scn = cfg.load(path.parent().unwrap()).unwrap();
    for (name, mode) in [("tree", PlannerMode::Tree), ("nbv ", PlannerMode::Nbv)] {
        let out = run_episode(&scn, mode).unwrap();
        println!(
            "{name}: steps_to_find={:?} r_los={:?} eps={:?} plan_ms_mean={:.2}",
            out.metrics.steps_to_find,
            out.metrics.r_los,
            out.metrics.eps_est,
            out.metrics.plan_ms_mean()
        );
    }
}
