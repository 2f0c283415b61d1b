//! Reusable belief tree search: UCB selection over action nodes,
//! progressive widening over sampled observations, and a recycling step
//! that reuses cached rollout rewards for belief nodes close to one
//! another, expanding several nodes per iteration.

use std::cell::Cell;
use std::time::{Duration, Instant};

use rand::Rng;
use thiserror::Error;

use crate::belief::{
    predict, resample_low_variance, update_with_recovery, JointBeliefState, ParticleBelief,
    UpdateOutcome,
};
use crate::env::{is_inside_fov, CellState, OccupancyGrid, SensorConfig};
use crate::geom::{angle_diff, wrap_angle, Point2};
use crate::mi::{mi_reward_detailed, MiConfig};
use crate::models::{step_robot, Measurement, NoiseModel, RobotControl, RobotPose};

/// Tree search configuration.
#[derive(Clone, Debug)]
pub struct PlannerConfig {
    /// Node budget: the growth loop stops once the tree holds more nodes.
    pub max_nodes: usize,
    /// Planning horizon in action steps.
    pub horizon: usize,
    /// Discount factor.
    pub gamma: f64,
    /// UCB exploration constant applied to min-max normalized values.
    pub c_ucb: f64,
    /// Recycling distance threshold, meters. 0 disables rollout reuse.
    pub d_thr: f64,
    /// Observation similarity threshold for the node distance.
    pub o_thr: f64,
    /// Progressive-widening cap: an action node may grow a new observation
    /// child while `children < pw_k * visits^pw_alpha`.
    pub pw_k: f64,
    pub pw_alpha: f64,
    /// Motion primitives the tree searches over.
    pub primitives: Vec<RobotControl>,
    /// Master switch for the recycling step.
    pub recycling: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        let third_pi = std::f64::consts::FRAC_PI_3;
        let mut primitives = Vec::new();
        for v in [0.0, 1.5, 3.0] {
            for w in [-third_pi, 0.0, third_pi] {
                primitives.push(RobotControl { v, w });
            }
        }
        Self {
            max_nodes: 100,
            horizon: 10,
            gamma: 0.95,
            c_ucb: std::f64::consts::SQRT_2,
            d_thr: 0.375, // half the smallest nonzero primitive displacement
            o_thr: 0.1,
            pw_k: 1.0,
            pw_alpha: 0.5,
            primitives,
            recycling: true,
        }
    }
}

/// Immutable bundle of everything the planner needs about the world.
pub struct World<'a> {
    /// Robot's known map, used for FOV and likelihood queries.
    pub known: &'a OccupancyGrid,
    /// Obstacle-inflated map used for collision checking.
    pub nav: &'a OccupancyGrid,
    pub camera: &'a SensorConfig,
    pub noise: &'a NoiseModel,
    pub dt: f64,
}

/// One-step reward of taking `action` from a belief state.
pub trait Reward {
    fn eval(&self, state: &JointBeliefState, action: RobotControl) -> f64;
}

impl<F: Fn(&JointBeliefState, RobotControl) -> f64> Reward for F {
    fn eval(&self, state: &JointBeliefState, action: RobotControl) -> f64 {
        self(state, action)
    }
}

/// The mutual-information reward over a world, with a counter for values
/// that fell below the approximation-error floor.
pub struct MiRewardFn<'a> {
    pub world: &'a World<'a>,
    pub cfg: MiConfig,
    suspicious: Cell<u32>,
}

impl<'a> MiRewardFn<'a> {
    pub fn new(world: &'a World<'a>, cfg: MiConfig) -> Self {
        Self {
            world,
            cfg,
            suspicious: Cell::new(0),
        }
    }

    /// Evaluations whose raw value undercut [`crate::mi::MI_NEGATIVE_FLOOR`].
    pub fn suspicious_count(&self) -> u32 {
        self.suspicious.get()
    }
}

impl Reward for MiRewardFn<'_> {
    fn eval(&self, state: &JointBeliefState, action: RobotControl) -> f64 {
        let v = mi_reward_detailed(
            state,
            action,
            self.world.dt,
            self.world.camera,
            self.world.known,
            self.world.noise,
            &self.cfg,
        );
        if v.suspicious() {
            self.suspicious.set(self.suspicious.get() + 1);
        }
        v.value
    }
}

#[derive(Debug, Error)]
#[error("no collision-free action at the tree root")]
pub struct PlannerStuck;

/// Goal context for rollouts: the waypoint the default policy steers at,
/// with an optional obstacle-aware distance field over the navigation map
/// (descending the field routes around walls instead of into them).
#[derive(Clone, Debug)]
pub struct GoalGuide {
    pub point: Point2,
    pub field: Option<Vec<f64>>,
}

/// Per-cycle search diagnostics.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub nodes: usize,
    pub full_rollouts: usize,
    pub reuses: usize,
    /// Belief updates inside the tree that hit the degenerate-posterior
    /// recovery policy.
    pub degenerate_updates: usize,
    pub wall: Duration,
}

/// Search result: the chosen primitive plus diagnostics.
#[derive(Clone, Debug)]
pub struct PlanOutcome {
    pub action_idx: usize,
    pub action: RobotControl,
    pub diagnostics: Diagnostics,
    /// `(action index, mean value, visits)` for every root action child.
    pub root_values: Vec<(usize, f64, u32)>,
}

pub(crate) type NodeId = usize;

#[derive(Clone, Debug)]
pub(crate) struct BeliefNodeData {
    pub state: JointBeliefState,
    pub last_obs: Measurement,
    pub untried: Vec<usize>,
    pub children: Vec<NodeId>,
    pub depth: usize,
    /// Reward of the action edge leading into this node.
    pub edge_reward: f64,
    /// Rollout (or reused) estimate of the continuation value from here.
    pub value: f64,
    pub degenerate: bool,
}

#[derive(Clone, Debug)]
pub(crate) struct ActionNodeData {
    pub action_idx: usize,
    pub q_sum: f64,
    pub children: Vec<NodeId>,
}

#[derive(Clone, Debug)]
pub(crate) enum NodeKind {
    Belief(BeliefNodeData),
    Action(ActionNodeData),
}

#[derive(Clone, Debug)]
pub(crate) struct Node {
    pub parent: Option<NodeId>,
    pub visits: u32,
    pub kind: NodeKind,
}

pub(crate) struct PolicyTree {
    pub nodes: Vec<Node>,
    pub root: NodeId,
    q_min: f64,
    q_max: f64,
}

impl PolicyTree {
    fn new(state: JointBeliefState, last_obs: Measurement, untried: Vec<usize>) -> Self {
        let root = Node {
            parent: None,
            visits: 0,
            kind: NodeKind::Belief(BeliefNodeData {
                state,
                last_obs,
                untried,
                children: Vec::new(),
                depth: 0,
                edge_reward: 0.0,
                value: 0.0,
                degenerate: false,
            }),
        };
        Self {
            nodes: vec![root],
            root: 0,
            q_min: f64::INFINITY,
            q_max: f64::NEG_INFINITY,
        }
    }

    pub(crate) fn belief(&self, id: NodeId) -> &BeliefNodeData {
        match &self.nodes[id].kind {
            NodeKind::Belief(b) => b,
            NodeKind::Action(_) => panic!("node {id} is an action node"),
        }
    }

    fn belief_mut(&mut self, id: NodeId) -> &mut BeliefNodeData {
        match &mut self.nodes[id].kind {
            NodeKind::Belief(b) => b,
            NodeKind::Action(_) => panic!("node {id} is an action node"),
        }
    }

    pub(crate) fn action(&self, id: NodeId) -> &ActionNodeData {
        match &self.nodes[id].kind {
            NodeKind::Action(a) => a,
            NodeKind::Belief(_) => panic!("node {id} is a belief node"),
        }
    }

    fn action_mut(&mut self, id: NodeId) -> &mut ActionNodeData {
        match &mut self.nodes[id].kind {
            NodeKind::Action(a) => a,
            NodeKind::Belief(_) => panic!("node {id} is a belief node"),
        }
    }

    fn belief_ids(&self) -> Vec<NodeId> {
        (0..self.nodes.len())
            .filter(|&i| matches!(self.nodes[i].kind, NodeKind::Belief(_)))
            .collect()
    }

    /// Min-max normalization of an action node's mean value, for UCB.
    fn normalized_q(&self, q_mean: f64) -> f64 {
        let span = self.q_max - self.q_min;
        if span > 1e-12 {
            (q_mean - self.q_min) / span
        } else {
            0.5
        }
    }

    fn note_q(&mut self, q_mean: f64) {
        self.q_min = self.q_min.min(q_mean);
        self.q_max = self.q_max.max(q_mean);
    }
}

/// Indices of primitives whose swept arc stays collision-free on the
/// inflated map. Unknown cells are traversable; occupied cells and leaving
/// the map are not.
pub fn feasible_actions(
    nav: &OccupancyGrid,
    pose: &RobotPose,
    primitives: &[RobotControl],
    dt: f64,
) -> Vec<usize> {
    const SUBSTEPS: usize = 5;
    primitives
        .iter()
        .enumerate()
        .filter(|(_, u)| {
            let mut p = *pose;
            for _ in 0..SUBSTEPS {
                p = step_robot(&p, **u, dt / SUBSTEPS as f64);
                if !nav.contains(p.position()) {
                    return false;
                }
                if nav.query(p.position()).unwrap_or(CellState::Occupied) == CellState::Occupied {
                    return false;
                }
            }
            true
        })
        .map(|(i, _)| i)
        .collect()
}

/// Distance between two belief nodes: infinite when their last observations
/// disagree (different kinds, or detection components apart by more than
/// `o_thr`), else the Euclidean distance between the robot states, with the
/// wrapped heading difference as the third coordinate. Heading matters:
/// co-located nodes facing different ways see different worlds and must
/// not share rollout values.
pub(crate) fn node_distance(a: &BeliefNodeData, b: &BeliefNodeData, o_thr: f64) -> f64 {
    let compatible = match (&a.last_obs, &b.last_obs) {
        (Measurement::Empty, Measurement::Empty) => true,
        (
            Measurement::Detection { range: r1, bearing: b1 },
            Measurement::Detection { range: r2, bearing: b2 },
        ) => (r1 - r2).abs() <= o_thr && angle_diff(*b1, *b2).abs() <= o_thr,
        _ => false,
    };
    if !compatible {
        return f64::INFINITY;
    }
    robot_state_distance(&a.state.robot, &b.state.robot)
}

fn robot_state_distance(a: &RobotPose, b: &RobotPose) -> f64 {
    let dth = angle_diff(a.theta, b.theta);
    (a.x - b.x)
        .hypot(a.y - b.y)
        .hypot(dth)
}

/// Walk from the root to a leaf: a belief node with untried actions, or an
/// action node that progressive widening allows to grow a new observation
/// child. `None` when the walk dead-ends.
fn selection<G: Rng + ?Sized>(
    tree: &PolicyTree,
    cfg: &PlannerConfig,
    rng: &mut G,
) -> Option<NodeId> {
    let mut cur = tree.root;
    loop {
        match &tree.nodes[cur].kind {
            NodeKind::Belief(b) => {
                if b.depth >= cfg.horizon {
                    return None;
                }
                if !b.untried.is_empty() {
                    return Some(cur);
                }
                if b.children.is_empty() {
                    return None;
                }
                let parent_visits = tree.nodes[cur].visits.max(1) as f64;
                let mut best: Option<(f64, usize, NodeId)> = None;
                for &c in &b.children {
                    let a = tree.action(c);
                    let w = tree.nodes[c].visits.max(1) as f64;
                    let q = tree.normalized_q(a.q_sum / w);
                    let score = q + cfg.c_ucb * (parent_visits.ln() / w).sqrt();
                    let key = (score, a.action_idx, c);
                    match &best {
                        None => best = Some(key),
                        Some((bs, bi, _)) => {
                            if score > *bs || (score == *bs && a.action_idx < *bi) {
                                best = Some(key);
                            }
                        }
                    }
                }
                cur = best?.2;
            }
            NodeKind::Action(a) => {
                let w = tree.nodes[cur].visits.max(1) as f64;
                if (a.children.len() as f64) < cfg.pw_k * w.powf(cfg.pw_alpha) {
                    return Some(cur);
                }
                if a.children.is_empty() {
                    return None;
                }
                cur = a.children[rng.gen_range(0..a.children.len())];
            }
        }
    }
}

/// Sample an observation for taking `action_idx` from the given belief
/// node: draw a particle by weight, push it through the target model, and
/// observe it from the post-action robot pose.
fn sample_observation<G: Rng + ?Sized>(
    tree: &PolicyTree,
    belief_id: NodeId,
    action_idx: usize,
    world: &World,
    cfg: &PlannerConfig,
    rng: &mut G,
) -> Measurement {
    let b = tree.belief(belief_id);
    let pose = step_robot(&b.state.robot, cfg.primitives[action_idx], world.dt);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut chosen = b.state.belief.len() - 1;
    for (i, w) in b.state.belief.weights.iter().enumerate() {
        acc += w;
        if u < acc {
            chosen = i;
            break;
        }
    }
    let advanced =
        crate::models::step_target_model(&b.state.belief.states[chosen], world.noise, rng);
    crate::models::observe(&pose, &advanced, world.camera, world.known, world.noise, rng)
        .unwrap_or(Measurement::Empty)
}

/// Resolve the selected leaf into a `(belief parent, action, observation)`
/// triple ready for expansion.
fn sample_action_observation<G: Rng + ?Sized>(
    tree: &PolicyTree,
    leaf: NodeId,
    world: &World,
    cfg: &PlannerConfig,
    rng: &mut G,
) -> (NodeId, usize, Measurement) {
    match &tree.nodes[leaf].kind {
        NodeKind::Belief(b) => {
            let pick = rng.gen_range(0..b.untried.len());
            let action_idx = b.untried[pick];
            let obs = sample_observation(tree, leaf, action_idx, world, cfg, rng);
            (leaf, action_idx, obs)
        }
        NodeKind::Action(a) => {
            let parent = tree.nodes[leaf].parent.expect("action nodes have parents");
            let action_idx = a.action_idx;
            let obs = sample_observation(tree, parent, action_idx, world, cfg, rng);
            (parent, action_idx, obs)
        }
    }
}

/// Grow the tree with the `(action, observation)` pair under `parent`:
/// find-or-create the action node, then append a belief child whose state
/// is the belief transition applied to a copy of the parent's state.
fn expansion<G: Rng + ?Sized>(
    tree: &mut PolicyTree,
    parent: NodeId,
    action_idx: usize,
    obs: Measurement,
    world: &World,
    cfg: &PlannerConfig,
    reward: &dyn Reward,
    rng: &mut G,
) -> NodeId {
    let existing = tree
        .belief(parent)
        .children
        .iter()
        .copied()
        .find(|&c| tree.action(c).action_idx == action_idx);
    let action_id = match existing {
        Some(id) => id,
        None => {
            let id = tree.nodes.len();
            tree.nodes.push(Node {
                parent: Some(parent),
                visits: 0,
                kind: NodeKind::Action(ActionNodeData {
                    action_idx,
                    q_sum: 0.0,
                    children: Vec::new(),
                }),
            });
            let pb = tree.belief_mut(parent);
            pb.children.push(id);
            pb.untried.retain(|&i| i != action_idx);
            id
        }
    };

    let parent_state = tree.belief(parent).state.clone();
    let parent_depth = tree.belief(parent).depth;
    let action = cfg.primitives[action_idx];
    let edge_reward = reward.eval(&parent_state, action);

    let pose = step_robot(&parent_state.robot, action, world.dt);
    let predicted = predict(&parent_state.belief, world.noise, rng);
    let (updated, outcome) =
        update_with_recovery(&predicted, &obs, &pose, world.camera, world.known, world.noise);
    let n = updated.len();
    let final_belief = if updated.ess() < n as f64 / 2.0 {
        resample_low_variance(&updated, rng)
    } else {
        updated
    };
    let depth = parent_depth + 1;
    let untried = if depth >= cfg.horizon {
        Vec::new()
    } else {
        feasible_actions(world.nav, &pose, &cfg.primitives, world.dt)
    };

    let belief_id = tree.nodes.len();
    tree.nodes.push(Node {
        parent: Some(action_id),
        visits: 0,
        kind: NodeKind::Belief(BeliefNodeData {
            state: JointBeliefState {
                robot: pose,
                belief: final_belief,
            },
            last_obs: obs,
            untried,
            children: Vec::new(),
            depth,
            edge_reward,
            value: 0.0,
            degenerate: outcome == UpdateOutcome::DegenerateRecovered,
        }),
    });
    tree.action_mut(action_id).children.push(belief_id);
    belief_id
}

/// Default rollout policy: point the post-action heading at the goal, and
/// among equally aligned primitives pick the velocity that best holds a
/// standoff distance (approach when far, hold off when close). Ties break
/// toward the lower action index.
fn default_policy(
    pose: &RobotPose,
    feasible: &[usize],
    primitives: &[RobotControl],
    goal: Point2,
    standoff: f64,
    dt: f64,
) -> usize {
    let mut best = feasible[0];
    let mut best_key = (f64::INFINITY, usize::MAX);
    for &i in feasible {
        let p = step_robot(pose, primitives[i], dt);
        let bearing = (goal.y - p.y).atan2(goal.x - p.x);
        let err = wrap_angle(bearing - p.theta).abs();
        let range_err = (p.position().distance(goal) - standoff).abs();
        // Heading alignment dominates; the range term picks the speed.
        let key = (err + 0.35 * range_err, i);
        if key < best_key {
            best_key = key;
            best = i;
        }
    }
    best
}

/// Deterministic stand-in for the prediction step inside rollouts: scale
/// particle deviations about the mean so the belief covariance grows by
/// exactly the process noise, without drawing samples. Rollout values stay
/// noise-free while unobserved beliefs still lose information over time.
fn inflate_spread(belief: &ParticleBelief, q: &nalgebra::Matrix2<f64>) -> ParticleBelief {
    let n = belief.len();
    if n < 2 {
        return belief.clone();
    }
    let mean = belief.mean_estimate().vector();
    let p = belief.covariance();
    let sqrt_spd = |m: &nalgebra::Matrix2<f64>, invert: bool| -> Option<nalgebra::Matrix2<f64>> {
        let eig = m.symmetric_eigen();
        let mut d = nalgebra::Matrix2::zeros();
        for i in 0..2 {
            let l = eig.eigenvalues[i];
            if invert {
                if l < 1e-12 {
                    return None;
                }
                d[(i, i)] = 1.0 / l.sqrt();
            } else {
                d[(i, i)] = l.max(0.0).sqrt();
            }
        }
        Some(eig.eigenvectors * d * eig.eigenvectors.transpose())
    };
    let Some(p_inv_sqrt) = sqrt_spd(&p, true) else {
        return belief.clone(); // degenerate cloud: nothing to scale
    };
    let Some(pq_sqrt) = sqrt_spd(&(p + q), false) else {
        return belief.clone();
    };
    let a = pq_sqrt * p_inv_sqrt;
    let states = belief
        .states
        .iter()
        .map(|s| {
            let d = a * (s.vector() - mean) + mean;
            crate::models::TargetState::new(d.x, d.y)
        })
        .collect();
    ParticleBelief {
        states,
        weights: belief.weights.clone(),
    }
}

/// Maximum-likelihood observation used during rollouts: empty when less
/// than half the belief mass is inside the FOV, otherwise the mixture-mean
/// detection over the in-FOV particles.
fn ml_observation(pose: &RobotPose, belief: &ParticleBelief, world: &World) -> Measurement {
    let mut mass = 0.0;
    let mut r_acc = 0.0;
    let mut sin_acc = 0.0;
    let mut cos_acc = 0.0;
    for (s, w) in belief.states.iter().zip(&belief.weights) {
        if *w <= 0.0 || !world.known.contains(s.point()) {
            continue;
        }
        if is_inside_fov(pose, s.point(), world.camera, world.known).unwrap_or(false) {
            let (r, b) = crate::models::range_bearing(pose, s);
            mass += w;
            r_acc += w * r;
            sin_acc += w * b.sin();
            cos_acc += w * b.cos();
        }
    }
    if mass < 0.5 {
        Measurement::Empty
    } else {
        Measurement::Detection {
            range: r_acc / mass,
            bearing: sin_acc.atan2(cos_acc),
        }
    }
}

/// Goal-directed rollout from a belief state, accumulating discounted
/// rewards for `depth` steps. The rollout is deterministic: particles
/// advance through the mean dynamics and observations are the
/// maximum-likelihood ones, so the continuation estimate carries no
/// sampling noise of its own and value gaps between actions stay visible
/// at small node budgets.
fn rollout(
    world: &World,
    mut state: JointBeliefState,
    depth: usize,
    cfg: &PlannerConfig,
    reward: &dyn Reward,
    guide: Option<&GoalGuide>,
) -> f64 {
    let mut total = 0.0;
    let mut discount = 1.0;
    let standoff = 0.5 * world.camera.max_range;
    for _ in 0..depth {
        let feasible = feasible_actions(world.nav, &state.robot, &cfg.primitives, world.dt);
        if feasible.is_empty() {
            break;
        }
        // Route via the navigation field when available; otherwise steer
        // straight at the goal (or the belief mean when no goal is set).
        let idx = match guide {
            Some(GoalGuide { point, field: Some(field) }) => descend_field(
                world.nav,
                &state.robot,
                &cfg.primitives,
                world.dt,
                field,
                *point,
            )
            .unwrap_or_else(|| {
                default_policy(&state.robot, &feasible, &cfg.primitives, *point, standoff, world.dt)
            }),
            Some(GoalGuide { point, field: None }) => {
                default_policy(&state.robot, &feasible, &cfg.primitives, *point, standoff, world.dt)
            }
            None => {
                let target = state.belief.mean_estimate().point();
                default_policy(&state.robot, &feasible, &cfg.primitives, target, standoff, world.dt)
            }
        };
        let action = cfg.primitives[idx];
        total += discount * reward.eval(&state, action);
        discount *= cfg.gamma;

        let pose = step_robot(&state.robot, action, world.dt);
        let predicted = inflate_spread(&state.belief, &world.noise.q);
        let z = ml_observation(&pose, &predicted, world);
        let (belief, _) =
            update_with_recovery(&predicted, &z, &pose, world.camera, world.known, world.noise);
        state = JointBeliefState { robot: pose, belief };
    }
    total
}

/// Estimate the continuation value of a belief node by rolling out to the
/// remaining horizon.
fn simulation(
    tree: &PolicyTree,
    node: NodeId,
    world: &World,
    cfg: &PlannerConfig,
    reward: &dyn Reward,
    guide: Option<&GoalGuide>,
) -> f64 {
    let b = tree.belief(node);
    let remaining = cfg.horizon.saturating_sub(b.depth);
    rollout(world, b.state.clone(), remaining, cfg, reward, guide)
}

/// Value a freshly expanded node, preferring a cached rollout from a nearby
/// cluster; on a cache miss, roll out, cache the result, and sweep the tree
/// for sibling expansions that can share the new rollout.
#[allow(clippy::too_many_arguments)]
fn recycling<G: Rng + ?Sized>(
    tree: &mut PolicyTree,
    cache: &mut Vec<(NodeId, f64)>,
    n_new: NodeId,
    world: &World,
    cfg: &PlannerConfig,
    reward: &dyn Reward,
    guide: Option<&GoalGuide>,
    rng: &mut G,
    diagnostics: &mut Diagnostics,
) -> Vec<NodeId> {
    // Closest cached cluster by the node distance.
    let mut d_min = f64::INFINITY;
    let mut c_min = usize::MAX;
    for (i, (nid, _)) in cache.iter().enumerate() {
        let d = node_distance(tree.belief(*nid), tree.belief(n_new), cfg.o_thr);
        if d < d_min {
            d_min = d;
            c_min = i;
        }
    }
    if d_min < cfg.d_thr {
        tree.belief_mut(n_new).value = cache[c_min].1;
        diagnostics.reuses += 1;
        return vec![n_new];
    }

    let q = simulation(tree, n_new, world, cfg, reward, guide);
    diagnostics.full_rollouts += 1;
    tree.belief_mut(n_new).value = q;
    cache.push((n_new, q));
    let mut s_new = vec![n_new];

    // Sweep: expand untried actions elsewhere in the tree whose post-action
    // robot position lands within d_thr of the new node, pairing them with
    // the new node's observation and sharing its rollout value. The
    // distance only depends on the candidate's pose and observation, so it
    // is checked before paying for the belief update.
    let obs = tree.belief(n_new).last_obs;
    let new_pose = tree.belief(n_new).state.robot;
    for nb in tree.belief_ids() {
        let untried = tree.belief(nb).untried.clone();
        if untried.is_empty() {
            continue;
        }
        let nb_pose = tree.belief(nb).state.robot;
        for action_idx in untried {
            let pose = step_robot(&nb_pose, cfg.primitives[action_idx], world.dt);
            if robot_state_distance(&pose, &new_pose) >= cfg.d_thr {
                continue;
            }
            let child = expansion(tree, nb, action_idx, obs, world, cfg, reward, rng);
            if child == n_new {
                continue;
            }
            tree.belief_mut(child).value = q;
            diagnostics.reuses += 1;
            s_new.push(child);
        }
    }
    s_new
}

/// Push a node's value up to the root: every node on the path gains a
/// visit, and each action node accumulates its child's edge reward plus the
/// discounted propagated value.
fn backpropagation(tree: &mut PolicyTree, node: NodeId, gamma: f64) {
    let mut value = tree.belief(node).value;
    tree.nodes[node].visits += 1;
    let mut cur = node;
    while let Some(action_id) = tree.nodes[cur].parent {
        value = tree.belief(cur).edge_reward + gamma * value;
        tree.action_mut(action_id).q_sum += value;
        tree.nodes[action_id].visits += 1;
        let q_mean = tree.action(action_id).q_sum / tree.nodes[action_id].visits as f64;
        tree.note_q(q_mean);
        let belief_id = tree.nodes[action_id].parent.expect("action nodes have parents");
        tree.nodes[belief_id].visits += 1;
        cur = belief_id;
    }
}

/// Grow a policy tree from the root belief and return the root action with
/// the best mean value.
///
/// `root_obs` is the real sensor's latest measurement (the root's history);
/// `goal` directs rollouts (the hierarchy's goal waypoint when available).
pub fn build_tree<G: Rng + ?Sized>(
    world: &World,
    root_state: &JointBeliefState,
    root_obs: Measurement,
    guide: Option<&GoalGuide>,
    cfg: &PlannerConfig,
    reward: &dyn Reward,
    rng: &mut G,
) -> Result<PlanOutcome, PlannerStuck> {
    let started = Instant::now();
    let (tree, mut diagnostics) = grow_tree(world, root_state, root_obs, guide, cfg, reward, rng)?;

    let mut root_values = Vec::new();
    let mut best: Option<(f64, usize)> = None;
    for &c in &tree.belief(tree.root).children {
        let a = tree.action(c);
        let visits = tree.nodes[c].visits;
        if visits == 0 {
            continue;
        }
        let mean = a.q_sum / visits as f64;
        root_values.push((a.action_idx, mean, visits));
        match best {
            None => best = Some((mean, a.action_idx)),
            Some((bq, bi)) => {
                if mean > bq || (mean == bq && a.action_idx < bi) {
                    best = Some((mean, a.action_idx));
                }
            }
        }
    }
    root_values.sort_by_key(|r| r.0);
    let (_, action_idx) = best.ok_or(PlannerStuck)?;
    diagnostics.wall = started.elapsed();
    Ok(PlanOutcome {
        action_idx,
        action: cfg.primitives[action_idx],
        diagnostics,
        root_values,
    })
}

/// Run the growth loop and return the raw tree with diagnostics.
pub(crate) fn grow_tree<G: Rng + ?Sized>(
    world: &World,
    root_state: &JointBeliefState,
    root_obs: Measurement,
    guide: Option<&GoalGuide>,
    cfg: &PlannerConfig,
    reward: &dyn Reward,
    rng: &mut G,
) -> Result<(PolicyTree, Diagnostics), PlannerStuck> {
    let feasible = feasible_actions(world.nav, &root_state.robot, &cfg.primitives, world.dt);
    if feasible.is_empty() {
        return Err(PlannerStuck);
    }
    let mut tree = PolicyTree::new(root_state.clone(), root_obs, feasible);
    let mut cache: Vec<(NodeId, f64)> = Vec::new();
    let mut diagnostics = Diagnostics::default();
    let recycling_on = cfg.recycling && cfg.d_thr > 0.0;

    let mut stalled = 0usize;
    while tree.nodes.len() <= cfg.max_nodes {
        let Some(leaf) = selection(&tree, cfg, rng) else {
            stalled += 1;
            if stalled > 4 * cfg.max_nodes.max(8) {
                break;
            }
            continue;
        };
        stalled = 0;
        let (parent, action_idx, obs) = sample_action_observation(&tree, leaf, world, cfg, rng);
        let n_new = expansion(&mut tree, parent, action_idx, obs, world, cfg, reward, rng);
        let s_new = if recycling_on {
            recycling(
                &mut tree,
                &mut cache,
                n_new,
                world,
                cfg,
                reward,
                guide,
                rng,
                &mut diagnostics,
            )
        } else {
            let q = simulation(&tree, n_new, world, cfg, reward, guide);
            diagnostics.full_rollouts += 1;
            tree.belief_mut(n_new).value = q;
            vec![n_new]
        };
        for n in s_new {
            backpropagation(&mut tree, n, cfg.gamma);
        }
    }
    diagnostics.nodes = tree.nodes.len();
    diagnostics.degenerate_updates = tree
        .nodes
        .iter()
        .filter(|n| matches!(&n.kind, NodeKind::Belief(b) if b.degenerate))
        .count();
    Ok((tree, diagnostics))
}

/// Pick the collision-free primitive that descends a navigation distance
/// field fastest (ties broken by goal-heading alignment, then index).
/// Used for transit when the tree finds no informative action within its
/// horizon: the field encodes the obstacle-aware route to the goal.
pub fn descend_field(
    nav: &OccupancyGrid,
    pose: &RobotPose,
    primitives: &[RobotControl],
    dt: f64,
    field: &[f64],
    goal: Point2,
) -> Option<usize> {
    let feasible = feasible_actions(nav, pose, primitives, dt);
    // Direction of the steepest-descent neighbor cell: when every moving
    // primitive is blocked (say, nose against a wall the route skirts),
    // rotations tie on the field value and the one turning toward the
    // descending direction must win.
    let steer_bearing = nav
        .cell_of(pose.position())
        .and_then(|(cx, cy)| {
            let mut best: Option<(f64, Point2)> = None;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (cx as i64 + dx, cy as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= nav.width() as i64 || ny >= nav.height() as i64 {
                        continue;
                    }
                    let v = field[ny as usize * nav.width() + nx as usize];
                    if v.is_finite()
                        && best.map_or(true, |(b, _)| v < b)
                    {
                        best = Some((v, nav.cell_center(nx as usize, ny as usize)));
                    }
                }
            }
            best.map(|(_, c)| c)
        })
        .unwrap_or(goal);
    let mut best: Option<(f64, f64, usize)> = None;
    for i in feasible {
        let p = step_robot(pose, primitives[i], dt);
        let Some((cx, cy)) = nav.cell_of(p.position()) else {
            continue;
        };
        let d = field[cy * nav.width() + cx];
        if !d.is_finite() {
            continue;
        }
        let heading_err = wrap_angle(
            (steer_bearing.y - p.y).atan2(steer_bearing.x - p.x) - p.theta,
        )
        .abs();
        let key = (d, heading_err, i);
        if best.map_or(true, |b| key < b) {
            best = Some(key);
        }
    }
    best.map(|(_, _, i)| i)
}

/// Greedy next-best-view baseline: the collision-free primitive with the
/// highest immediate reward. Deterministic; ties go to the lowest index.
pub fn nbv_action(
    world: &World,
    state: &JointBeliefState,
    cfg: &PlannerConfig,
    reward: &dyn Reward,
) -> Result<PlanOutcome, PlannerStuck> {
    let started = Instant::now();
    let feasible = feasible_actions(world.nav, &state.robot, &cfg.primitives, world.dt);
    if feasible.is_empty() {
        return Err(PlannerStuck);
    }
    let mut best = (f64::NEG_INFINITY, usize::MAX);
    let mut root_values = Vec::new();
    for &i in &feasible {
        let r = reward.eval(state, cfg.primitives[i]);
        root_values.push((i, r, 1));
        if r > best.0 || (r == best.0 && i < best.1) {
            best = (r, i);
        }
    }
    Ok(PlanOutcome {
        action_idx: best.1,
        action: cfg.primitives[best.1],
        diagnostics: Diagnostics {
            nodes: feasible.len() + 1,
            wall: started.elapsed(),
            ..Diagnostics::default()
        },
        root_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::ParticleBelief;
    use crate::env::SensorKind;
    use crate::models::TargetState;
    use nalgebra::Matrix2;
    use rand::rngs::StdRng;
    use rand::SeedableRng;
    use std::f64::consts::{FRAC_PI_3, PI};

    fn open_map() -> OccupancyGrid {
        OccupancyGrid::new(160, 160, 0.5, Point2::new(-40.0, -40.0), CellState::Free)
    }

    fn noise() -> NoiseModel {
        NoiseModel::new(
            Matrix2::new(0.01, 0.0, 0.0, 0.01),
            Matrix2::new(0.1, 0.0, 0.0, 0.01),
        )
    }

    fn world<'a>(map: &'a OccupancyGrid, camera: &'a SensorConfig, nm: &'a NoiseModel) -> World<'a> {
        World {
            known: map,
            nav: map,
            camera,
            noise: nm,
            dt: 0.5,
        }
    }

    fn state_at(robot: RobotPose, particles: &[(f64, f64, f64)]) -> JointBeliefState {
        JointBeliefState {
            robot,
            belief: ParticleBelief::new(
                particles.iter().map(|(x, y, _)| TargetState::new(*x, *y)).collect(),
                particles.iter().map(|(_, _, w)| *w).collect(),
            ),
        }
    }

    #[test]
    fn single_feasible_action_is_returned() {
        let map = open_map();
        let camera = SensorConfig::new(6.0, PI / 4.0, SensorKind::Camera);
        let nm = noise();
        let w = world(&map, &camera, &nm);
        let cfg = PlannerConfig {
            primitives: vec![RobotControl { v: 1.5, w: 0.0 }],
            max_nodes: 30,
            ..PlannerConfig::default()
        };
        let st = state_at(RobotPose::new(0.0, 0.0, 0.0), &[(20.0, 20.0, 1.0)]);
        let reward = |_: &JointBeliefState, _: RobotControl| 0.0;
        let mut rng = StdRng::seed_from_u64(0);
        let out = build_tree(&w, &st, Measurement::Empty, None, &cfg, &reward, &mut rng).unwrap();
        assert_eq!(out.action_idx, 0);
    }

    #[test]
    fn planner_stuck_without_feasible_actions() {
        let mut map = open_map();
        // Occupy everything: nowhere to go.
        for cy in 0..map.height() {
            for cx in 0..map.width() {
                map.set_cell(cx, cy, CellState::Occupied);
            }
        }
        let camera = SensorConfig::new(6.0, PI / 4.0, SensorKind::Camera);
        let nm = noise();
        let w = world(&map, &camera, &nm);
        let cfg = PlannerConfig::default();
        let st = state_at(RobotPose::new(0.0, 0.0, 0.0), &[(20.0, 20.0, 1.0)]);
        let reward = |_: &JointBeliefState, _: RobotControl| 0.0;
        let mut rng = StdRng::seed_from_u64(0);
        assert!(build_tree(&w, &st, Measurement::Empty, None, &cfg, &reward, &mut rng).is_err());
    }

    #[test]
    fn two_step_toy_prefers_high_reward_action() {
        // Stub reward keyed on the action: A (index 0) pays 1.0, B pays 0.1.
        let map = open_map();
        let camera = SensorConfig::new(50.0, PI, SensorKind::Camera);
        let nm = noise();
        let w = world(&map, &camera, &nm);
        let cfg = PlannerConfig {
            primitives: vec![
                RobotControl { v: 1.5, w: 0.0 },
                RobotControl { v: 1.5, w: FRAC_PI_3 },
            ],
            max_nodes: 100,
            horizon: 2,
            ..PlannerConfig::default()
        };
        let st = state_at(RobotPose::new(0.0, 0.0, 0.0), &[(5.0, 0.0, 1.0)]);
        let reward =
            |_: &JointBeliefState, a: RobotControl| if a.w == 0.0 { 1.0 } else { 0.1 };
        for seed in 0..5 {
            let mut rng = StdRng::seed_from_u64(seed);
            let out =
                build_tree(&w, &st, Measurement::Empty, None, &cfg, &reward, &mut rng).unwrap();
            assert_eq!(out.action_idx, 0, "seed {seed}");
        }
    }

    #[test]
    fn build_tree_is_deterministic_per_seed() {
        let map = open_map();
        let camera = SensorConfig::new(6.0, PI / 4.0, SensorKind::Camera);
        let nm = noise();
        let w = world(&map, &camera, &nm);
        let cfg = PlannerConfig { max_nodes: 60, ..PlannerConfig::default() };
        let st = state_at(
            RobotPose::new(0.0, 0.0, 0.0),
            &[(4.0, 1.0, 0.25), (6.0, -2.0, 0.25), (-10.0, 3.0, 0.5)],
        );
        let mi_cfg = MiConfig::default();
        let reward = MiRewardFn::new(&w, mi_cfg);
        let run = |seed: u64| {
            let mut rng = StdRng::seed_from_u64(seed);
            build_tree(&w, &st, Measurement::Empty, None, &cfg, &reward, &mut rng).unwrap()
        };
        let a = run(7);
        let b = run(7);
        assert_eq!(a.action_idx, b.action_idx);
        assert_eq!(a.diagnostics.nodes, b.diagnostics.nodes);
        assert_eq!(a.diagnostics.full_rollouts, b.diagnostics.full_rollouts);
        assert_eq!(a.diagnostics.reuses, b.diagnostics.reuses);
        assert_eq!(a.root_values, b.root_values);
    }

    #[test]
    fn selection_prefers_higher_mean_value() {
        // Hand-built tree: root with two fully backed-up action children.
        let st = state_at(RobotPose::new(0.0, 0.0, 0.0), &[(5.0, 0.0, 1.0)]);
        let mut tree = PolicyTree::new(st.clone(), Measurement::Empty, Vec::new());
        let cfg = PlannerConfig {
            primitives: vec![
                RobotControl { v: 0.0, w: 0.0 },
                RobotControl { v: 1.5, w: 0.0 },
            ],
            ..PlannerConfig::default()
        };
        for (idx, q) in [(0usize, 0.9f64), (1, 0.1)] {
            let id = tree.nodes.len();
            tree.nodes.push(Node {
                parent: Some(0),
                visits: 10,
                kind: NodeKind::Action(ActionNodeData {
                    action_idx: idx,
                    q_sum: q * 10.0,
                    children: vec![],
                }),
            });
            tree.belief_mut(0).children.push(id);
            tree.note_q(q);
        }
        tree.nodes[0].visits = 20;
        // Give both actions one belief child so selection descends past them.
        for a_id in [1usize, 2] {
            let id = tree.nodes.len();
            tree.nodes.push(Node {
                parent: Some(a_id),
                visits: 10,
                kind: NodeKind::Belief(BeliefNodeData {
                    state: st.clone(),
                    last_obs: Measurement::Empty,
                    untried: vec![0],
                    children: vec![],
                    depth: 1,
                    edge_reward: 0.0,
                    value: 0.0,
                    degenerate: false,
                }),
            });
            tree.action_mut(a_id).children.push(id);
        }
        let mut rng = StdRng::seed_from_u64(0);
        let leaf = selection(&tree, &cfg, &mut rng).unwrap();
        // The 0.9 subtree is entered: either the action node itself (new
        // observation child allowed) or its belief child.
        assert!(
            leaf == 1 || tree.nodes[leaf].parent == Some(1),
            "leaf {leaf} not under the high-value action"
        );
    }

    #[test]
    fn selection_boosts_rarely_visited_child() {
        // Equal mean values, visits 1 vs 100: the UCB bonus dominates.
        let st = state_at(RobotPose::new(0.0, 0.0, 0.0), &[(5.0, 0.0, 1.0)]);
        let mut tree = PolicyTree::new(st.clone(), Measurement::Empty, Vec::new());
        let cfg = PlannerConfig {
            primitives: vec![
                RobotControl { v: 0.0, w: 0.0 },
                RobotControl { v: 1.5, w: 0.0 },
            ],
            c_ucb: std::f64::consts::SQRT_2,
            ..PlannerConfig::default()
        };
        for (idx, visits) in [(0usize, 100u32), (1, 1)] {
            let id = tree.nodes.len();
            tree.nodes.push(Node {
                parent: Some(0),
                visits,
                kind: NodeKind::Action(ActionNodeData {
                    action_idx: idx,
                    q_sum: 0.5 * visits as f64,
                    children: vec![],
                }),
            });
            tree.belief_mut(0).children.push(id);
        }
        tree.note_q(0.5);
        tree.nodes[0].visits = 101;
        for a_id in [1usize, 2] {
            let id = tree.nodes.len();
            tree.nodes.push(Node {
                parent: Some(a_id),
                visits: 1,
                kind: NodeKind::Belief(BeliefNodeData {
                    state: st.clone(),
                    last_obs: Measurement::Empty,
                    untried: vec![0],
                    children: vec![],
                    depth: 1,
                    edge_reward: 0.0,
                    value: 0.0,
                    degenerate: false,
                }),
            });
            tree.action_mut(a_id).children.push(id);
        }
        let mut rng = StdRng::seed_from_u64(0);
        let leaf = selection(&tree, &cfg, &mut rng).unwrap();
        assert_eq!(tree.nodes[leaf].parent, Some(2), "1-visit child wins");
    }

    #[test]
    fn sampled_observation_tracks_fov_mass() {
        let map = open_map();
        let camera = SensorConfig::new(8.0, PI / 2.0, SensorKind::Camera);
        let nm = noise();
        let w = world(&map, &camera, &nm);
        let cfg = PlannerConfig::default();

        // Everything far behind the robot: always empty.
        let st = state_at(RobotPose::new(0.0, 0.0, 0.0), &[(-20.0, 0.0, 1.0)]);
        let tree = PolicyTree::new(st, Measurement::Empty, vec![0]);
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..50 {
            let z = sample_observation(&tree, 0, 4, &w, &cfg, &mut rng);
            assert_eq!(z, Measurement::Empty);
        }

        // Single particle straight ahead with near-zero noise: the
        // detection sits at the deterministic range-bearing value.
        let nm2 = NoiseModel::new(
            Matrix2::new(1e-16, 0.0, 0.0, 1e-16),
            Matrix2::new(1e-16, 0.0, 0.0, 1e-16),
        );
        let w2 = World { noise: &nm2, ..world(&map, &camera, &nm2) };
        let st2 = state_at(RobotPose::new(0.0, 0.0, 0.0), &[(5.0, 0.0, 1.0)]);
        let tree2 = PolicyTree::new(st2, Measurement::Empty, vec![0]);
        // Action 4 is (v=1.5, w=0): post-action robot at (0.75, 0).
        let z = sample_observation(&tree2, 0, 4, &w2, &cfg, &mut rng);
        match z {
            Measurement::Detection { range, bearing } => {
                assert!((range - 4.25).abs() < 1e-6);
                assert!(bearing.abs() < 1e-6);
            }
            Measurement::Empty => panic!("deterministic in-FOV particle"),
        }

        // Half the mass in FOV: detection frequency is binomial around 0.5.
        let st3 = state_at(
            RobotPose::new(0.0, 0.0, 0.0),
            &[(5.0, 0.0, 0.5), (-20.0, 0.0, 0.5)],
        );
        let tree3 = PolicyTree::new(st3, Measurement::Empty, vec![0]);
        let n = 10_000;
        let mut hits = 0;
        for _ in 0..n {
            if sample_observation(&tree3, 0, 4, &w, &cfg, &mut rng).is_detection() {
                hits += 1;
            }
        }
        let p = hits as f64 / n as f64;
        let sigma = (0.5 * 0.5 / n as f64).sqrt();
        assert!((p - 0.5).abs() < 3.0 * sigma, "frequency {p}");
    }

    #[test]
    fn expansion_copies_parent_and_allows_duplicates() {
        let map = open_map();
        let camera = SensorConfig::new(6.0, PI / 4.0, SensorKind::Camera);
        let nm = noise();
        let w = world(&map, &camera, &nm);
        let cfg = PlannerConfig::default();
        let st = state_at(
            RobotPose::new(0.0, 0.0, 0.0),
            &[(-20.0, 0.0, 0.5), (-22.0, 2.0, 0.5)],
        );
        let feasible = feasible_actions(w.nav, &st.robot, &cfg.primitives, w.dt);
        let mut tree = PolicyTree::new(st.clone(), Measurement::Empty, feasible);
        let reward = |_: &JointBeliefState, _: RobotControl| 0.0;
        let mut rng = StdRng::seed_from_u64(3);

        let c1 = expansion(&mut tree, 0, 4, Measurement::Empty, &w, &cfg, &reward, &mut rng);
        // Parent belief unchanged by expansion.
        assert_eq!(tree.belief(0).state.belief, st.belief);
        // Empty observation with the whole belief outside the FOV: weights
        // unchanged in the child.
        assert_eq!(tree.belief(c1).state.belief.weights, st.belief.weights);
        assert!(!tree.belief(c1).degenerate);

        let c2 = expansion(&mut tree, 0, 4, Measurement::Empty, &w, &cfg, &reward, &mut rng);
        assert_ne!(c1, c2, "continuous observations never dedupe");
        let action_id = tree.nodes[c1].parent.unwrap();
        assert_eq!(tree.nodes[c2].parent.unwrap(), action_id);
        assert_eq!(tree.action(action_id).children.len(), 2);
        // The tried action left the parent's untried set exactly once.
        assert!(!tree.belief(0).untried.contains(&4));
    }

    #[test]
    fn node_distance_examples() {
        let st = state_at(RobotPose::new(0.0, 0.0, 0.0), &[(5.0, 0.0, 1.0)]);
        let mk = |x: f64, obs: Measurement| BeliefNodeData {
            state: JointBeliefState {
                robot: RobotPose::new(x, 0.0, 0.0),
                belief: st.belief.clone(),
            },
            last_obs: obs,
            untried: vec![],
            children: vec![],
            depth: 1,
            edge_reward: 0.0,
            value: 0.0,
            degenerate: false,
        };
        let a = mk(0.0, Measurement::Empty);
        assert_eq!(node_distance(&a, &a, 0.1), 0.0);
        let b = mk(0.3, Measurement::Empty);
        assert!((node_distance(&a, &b, 0.1) - 0.3).abs() < 1e-12);
        let c = mk(0.0, Measurement::Detection { range: 5.0, bearing: 0.0 });
        assert_eq!(node_distance(&a, &c, 0.1), f64::INFINITY);
        let d = mk(0.1, Measurement::Detection { range: 5.05, bearing: 0.0 });
        assert!((node_distance(&c, &d, 0.1) - 0.1).abs() < 1e-12);
        let e = mk(0.1, Measurement::Detection { range: 5.5, bearing: 0.0 });
        assert_eq!(node_distance(&c, &e, 0.1), f64::INFINITY);
    }

    #[test]
    fn recycling_reuses_cached_cluster() {
        let map = open_map();
        let camera = SensorConfig::new(6.0, PI / 4.0, SensorKind::Camera);
        let nm = noise();
        let w = world(&map, &camera, &nm);
        let cfg = PlannerConfig { d_thr: 0.5, ..PlannerConfig::default() };
        let st = state_at(RobotPose::new(0.0, 0.0, 0.0), &[(-20.0, 0.0, 1.0)]);
        let feasible = feasible_actions(w.nav, &st.robot, &cfg.primitives, w.dt);
        let mut tree = PolicyTree::new(st, Measurement::Empty, feasible);
        let reward = |_: &JointBeliefState, _: RobotControl| 0.0;
        let mut rng = StdRng::seed_from_u64(5);
        let mut diagnostics = Diagnostics::default();

        // First expansion: empty cache forces a rollout and caches it.
        let c1 = expansion(&mut tree, 0, 4, Measurement::Empty, &w, &cfg, &reward, &mut rng);
        let mut cache = Vec::new();
        let s1 = recycling(
            &mut tree, &mut cache, c1, &w, &cfg, &reward, None, &mut rng, &mut diagnostics,
        );
        assert_eq!(cache.len(), 1);
        assert_eq!(diagnostics.full_rollouts, 1);
        assert!(s1.contains(&c1));
        for n in s1 {
            backpropagation(&mut tree, n, cfg.gamma);
        }

        // Doctor the cached reward, then expand the same action again: the
        // new sibling lands at distance 0 and reuses the cached value.
        cache[0].1 = 0.7;
        let c2 = expansion(&mut tree, 0, 4, Measurement::Empty, &w, &cfg, &reward, &mut rng);
        let before = diagnostics.full_rollouts;
        let s2 = recycling(
            &mut tree, &mut cache, c2, &w, &cfg, &reward, None, &mut rng, &mut diagnostics,
        );
        assert_eq!(diagnostics.full_rollouts, before, "no new rollout");
        assert_eq!(tree.belief(c2).value, 0.7);
        assert_eq!(s2, vec![c2]);
    }

    #[test]
    fn zero_reuse_radius_matches_vanilla_seed_for_seed() {
        let map = open_map();
        let camera = SensorConfig::new(6.0, PI / 4.0, SensorKind::Camera);
        let nm = noise();
        let w = world(&map, &camera, &nm);
        let st = state_at(
            RobotPose::new(0.0, 0.0, 0.0),
            &[(4.0, 1.0, 0.3), (-12.0, 3.0, 0.7)],
        );
        let mi_cfg = MiConfig::default();
        let reward = MiRewardFn::new(&w, mi_cfg);
        for seed in 0..6 {
            let zero_dthr = PlannerConfig {
                d_thr: 0.0,
                recycling: true,
                max_nodes: 50,
                ..PlannerConfig::default()
            };
            let vanilla = PlannerConfig {
                recycling: false,
                max_nodes: 50,
                ..PlannerConfig::default()
            };
            let mut rng1 = StdRng::seed_from_u64(seed);
            let a = build_tree(&w, &st, Measurement::Empty, None, &zero_dthr, &reward, &mut rng1)
                .unwrap();
            let mut rng2 = StdRng::seed_from_u64(seed);
            let b = build_tree(&w, &st, Measurement::Empty, None, &vanilla, &reward, &mut rng2)
                .unwrap();
            assert_eq!(a.action_idx, b.action_idx, "seed {seed}");
            assert_eq!(a.diagnostics.nodes, b.diagnostics.nodes);
            assert_eq!(a.diagnostics.full_rollouts, b.diagnostics.full_rollouts);
            assert_eq!(a.diagnostics.reuses, 0);
            assert_eq!(b.diagnostics.reuses, 0);
        }
    }

    #[test]
    fn simulation_depth_zero_and_constant_reward() {
        let map = open_map();
        let camera = SensorConfig::new(6.0, PI / 4.0, SensorKind::Camera);
        let nm = noise();
        let w = world(&map, &camera, &nm);
        let st = state_at(RobotPose::new(0.0, 0.0, 0.0), &[(20.0, 20.0, 1.0)]);

        // Depth 0: node already at the horizon.
        let cfg0 = PlannerConfig { horizon: 0, gamma: 1.0, ..PlannerConfig::default() };
        let tree = PolicyTree::new(st.clone(), Measurement::Empty, vec![]);
        let unit = |_: &JointBeliefState, _: RobotControl| 1.0;
        let mut rng = StdRng::seed_from_u64(0);
        assert_eq!(
            simulation(&tree, 0, &w, &cfg0, &unit, None),
            0.0
        );

        // gamma = 1, constant reward r, depth d: Q = d * r.
        let cfg = PlannerConfig { horizon: 7, gamma: 1.0, ..PlannerConfig::default() };
        let r = 0.35;
        let constant = move |_: &JointBeliefState, _: RobotControl| r;
        let q = simulation(&tree, 0, &w, &cfg, &constant, None);
        assert!((q - 7.0 * r).abs() < 1e-12);

        // A belief far outside the FOV for the whole rollout earns zero MI.
        let mi_cfg = MiConfig::default();
        let mi = MiRewardFn::new(&w, mi_cfg);
        let far = state_at(RobotPose::new(0.0, 0.0, 0.0), &[(-35.0, -35.0, 1.0)]);
        let tree_far = PolicyTree::new(far, Measurement::Empty, vec![]);
        // Rollouts steer toward the belief mean, which sits behind the
        // robot; it cannot enter the FOV within two steps.
        let cfg_short = PlannerConfig { horizon: 2, ..PlannerConfig::default() };
        let q = simulation(&tree_far, 0, &w, &cfg_short, &mi, None);
        assert_eq!(q, 0.0);
    }

    #[test]
    fn backpropagation_discounts_along_the_path() {
        // Root -> A1 -> b1 -> A2 -> b2; gamma 0.5, zero edge rewards,
        // leaf value 1.0: the root action gains 0.25.
        let st = state_at(RobotPose::new(0.0, 0.0, 0.0), &[(5.0, 0.0, 1.0)]);
        let mut tree = PolicyTree::new(st.clone(), Measurement::Empty, vec![]);
        let mut add_action = |tree: &mut PolicyTree, parent: NodeId, idx: usize| {
            let id = tree.nodes.len();
            tree.nodes.push(Node {
                parent: Some(parent),
                visits: 0,
                kind: NodeKind::Action(ActionNodeData {
                    action_idx: idx,
                    q_sum: 0.0,
                    children: vec![],
                }),
            });
            tree.belief_mut(parent).children.push(id);
            id
        };
        let add_belief = |tree: &mut PolicyTree, parent: NodeId, depth: usize| {
            let id = tree.nodes.len();
            tree.nodes.push(Node {
                parent: Some(parent),
                visits: 0,
                kind: NodeKind::Belief(BeliefNodeData {
                    state: st.clone(),
                    last_obs: Measurement::Empty,
                    untried: vec![],
                    children: vec![],
                    depth,
                    edge_reward: 0.0,
                    value: 0.0,
                    degenerate: false,
                }),
            });
            tree.action_mut(parent).children.push(id);
            id
        };
        let a1 = add_action(&mut tree, 0, 0);
        let b1 = add_belief(&mut tree, a1, 1);
        let a2 = {
            let id = tree.nodes.len();
            tree.nodes.push(Node {
                parent: Some(b1),
                visits: 0,
                kind: NodeKind::Action(ActionNodeData {
                    action_idx: 0,
                    q_sum: 0.0,
                    children: vec![],
                }),
            });
            tree.belief_mut(b1).children.push(id);
            id
        };
        let b2 = add_belief(&mut tree, a2, 2);
        tree.belief_mut(b2).value = 1.0;
        backpropagation(&mut tree, b2, 0.5);
        assert!((tree.action(a2).q_sum - 0.5).abs() < 1e-12);
        assert!((tree.action(a1).q_sum - 0.25).abs() < 1e-12);
        assert_eq!(tree.nodes[0].visits, 1);
        assert_eq!(tree.nodes[b2].visits, 1);

        // A second backprop with value 0 through the same action node
        // leaves the running mean at half the first value.
        let b2bis = add_belief(&mut tree, a2, 2);
        tree.belief_mut(b2bis).value = 0.0;
        backpropagation(&mut tree, b2bis, 0.5);
        let mean = tree.action(a2).q_sum / tree.nodes[a2].visits as f64;
        assert!((mean - 0.25).abs() < 1e-12);
    }

    #[test]
    fn tree_shape_and_budget_invariants() {
        let map = open_map();
        let camera = SensorConfig::new(6.0, PI / 4.0, SensorKind::Camera);
        let nm = noise();
        let w = world(&map, &camera, &nm);
        let cfg = PlannerConfig { max_nodes: 40, ..PlannerConfig::default() };
        let st = state_at(
            RobotPose::new(0.0, 0.0, 0.0),
            &[(4.0, 1.0, 0.5), (-6.0, 2.0, 0.5)],
        );
        let mi_cfg = MiConfig::default();
        let reward = MiRewardFn::new(&w, mi_cfg);
        let mut rng = StdRng::seed_from_u64(11);
        let (tree, diagnostics) =
            grow_tree(&w, &st, Measurement::Empty, None, &cfg, &reward, &mut rng).unwrap();

        // Strict action/belief alternation from every node up to the root.
        for (id, node) in tree.nodes.iter().enumerate() {
            match (&node.kind, node.parent) {
                (NodeKind::Belief(_), None) => assert_eq!(id, tree.root),
                (NodeKind::Belief(_), Some(p)) => {
                    assert!(matches!(tree.nodes[p].kind, NodeKind::Action(_)))
                }
                (NodeKind::Action(_), Some(p)) => {
                    assert!(matches!(tree.nodes[p].kind, NodeKind::Belief(_)))
                }
                (NodeKind::Action(_), None) => panic!("action node without a parent"),
            }
        }
        // The loop exits right after the budget is crossed; a final
        // iteration can add the expansion pair plus one sweep commit (two
        // nodes) per untried action present in the tree at that moment.
        let cap = cfg.max_nodes + 2 + 2 * cfg.primitives.len() * diagnostics.nodes;
        assert!(diagnostics.nodes <= cap);
        assert!(diagnostics.full_rollouts + diagnostics.reuses >= 1);
        // Every belief node except the root has exactly one action parent.
        let beliefs = tree.belief_ids();
        for id in beliefs {
            if id != tree.root {
                assert!(tree.nodes[id].parent.is_some());
            }
        }
    }
}
