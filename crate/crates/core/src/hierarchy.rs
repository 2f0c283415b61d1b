//! Three-layer particle abstraction for planning under dispersed beliefs.
//!
//! Coarse-grid clustering turns the particle cloud into a handful of
//! high-level waypoints; an obstacle-aware tour through them picks the next
//! goal region; the original particles of that region become the critical
//! set, which a fine grid then compresses into the planning belief.

use std::collections::BTreeMap;

use crate::belief::ParticleBelief;
use crate::env::{CellState, OccupancyGrid};
use crate::geom::Point2;
use crate::mi::simplify_particles;
use crate::models::{RobotPose, TargetState};

/// Coarse and fine grid cell sides, meters. `coarse_cell > fine_cell > 0`.
#[derive(Clone, Copy, Debug)]
pub struct HierarchyConfig {
    pub coarse_cell: f64,
    pub fine_cell: f64,
    /// Coarse cells lighter than this fraction of the heaviest cell are
    /// sampling noise, not waypoints worth a detour.
    pub min_waypoint_mass: f64,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self {
            coarse_cell: 10.0,
            fine_cell: 1.0,
            min_waypoint_mass: 0.1,
        }
    }
}

/// Selected goal: a coarse-cell waypoint plus the indices of the original
/// particles it clusters.
#[derive(Clone, Debug)]
pub struct Goal {
    pub point: Point2,
    pub members: Vec<usize>,
}

/// All four layers produced by one hierarchy pass, plus the navigation
/// distance field anchored at the goal (for transit when the planner sees
/// no information within its horizon).
#[derive(Clone, Debug)]
pub struct HierarchyOutput {
    pub high_level: ParticleBelief,
    pub goal: Goal,
    pub critical: ParticleBelief,
    pub simplified: ParticleBelief,
    pub goal_field: Option<Vec<f64>>,
}

/// Diagnostics from goal selection.
#[derive(Clone, Debug, Default)]
pub struct FindGoalReport {
    /// Waypoints dropped from the tour because no path reached them.
    pub unreachable: Vec<usize>,
    /// All waypoints were unreachable; straight-line distances were used.
    pub straight_line_fallback: bool,
}

/// Cluster particles on a coarse grid anchored at the world origin: one
/// high-level particle per occupied cell at the members' weighted mean.
/// Also returns the per-cell member indices for critical-particle recovery.
pub fn coarse_grid(
    b: &ParticleBelief,
    cell: f64,
) -> (ParticleBelief, Vec<Vec<usize>>) {
    assert!(cell > 0.0);
    let mut bins: BTreeMap<(i64, i64), (f64, f64, f64, Vec<usize>)> = BTreeMap::new();
    for (i, (s, w)) in b.states.iter().zip(&b.weights).enumerate() {
        let key = ((s.x / cell).floor() as i64, (s.y / cell).floor() as i64);
        let e = bins.entry(key).or_insert((0.0, 0.0, 0.0, Vec::new()));
        e.0 += w;
        e.1 += w * s.x;
        e.2 += w * s.y;
        e.3.push(i);
    }
    let mut states = Vec::with_capacity(bins.len());
    let mut weights = Vec::with_capacity(bins.len());
    let mut membership = Vec::with_capacity(bins.len());
    for (_, (w, wx, wy, members)) in bins {
        if w > 0.0 {
            states.push(TargetState::new(wx / w, wy / w));
        } else {
            // Zero-weight cell: fall back to the unweighted member mean.
            let n = members.len() as f64;
            let (mut sx, mut sy) = (0.0, 0.0);
            for &i in &members {
                sx += b.states[i].x;
                sy += b.states[i].y;
            }
            states.push(TargetState::new(sx / n, sy / n));
        }
        weights.push(w);
        membership.push(members);
    }
    (ParticleBelief { states, weights }, membership)
}

/// Obstacle-aware distance from `source` to every cell (Dijkstra over
/// free-or-unknown cells, 8-connected, no corner cutting). Unreachable and
/// occupied cells hold `INFINITY`. Used as a navigation field: descending
/// it greedily walks a shortest path toward `source`.
pub fn distance_field(map: &OccupancyGrid, source: Point2) -> Option<Vec<f64>> {
    let start = map.cell_of(source)?;
    let w = map.width();
    let h = map.height();
    if map.cell(start.0, start.1) == CellState::Occupied {
        return None;
    }
    let res = map.resolution();
    let idx = |cx: usize, cy: usize| cy * w + cx;
    let mut dist = vec![f64::INFINITY; w * h];

    #[derive(PartialEq)]
    struct Entry(f64, usize, usize);
    impl Eq for Entry {}
    impl Ord for Entry {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            other.0.partial_cmp(&self.0).unwrap_or(std::cmp::Ordering::Equal)
        }
    }
    impl PartialOrd for Entry {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }

    let blocked = |cx: usize, cy: usize| map.cell(cx, cy) == CellState::Occupied;
    let mut open = std::collections::BinaryHeap::new();
    dist[idx(start.0, start.1)] = 0.0;
    open.push(Entry(0.0, start.0, start.1));
    while let Some(Entry(d, cx, cy)) = open.pop() {
        if d > dist[idx(cx, cy)] {
            continue;
        }
        for (dx, dy) in [
            (1i64, 0i64),
            (-1, 0),
            (0, 1),
            (0, -1),
            (1, 1),
            (1, -1),
            (-1, 1),
            (-1, -1),
        ] {
            let nx = cx as i64 + dx;
            let ny = cy as i64 + dy;
            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if blocked(nx, ny) {
                continue;
            }
            let diagonal = dx != 0 && dy != 0;
            if diagonal
                && (blocked((cx as i64 + dx) as usize, cy)
                    || blocked(cx, (cy as i64 + dy) as usize))
            {
                continue;
            }
            let step = if diagonal { res * std::f64::consts::SQRT_2 } else { res };
            let nd = d + step;
            if nd < dist[idx(nx, ny)] {
                dist[idx(nx, ny)] = nd;
                open.push(Entry(nd, nx, ny));
            }
        }
    }
    Some(dist)
}

/// Grid A* over free-or-unknown cells, 8-connected with sqrt(2) diagonal
/// cost and no corner cutting. Returns the path length in meters.
pub fn astar_distance(map: &OccupancyGrid, from: Point2, to: Point2) -> Option<f64> {
    let start = map.cell_of(from)?;
    let goal = map.cell_of(to)?;
    let w = map.width();
    let h = map.height();
    let blocked =
        |cx: usize, cy: usize| -> bool { map.cell(cx, cy) == CellState::Occupied };
    if blocked(start.0, start.1) || blocked(goal.0, goal.1) {
        return None;
    }
    let res = map.resolution();
    let idx = |cx: usize, cy: usize| cy * w + cx;
    let heur = |cx: usize, cy: usize| -> f64 {
        let dx = cx as f64 - goal.0 as f64;
        let dy = cy as f64 - goal.1 as f64;
        dx.hypot(dy) * res
    };

    let mut dist = vec![f64::INFINITY; w * h];
    let mut open = std::collections::BinaryHeap::new();
    // Max-heap over ordered floats: store negated priority.
    #[derive(PartialEq)]
    struct Entry(f64, usize, usize);
    impl Eq for Entry {}
    impl Ord for Entry {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            other.0.partial_cmp(&self.0).unwrap_or(std::cmp::Ordering::Equal)
        }
    }
    impl PartialOrd for Entry {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }

    dist[idx(start.0, start.1)] = 0.0;
    open.push(Entry(heur(start.0, start.1), start.0, start.1));
    while let Some(Entry(_, cx, cy)) = open.pop() {
        if (cx, cy) == goal {
            return Some(dist[idx(cx, cy)]);
        }
        let d = dist[idx(cx, cy)];
        for (dx, dy) in [
            (1i64, 0i64),
            (-1, 0),
            (0, 1),
            (0, -1),
            (1, 1),
            (1, -1),
            (-1, 1),
            (-1, -1),
        ] {
            let nx = cx as i64 + dx;
            let ny = cy as i64 + dy;
            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if blocked(nx, ny) {
                continue;
            }
            let diagonal = dx != 0 && dy != 0;
            if diagonal
                && (blocked((cx as i64 + dx) as usize, cy)
                    || blocked(cx, (cy as i64 + dy) as usize))
            {
                continue; // no cutting corners through obstacles
            }
            let step = if diagonal { res * std::f64::consts::SQRT_2 } else { res };
            let nd = d + step;
            if nd < dist[idx(nx, ny)] {
                dist[idx(nx, ny)] = nd;
                open.push(Entry(nd + heur(nx, ny), nx, ny));
            }
        }
    }
    None
}

/// Exact open-path tour over the distance matrix: start at node 0, visit
/// every other node once, no return. Returns the visiting order of nodes
/// `1..n`. Held-Karp dynamic program, practical for n - 1 <= 10.
fn exact_open_tour(d: &[Vec<f64>]) -> Vec<usize> {
    let n = d.len() - 1; // waypoints, excluding the start node 0
    if n == 0 {
        return Vec::new();
    }
    let full = 1usize << n;
    // best[mask][last] = shortest cost starting at 0, visiting `mask`, ending at waypoint `last`.
    let mut best = vec![vec![f64::INFINITY; n]; full];
    let mut parent = vec![vec![usize::MAX; n]; full];
    for last in 0..n {
        best[1 << last][last] = d[0][last + 1];
    }
    for mask in 1..full {
        for last in 0..n {
            if mask & (1 << last) == 0 || !best[mask][last].is_finite() {
                continue;
            }
            let cost = best[mask][last];
            for next in 0..n {
                if mask & (1 << next) != 0 {
                    continue;
                }
                let nmask = mask | (1 << next);
                let ncost = cost + d[last + 1][next + 1];
                if ncost < best[nmask][next] {
                    best[nmask][next] = ncost;
                    parent[nmask][next] = last;
                }
            }
        }
    }
    let mut end = 0;
    let mut best_cost = f64::INFINITY;
    for last in 0..n {
        if best[full - 1][last] < best_cost {
            best_cost = best[full - 1][last];
            end = last;
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut mask = full - 1;
    let mut cur = end;
    loop {
        order.push(cur);
        let p = parent[mask][cur];
        mask &= !(1 << cur);
        if p == usize::MAX {
            break;
        }
        cur = p;
    }
    order.reverse();
    order
}

/// Nearest-neighbor tour from node 0 improved by 2-opt passes; fallback for
/// waypoint counts past the exact solver's range.
fn heuristic_open_tour(d: &[Vec<f64>]) -> Vec<usize> {
    let n = d.len() - 1;
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut order = Vec::with_capacity(n);
    let mut cur = 0usize; // matrix index of the current node
    while !remaining.is_empty() {
        let (pos, _) = remaining
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                d[cur][**a + 1]
                    .partial_cmp(&d[cur][**b + 1])
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        let next = remaining.remove(pos);
        order.push(next);
        cur = next + 1;
    }
    // 2-opt on the open path (node 0 fixed as start).
    let cost = |ord: &[usize]| -> f64 {
        let mut c = d[0][ord[0] + 1];
        for w in ord.windows(2) {
            c += d[w[0] + 1][w[1] + 1];
        }
        c
    };
    let mut improved = true;
    while improved {
        improved = false;
        for i in 0..order.len() {
            for j in i + 1..order.len() {
                let mut cand = order.clone();
                cand[i..=j].reverse();
                if cost(&cand) + 1e-12 < cost(&order) {
                    order = cand;
                    improved = true;
                }
            }
        }
    }
    order
}

/// Pick the next goal waypoint: obstacle-aware distances between the robot
/// and every high-level particle, an open tour from the robot through all
/// of them, and the tour's first stop wins.
pub fn find_goal(
    high_level: &ParticleBelief,
    membership: &[Vec<usize>],
    robot: &RobotPose,
    map: &OccupancyGrid,
    min_waypoint_mass: f64,
) -> (Goal, FindGoalReport) {
    assert!(!high_level.is_empty());
    let mut report = FindGoalReport::default();
    let robot_pt = robot.position();

    // Stray low-mass cells are noise; touring them would dominate the
    // route. The heaviest cell always stays eligible.
    let max_w = high_level
        .weights
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let threshold = min_waypoint_mass * max_w;
    let eligible: Vec<usize> = (0..high_level.len())
        .filter(|&i| high_level.weights[i] >= threshold)
        .collect();
    let k = eligible.len();

    // Obstacle-aware distance from every node to every other; node 0 is the
    // robot, nodes 1..=k the waypoints.
    let mut points = Vec::with_capacity(k + 1);
    points.push(robot_pt);
    for &i in &eligible {
        points.push(high_level.states[i].point());
    }
    let mut d = vec![vec![f64::INFINITY; k + 1]; k + 1];
    for i in 0..=k {
        d[i][i] = 0.0;
        for j in (i + 1)..=k {
            let dist = astar_distance(map, points[i], points[j]);
            let dist = dist.unwrap_or(f64::INFINITY);
            d[i][j] = dist;
            d[j][i] = dist;
        }
    }

    // Waypoints the robot cannot reach are dropped from the tour.
    let reachable: Vec<usize> = (0..k).filter(|&i| d[0][i + 1].is_finite()).collect();
    report.unreachable = (0..k)
        .filter(|&i| !d[0][i + 1].is_finite())
        .map(|i| eligible[i])
        .collect();

    let chosen = if reachable.is_empty() {
        // Everything unreachable on the grid: fall back to straight-line
        // distances over all waypoints.
        report.straight_line_fallback = true;
        for i in 0..=k {
            for j in 0..=k {
                d[i][j] = points[i].distance(points[j]);
            }
        }
        let order = plan_tour(&d, k);
        eligible[order[0]]
    } else {
        // Compact distance matrix over robot + reachable waypoints.
        let mut dd = vec![vec![f64::INFINITY; reachable.len() + 1]; reachable.len() + 1];
        for (a, &i) in std::iter::once(&usize::MAX)
            .chain(reachable.iter())
            .enumerate()
        {
            for (b, &j) in std::iter::once(&usize::MAX)
                .chain(reachable.iter())
                .enumerate()
            {
                let src = if a == 0 { 0 } else { i + 1 };
                let dst = if b == 0 { 0 } else { j + 1 };
                dd[a][b] = d[src][dst];
            }
        }
        let order = plan_tour(&dd, reachable.len());
        eligible[reachable[order[0]]]
    };

    (
        Goal {
            point: high_level.states[chosen].point(),
            members: membership[chosen].clone(),
        },
        report,
    )
}

fn plan_tour(d: &[Vec<f64>], n: usize) -> Vec<usize> {
    if n <= 10 {
        exact_open_tour(d)
    } else {
        heuristic_open_tour(d)
    }
}

/// Run the full hierarchy: coarse clustering, goal selection, critical
/// extraction (goal-cell members re-normalized), fine-grid simplification.
pub fn particle_hierarchy(
    b: &ParticleBelief,
    robot: &RobotPose,
    map: &OccupancyGrid,
    cfg: &HierarchyConfig,
) -> (HierarchyOutput, FindGoalReport) {
    assert!(cfg.coarse_cell > cfg.fine_cell && cfg.fine_cell > 0.0);
    let (high_level, membership) = coarse_grid(b, cfg.coarse_cell);
    let (goal, report) = find_goal(&high_level, &membership, robot, map, cfg.min_waypoint_mass);

    let mut states = Vec::with_capacity(goal.members.len());
    let mut weights = Vec::with_capacity(goal.members.len());
    for &i in &goal.members {
        states.push(b.states[i]);
        weights.push(b.weights[i]);
    }
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        for w in &mut weights {
            *w /= total;
        }
    } else {
        let n = weights.len() as f64;
        for w in &mut weights {
            *w = 1.0 / n;
        }
    }
    let critical = ParticleBelief { states, weights };
    let simplified = simplify_particles(&critical, cfg.fine_cell);
    let goal_field = distance_field(map, goal.point);
    (
        HierarchyOutput {
            high_level,
            goal,
            critical,
            simplified,
            goal_field,
        },
        report,
    )
}
