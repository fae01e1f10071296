//! Sampling-based reference planners: RRT* and PRM with straight-line edges.
//!
//! Both return shortest-path style waypoint lists. They know nothing about
//! dynamics; [`energy_lower_bound`] prices a waypoint list by the optimal chain
//! through its interior waypoints, which no trajectory through them can beat.

use petgraph::algo::astar;
use petgraph::graph::{NodeIndex, UnGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvp::{solve_chain, BoundaryConditions, ChainProblem, ChainSolution, SolverError, SolverOptions};
use crate::geometry::{PolygonEnvironment, Vec2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("{0} is not in free space")]
    EndpointBlocked(&'static str),
    #[error("no path found with {nodes} nodes")]
    NoPath { nodes: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointPath {
    pub points: Vec<Vec2>,
    pub length: f64,
}

impl WaypointPath {
    pub fn new(points: Vec<Vec2>) -> Self {
        let length = points.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        WaypointPath { points, length }
    }

    pub fn interior(&self) -> &[Vec2] {
        if self.points.len() <= 2 {
            &[]
        } else {
            &self.points[1..self.points.len() - 1]
        }
    }

    /// True when every segment stays in free space.
    pub fn is_free(&self, env: &PolygonEnvironment) -> bool {
        self.points.windows(2).all(|w| env.segment_free(&w[0], &w[1]))
    }
}

/// Axis-aligned sampling region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub min: Vec2,
    pub max: Vec2,
}

impl Domain {
    /// Bounding box of the obstacles and both endpoints, padded by `pad`.
    pub fn around(env: &PolygonEnvironment, p0: &Vec2, pf: &Vec2, pad: f64) -> Self {
        let (mut lo, mut hi) = env.bounds().unwrap_or((*p0, *p0));
        for p in [p0, pf] {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        Domain { min: lo - Vec2::new(pad, pad), max: hi + Vec2::new(pad, pad) }
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }

    fn sample(&self, rng: &mut impl Rng) -> Vec2 {
        Vec2::new(rng.random_range(self.min.x..self.max.x), rng.random_range(self.min.y..self.max.y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RrtConfig {
    pub nodes: usize,
    pub steer: f64,
    /// Rewiring radius constant; `None` uses 1.5 × the domain diagonal.
    pub gamma: Option<f64>,
    pub seed: u64,
}

impl Default for RrtConfig {
    fn default() -> Self {
        RrtConfig { nodes: 2500, steer: 0.5, gamma: None, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrmConfig {
    pub nodes: usize,
    pub neighbors: usize,
    pub seed: u64,
}

impl Default for PrmConfig {
    fn default() -> Self {
        PrmConfig { nodes: 2500, neighbors: 10, seed: 0 }
    }
}

fn check_endpoints(env: &PolygonEnvironment, p0: &Vec2, pf: &Vec2) -> Result<(), BaselineError> {
    if !env.point_free(p0) {
        return Err(BaselineError::EndpointBlocked("start"));
    }
    if !env.point_free(pf) {
        return Err(BaselineError::EndpointBlocked("goal"));
    }
    Ok(())
}

/// RRT* with straight-line steering, followed by greedy shortcutting.
/// The goal is connected after the tree reaches its node budget.
pub fn rrt_star(
    env: &PolygonEnvironment,
    p0: &Vec2,
    pf: &Vec2,
    domain: &Domain,
    config: &RrtConfig,
) -> Result<WaypointPath, BaselineError> {
    check_endpoints(env, p0, pf)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let gamma = config.gamma.unwrap_or(1.5 * domain.diagonal());
    let mut points = vec![*p0];
    let mut parent = vec![usize::MAX];
    let mut cost = vec![0.0];
    let max_draws = config.nodes.saturating_mul(50).max(1000);

    for _ in 0..max_draws {
        if points.len() >= config.nodes {
            break;
        }
        let sample = domain.sample(&mut rng);
        let nearest = nearest_index(&points, &sample);
        let from = points[nearest];
        let d = (sample - from).norm();
        let new = if d > config.steer { from + (sample - from) * (config.steer / d) } else { sample };
        if !env.segment_free(&from, &new) {
            continue;
        }
        let n = points.len() as f64 + 1.0;
        let radius = gamma * (n.ln() / n).sqrt();
        let near: Vec<usize> = (0..points.len()).filter(|&i| (points[i] - new).norm() <= radius).collect();

        let mut best = (nearest, cost[nearest] + (new - from).norm());
        for &i in &near {
            let c = cost[i] + (points[i] - new).norm();
            if c < best.1 && env.segment_free(&points[i], &new) {
                best = (i, c);
            }
        }
        let idx = points.len();
        points.push(new);
        parent.push(best.0);
        cost.push(best.1);

        for &i in &near {
            let c = cost[idx] + (points[i] - new).norm();
            if c < cost[i] && env.segment_free(&new, &points[i]) {
                let delta = c - cost[i];
                parent[i] = idx;
                propagate_cost(&mut cost, &parent, i, delta);
            }
        }
    }

    // Connect the goal through the cheapest node that can see it.
    let mut order: Vec<usize> = (0..points.len()).collect();
    let total = |i: usize| cost[i] + (points[i] - pf).norm();
    order.sort_by(|&a, &b| total(a).total_cmp(&total(b)).then(a.cmp(&b)));
    let Some(&last) = order.iter().find(|&&i| env.segment_free(&points[i], pf)) else {
        return Err(BaselineError::NoPath { nodes: points.len() });
    };
    let mut path = vec![*pf];
    let mut i = last;
    while i != usize::MAX {
        path.push(points[i]);
        i = parent[i];
    }
    path.reverse();
    Ok(shortcut(env, &path))
}

/// Adds `delta` to the cost of `root` and all its descendants.
fn propagate_cost(cost: &mut [f64], parent: &[usize], root: usize, delta: f64) {
    let mut stack = vec![root];
    while let Some(i) = stack.pop() {
        cost[i] += delta;
        stack.extend((0..parent.len()).filter(|&j| parent[j] == i));
    }
}

fn nearest_index(points: &[Vec2], q: &Vec2) -> usize {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, (p - q).norm_squared()))
        .fold((0, f64::INFINITY), |best, (i, d)| if d < best.1 { (i, d) } else { best })
        .0
}

/// Probabilistic roadmap over free samples with `k`-nearest connections,
/// searched with A* on Euclidean edge lengths, then shortcut.
pub fn prm(
    env: &PolygonEnvironment,
    p0: &Vec2,
    pf: &Vec2,
    domain: &Domain,
    config: &PrmConfig,
) -> Result<WaypointPath, BaselineError> {
    check_endpoints(env, p0, pf)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut points = vec![*p0, *pf];
    let max_draws = config.nodes.saturating_mul(50).max(1000);
    for _ in 0..max_draws {
        if points.len() >= config.nodes {
            break;
        }
        let s = domain.sample(&mut rng);
        if env.point_free(&s) {
            points.push(s);
        }
    }

    let mut graph: UnGraph<Vec2, f64> = UnGraph::with_capacity(points.len(), points.len() * config.neighbors);
    let nodes: Vec<NodeIndex> = points.iter().map(|p| graph.add_node(*p)).collect();
    for (i, p) in points.iter().enumerate() {
        let mut by_dist: Vec<(usize, f64)> =
            points.iter().enumerate().filter(|&(j, _)| j != i).map(|(j, q)| (j, (q - p).norm())).collect();
        let order = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
        let k = config.neighbors.min(by_dist.len());
        if k < by_dist.len() {
            by_dist.select_nth_unstable_by(k, order);
        }
        by_dist[..k].sort_by(order);
        for &(j, d) in &by_dist[..k] {
            if graph.find_edge(nodes[i], nodes[j]).is_none() && env.segment_free(p, &points[j]) {
                graph.add_edge(nodes[i], nodes[j], d);
            }
        }
    }

    let goal = nodes[1];
    let found = astar(&graph, nodes[0], |n| n == goal, |e| *e.weight(), |n| (graph[n] - pf).norm());
    let Some((_, route)) = found else {
        return Err(BaselineError::NoPath { nodes: points.len() });
    };
    let path: Vec<Vec2> = route.iter().map(|&n| graph[n]).collect();
    Ok(shortcut(env, &path))
}

/// Greedy shortcutting: from each kept waypoint jump to the farthest visible one.
pub fn shortcut(env: &PolygonEnvironment, path: &[Vec2]) -> WaypointPath {
    if path.len() <= 2 {
        return WaypointPath::new(path.to_vec());
    }
    let mut out = vec![path[0]];
    let mut i = 0;
    while i + 1 < path.len() {
        let mut j = path.len() - 1;
        while j > i + 1 && !env.segment_free(&path[i], &path[j]) {
            j -= 1;
        }
        out.push(path[j]);
        i = j;
    }
    WaypointPath::new(out)
}

/// Optimal chain energy through the interior waypoints, ignoring obstacles.
/// The path's endpoints replace `bc.p0` and `bc.pf`.
pub fn energy_lower_bound(
    path: &WaypointPath,
    bc: &BoundaryConditions,
    options: &SolverOptions,
) -> Result<ChainSolution, SolverError> {
    let mut bc = *bc;
    if let (Some(first), Some(last)) = (path.points.first(), path.points.last()) {
        bc.p0 = *first;
        bc.pf = *last;
    }
    let problem = ChainProblem::from_waypoints(bc, path.interior());
    solve_chain(&problem, options)
}
