//! Seeded random obstacle fields and a fixed corridor fixture.
//!
//! Random fields: scatter points uniformly, drop those near either endpoint,
//! partition the rest with k-means, and take the convex hull of each cluster
//! with at least three points. All randomness comes from a ChaCha8 stream
//! (`rand_chacha::ChaCha8Rng::seed_from_u64(seed)`), so a seed fixes the field
//! on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvp::BoundaryConditions;
use crate::geometry::{cross, from_rings, square, GeometryError, PolygonEnvironment, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvGenConfig {
    pub seed: u64,
    pub width: f64,
    pub height: f64,
    pub points: usize,
    pub clusters: usize,
    /// Points closer than this to either endpoint are discarded.
    pub endpoint_clearance: f64,
    /// Minimum distance between distinct obstacles.
    pub obstacle_clearance: f64,
    pub max_attempts: usize,
    pub kmeans_iterations: usize,
}

impl Default for EnvGenConfig {
    fn default() -> Self {
        EnvGenConfig {
            seed: 0,
            width: 10.0,
            height: 10.0,
            points: 50,
            clusters: 12,
            endpoint_clearance: 1.0,
            obstacle_clearance: 0.1,
            max_attempts: 100,
            kmeans_iterations: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvGenError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no valid environment after {attempts} attempts; last failure: {last}")]
    Exhausted { attempts: usize, last: String },
}

/// Default rest-to-rest task across the square domain: corner to corner in 10 s.
pub fn default_boundary(config: &EnvGenConfig) -> BoundaryConditions {
    BoundaryConditions::rest_to_rest(Vec2::zeros(), Vec2::new(config.width, config.height), 0.0, 10.0)
}

fn validate(config: &EnvGenConfig, p0: &Vec2, pf: &Vec2) -> Result<(), EnvGenError> {
    let bad = |m: &str| Err(EnvGenError::Config(m.to_string()));
    if !(config.width > 0.0 && config.height > 0.0) {
        return bad("domain size must be positive");
    }
    if config.points == 0 || config.clusters == 0 || config.max_attempts == 0 {
        return bad("point count, cluster count and attempt budget must be positive");
    }
    if config.clusters > config.points {
        return bad("cluster count exceeds point count");
    }
    if !(config.endpoint_clearance >= 0.0 && config.obstacle_clearance >= 0.0) {
        return bad("clearances must be non-negative");
    }
    let inside = |p: &Vec2| (0.0..=config.width).contains(&p.x) && (0.0..=config.height).contains(&p.y);
    if !inside(p0) || !inside(pf) {
        return bad("endpoints must lie inside the domain");
    }
    Ok(())
}

/// Generates a random environment for the task `p0 → pf`.
pub fn generate(config: &EnvGenConfig, p0: &Vec2, pf: &Vec2) -> Result<PolygonEnvironment, EnvGenError> {
    validate(config, p0, pf)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut last = String::new();
    for _ in 0..config.max_attempts {
        match attempt(config, p0, pf, &mut rng) {
            Ok(env) => return Ok(env),
            Err(e) => last = e,
        }
    }
    Err(EnvGenError::Exhausted { attempts: config.max_attempts, last })
}

fn attempt(config: &EnvGenConfig, p0: &Vec2, pf: &Vec2, rng: &mut ChaCha8Rng) -> Result<PolygonEnvironment, String> {
    let points: Vec<Vec2> = (0..config.points)
        .map(|_| Vec2::new(rng.random_range(0.0..config.width), rng.random_range(0.0..config.height)))
        .filter(|p| (p - p0).norm() > config.endpoint_clearance && (p - pf).norm() > config.endpoint_clearance)
        .collect();
    let k = config.clusters.min(points.len());
    let labels = kmeans(&points, k, config.kmeans_iterations, rng);
    let mut rings = Vec::new();
    for c in 0..k {
        let members: Vec<Vec2> = points.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(p, _)| *p).collect();
        if members.len() <= 2 {
            continue;
        }
        let hull = convex_hull(&members);
        if hull.len() >= 3 {
            rings.push(hull);
        }
    }
    let env = from_rings(&rings, config.obstacle_clearance).map_err(|e: GeometryError| e.to_string())?;
    for (name, p) in [("start", p0), ("goal", pf)] {
        if !env.point_free(p) {
            return Err(format!("{name} lies inside an obstacle"));
        }
    }
    Ok(env)
}

/// Lloyd's k-means with farthest-point seeding (first center drawn from `rng`).
/// Returns the cluster label of every point.
pub fn kmeans(points: &[Vec2], k: usize, iterations: usize, rng: &mut impl Rng) -> Vec<usize> {
    if points.is_empty() || k == 0 {
        return vec![0; points.len()];
    }
    let mut centers = vec![points[rng.random_range(0..points.len())]];
    while centers.len() < k {
        let far = points
            .iter()
            .map(|p| centers.iter().map(|c| (p - c).norm_squared()).fold(f64::INFINITY, f64::min))
            .enumerate()
            .fold((0, -1.0), |best, (i, d)| if d > best.1 { (i, d) } else { best });
        centers.push(points[far.0]);
    }
    let nearest = |p: &Vec2, centers: &[Vec2]| {
        centers
            .iter()
            .enumerate()
            .map(|(i, c)| (i, (p - c).norm_squared()))
            .fold((0, f64::INFINITY), |best, (i, d)| if d < best.1 { (i, d) } else { best })
            .0
    };
    let mut labels: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
    for _ in 0..iterations {
        let mut sums = vec![Vec2::zeros(); k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            sums[l] += p;
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c] / counts[c] as f64;
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    labels
}

/// Andrew's monotone chain. Counter-clockwise, without collinear points.
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let turn = |o: &Vec2, a: &Vec2, b: &Vec2| cross(&(a - o), &(b - o));
    let mut lower: Vec<Vec2> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && turn(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 1e-12 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Vec2> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && turn(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 1e-12 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Alternating grid of 0.6 m square posts, inflated by 0.1 m, in a 2.5 × 5 m
/// arena, with the task of crossing it corner to corner in 10 s.
pub fn corridor_fixture() -> (PolygonEnvironment, BoundaryConditions) {
    let mut rings = Vec::new();
    for (row, y) in [1.0, 2.0, 3.0, 4.0].into_iter().enumerate() {
        let xs: &[f64] = if row % 2 == 0 { &[0.45, 1.45, 2.45] } else { &[0.95, 1.95] };
        for &x in xs {
            rings.push(square(Vec2::new(x, y), 0.6));
        }
    }
    let posts = from_rings(&rings, 0.3).expect("fixture posts are valid");
    let env = posts.inflate(0.1).expect("fixture inflation is valid");
    let bc = BoundaryConditions::rest_to_rest(Vec2::new(0.2, 0.2), Vec2::new(2.3, 4.8), 0.0, 10.0);
    (env, bc)
}
