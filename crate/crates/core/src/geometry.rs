//! Polygonal obstacle environments.
//!
//! Obstacles are simple counter-clockwise rings over a shared vertex list.
//! Every ring edge is a face `k` running from vertex `k₁` to vertex `k₂`, with
//! unit tangent `t̂_k = (c_{k₂} − c_{k₁}) / D_k` and outward normal `n̂_k`
//! (the tangent rotated by −90°). All environments are validated on
//! construction and immutable afterwards.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec2 = Vector2<f64>;

/// 2-D cross product `a × b`.
#[inline]
pub fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Relative tolerance used to reject collinear ring vertices.
const COLLINEAR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("ring {ring} has {len} vertices, at least 3 are required")]
    RingTooShort { ring: usize, len: usize },
    #[error("ring {ring} references vertex {index}, but only {count} vertices exist")]
    IndexOutOfRange { ring: usize, index: usize, count: usize },
    #[error("vertex {vertex} is used more than once (rings {first} and {second})")]
    DuplicateVertex { vertex: usize, first: usize, second: usize },
    #[error("vertex {vertex} is not part of any ring")]
    UnusedVertex { vertex: usize },
    #[error("vertex {vertex} has a non-finite coordinate")]
    NonFinite { vertex: usize },
    #[error("ring {ring} has a zero-length edge starting at vertex {vertex}")]
    ZeroLengthEdge { ring: usize, vertex: usize },
    #[error("ring {ring} has a collinear (degenerate) vertex {vertex}")]
    CollinearVertex { ring: usize, vertex: usize },
    #[error("ring {ring} is not counter-clockwise (signed area {area})")]
    NotCounterClockwise { ring: usize, area: f64 },
    #[error("ring {ring} self-intersects: faces {face_a} and {face_b}")]
    SelfIntersecting { ring: usize, face_a: usize, face_b: usize },
    #[error("rings {ring_a} and {ring_b} overlap")]
    Overlap { ring_a: usize, ring_b: usize },
    #[error("rings {ring_a} and {ring_b} are {distance} m apart, clearance {required} m is required")]
    ClearanceViolated { ring_a: usize, ring_b: usize, distance: f64, required: f64 },
    #[error("invalid inflation radius {0}")]
    InvalidRadius(f64),
    #[error("clearance must be finite and non-negative, got {0}")]
    InvalidClearance(f64),
}

/// One polygon edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    /// First vertex index (`k₁`).
    pub start: usize,
    /// Second vertex index (`k₂`).
    pub end: usize,
    pub polygon: usize,
    pub tangent: Vec2,
    pub normal: Vec2,
    pub length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convexity {
    Convex,
    Reflex,
}

/// Ring membership of a vertex: its polygon and the faces entering and leaving it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexInfo {
    pub polygon: usize,
    pub incoming: usize,
    pub outgoing: usize,
    pub convexity: Convexity,
}

/// Raw on-disk form of an environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub vertices: Vec<[f64; 2]>,
    pub polygons: Vec<Vec<usize>>,
    #[serde(default)]
    pub clearance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolygonEnvironment {
    vertices: Vec<Vec2>,
    polygons: Vec<Vec<usize>>,
    faces: Vec<Face>,
    info: Vec<VertexInfo>,
    clearance: f64,
}

impl PolygonEnvironment {
    /// An environment with no obstacles.
    pub fn empty() -> Self {
        PolygonEnvironment {
            vertices: Vec::new(),
            polygons: Vec::new(),
            faces: Vec::new(),
            info: Vec::new(),
            clearance: 0.0,
        }
    }

    /// Builds and validates an environment, reporting the first violated invariant.
    pub fn new(vertices: Vec<Vec2>, polygons: Vec<Vec<usize>>, clearance: f64) -> Result<Self, GeometryError> {
        if !clearance.is_finite() || clearance < 0.0 {
            return Err(GeometryError::InvalidClearance(clearance));
        }
        for (i, v) in vertices.iter().enumerate() {
            if !v.x.is_finite() || !v.y.is_finite() {
                return Err(GeometryError::NonFinite { vertex: i });
            }
        }
        let count = vertices.len();
        let mut owner: Vec<Option<usize>> = vec![None; count];
        for (ring, poly) in polygons.iter().enumerate() {
            if poly.len() < 3 {
                return Err(GeometryError::RingTooShort { ring, len: poly.len() });
            }
            for &index in poly {
                if index >= count {
                    return Err(GeometryError::IndexOutOfRange { ring, index, count });
                }
                if let Some(first) = owner[index] {
                    return Err(GeometryError::DuplicateVertex { vertex: index, first, second: ring });
                }
                owner[index] = Some(ring);
            }
        }
        if let Some(vertex) = owner.iter().position(Option::is_none) {
            return Err(GeometryError::UnusedVertex { vertex });
        }

        let mut faces = Vec::new();
        let mut info = vec![VertexInfo { polygon: 0, incoming: 0, outgoing: 0, convexity: Convexity::Convex }; count];
        for (ring, poly) in polygons.iter().enumerate() {
            let m = poly.len();
            let first_face = faces.len();
            for j in 0..m {
                let (a, b) = (poly[j], poly[(j + 1) % m]);
                let d = vertices[b] - vertices[a];
                let length = d.norm();
                let scale = vertices[a].norm().max(vertices[b].norm()).max(1.0);
                if length <= 1e-12 * scale {
                    return Err(GeometryError::ZeroLengthEdge { ring, vertex: a });
                }
                let tangent = d / length;
                let normal = Vec2::new(tangent.y, -tangent.x);
                faces.push(Face { start: a, end: b, polygon: ring, tangent, normal, length });
            }
            for j in 0..m {
                let incoming = first_face + (j + m - 1) % m;
                let outgoing = first_face + j;
                let turn = cross(&faces[incoming].tangent, &faces[outgoing].tangent);
                if turn.abs() <= COLLINEAR_TOL {
                    return Err(GeometryError::CollinearVertex { ring, vertex: poly[j] });
                }
                let convexity = if turn > 0.0 { Convexity::Convex } else { Convexity::Reflex };
                info[poly[j]] = VertexInfo { polygon: ring, incoming, outgoing, convexity };
            }
            let area = signed_area(poly.iter().map(|&i| vertices[i]));
            if area <= 0.0 {
                return Err(GeometryError::NotCounterClockwise { ring, area });
            }
            for fa in first_face..first_face + m {
                for fb in fa + 1..first_face + m {
                    let adjacent = fb == fa + 1 || (fa == first_face && fb == first_face + m - 1);
                    if adjacent {
                        continue;
                    }
                    let (a, b) = (&faces[fa], &faces[fb]);
                    if segments_intersect(&vertices[a.start], &vertices[a.end], &vertices[b.start], &vertices[b.end]) {
                        return Err(GeometryError::SelfIntersecting { ring, face_a: fa, face_b: fb });
                    }
                }
            }
        }

        let env = PolygonEnvironment { vertices, polygons, faces, info, clearance };
        env.check_separation()?;
        Ok(env)
    }

    pub fn from_spec(spec: &EnvironmentSpec) -> Result<Self, GeometryError> {
        let vertices = spec.vertices.iter().map(|v| Vec2::new(v[0], v[1])).collect();
        Self::new(vertices, spec.polygons.clone(), spec.clearance)
    }

    pub fn to_spec(&self) -> EnvironmentSpec {
        EnvironmentSpec {
            vertices: self.vertices.iter().map(|v| [v.x, v.y]).collect(),
            polygons: self.polygons.clone(),
            clearance: self.clearance,
        }
    }

    fn check_separation(&self) -> Result<(), GeometryError> {
        for a in 0..self.polygons.len() {
            for b in a + 1..self.polygons.len() {
                let pa = &self.polygons[a];
                let pb = &self.polygons[b];
                if self.ring_contains(a, &self.vertices[pb[0]]) || self.ring_contains(b, &self.vertices[pa[0]]) {
                    return Err(GeometryError::Overlap { ring_a: a, ring_b: b });
                }
                let distance = self.ring_distance(a, b);
                if distance <= 0.0 {
                    return Err(GeometryError::Overlap { ring_a: a, ring_b: b });
                }
                if distance < self.clearance {
                    return Err(GeometryError::ClearanceViolated {
                        ring_a: a,
                        ring_b: b,
                        distance,
                        required: self.clearance,
                    });
                }
            }
        }
        Ok(())
    }

    /// Minimum distance between the boundaries of two rings (0 if they touch or cross).
    pub fn ring_distance(&self, a: usize, b: usize) -> f64 {
        let mut best = f64::INFINITY;
        for fa in self.faces.iter().filter(|f| f.polygon == a) {
            for fb in self.faces.iter().filter(|f| f.polygon == b) {
                let (p, q) = (&self.vertices[fa.start], &self.vertices[fa.end]);
                let (r, s) = (&self.vertices[fb.start], &self.vertices[fb.end]);
                if segments_intersect(p, q, r, s) {
                    return 0.0;
                }
                best = best
                    .min(point_segment_distance(p, r, s))
                    .min(point_segment_distance(q, r, s))
                    .min(point_segment_distance(r, p, q))
                    .min(point_segment_distance(s, p, q));
            }
        }
        best
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Vec2 {
        self.vertices[i]
    }

    pub fn polygons(&self) -> &[Vec<usize>] {
        &self.polygons
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, k: usize) -> &Face {
        &self.faces[k]
    }

    pub fn vertex_info(&self, i: usize) -> &VertexInfo {
        &self.info[i]
    }

    pub fn clearance(&self) -> f64 {
        self.clearance
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polygons.is_empty()
    }

    /// `P_k(p) = (p − c_{k₁})·t̂_k`.
    pub fn project_onto_face(&self, p: &Vec2, k: usize) -> f64 {
        let f = &self.faces[k];
        (p - self.vertices[f.start]).dot(&f.tangent)
    }

    /// Unsigned distance from `p` to the closed segment of face `k`.
    pub fn distance_to_face(&self, p: &Vec2, k: usize) -> f64 {
        let f = &self.faces[k];
        let along = self.project_onto_face(p, k);
        let c1 = self.vertices[f.start];
        if along < 0.0 {
            (p - c1).norm()
        } else if along > f.length {
            (p - self.vertices[f.end]).norm()
        } else {
            cross(&(p - c1), &f.tangent).abs()
        }
    }

    pub fn vertex_convexity(&self, i: usize) -> Convexity {
        self.info[i].convexity
    }

    /// Outward normals of the two faces meeting at vertex `i` (incoming, outgoing).
    pub fn vertex_normals(&self, i: usize) -> (Vec2, Vec2) {
        let info = &self.info[i];
        (self.faces[info.incoming].normal, self.faces[info.outgoing].normal)
    }

    /// True when `face` has `vertex` as one of its endpoints.
    pub fn face_touches_vertex(&self, face: usize, vertex: usize) -> bool {
        let f = &self.faces[face];
        f.start == vertex || f.end == vertex
    }

    /// Strict interior test for one ring (boundary points are not contained).
    pub fn ring_contains(&self, ring: usize, p: &Vec2) -> bool {
        let poly = &self.polygons[ring];
        let mut inside = false;
        let m = poly.len();
        for j in 0..m {
            let a = self.vertices[poly[j]];
            let b = self.vertices[poly[(j + 1) % m]];
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Minimum distance from `p` to any face.
    pub fn clearance_at(&self, p: &Vec2) -> f64 {
        (0..self.faces.len()).map(|k| self.distance_to_face(p, k)).fold(f64::INFINITY, f64::min)
    }

    /// Free space is the open complement of all obstacles: boundary points are not free.
    pub fn point_free(&self, p: &Vec2) -> bool {
        if self.clearance_at(p) <= 0.0 {
            return false;
        }
        !(0..self.polygons.len()).any(|ring| self.ring_contains(ring, p))
    }

    /// True when the closed segment `a`–`b` neither touches a face nor enters a polygon.
    pub fn segment_free(&self, a: &Vec2, b: &Vec2) -> bool {
        if !self.point_free(a) || !self.point_free(b) {
            return false;
        }
        for f in &self.faces {
            let (c, d) = (&self.vertices[f.start], &self.vertices[f.end]);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
        // Both endpoints outside and no boundary hit: the segment cannot be inside.
        true
    }

    /// Offsets every ring outward by `radius` with miter joins.
    ///
    /// The result must still be a valid environment; the required clearance
    /// shrinks by `2·radius` since both neighbours grew.
    pub fn inflate(&self, radius: f64) -> Result<PolygonEnvironment, GeometryError> {
        if !radius.is_finite() || radius < 0.0 {
            return Err(GeometryError::InvalidRadius(radius));
        }
        if radius == 0.0 {
            return Ok(self.clone());
        }
        let mut vertices = self.vertices.clone();
        for (i, info) in self.info.iter().enumerate() {
            let n1 = self.faces[info.incoming].normal;
            let n2 = self.faces[info.outgoing].normal;
            // Intersection of the two offset lines.
            vertices[i] = self.vertices[i] + (n1 + n2) * (radius / (1.0 + n1.dot(&n2)));
        }
        let clearance = (self.clearance - 2.0 * radius).max(0.0);
        PolygonEnvironment::new(vertices, self.polygons.clone(), clearance)
    }

    /// Axis-aligned bounding box `(min, max)` of all vertices, if any.
    pub fn bounds(&self) -> Option<(Vec2, Vec2)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (Vec2::new(lo.x.min(v.x), lo.y.min(v.y)), Vec2::new(hi.x.max(v.x), hi.y.max(v.y)))
        }))
    }
}

/// Shoelace signed area (positive for counter-clockwise rings).
pub fn signed_area(points: impl IntoIterator<Item = Vec2>) -> f64 {
    let pts: Vec<Vec2> = points.into_iter().collect();
    let m = pts.len();
    0.5 * (0..m).map(|j| cross(&pts[j], &pts[(j + 1) % m])).sum::<f64>()
}

pub fn point_segment_distance(p: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    let d = b - a;
    let len2 = d.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let s = ((p - a).dot(&d) / len2).clamp(0.0, 1.0);
    (p - (a + d * s)).norm()
}

fn orientation(a: &Vec2, b: &Vec2, c: &Vec2) -> f64 {
    cross(&(b - a), &(c - a))
}

fn on_segment(a: &Vec2, b: &Vec2, p: &Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed segment intersection test (touching counts).
pub fn segments_intersect(p: &Vec2, q: &Vec2, r: &Vec2, s: &Vec2) -> bool {
    let d1 = orientation(r, s, p);
    let d2 = orientation(r, s, q);
    let d3 = orientation(p, q, r);
    let d4 = orientation(p, q, s);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(r, s, p))
        || (d2 == 0.0 && on_segment(r, s, q))
        || (d3 == 0.0 && on_segment(p, q, r))
        || (d4 == 0.0 && on_segment(p, q, s))
}

/// Axis-aligned square centred at `center`, as a counter-clockwise ring.
pub fn square(center: Vec2, side: f64) -> Vec<Vec2> {
    let h = side / 2.0;
    vec![center + Vec2::new(-h, -h), center + Vec2::new(h, -h), center + Vec2::new(h, h), center + Vec2::new(-h, h)]
}

/// Builds an environment from a list of counter-clockwise rings given by coordinates.
pub fn from_rings(rings: &[Vec<Vec2>], clearance: f64) -> Result<PolygonEnvironment, GeometryError> {
    let mut vertices = Vec::new();
    let mut polygons = Vec::new();
    for ring in rings {
        let start = vertices.len();
        vertices.extend_from_slice(ring);
        polygons.push((start..vertices.len()).collect());
    }
    PolygonEnvironment::new(vertices, polygons, clearance)
}
