#![allow(dead_code)]

use polyplan::envgen::convex_hull;
use polyplan::geometry::{from_rings, PolygonEnvironment, Vec2};
use polyplan::trajectory::CubicArc;
use proptest::prelude::*;

pub fn v(x: f64, y: f64) -> Vec2 {
    Vec2::new(x, y)
}

pub fn arb_point(lo: f64, hi: f64) -> impl Strategy<Value = Vec2> {
    (lo..hi, lo..hi).prop_map(|(x, y)| v(x, y))
}

/// Convex polygon: hull of up to seven points in a disk of radius 1.2 around `center`.
fn arb_hull(center: Vec2) -> impl Strategy<Value = Vec<Vec2>> {
    prop::collection::vec((0.0..std::f64::consts::TAU, 0.3..1.2f64), 3..8).prop_filter_map(
        "degenerate hull",
        move |pts| {
            let pts: Vec<Vec2> = pts.iter().map(|&(a, r)| center + v(a.cos(), a.sin()) * r).collect();
            let hull = convex_hull(&pts);
            (hull.len() >= 3).then_some(hull)
        },
    )
}

/// L-shaped hexagon with one reflex vertex, scaled and placed at `corner`.
pub fn l_shape(corner: Vec2, size: f64) -> Vec<Vec2> {
    [(0., 0.), (2., 0.), (2., 1.), (1., 1.), (1., 2.), (0., 2.)].iter().map(|&(x, y)| corner + v(x, y) * size).collect()
}

/// One to four polygons in separate 4 m cells of an 8 × 8 m field, sometimes
/// including a non-convex L shape.
pub fn arb_env() -> impl Strategy<Value = PolygonEnvironment> {
    let cell = |i: usize| v(2.0 + 4.0 * (i % 2) as f64, 2.0 + 4.0 * (i / 2) as f64);
    (
        prop::collection::vec(any::<bool>(), 4),
        arb_hull(cell(0)),
        arb_hull(cell(1)),
        arb_hull(cell(2)),
        arb_hull(cell(3)),
        0.3..0.9f64,
    )
        .prop_filter_map("empty field", move |(mask, a, b, c, d, l)| {
            let mut rings: Vec<Vec<Vec2>> =
                [a, b, c, d].into_iter().zip(&mask).filter(|(_, &m)| m).map(|(r, _)| r).collect();
            if mask[0] && mask[3] {
                rings[0] = l_shape(cell(0) - v(l, l), l);
            }
            if rings.is_empty() {
                return None;
            }
            from_rings(&rings, 0.1).ok()
        })
}

/// Cubic arc with coefficients of order one on a random interval.
pub fn arb_arc() -> impl Strategy<Value = CubicArc> {
    (prop::array::uniform4(arb_point(-3.0, 3.0)), -2.0..2.0f64, 0.2..4.0f64)
        .prop_map(|(c, t0, h)| CubicArc::from_local(c, t0, t0 + h))
}
