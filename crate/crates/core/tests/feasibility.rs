mod common;

use common::{arb_point, v};
use polyplan::feasibility::{arc_feasible, edge_crossings, vertex_contact_legal, ViolationKind};
use polyplan::geometry::{cross, from_rings, square, Convexity, Vec2};
use polyplan::oracles::sampled_crossings;
use polyplan::roots::cubic_roots;
use polyplan::trajectory::{hermite_arc, CubicArc};
use proptest::prelude::*;

/// Arc whose positions stay within a few meters: local coefficients `w_k / h^k`.
fn arb_bounded_arc() -> impl Strategy<Value = CubicArc> {
    (prop::array::uniform4(arb_point(-3.0, 3.0)), -2.0..2.0f64, 0.2..4.0f64).prop_map(|(w, t0, h)| {
        let c = [w[0], w[1] / h, w[2] / (h * h), w[3] / (h * h * h)];
        CubicArc::from_local(c, t0, t0 + h)
    })
}

fn distance_to_line(p: &Vec2, c1: &Vec2, c2: &Vec2) -> f64 {
    let e = c2 - c1;
    cross(&(p - c1), &e).abs() / e.norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn crossings_agree_with_dense_sampling(
        arc in arb_bounded_arc(),
        at in 0.0..1.0f64,
        offset in arb_point(-0.5, 0.5),
        angle in 0.0..std::f64::consts::PI,
        half in 0.05..3.0f64,
    ) {
        // Faces placed near the arc so that most cases cross or graze it.
        let mid = arc.position(arc.t_start + at * arc.duration()) + offset;
        let d = v(angle.cos(), angle.sin()) * half;
        let (c1, c2) = (mid - d, mid + d);
        let roots = edge_crossings(&arc, &c1, &c2).unwrap();
        for &(t, _) in &roots {
            prop_assert!((arc.t_start..=arc.t_end).contains(&t));
            prop_assert!(distance_to_line(&arc.position(t), &c1, &c2) <= 1e-7);
        }
        let slack = 1e-9;
        for (lo, hi) in sampled_crossings(&arc, &c1, &c2, 10_000) {
            prop_assert!(
                roots.iter().any(|&(t, _)| t >= lo - slack && t <= hi + slack),
                "missed crossing in [{lo}, {hi}]: {roots:?}"
            );
        }
    }

    #[test]
    fn polished_roots_zero_the_cubic(c in prop::array::uniform4(-1.0..1.0f64)) {
        prop_assume!(c.iter().any(|x| x.abs() > 1e-3));
        let roots = cubic_roots(&c, 1.0).unwrap();
        for x in roots.into_iter().filter(|x| x.abs() <= 2.0) {
            let value = c[0] + x * (c[1] + x * (c[2] + x * c[3]));
            prop_assert!(value.abs() <= 1e-10, "cubic({x}) = {value}");
        }
    }

    /// An arc reaching a convex corner with a velocity that points into both
    /// incident half-planes enters the polygon right after the contact.
    #[test]
    fn illegal_corner_contact_enters_the_polygon(
        corner in 0usize..4,
        mix in 0.1..0.9f64,
        speed in 0.5..2.0f64,
        start in arb_point(-4.0, 4.0),
        next in arb_point(-4.0, 4.0),
        next_v in arb_point(-1.0, 1.0),
    ) {
        let env = from_rings(&[square(Vec2::zeros(), 1.0)], 0.0).unwrap();
        prop_assert_eq!(env.vertex_convexity(corner), Convexity::Convex);
        let c = env.vertex(corner);
        let (n1, n2) = env.vertex_normals(corner);
        // Inward cone: strictly negative against both outward normals.
        let dir = -(n1 * mix + n2 * (1.0 - mix)).normalize();
        let vel = dir * speed;
        prop_assert!(!vertex_contact_legal(&env, corner, &vel));
        let arriving = hermite_arc(start, Vec2::zeros(), c, vel, 0.0, 1.0).unwrap();
        prop_assert!((arriving.position(1.0) - c).norm() < 1e-12);
        let continuation = hermite_arc(c, vel, next, next_v, 1.0, 2.0).unwrap();
        for delta in [1e-3, 1e-4, 1e-5] {
            let p = continuation.position(1.0 + delta);
            prop_assert!(env.ring_contains(0, &p), "p(t + {delta}) = {p:?} outside");
        }
    }
}

#[test]
fn hermite_through_square_matches_dense_scan() {
    let env = from_rings(&[square(Vec2::zeros(), 1.0)], 0.0).unwrap();
    let arc = hermite_arc(v(-2., 0.), Vec2::zeros(), v(2., 0.), Vec2::zeros(), 0.0, 1.0).unwrap();
    let blocked = (0..=10_000).any(|i| !env.point_free(&arc.position(i as f64 / 10_000.0)));
    assert!(blocked);
    let err = arc_feasible(&arc, &env, &[]).unwrap_err();
    assert_eq!(err.kind, ViolationKind::Crossing);
    let face = env.face(err.face.unwrap());
    assert_eq!(env.vertex(face.start).x, -0.5);
    assert_eq!(env.vertex(face.end).x, -0.5);

    let far = from_rings(&[square(v(0., 5.), 1.0)], 0.0).unwrap();
    assert!((0..=10_000).all(|i| far.point_free(&arc.position(i as f64 / 10_000.0))));
    assert!(arc_feasible(&arc, &far, &[]).is_ok());
}
