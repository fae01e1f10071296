mod common;

use common::{arb_env, arb_point, v};
use polyplan::geometry::{from_rings, Convexity, PolygonEnvironment, Vec2};
use proptest::prelude::*;

fn brute_force_distance(p: &Vec2, a: &Vec2, b: &Vec2, samples: usize) -> f64 {
    (0..=samples)
        .map(|i| {
            let s = i as f64 / samples as f64;
            (p - (a + (b - a) * s)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn face_distance_is_nonnegative_and_lipschitz(env in arb_env(), p in arb_point(-1.0, 9.0), dx in -1e-3..1e-3f64, dy in -1e-3..1e-3f64) {
        let q = p + v(dx, dy);
        for k in 0..env.faces().len() {
            let d = env.distance_to_face(&p, k);
            prop_assert!(d >= 0.0);
            prop_assert!((env.distance_to_face(&q, k) - d).abs() <= (q - p).norm() + 1e-12);
        }
    }

    #[test]
    fn face_distance_matches_sampling(env in arb_env(), p in arb_point(-1.0, 9.0)) {
        for (k, f) in env.faces().iter().enumerate() {
            let d = env.distance_to_face(&p, k);
            // Sampling error grows like spacing² / distance; stay clear of the face.
            prop_assume!(d > 0.05);
            let brute = brute_force_distance(&p, &env.vertex(f.start), &env.vertex(f.end), 10_000);
            prop_assert!((brute - d).abs() <= 1e-6, "face {k}: {d} vs {brute}");
        }
    }

    #[test]
    fn normals_point_outward(env in arb_env()) {
        for f in env.faces() {
            prop_assert!((f.tangent.norm() - 1.0).abs() < 1e-12);
            prop_assert!((f.normal.norm() - 1.0).abs() < 1e-12);
            prop_assert!(f.tangent.dot(&f.normal).abs() < 1e-12);
            prop_assert!(f.length > 0.0);
            let mid = (env.vertex(f.start) + env.vertex(f.end)) * 0.5;
            prop_assert!(!env.ring_contains(f.polygon, &(mid + f.normal * 1e-6)));
            prop_assert!(env.ring_contains(f.polygon, &(mid - f.normal * 1e-6)));
        }
    }

    #[test]
    fn inflation_keeps_distance(env in arb_env(), radius in 0.001..0.045f64) {
        let inflated = env.inflate(radius).unwrap();
        let mut probes: Vec<Vec2> = env.vertices().to_vec();
        probes.extend(env.faces().iter().map(|f| (env.vertex(f.start) + env.vertex(f.end)) * 0.5));
        for q in &probes {
            prop_assert!(!inflated.point_free(q));
            let nearest = (0..inflated.faces().len()).map(|k| inflated.distance_to_face(q, k)).fold(f64::INFINITY, f64::min);
            prop_assert!(nearest >= radius - 1e-9, "{nearest} < {radius}");
        }
    }

    #[test]
    fn spec_round_trip(env in arb_env()) {
        prop_assert_eq!(PolygonEnvironment::from_spec(&env.to_spec()).unwrap(), env);
    }
}

#[test]
fn projection_and_distance_examples() {
    let env = from_rings(&[vec![v(0., 0.), v(2., 0.), v(1., 1.)]], 0.0).unwrap();
    let k = 0;
    assert_eq!(env.project_onto_face(&v(1., 1.), k), 1.0);
    assert_eq!(env.project_onto_face(&v(-1., 1.), k), -1.0);
    assert_eq!(env.project_onto_face(&v(3., 0.), k), 3.0);
    assert_eq!(env.distance_to_face(&v(1., -1.), k), 1.0);
    assert!((env.distance_to_face(&v(-1., 1.), k) - 2f64.sqrt()).abs() < 1e-15);
    assert_eq!(env.distance_to_face(&v(3., 0.), k), 1.0);
}

#[test]
fn l_shape_has_one_reflex_vertex() {
    let env = from_rings(&[common::l_shape(v(0., 0.), 1.0)], 0.0).unwrap();
    let reflex: Vec<usize> = (0..6).filter(|&i| env.vertex_convexity(i) == Convexity::Reflex).collect();
    assert_eq!(reflex, vec![3]);
}
