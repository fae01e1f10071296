mod common;

use common::{arb_point, l_shape, v};
use polyplan::bvp::{
    assemble_linear_system, chain_energy, junction_residuals, solve_chain, BoundaryConditions, ChainProblem,
    ChainSolution, SolverOptions,
};
use polyplan::geometry::{from_rings, Vec2};
use polyplan::oracles::golden_section;
use proptest::prelude::*;

fn solve(bc: BoundaryConditions, pts: &[Vec2]) -> ChainSolution {
    solve_chain(&ChainProblem::from_waypoints(bc, pts), &SolverOptions::default()).unwrap()
}

/// Continuity gaps with velocity and control scaled to the unit horizon.
fn normalized_gaps(sol: &ChainSolution, horizon: f64) -> [f64; 3] {
    let (p, vel, u) = sol.trajectory.continuity_gaps();
    [p, vel * horizon, u * horizon * horizon]
}

fn arb_bc() -> impl Strategy<Value = BoundaryConditions> {
    (arb_point(-5.0, 5.0), arb_point(-5.0, 5.0), 1.0..10.0f64)
        .prop_map(|(p0, pf, h)| BoundaryConditions::rest_to_rest(p0, pf, 0.0, h))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn junction_conditions_hold(bc in arb_bc(), pts in prop::collection::vec(arb_point(-5.0, 5.0), 1..=2)) {
        let sol = solve(bc, &pts);
        prop_assume!(sol.converged);
        for g in normalized_gaps(&sol, bc.horizon()) {
            prop_assert!(g <= 1e-8, "gap {g}");
        }
        prop_assert!(sol.max_residual <= 1e-9);
        let r = junction_residuals(&ChainProblem::from_waypoints(bc, &pts), &sol.times).unwrap();
        prop_assert!(r.iter().all(|x| x.abs() <= 1e-9), "{r:?}");
        for (k, p) in pts.iter().enumerate() {
            prop_assert!((sol.trajectory.arcs[k].position(sol.times[k]) - p).norm() <= 1e-8 * p.norm().max(1.0));
        }
    }

    #[test]
    fn perturbing_a_junction_time_never_helps(bc in arb_bc(), pts in prop::collection::vec(arb_point(-5.0, 5.0), 1..=3)) {
        let problem = ChainProblem::from_waypoints(bc, &pts);
        let sol = solve_chain(&problem, &SolverOptions::default()).unwrap();
        prop_assume!(sol.converged);
        for i in 0..sol.times.len() {
            for d in [-1e-3, 1e-3] {
                let mut t = sol.times.clone();
                t[i] += d;
                if let Ok(e) = chain_energy(&problem, &t) {
                    prop_assert!(e >= sol.cost - 1e-9, "junction {i}, shift {d}: {e} < {}", sol.cost);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn extension_never_lowers_cost(
        bc in arb_bc(),
        pts in prop::collection::vec(arb_point(-5.0, 5.0), 0..=2),
        extra in arb_point(-5.0, 5.0),
        slot in 0usize..3,
    ) {
        let base = solve(bc, &pts);
        let mut longer = pts.clone();
        longer.insert(slot.min(pts.len()), extra);
        let ext = solve(bc, &longer);
        prop_assume!(base.converged && ext.converged);
        prop_assert!(base.cost <= ext.cost + 1e-9, "{} > {}", base.cost, ext.cost);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn single_junction_matches_golden_section(bc in arb_bc(), w in arb_point(-5.0, 5.0)) {
        let problem = ChainProblem::from_waypoints(bc, &[w]);
        let sol = solve_chain(&problem, &SolverOptions::default()).unwrap();
        prop_assume!(sol.converged);
        let h = bc.horizon();
        let cost = |t: f64| chain_energy(&problem, &[t]).unwrap_or(f64::INFINITY);
        // Bracket the global minimum on a grid before the unimodal search.
        let grid = 400;
        let best = (1..grid).map(|i| h * i as f64 / grid as f64).min_by(|a, b| cost(*a).total_cmp(&cost(*b))).unwrap();
        let t = golden_section(cost, (best - h / grid as f64).max(1e-6 * h), (best + h / grid as f64).min(h - 1e-6 * h), 1e-11);
        prop_assert!((t - sol.times[0]).abs() <= 1e-6, "golden {t}, solver {}", sol.times[0]);
    }
}

#[test]
fn system_sizes() {
    let bc = BoundaryConditions::rest_to_rest(v(-1., 0.), v(1., 0.), 0.0, 2.0);
    for (n, times) in [(0, vec![]), (1, vec![1.0]), (2, vec![0.7, 1.3])] {
        let pts: Vec<Vec2> = (0..n).map(|i| v(i as f64 * 0.2, 0.5)).collect();
        let (a, z) = assemble_linear_system(&ChainProblem::from_waypoints(bc, &pts), &times).unwrap();
        assert_eq!(a.shape(), (8 * (n + 1), 8 * (n + 1)));
        assert_eq!(z.len(), 8 * (n + 1));
    }
}

#[test]
fn symmetric_vertex_junction_at_midpoint() {
    let bc = BoundaryConditions::rest_to_rest(v(-1., 0.), v(1., 0.), 0.0, 2.0);
    let sol = solve(bc, &[v(0., 0.5)]);
    assert!(sol.converged);
    assert!((sol.times[0] - 1.0).abs() <= 1e-6);
    let problem = ChainProblem::from_waypoints(bc, &[v(0., 0.5)]);
    let before = junction_residuals(&problem, &[0.9]).unwrap()[0];
    let after = junction_residuals(&problem, &[1.1]).unwrap()[0];
    assert!(before * after < 0.0);
    let on_path = solve(bc, &[v(0., 0.)]);
    assert!((on_path.cost - 3.0).abs() < 1e-9);
}

#[test]
fn reflex_contact_stops_the_robot() {
    let env = from_rings(&[l_shape(v(0., 0.), 1.0)], 0.0).unwrap();
    let bc = BoundaryConditions::rest_to_rest(v(3., 0.5), v(0.5, 3.), 0.0, 6.0);
    let problem = ChainProblem::from_vertices(&env, bc, &[3]).unwrap();
    let sol = solve_chain(&problem, &SolverOptions::default()).unwrap();
    assert!(sol.converged);
    let t = sol.times[0];
    assert!(sol.trajectory.arcs[0].eval_unchecked(t).v.norm() < 1e-9);
    assert!(sol.trajectory.arcs[1].eval_unchecked(t).v.norm() < 1e-9);
}
