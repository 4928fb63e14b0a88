use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use wssfem::fem::CoordFn;
use wssfem::geometry::Point;
use wssfem::harness::{build_problem, compute_wss, level_mesh, CaseKind, Overrides};
use wssfem::mesh::{generate_unit_square, RegionTags};
use wssfem::navier_stokes::{assemble_ns_residual_and_jacobian, newton_solve, newton_solve_from, NsConfig};
use wssfem::stokes::{
    assemble_stokes, solve_stokes, BoundaryCondition, Discretization, ElementPair, FlowProblem, Stabilization,
    StressModel,
};
use wssfem::wss::{wss_stats, WssMethod};

fn square_flow(n: usize, element: ElementPair, stabilization: Stabilization) -> FlowProblem {
    let mesh = Arc::new(generate_unit_square(n).unwrap());
    let g: CoordFn = Arc::new(|x: Point| [20.0 * x[0] * x[1].powi(3), 5.0 * x[0].powi(4) - 5.0 * x[1].powi(4), 0.0]);
    let mut problem = FlowProblem::new(mesh, element, StressModel::FullGradient, 1.0).with_stabilization(stabilization);
    for tag in RegionTags::STANDARD.sides() {
        let bc = match element {
            ElementPair::P2P1 => BoundaryCondition::StrongDirichlet(g.clone()),
            ElementPair::P1P1 => BoundaryCondition::NitscheDirichlet(g.clone()),
        };
        problem = problem.with_bc(tag, bc);
    }
    problem
}

fn pipe(element: ElementPair, level: usize) -> FlowProblem {
    let mesh = level_mesh(CaseKind::NsPipe, level).unwrap().mesh;
    build_problem(CaseKind::NsPipe, element, mesh, &Overrides::default()).unwrap()
}

/// Largest relative deviation of the Jacobian action from a central
/// difference of the residual over a few random directions.
fn jacobian_fd_error(problem: &FlowProblem, seed: u64) -> f64 {
    let disc = Discretization::new(problem).unwrap();
    let mut rng = StdRng::seed_from_u64(seed);
    let n = disc.n_total();
    let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (_, jac) = assemble_ns_residual_and_jacobian(problem, &disc, &u, 1.0, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let eps = 1e-4;
        let shifted = |s: f64| -> Vec<f64> { u.iter().zip(&d).map(|(a, b)| a + s * eps * b).collect() };
        let (rp, _) = assemble_ns_residual_and_jacobian(problem, &disc, &shifted(1.0), 1.0, 1.0).unwrap();
        let (rm, _) = assemble_ns_residual_and_jacobian(problem, &disc, &shifted(-1.0), 1.0, 1.0).unwrap();
        let jd = jac.matvec(&d);
        let num: f64 = rp
            .iter()
            .zip(&rm)
            .zip(&jd)
            .map(|((a, b), j)| ((a - b) / (2.0 * eps) - j).powi(2))
            .sum::<f64>()
            .sqrt();
        let den: f64 = jd.iter().map(|j| j * j).sum::<f64>().sqrt();
        worst = worst.max(num / den);
    }
    worst
}

#[test]
fn jacobian_matches_finite_differences_taylor_hood() {
    let problem = square_flow(4, ElementPair::P2P1, Stabilization::None);
    let err = jacobian_fd_error(&problem, 1);
    assert!(err <= 1e-6, "relative FD mismatch {err:e}");
}

#[test]
fn jacobian_matches_finite_differences_equal_order() {
    // The streamline interior penalty weight is lagged, so the exact-Jacobian
    // check uses the velocity and pressure gradient penalties only.
    let stab = Stabilization::InteriorPenalty {
        alpha_i: 0.0,
        alpha_v: 1e-3,
        alpha_p: 1.0,
    };
    let problem = square_flow(5, ElementPair::P1P1, stab);
    let err = jacobian_fd_error(&problem, 2);
    assert!(err <= 1e-6, "relative FD mismatch {err:e}");
}

#[test]
fn jacobian_matches_finite_differences_pipe() {
    let err = jacobian_fd_error(&pipe(ElementPair::P2P1, 0), 3);
    assert!(err <= 1e-6, "relative FD mismatch {err:e}");
}

#[test]
fn zero_velocity_residual_is_the_stokes_residual() {
    let problem = square_flow(4, ElementPair::P2P1, Stabilization::None);
    let disc = Discretization::new(&problem).unwrap();
    let mut u = vec![0.0; disc.n_total()];
    // Nonzero pressure, zero velocity: the convective term vanishes.
    let mut rng = StdRng::seed_from_u64(4);
    for x in &mut u[disc.n_velocity()..] {
        *x = rng.gen_range(-1.0..1.0);
    }
    let (r_ns, _) = assemble_ns_residual_and_jacobian(&problem, &disc, &u, 1.0, 1.0).unwrap();
    let (r_stokes, _) = assemble_ns_residual_and_jacobian(&problem, &disc, &u, 1.0, 0.0).unwrap();
    assert_eq!(r_ns, r_stokes);
}

#[test]
fn zero_inflow_converges_to_rest() {
    let mut problem = pipe(ElementPair::P2P1, 0);
    let zero: CoordFn = Arc::new(|_| [0.0; 3]);
    for bc in problem.bcs.values_mut() {
        if let BoundaryCondition::StrongDirichlet(g) = bc {
            *g = zero.clone();
        }
    }
    let ns = newton_solve(&problem, &NsConfig::default()).unwrap();
    assert!(ns.log[0].iterations() <= 1);
    assert!(ns.solution.velocity.values().iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn pipe_newton_from_stokes_matches_stokes_wss() {
    for element in [ElementPair::P2P1, ElementPair::P1P1] {
        let problem = pipe(element, 0);
        let stokes = solve_stokes(&problem).unwrap();
        let ns = newton_solve_from(&problem, &NsConfig::default(), &stokes).unwrap();
        let steps = &ns.log[0];
        assert!(steps.iterations() <= 5, "{element:?}: {:?}", steps.residuals);
        assert!(*steps.residuals.last().unwrap() <= 1e-10);
        for m in WssMethod::ALL {
            let a = wss_stats(&compute_wss(CaseKind::NsPipe, &problem, &stokes, m).unwrap()).unwrap().avg;
            let b = wss_stats(&compute_wss(CaseKind::NsPipe, &problem, &ns.solution, m).unwrap()).unwrap().avg;
            assert!((a - b).abs() < 0.01 * a, "{element:?} {m}: {a} vs {b}");
        }
    }
}

fn scaled_inflow(problem: &mut FlowProblem, factor: f64) {
    let inlet = RegionTags::STANDARD.inlet;
    if let Some(BoundaryCondition::StrongDirichlet(g) | BoundaryCondition::NitscheDirichlet(g)) =
        problem.bcs.get_mut(&inlet)
    {
        let base = g.clone();
        *g = Arc::new(move |x| base(x).map(|c| factor * c));
    }
}

#[test]
fn continuation_with_tenfold_inflow() {
    let mut problem = pipe(ElementPair::P2P1, 0);
    scaled_inflow(&mut problem, 10.0);
    let config = NsConfig {
        continuation: vec![0.25, 0.5, 1.0],
        ..NsConfig::default()
    };
    let ns = newton_solve(&problem, &config).unwrap();
    assert_eq!(ns.log.iter().map(|s| s.scale).collect::<Vec<_>>(), vec![0.25, 0.5, 1.0]);
    for step in &ns.log {
        assert!(*step.residuals.last().unwrap() <= config.newton_tol);
    }
}

#[test]
fn zero_convection_reproduces_stokes_bitwise() {
    for problem in [pipe(ElementPair::P2P1, 0), square_flow(8, ElementPair::P2P1, Stabilization::None)] {
        let stokes = solve_stokes(&problem).unwrap();
        let config = NsConfig {
            convection_scale: 0.0,
            ..NsConfig::default()
        };
        let ns = newton_solve(&problem, &config).unwrap();
        assert_eq!(ns.solution.velocity.values(), stokes.velocity.values());
        assert_eq!(ns.solution.pressure.values(), stokes.pressure.values());
    }
}

#[test]
fn newton_converges_quadratically() {
    // The polynomial square flow has a strong convective term at unit
    // viscosity and density 5, so Newton needs several steps from Stokes.
    let mut problem = square_flow(8, ElementPair::P2P1, Stabilization::None);
    problem.density = 5.0;
    let ns = newton_solve(&problem, &NsConfig::default()).unwrap();
    let r = &ns.log[0].residuals;
    assert!(r.len() >= 4, "too few iterations to judge the order: {r:?}");
    // Before round-off dominates, log r_{k+1} / log r_k approaches 2.
    let tail: Vec<f64> = r.iter().copied().filter(|&x| x > 1e-13).collect();
    let k = tail.len() - 1;
    let order = tail[k].ln() / tail[k - 1].ln();
    assert!(order > 1.6, "residuals {r:?}");
}

#[test]
fn stokes_initial_guess_must_match_problem() {
    let p2 = pipe(ElementPair::P2P1, 0);
    let p1 = pipe(ElementPair::P1P1, 0);
    let stokes = solve_stokes(&p1).unwrap();
    let err = newton_solve_from(&p2, &NsConfig::default(), &stokes).unwrap_err();
    assert_eq!(err.kind(), "configuration_mismatch");
}

#[test]
fn assembled_stokes_system_is_consistent_with_residual() {
    // The NS residual with zero convection at the Stokes solution vanishes
    // on the free rows.
    let problem = square_flow(6, ElementPair::P2P1, Stabilization::None);
    let assembled = assemble_stokes(&problem).unwrap();
    let stokes = solve_stokes(&problem).unwrap();
    let disc = Discretization::new(&problem).unwrap();
    let u = disc.join(&stokes.velocity, &stokes.pressure, stokes.multiplier);
    let (r, _) = assemble_ns_residual_and_jacobian(&problem, &disc, &u, 1.0, 0.0).unwrap();
    let free: f64 = r
        .iter()
        .enumerate()
        .filter(|(i, _)| !assembled.constraints.contains_key(i))
        .map(|(_, v)| v * v)
        .sum::<f64>()
        .sqrt();
    let scale: f64 = assembled.system.rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(free <= 1e-9 * (1.0 + scale), "free residual {free:e}");
}
