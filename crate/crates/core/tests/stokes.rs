use std::sync::Arc;

use wssfem::fem::CoordFn;
use wssfem::fem::{Field, QuadratureRule};
use wssfem::geometry::{dot, Point};
use wssfem::harness::{build_problem, level_mesh, CaseKind, Overrides};
use wssfem::mesh::{generate_unit_square, RegionTags, Tag};
use wssfem::stokes::{
    solve_stokes, BoundaryCondition, ElementPair, FlowProblem, Solution, Stabilization, StressModel,
};

fn exact_v(x: Point) -> [f64; 3] {
    [20.0 * x[0] * x[1].powi(3), 5.0 * x[0].powi(4) - 5.0 * x[1].powi(4), 0.0]
}

fn exact_p(x: Point) -> [f64; 3] {
    [60.0 * x[0] * x[0] * x[1] - 20.0 * x[1].powi(3) - 5.0, 0.0, 0.0]
}

fn square_problem(n: usize, element: ElementPair, nitsche: bool) -> FlowProblem {
    let mesh = Arc::new(generate_unit_square(n).unwrap());
    let g: CoordFn = Arc::new(exact_v);
    let mut problem = FlowProblem::new(mesh, element, StressModel::FullGradient, 1.0);
    for tag in RegionTags::STANDARD.sides() {
        let bc = if nitsche {
            BoundaryCondition::NitscheDirichlet(g.clone())
        } else {
            BoundaryCondition::StrongDirichlet(g.clone())
        };
        problem = problem.with_bc(tag, bc);
    }
    if element == ElementPair::P1P1 {
        problem = problem.with_stabilization(Stabilization::BH_2D);
    }
    problem
}

fn errors(n: usize, element: ElementPair, nitsche: bool) -> (f64, f64) {
    let sol = solve_stokes(&square_problem(n, element, nitsche)).unwrap();
    (sol.velocity.l2_error(&exact_v, 8), sol.pressure.l2_error(&exact_p, 8))
}

#[test]
fn taylor_hood_rates_on_square() {
    let (v1, p1) = errors(8, ElementPair::P2P1, false);
    let (v2, p2) = errors(16, ElementPair::P2P1, false);
    let rv = (v1 / v2).log2();
    let rp = (p1 / p2).log2();
    eprintln!("P2P1 v {v1:e} {v2:e} rate {rv}; p {p1:e} {p2:e} rate {rp}");
    assert!((rv - 3.0).abs() < 0.3);
    assert!((rp - 2.0).abs() < 0.3);
}

#[test]
fn stabilized_nitsche_rates_on_square() {
    let (v1, p1) = errors(16, ElementPair::P1P1, true);
    let (v2, p2) = errors(32, ElementPair::P1P1, true);
    let rv = (v1 / v2).log2();
    let rp = (p1 / p2).log2();
    eprintln!("P1P1 v {v1:e} {v2:e} rate {rv}; p {p1:e} {p2:e} rate {rp}");
    assert!((rv - 2.0).abs() < 0.3);
    assert!(rp > 1.2);
}

/// `int v . n ds` over the facets carrying `tag`.
fn flux(sol: &Solution, tag: Tag) -> f64 {
    let mesh = sol.velocity.mesh();
    let rule = QuadratureRule::simplex(mesh.dim() - 1, 4);
    let ref_measure = QuadratureRule::reference_measure(mesh.dim() - 1);
    mesh.facets_with_markers(&[tag])
        .into_iter()
        .map(|f| {
            let bf = &mesh.boundary_facets()[f];
            (0..rule.len())
                .map(|q| {
                    let v = sol.velocity.value_on_facet(f, rule.point(q));
                    rule.weight(q) * bf.measure / ref_measure * dot(&v, &bf.normal)
                })
                .sum::<f64>()
        })
        .sum()
}

/// L2 norm of the difference of two fields on identically numbered spaces.
fn difference(a: &Field, b: &Field) -> f64 {
    let values = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    Field::new(a.space().clone(), values).unwrap().l2_error(&|_| [0.0; 3], 8)
}

fn pipe(element: ElementPair) -> (FlowProblem, Solution) {
    let mesh = level_mesh(CaseKind::Poiseuille3d, 0).unwrap().mesh;
    let problem = build_problem(CaseKind::Poiseuille3d, element, mesh, &Overrides::default()).unwrap();
    let sol = solve_stokes(&problem).unwrap();
    (problem, sol)
}

#[test]
fn taylor_hood_conserves_mass_through_the_pipe() {
    // Constants lie in the P1 pressure space, so the discrete divergence
    // integrates to zero and outflow balances inflow.
    let (_, sol) = pipe(ElementPair::P2P1);
    let tags = RegionTags::STANDARD;
    let inflow = flux(&sol, tags.inlet);
    let outflow = flux(&sol, tags.outlet);
    let wall = flux(&sol, tags.wall);
    assert!(inflow < 0.0);
    assert!((inflow + outflow + wall).abs() <= 1e-10 * inflow.abs(), "{inflow:e} {outflow:e} {wall:e}");
}

#[test]
fn equal_order_pipe_loses_little_mass() {
    let (_, sol) = pipe(ElementPair::P1P1);
    let tags = RegionTags::STANDARD;
    let inflow = flux(&sol, tags.inlet);
    let outflow = flux(&sol, tags.outlet);
    assert!((inflow + outflow).abs() <= 0.05 * inflow.abs());
}

#[test]
fn stress_models_agree_up_to_discretization_error() {
    let full = solve_stokes(&square_problem(8, ElementPair::P2P1, false)).unwrap();
    let mut problem = square_problem(8, ElementPair::P2P1, false);
    problem.stress = StressModel::SymmetricGradient;
    let sym = solve_stokes(&problem).unwrap();
    assert_ne!(full.fingerprint, sym.fingerprint);
    let err = full.velocity.l2_error(&exact_v, 8);
    let diff = difference(&full.velocity, &sym.velocity);
    assert!(diff > 0.0 && diff <= 2.0 * err, "difference {diff:e}, error {err:e}");
    let err_sym = sym.velocity.l2_error(&exact_v, 8);
    assert!(err_sym <= 2.0 * err);
}

#[test]
fn nitsche_and_strong_dirichlet_agree_up_to_discretization_error() {
    for n in [8, 16] {
        let strong = solve_stokes(&square_problem(n, ElementPair::P2P1, false)).unwrap();
        let weak = solve_stokes(&square_problem(n, ElementPair::P2P1, true)).unwrap();
        let err = strong.velocity.l2_error(&exact_v, 8);
        let diff = difference(&strong.velocity, &weak.velocity);
        assert!(diff <= 3.0 * err, "n = {n}: difference {diff:e}, error {err:e}");
    }
}

#[test]
fn homogeneous_data_gives_the_zero_solution() {
    for (element, nitsche) in [(ElementPair::P2P1, false), (ElementPair::P1P1, true)] {
        let mesh = Arc::new(generate_unit_square(6).unwrap());
        let zero: CoordFn = Arc::new(|_| [0.0; 3]);
        let mut problem = FlowProblem::new(mesh, element, StressModel::FullGradient, 1.0);
        for tag in RegionTags::STANDARD.sides() {
            let bc = if nitsche {
                BoundaryCondition::NitscheDirichlet(zero.clone())
            } else {
                BoundaryCondition::StrongDirichlet(zero.clone())
            };
            problem = problem.with_bc(tag, bc);
        }
        if element == ElementPair::P1P1 {
            problem = problem.with_stabilization(Stabilization::BH_2D);
        }
        let sol = solve_stokes(&problem).unwrap();
        assert!(sol.velocity.values().iter().chain(sol.pressure.values()).all(|v| v.abs() < 1e-14));
    }
}

#[test]
fn enclosed_flow_pressure_has_zero_mean() {
    for element in [ElementPair::P2P1, ElementPair::P1P1] {
        let sol = solve_stokes(&square_problem(8, element, element == ElementPair::P1P1)).unwrap();
        let rule = QuadratureRule::simplex(2, 2);
        let mesh = sol.pressure.mesh();
        let mean: f64 = (0..mesh.n_cells())
            .map(|c| {
                (0..rule.len())
                    .map(|q| rule.weight(q) * mesh.geometry(c).det * sol.pressure.value_in_cell(c, rule.point(q))[0])
                    .sum::<f64>()
            })
            .sum();
        assert!(mean.abs() < 1e-12, "{element:?}: {mean:e}");
    }
}
