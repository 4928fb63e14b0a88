use std::sync::Arc;

use wssfem::fem::{boundary_mass_matrix, cell_reference_from_facet, tabulate_basis, ElementKind, Field, FunctionSpace, QuadratureRule};
use wssfem::geometry::{dot, norm, Point};
use wssfem::harness::{build_problem, compute_wss, level_mesh, CaseKind, Overrides};
use wssfem::linalg::Factorization;
use wssfem::mesh::{generate_unit_square, Mesh, RegionTags};
use wssfem::stokes::{solve_stokes, BoundaryCondition, ElementPair, FlowProblem, Solution, StressModel};
use wssfem::wss::{boundary_flux_wss, lsa, project_wss, wss_stats, BoundarySpaceKind, WssField, WssMethod};

const KINDS: [BoundarySpaceKind; 3] = [BoundarySpaceKind::Cg1, BoundarySpaceKind::Dg1, BoundarySpaceKind::Dg0];

fn pipe(element: ElementPair) -> (FlowProblem, Solution) {
    let mesh = level_mesh(CaseKind::Poiseuille3d, 0).unwrap().mesh;
    let problem = build_problem(CaseKind::Poiseuille3d, element, mesh, &Overrides::default()).unwrap();
    let solution = solve_stokes(&problem).unwrap();
    (problem, solution)
}

fn square(n: usize, element: ElementPair) -> (FlowProblem, Solution) {
    let mesh = level_mesh(CaseKind::Stokes2d, 0).unwrap().mesh;
    let mesh = if n == 8 { mesh } else { Arc::new(generate_unit_square(n).unwrap()) };
    let problem = build_problem(CaseKind::Stokes2d, element, mesh, &Overrides::default()).unwrap();
    let solution = solve_stokes(&problem).unwrap();
    (problem, solution)
}

/// Tangential viscous traction `mu (G + G^T) n` minus its normal part.
fn tangential_traction(g: &[[f64; 3]; 3], n: &Point, mu: f64) -> Point {
    let mut t = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i] += mu * (g[i][j] + g[j][i]) * n[j];
        }
    }
    let tn = dot(&t, n);
    [t[0] - tn * n[0], t[1] - tn * n[1], t[2] - tn * n[2]]
}

/// Relative size of `int (tau_h - t) . e_c phi_i ds` over all region basis
/// functions: the L2 projection makes it vanish.
fn projection_orthogonality(field: &WssField, v: &Field, mu: f64) -> f64 {
    let mesh = v.mesh().clone();
    let piece = &field.pieces()[0];
    let space = piece.field.space();
    let kind = space.kind();
    let rule = QuadratureRule::simplex(2, 6);
    let ref_measure = QuadratureRule::reference_measure(2);
    let mut residual = vec![0.0; space.n_dofs()];
    let mut load = vec![0.0; space.n_dofs()];
    for &fi in &piece.facets {
        let bf = &mesh.boundary_facets()[fi];
        let nodes = space.facet_nodes(fi);
        for q in 0..rule.len() {
            let eta = rule.point(q);
            let w = rule.weight(q) * bf.measure / ref_measure;
            let xi = cell_reference_from_facet(mesh.cell(bf.cell), mesh.facet_vertices(bf), eta);
            let t = tangential_traction(&v.gradient_in_cell(bf.cell, &xi), &bf.normal, mu);
            let tau = field.raw_value(fi, eta);
            let b = tabulate_basis(kind, 2, eta);
            for (a, &node) in nodes.iter().enumerate() {
                for c in 0..3 {
                    let dof = space.dofmap().dof(node, c);
                    residual[dof] += w * b.values()[a] * (tau[c] - t[c]);
                    load[dof] += w * b.values()[a] * t[c];
                }
            }
        }
    }
    norm_of(&residual) / norm_of(&load)
}

fn norm_of(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[test]
fn projection_residual_is_orthogonal_to_the_space() {
    let (problem, solution) = pipe(ElementPair::P2P1);
    let wall = [RegionTags::STANDARD.wall];
    for kind in KINDS {
        let field = project_wss(&solution.velocity, problem.viscosity, problem.stress, &wall, kind).unwrap();
        let r = projection_orthogonality(&field, &solution.velocity, problem.viscosity);
        assert!(r <= 1e-10, "{kind:?}: {r:e}");
    }
}

#[test]
fn projected_values_are_tangential() {
    let (problem, solution) = pipe(ElementPair::P1P1);
    let wall = [RegionTags::STANDARD.wall];
    for kind in KINDS {
        let field = project_wss(&solution.velocity, problem.viscosity, problem.stress, &wall, kind).unwrap();
        let mesh = field.mesh();
        for f in field.facets() {
            let n = mesh.boundary_facets()[f].normal;
            for eta in [[0.2, 0.3], [1.0, 0.0], [0.0, 0.0]] {
                let tau = field.value(f, &eta);
                assert!(dot(&tau, &n).abs() <= 1e-8 * (1.0 + norm(&tau)));
            }
        }
    }
}

#[test]
fn dg0_value_is_the_facet_traction_of_a_linear_field() {
    let mesh = level_mesh(CaseKind::Poiseuille3d, 0).unwrap().mesh;
    let space = FunctionSpace::new(mesh.clone(), ElementKind::P2, 3);
    let g = [[0.0, 1.0, 0.5], [0.0, 0.0, 2.0], [1.0, -1.0, 0.0]];
    let v = Field::interpolate(space, &|x| {
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = (0..3).map(|j| g[i][j] * x[j]).sum();
        }
        out
    });
    let mu = 4e-3;
    let field = project_wss(&v, mu, StressModel::SymmetricGradient, &[RegionTags::STANDARD.wall], BoundarySpaceKind::Dg0)
        .unwrap();
    for f in field.facets() {
        let n = mesh.boundary_facets()[f].normal;
        let expected = tangential_traction(&g, &n, mu);
        let got = field.value(f, &[1.0 / 3.0, 1.0 / 3.0]);
        for c in 0..3 {
            assert!((got[c] - expected[c]).abs() <= 1e-12 * (1.0 + norm(&expected)));
        }
    }
}

#[test]
fn uniform_velocity_has_no_shear() {
    let mesh = level_mesh(CaseKind::Poiseuille3d, 0).unwrap().mesh;
    let v = Field::interpolate(FunctionSpace::new(mesh, ElementKind::P2, 3), &|_| [0.3, -0.2, 1.0]);
    for kind in KINDS {
        let field =
            project_wss(&v, 4e-3, StressModel::SymmetricGradient, &[RegionTags::STANDARD.wall], kind).unwrap();
        assert!(field.l2_norm(4) < 1e-14);
    }
}

#[test]
fn rest_state_has_zero_boundary_flux() {
    let mesh = Arc::new(generate_unit_square(4).unwrap());
    let zero: wssfem::fem::CoordFn = Arc::new(|_| [0.0; 3]);
    let mut problem = FlowProblem::new(mesh, ElementPair::P2P1, StressModel::FullGradient, 1.0);
    for tag in RegionTags::STANDARD.sides() {
        problem = problem.with_bc(tag, BoundaryCondition::StrongDirichlet(zero.clone()));
    }
    let solution = solve_stokes(&problem).unwrap();
    let field = boundary_flux_wss(&solution, &problem, &[RegionTags::STANDARD.bottom]).unwrap();
    assert!(field.l2_norm(4) < 1e-14);
}

#[test]
fn projection_ignores_pressure() {
    let (problem, mut solution) = pipe(ElementPair::P2P1);
    let before = compute_wss(CaseKind::Poiseuille3d, &problem, &solution, WssMethod::Cg1).unwrap();
    for p in solution.pressure.values_mut() {
        *p += 123.0;
    }
    let after = compute_wss(CaseKind::Poiseuille3d, &problem, &solution, WssMethod::Cg1).unwrap();
    assert_eq!(before.pieces()[0].field.values(), after.pieces()[0].field.values());
}

#[test]
fn boundary_flux_invariant_to_pressure_shift_after_mean_constraint() {
    let (problem, solution) = square(8, ElementPair::P2P1);
    let before = compute_wss(CaseKind::Stokes2d, &problem, &solution, WssMethod::Bflux).unwrap();
    // Shift by a constant and re-impose the zero mean.
    let mut shifted = solution.clone();
    for p in shifted.pressure.values_mut() {
        *p += 3.0;
    }
    let mean = integral(&shifted.pressure);
    for p in shifted.pressure.values_mut() {
        *p -= mean;
    }
    let after = compute_wss(CaseKind::Stokes2d, &problem, &shifted, WssMethod::Bflux).unwrap();
    let diff = after.l2_difference(&before, 4);
    assert!(diff <= 1e-10 * before.l2_norm(4), "difference {diff:e}");
}

/// `int p dx` of a scalar P1 field on the unit square (vertex rule is exact
/// for linear functions cell by cell).
fn integral(p: &Field) -> f64 {
    let mesh = p.mesh();
    (0..mesh.n_cells())
        .map(|c| {
            let vol = mesh.cell_volume(c);
            let mean: f64 = mesh.cell(c).iter().map(|&v| p.values()[v]).sum::<f64>() / 3.0;
            vol * mean
        })
        .sum()
}

#[test]
fn boundary_flux_rejects_a_different_configuration() {
    let (problem, solution) = square(8, ElementPair::P1P1);
    let other = problem.clone().with_beta(50.0);
    let err = boundary_flux_wss(&solution, &other, &[RegionTags::STANDARD.bottom]).unwrap_err();
    assert_eq!(err.kind(), "configuration_mismatch");
}

#[test]
fn empty_region_is_an_error() {
    let (problem, solution) = square(8, ElementPair::P2P1);
    let err = project_wss(&solution.velocity, 1.0, problem.stress, &[99], BoundarySpaceKind::Cg1).unwrap_err();
    assert_eq!(err.kind(), "empty_region");
    let err = boundary_flux_wss(&solution, &problem, &[99]).unwrap_err();
    assert_eq!(err.kind(), "empty_region");
}

#[test]
fn equal_order_boundary_flux_matches_cg1_projection() {
    for n in [8, 16] {
        let (problem, solution) = square(n, ElementPair::P1P1);
        let b = compute_wss(CaseKind::Stokes2d, &problem, &solution, WssMethod::Bflux).unwrap();
        let c = compute_wss(CaseKind::Stokes2d, &problem, &solution, WssMethod::Cg1).unwrap();
        assert!(b.l2_difference(&c, 6) <= 0.05 * c.l2_norm(6));
    }
    let (problem, solution) = pipe(ElementPair::P1P1);
    let b = compute_wss(CaseKind::Poiseuille3d, &problem, &solution, WssMethod::Bflux).unwrap();
    let c = compute_wss(CaseKind::Poiseuille3d, &problem, &solution, WssMethod::Cg1).unwrap();
    assert!(b.l2_difference(&c, 6) <= 0.05 * c.l2_norm(6));
}

#[test]
fn dg_local_solves_match_the_global_solve() {
    let mesh = level_mesh(CaseKind::Poiseuille3d, 0).unwrap().mesh;
    let facets = mesh.facets_with_markers(&[RegionTags::STANDARD.wall]);
    for kind in [ElementKind::DG0, ElementKind::DG1] {
        let space = FunctionSpace::boundary(mesh.clone(), kind, 1).unwrap();
        let mass = boundary_mass_matrix(&space, &facets).unwrap();
        let m = mass.nodes().len();
        let b: Vec<f64> = (0..m).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let local = mass.solve(std::slice::from_ref(&b)).unwrap().remove(0);
        let global = Factorization::new(mass.matrix()).unwrap().solve(&b).unwrap();
        let err = norm_of(&local.iter().zip(&global).map(|(a, g)| a - g).collect::<Vec<_>>());
        assert!(err <= 1e-12 * norm_of(&global), "{kind:?}: {err:e}");
    }
}

/// DG0 field on the bottom side of a unit square with `n = 2`: two facets
/// of length 1/2 carrying the given tangential values.
fn bottom_dg0(values: [f64; 2]) -> WssField {
    bottom_field(&|x| if x[0] < 0.5 { values[0] } else { values[1] })
}

fn bottom_field(tx: &(dyn Fn(Point) -> f64 + Sync)) -> WssField {
    let mesh: Arc<Mesh> = Arc::new(generate_unit_square(2).unwrap());
    let space = FunctionSpace::boundary(mesh, ElementKind::DG0, 2).unwrap();
    let field = Field::interpolate(space, &|x| [tx(x), 0.0, 0.0]);
    WssField::from_field(WssMethod::Dg0, &[RegionTags::STANDARD.bottom], field).unwrap()
}

#[test]
fn stats_of_synthetic_fields() {
    let s = wss_stats(&bottom_dg0([8.0, 8.0])).unwrap();
    assert_eq!((s.max, s.min), (8.0, 8.0));
    assert!((s.avg - 8.0).abs() < 1e-14 && (s.area - 1.0).abs() < 1e-14);
    let s = wss_stats(&bottom_dg0([2.0, -4.0])).unwrap();
    assert_eq!((s.max, s.min), (4.0, 2.0));
    assert!((s.avg - 3.0).abs() < 1e-14);
}

#[test]
fn lsa_of_synthetic_fields() {
    let m = 6.0;
    assert_eq!(lsa(&bottom_dg0([m, m]), m).unwrap(), 0.0);
    assert_eq!(lsa(&bottom_dg0([0.0, 0.0]), m).unwrap(), 100.0);
    assert!((lsa(&bottom_dg0([0.05 * m, 0.5 * m]), m).unwrap() - 50.0).abs() < 1e-12);
    assert_eq!(lsa(&bottom_dg0([m, m]), 0.0).unwrap_err().kind(), "invalid_argument");
}

#[test]
fn lsa_subdivides_linear_facets() {
    // CG1 field 0 at x = 0 rising to 1 at x = 1/2 and beyond: with threshold
    // 0.5, the first facet's sub-segments centred at 1/12 and 1/4 are low
    // (values 1/6 and 1/2 - not below), so one third of that facet is low.
    let mesh: Arc<Mesh> = Arc::new(generate_unit_square(2).unwrap());
    let space = FunctionSpace::boundary(mesh, ElementKind::P1, 2).unwrap();
    let field = Field::interpolate(space, &|x| [(2.0 * x[0]).min(1.0), 0.0, 0.0]);
    let field = WssField::from_field(WssMethod::Cg1, &[RegionTags::STANDARD.bottom], field).unwrap();
    let pct = lsa(&field, 5.0).unwrap();
    assert!((pct - 100.0 / 6.0).abs() < 1e-12, "{pct}");
}
