use super::field::{BoundarySpaceKind, WssField, WssMethod};
use super::projection::finish_piece;
use crate::error::{Error, Result};
use crate::fem::{
    boundary_mass_matrix, cell_reference_from_facet, edge_vertices, ElementKind, FunctionSpace, QuadratureRule,
};
use crate::geometry::dot;
use crate::mesh::{RegionTags, Tag};
use crate::navier_stokes::assemble_convection;
use crate::stokes::{
    assemble_linear, eval_basis, stress_tensor, AssemblyOptions, Discretization, FlowProblem, NitscheMode, Solution,
};

/// Boundary-flux WSS on `region`, tested with the continuous piecewise
/// linear functions of the region's vertices:
///
/// `int_region tau . phi = int T:grad phi + rho int ((grad v) v) . phi - int f . phi
///  + S[(v,p),(phi,0)] + (Nitsche adjoint and penalty terms)
///  - int_region (T n . n) n . phi - int_(rest of boundary) T n . phi`.
///
/// The Nitsche adjoint and penalty terms are kept on every Nitsche marker,
/// not only on the region: they are part of the discrete equations the
/// solution satisfies, and only the consistency term is replaced by the
/// traction.
/// The time derivative is absent (steady solutions). The solution must come
/// from a solve of the same problem configuration.
pub fn boundary_flux_wss(solution: &Solution, problem: &FlowProblem, region: &[Tag]) -> Result<WssField> {
    let expected = problem.fingerprint();
    if solution.fingerprint != expected {
        return Err(Error::ConfigurationMismatch {
            expected: expected.0,
            found: solution.fingerprint.0.clone(),
        });
    }
    let mesh = problem.mesh.clone();
    let dim = mesh.dim();
    let facets = mesh.facets_with_markers(region);
    if facets.is_empty() {
        return Err(Error::EmptyRegion(region.to_vec()));
    }
    let disc = Discretization::new(problem)?;
    let u = disc.join(&solution.velocity, &solution.pressure, solution.multiplier);
    if u.len() != disc.n_total() {
        return Err(Error::ConfigurationMismatch {
            expected: expected.0,
            found: solution.fingerprint.0.clone(),
        });
    }
    let opts = AssemblyOptions {
        nitsche: NitscheMode::Leftovers,
        advecting: Some(&solution.velocity),
        data_scale: 1.0,
    };
    let (k, f) = assemble_linear(problem, &disc, &opts)?;
    let mut residual = k.matvec(&u);
    for (r, fi) in residual.iter_mut().zip(&f) {
        *r -= fi;
    }
    if solution.convective {
        assemble_convection(&disc, problem.density, &solution.velocity, None, Some(&mut residual));
    }
    subtract_boundary_tractions(problem, &disc, solution, region, &mut residual);

    // Restrict from velocity basis functions to vertex hat functions.
    let space = FunctionSpace::boundary(mesh.clone(), ElementKind::P1, dim)?;
    let mass = boundary_mass_matrix(&space, &facets)?;
    let vdm = disc.velocity().dofmap();
    let mut rhs = vec![vec![0.0; mass.nodes().len()]; dim];
    let mut add_hat = |vertex: usize, node: usize, weight: f64| {
        if let Some(k) = mass.compact_index(vertex) {
            for (i, r) in rhs.iter_mut().enumerate() {
                r[k] += weight * residual[vdm.dof(node, i)];
            }
        }
    };
    for v in 0..mesh.n_vertices() {
        add_hat(v, v, 1.0);
    }
    if disc.velocity().kind() == ElementKind::P2 {
        // A vertex hat equals its P2 vertex function plus half of each P2
        // function on the edges through the vertex.
        let mut seen = vec![false; vdm.n_nodes()];
        for c in 0..mesh.n_cells() {
            let cell = mesh.cell(c);
            let nodes = vdm.nodes(c);
            for (e, &[a, b]) in edge_vertices(dim).iter().enumerate() {
                let node = nodes[dim + 1 + e];
                if !std::mem::replace(&mut seen[node], true) {
                    add_hat(cell[a], node, 0.5);
                    add_hat(cell[b], node, 0.5);
                }
            }
        }
    }
    finish_piece(WssMethod::Bflux, space, mass, region, rhs)
}

/// Adds `-int (T n . n) n . w` on region facets and `-int T n . w` on all
/// other boundary facets, for every velocity basis function `w`.
fn subtract_boundary_tractions(
    problem: &FlowProblem,
    disc: &Discretization,
    solution: &Solution,
    region: &[Tag],
    residual: &mut [f64],
) {
    let mesh = disc.mesh();
    let dim = mesh.dim();
    let fdim = dim - 1;
    let rule = QuadratureRule::simplex(fdim, 2 * disc.velocity().kind().degree() + 1);
    let ref_measure = QuadratureRule::reference_measure(fdim);
    let nv = disc.nv_local();
    let mut dofs = Vec::new();
    for bf in mesh.boundary_facets() {
        let in_region = region.contains(&bf.marker);
        let n = bf.normal;
        let c = bf.cell;
        disc.cell_dofs(c, &mut dofs);
        for q in 0..rule.len() {
            let eta = rule.point(q);
            let w = rule.weight(q) * bf.measure / ref_measure;
            let xi = cell_reference_from_facet(mesh.cell(c), mesh.facet_vertices(bf), eta);
            let g = solution.velocity.gradient_in_cell(c, &xi);
            let p = solution.pressure.value_in_cell(c, &xi)[0];
            let t = stress_tensor(problem.stress, problem.viscosity, &g, p, dim);
            let mut tn = [0.0; 3];
            for i in 0..dim {
                tn[i] = (0..dim).map(|j| t[i][j] * n[j]).sum();
            }
            let sub = if in_region {
                let nn = dot(&tn, &n);
                [nn * n[0], nn * n[1], nn * n[2]]
            } else {
                tn
            };
            let b = eval_basis(disc, c, &xi);
            for a in 0..nv {
                for i in 0..dim {
                    residual[dofs[a * dim + i]] -= w * b.phi[a] * sub[i];
                }
            }
        }
    }
}

/// Boundary-flux WSS computed independently on each side of the unit square
/// and combined, so that corner discontinuities of the traction do not
/// pollute the neighbouring sides.
pub fn boundary_flux_wss_2d_per_side(solution: &Solution, problem: &FlowProblem) -> Result<WssField> {
    let parts = per_side(problem, |side| boundary_flux_wss(solution, problem, &[side]))?;
    WssField::combine(parts)
}

/// Projection WSS computed independently on each side of the unit square.
pub fn project_wss_2d_per_side(solution: &Solution, problem: &FlowProblem, kind: BoundarySpaceKind) -> Result<WssField> {
    let parts = per_side(problem, |side| {
        super::project_wss(&solution.velocity, problem.viscosity, problem.stress, &[side], kind)
    })?;
    WssField::combine(parts)
}

fn per_side<F>(problem: &FlowProblem, mut compute: F) -> Result<Vec<WssField>>
where
    F: FnMut(Tag) -> Result<WssField>,
{
    let markers = problem.mesh.markers();
    let sides = RegionTags::STANDARD.sides();
    if problem.mesh.dim() != 2 {
        return Err(Error::InvalidArgument("per-side WSS needs a 2D mesh".into()));
    }
    if let Some(missing) = sides.iter().find(|s| !markers.contains(s)) {
        return Err(Error::EmptyRegion(vec![*missing]));
    }
    sides.iter().map(|&s| compute(s)).collect()
}
