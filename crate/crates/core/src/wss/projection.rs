use std::sync::Arc;

use super::field::{BoundarySpaceKind, WssField, WssMethod, WssPiece};
use crate::error::{Error, Result};
use crate::fem::{boundary_mass_matrix, cell_reference_from_facet, tabulate_basis, Field, FunctionSpace, QuadratureRule};
use crate::geometry::{dot, Point};
use crate::linalg::norm;
use crate::mesh::Tag;
use crate::stokes::StressModel;

/// Viscous traction `mu (grad v) n` or `mu (grad v + grad v^T) n`.
pub(crate) fn viscous_traction(stress: StressModel, mu: f64, g: &[[f64; 3]; 3], n: &Point, dim: usize) -> Point {
    let mut t = [0.0; 3];
    for i in 0..dim {
        for j in 0..dim {
            let gij = match stress {
                StressModel::FullGradient => g[i][j],
                StressModel::SymmetricGradient => g[i][j] + g[j][i],
            };
            t[i] += mu * gij * n[j];
        }
    }
    t
}

/// L2 projection of the tangential viscous traction of `v` onto a boundary
/// space over the facets of `region`. Pressure does not enter: its traction
/// is normal to the wall.
pub fn project_wss(
    v: &Field,
    mu: f64,
    stress: StressModel,
    region: &[Tag],
    kind: BoundarySpaceKind,
) -> Result<WssField> {
    let mesh = v.mesh().clone();
    let dim = mesh.dim();
    let facets = mesh.facets_with_markers(region);
    if facets.is_empty() {
        return Err(Error::EmptyRegion(region.to_vec()));
    }
    let space = FunctionSpace::boundary(mesh.clone(), kind.element(), dim)?;
    let mass = boundary_mass_matrix(&space, &facets)?;
    let fdim = dim - 1;
    let degree = v.space().kind().degree() - 1 + kind.element().degree() + 2;
    let rule = QuadratureRule::simplex(fdim, degree);
    let ref_measure = QuadratureRule::reference_measure(fdim);
    let dm = space.dofmap();
    let mut rhs = vec![vec![0.0; mass.nodes().len()]; dim];
    for &fi in mass.facets() {
        let bf = &mesh.boundary_facets()[fi];
        let n = bf.normal;
        let nodes: Vec<usize> = dm
            .nodes(fi)
            .iter()
            .map(|&node| mass.compact_index(node).expect("region node"))
            .collect();
        for q in 0..rule.len() {
            let eta = rule.point(q);
            let w = rule.weight(q) * bf.measure / ref_measure;
            let xi = cell_reference_from_facet(mesh.cell(bf.cell), mesh.facet_vertices(bf), eta);
            let g = v.gradient_in_cell(bf.cell, &xi);
            let t = viscous_traction(stress, mu, &g, &n, dim);
            let tn = dot(&t, &n);
            let b = tabulate_basis(kind.element(), fdim, eta);
            for (a, &k) in nodes.iter().enumerate() {
                for i in 0..dim {
                    rhs[i][k] += w * b.values[a] * (t[i] - tn * n[i]);
                }
            }
        }
    }
    finish_piece(WssMethod::from(kind), space, mass, region, rhs)
}

impl From<BoundarySpaceKind> for WssMethod {
    fn from(kind: BoundarySpaceKind) -> WssMethod {
        match kind {
            BoundarySpaceKind::Cg1 => WssMethod::Cg1,
            BoundarySpaceKind::Dg1 => WssMethod::Dg1,
            BoundarySpaceKind::Dg0 => WssMethod::Dg0,
        }
    }
}

/// Solves the boundary mass systems for each component and wraps the
/// result as a single-piece field.
pub(crate) fn finish_piece(
    method: WssMethod,
    space: Arc<FunctionSpace>,
    mass: crate::fem::BoundaryMass,
    region: &[Tag],
    rhs: Vec<Vec<f64>>,
) -> Result<WssField> {
    let dim = rhs.len();
    let tau = mass.solve(&rhs)?;
    let mut solve_residual: f64 = 0.0;
    for (b, x) in rhs.iter().zip(&tau) {
        let mx = mass.matrix().matvec(x);
        let r: Vec<f64> = b.iter().zip(&mx).map(|(bi, mi)| bi - mi).collect();
        let bn = norm(b);
        if bn > 0.0 {
            solve_residual = solve_residual.max(norm(&r) / bn);
        }
    }
    let mut values = vec![0.0; space.n_dofs()];
    let dm = space.dofmap();
    for (k, &node) in mass.nodes().iter().enumerate() {
        for i in 0..dim {
            values[dm.dof(node, i)] = tau[i][k];
        }
    }
    let piece = WssPiece {
        region: region.to_vec(),
        facets: mass.facets().to_vec(),
        nodes: mass.nodes().to_vec(),
        field: Field::new(space, values)?,
        solve_residual,
    };
    WssField::new(method, vec![piece])
}
