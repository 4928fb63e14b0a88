//! Reference elements, quadrature, function spaces and boundary mass matrices.

mod basis;
mod boundary;
mod quadrature;
mod space;

pub use basis::{edge_vertices, reference_nodes, tabulate_basis, BasisValues, ElementKind, MAX_LOCAL};
pub use boundary::{boundary_mass_matrix, BoundaryMass};
pub use quadrature::QuadratureRule;
pub use space::{CoordFn, DofMap, Field, FunctionSpace, Support};
pub(crate) use space::integrate_on_facets;

use crate::geometry::Point;
use crate::mesh::Mesh;

/// Reference coordinates in a cell of the point with facet reference
/// coordinates `eta`. `facet_vertices` lists the facet's global vertices in
/// the order defining its reference parametrization.
pub fn cell_reference_from_facet(cell_vertices: &[usize], facet_vertices: &[usize], eta: &[f64]) -> [f64; 3] {
    let dim = cell_vertices.len() - 1;
    let mut mu = [0.0; 3];
    mu[0] = 1.0 - eta[..dim - 1].iter().sum::<f64>();
    mu[1..dim].copy_from_slice(&eta[..dim - 1]);
    let mut xi = [0.0; 3];
    for (k, v) in facet_vertices.iter().enumerate() {
        let pos = cell_vertices
            .iter()
            .position(|cv| cv == v)
            .expect("facet vertex belongs to the cell");
        if pos > 0 {
            xi[pos - 1] = mu[k];
        }
    }
    xi
}

/// Physical point of facet reference coordinates `eta` on a facet.
pub fn facet_point(mesh: &Mesh, facet_vertices: &[usize], eta: &[f64]) -> Point {
    let dim = mesh.dim();
    let mut x = mesh.vertex(facet_vertices[0]);
    let x0 = x;
    for k in 1..dim {
        let xk = mesh.vertex(facet_vertices[k]);
        for i in 0..3 {
            x[i] += eta[k - 1] * (xk[i] - x0[i]);
        }
    }
    x
}

/// Maps a reference gradient to physical coordinates in cell `c`.
#[inline]
pub fn physical_gradient(mesh: &Mesh, c: usize, g: &Point) -> Point {
    crate::geometry::mat_vec(&mesh.geometry(c).inverse_transpose, g, mesh.dim())
}
