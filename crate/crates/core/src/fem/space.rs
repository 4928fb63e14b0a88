use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use super::basis::{edge_vertices, reference_nodes, tabulate_basis, ElementKind};
use super::quadrature::QuadratureRule;
use super::{cell_reference_from_facet, facet_point, physical_gradient};
use crate::error::{Error, Result};
use crate::geometry::{Mat3, Point};
use crate::mesh::Mesh;

/// Vector-valued coordinate function; scalar quantities use component 0.
pub type CoordFn = Arc<dyn Fn(Point) -> [f64; 3] + Send + Sync>;

/// Entities carrying the local bases of a space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Support {
    Cells,
    /// All boundary facets of the mesh, indexed like [`Mesh::boundary_facets`].
    BoundaryFacets,
}

/// Node numbering of a space. Degrees of freedom are blocked per node:
/// `dof = node * ncomp + comp`.
#[derive(Clone, Debug)]
pub struct DofMap {
    kind: ElementKind,
    support: Support,
    ncomp: usize,
    nloc: usize,
    entity_nodes: Vec<usize>,
    n_nodes: usize,
}

impl DofMap {
    pub fn kind(&self) -> ElementKind {
        self.kind
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn n_local(&self) -> usize {
        self.nloc
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_dofs(&self) -> usize {
        self.n_nodes * self.ncomp
    }

    pub fn n_entities(&self) -> usize {
        self.entity_nodes.len() / self.nloc
    }

    /// Nodes of entity `e` in local basis order.
    pub fn nodes(&self, e: usize) -> &[usize] {
        &self.entity_nodes[e * self.nloc..(e + 1) * self.nloc]
    }

    #[inline]
    pub fn dof(&self, node: usize, comp: usize) -> usize {
        node * self.ncomp + comp
    }
}

#[derive(Debug)]
pub struct FunctionSpace {
    mesh: Arc<Mesh>,
    dofmap: DofMap,
    node_coords: Vec<Point>,
}

impl FunctionSpace {
    /// Cell-supported space of `kind` with `ncomp` components.
    pub fn new(mesh: Arc<Mesh>, kind: ElementKind, ncomp: usize) -> Arc<FunctionSpace> {
        let dim = mesh.dim();
        let nloc = kind.n_local(dim);
        let n_cells = mesh.n_cells();
        let mut entity_nodes = Vec::with_capacity(n_cells * nloc);
        let mut node_coords: Vec<Point> = Vec::new();
        match kind {
            ElementKind::P1 => {
                for cell in mesh.cells() {
                    entity_nodes.extend_from_slice(cell);
                }
                node_coords.extend_from_slice(mesh.vertices());
            }
            ElementKind::P2 => {
                node_coords.extend_from_slice(mesh.vertices());
                let nv = mesh.n_vertices();
                let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
                for cell in mesh.cells() {
                    entity_nodes.extend_from_slice(cell);
                    for &[a, b] in edge_vertices(dim) {
                        let (va, vb) = (cell[a], cell[b]);
                        let key = (va.min(vb), va.max(vb));
                        let id = *edges.entry(key).or_insert_with(|| {
                            let (xa, xb) = (mesh.vertex(va), mesh.vertex(vb));
                            node_coords.push([
                                0.5 * (xa[0] + xb[0]),
                                0.5 * (xa[1] + xb[1]),
                                0.5 * (xa[2] + xb[2]),
                            ]);
                            node_coords.len() - 1
                        });
                        debug_assert!(id >= nv);
                        entity_nodes.push(id);
                    }
                }
            }
            ElementKind::DG0 | ElementKind::DG1 => {
                let refs = reference_nodes(kind, dim);
                for c in 0..n_cells {
                    for xi in &refs {
                        entity_nodes.push(node_coords.len());
                        node_coords.push(mesh.map_to_physical(c, xi));
                    }
                }
            }
        }
        let n_nodes = node_coords.len();
        Arc::new(FunctionSpace {
            mesh,
            dofmap: DofMap {
                kind,
                support: Support::Cells,
                ncomp,
                nloc,
                entity_nodes,
                n_nodes,
            },
            node_coords,
        })
    }

    /// Facet-wise space on the boundary. `P1` is continuous across facets and
    /// numbered by mesh vertex (interior vertices carry zero); `DG0`/`DG1`
    /// have independent nodes on every boundary facet.
    pub fn boundary(mesh: Arc<Mesh>, kind: ElementKind, ncomp: usize) -> Result<Arc<FunctionSpace>> {
        let dim = mesh.dim();
        let fdim = dim - 1;
        let nloc = kind.n_local(fdim);
        let mut entity_nodes = Vec::with_capacity(mesh.boundary_facets().len() * nloc);
        let mut node_coords: Vec<Point> = Vec::new();
        match kind {
            ElementKind::P1 => {
                for f in mesh.boundary_facets() {
                    entity_nodes.extend_from_slice(mesh.facet_vertices(f));
                }
                node_coords.extend_from_slice(mesh.vertices());
            }
            ElementKind::DG0 | ElementKind::DG1 => {
                for f in mesh.boundary_facets() {
                    let verts = mesh.facet_vertices(f);
                    for eta in reference_nodes(kind, fdim) {
                        entity_nodes.push(node_coords.len());
                        node_coords.push(facet_point(&mesh, verts, &eta));
                    }
                }
            }
            ElementKind::P2 => {
                return Err(Error::InvalidArgument("no P2 boundary space".into()));
            }
        }
        let n_nodes = node_coords.len();
        Ok(Arc::new(FunctionSpace {
            mesh,
            dofmap: DofMap {
                kind,
                support: Support::BoundaryFacets,
                ncomp,
                nloc,
                entity_nodes,
                n_nodes,
            },
            node_coords,
        }))
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn dofmap(&self) -> &DofMap {
        &self.dofmap
    }

    pub fn kind(&self) -> ElementKind {
        self.dofmap.kind
    }

    pub fn ncomp(&self) -> usize {
        self.dofmap.ncomp
    }

    pub fn n_dofs(&self) -> usize {
        self.dofmap.n_dofs()
    }

    pub fn n_nodes(&self) -> usize {
        self.dofmap.n_nodes
    }

    pub fn node_coords(&self) -> &[Point] {
        &self.node_coords
    }

    /// Reference dimension of the supporting entities.
    pub fn entity_dim(&self) -> usize {
        match self.dofmap.support {
            Support::Cells => self.mesh.dim(),
            Support::BoundaryFacets => self.mesh.dim() - 1,
        }
    }

    /// Nodes of boundary facet `facet` (an index into `Mesh::boundary_facets`),
    /// in the local order of the facet basis. Only for boundary spaces.
    pub fn facet_nodes(&self, facet: usize) -> &[usize] {
        assert_eq!(self.dofmap.support, Support::BoundaryFacets);
        self.dofmap.nodes(facet)
    }
}

#[derive(Clone)]
pub struct Field {
    space: Arc<FunctionSpace>,
    values: Vec<f64>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("kind", &self.space.kind())
            .field("ncomp", &self.space.ncomp())
            .field("n_dofs", &self.values.len())
            .finish()
    }
}

impl Field {
    pub fn new(space: Arc<FunctionSpace>, values: Vec<f64>) -> Result<Field> {
        if values.len() != space.n_dofs() {
            return Err(Error::InvalidArgument(format!(
                "coefficient vector has length {} but the space has {} dofs",
                values.len(),
                space.n_dofs()
            )));
        }
        Ok(Field { space, values })
    }

    pub fn zeros(space: Arc<FunctionSpace>) -> Field {
        let n = space.n_dofs();
        Field {
            space,
            values: vec![0.0; n],
        }
    }

    /// Nodal interpolant: the field equals `f` at every Lagrange node.
    pub fn interpolate(space: Arc<FunctionSpace>, f: &(dyn Fn(Point) -> [f64; 3] + Sync)) -> Field {
        let ncomp = space.ncomp();
        let mut values = vec![0.0; space.n_dofs()];
        values
            .par_chunks_mut(ncomp)
            .zip(space.node_coords().par_iter())
            .for_each(|(out, x)| {
                let v = f(*x);
                out.copy_from_slice(&v[..ncomp]);
            });
        Field { space, values }
    }

    pub fn space(&self) -> &Arc<FunctionSpace> {
        &self.space
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.space.mesh()
    }

    pub fn ncomp(&self) -> usize {
        self.space.ncomp()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at reference point `xi` of cell `c` (cell-supported spaces).
    pub fn value_in_cell(&self, c: usize, xi: &[f64]) -> [f64; 3] {
        let dm = self.space.dofmap();
        debug_assert_eq!(dm.support(), Support::Cells);
        let b = tabulate_basis(dm.kind(), self.mesh().dim(), xi);
        self.combine(dm.nodes(c), b.values())
    }

    /// Physical gradient `g[i][j] = d u_i / d x_j` at `xi` in cell `c`.
    pub fn gradient_in_cell(&self, c: usize, xi: &[f64]) -> Mat3 {
        let dm = self.space.dofmap();
        debug_assert_eq!(dm.support(), Support::Cells);
        let mesh = self.mesh();
        let b = tabulate_basis(dm.kind(), mesh.dim(), xi);
        let mut g = [[0.0; 3]; 3];
        for (a, &node) in dm.nodes(c).iter().enumerate() {
            let gp = physical_gradient(mesh, c, &b.grads[a]);
            for i in 0..dm.ncomp() {
                let u = self.values[dm.dof(node, i)];
                for j in 0..3 {
                    g[i][j] += u * gp[j];
                }
            }
        }
        g
    }

    /// Value at facet reference coordinates `eta` on boundary facet `facet`.
    pub fn value_on_facet(&self, facet: usize, eta: &[f64]) -> [f64; 3] {
        let mesh = self.mesh();
        let dm = self.space.dofmap();
        match dm.support() {
            Support::Cells => {
                let bf = &mesh.boundary_facets()[facet];
                let xi = cell_reference_from_facet(mesh.cell(bf.cell), mesh.facet_vertices(bf), eta);
                self.value_in_cell(bf.cell, &xi)
            }
            Support::BoundaryFacets => {
                let b = tabulate_basis(dm.kind(), mesh.dim() - 1, eta);
                self.combine(dm.nodes(facet), b.values())
            }
        }
    }

    fn combine(&self, nodes: &[usize], basis: &[f64]) -> [f64; 3] {
        let dm = self.space.dofmap();
        let mut out = [0.0; 3];
        for (&node, &phi) in nodes.iter().zip(basis) {
            for (i, o) in out.iter_mut().enumerate().take(dm.ncomp()) {
                *o += phi * self.values[dm.dof(node, i)];
            }
        }
        out
    }

    /// `sqrt(int_Omega |u - exact|^2)` with a rule of the given degree.
    /// Only meaningful for cell-supported spaces.
    pub fn l2_error(&self, exact: &(dyn Fn(Point) -> [f64; 3] + Sync), quad_degree: usize) -> f64 {
        let mesh = self.mesh();
        let dim = mesh.dim();
        let ncomp = self.ncomp();
        let rule = QuadratureRule::simplex(dim, quad_degree);
        let local: Vec<f64> = (0..mesh.n_cells())
            .into_par_iter()
            .map(|c| {
                let det = mesh.geometry(c).det;
                let mut s = 0.0;
                for q in 0..rule.len() {
                    let xi = rule.point(q);
                    let u = self.value_in_cell(c, xi);
                    let e = exact(mesh.map_to_physical(c, xi));
                    let d2: f64 = (0..ncomp).map(|i| (u[i] - e[i]).powi(2)).sum();
                    s += rule.weight(q) * det * d2;
                }
                s
            })
            .collect();
        local.iter().sum::<f64>().sqrt()
    }

    /// `sqrt(int_F |u - exact|^2 ds)` over the listed boundary facets.
    pub fn l2_error_on_facets(
        &self,
        facets: &[usize],
        exact: &(dyn Fn(Point) -> [f64; 3] + Sync),
        quad_degree: usize,
    ) -> f64 {
        let mesh = self.mesh();
        let ncomp = self.ncomp();
        integrate_on_facets(mesh, facets, quad_degree, |facet, eta, x| {
            let u = self.value_on_facet(facet, eta);
            let e = exact(x);
            (0..ncomp).map(|i| (u[i] - e[i]).powi(2)).sum()
        })
        .sqrt()
    }
}

/// Integrates `g(facet, eta, x)` over the listed boundary facets.
pub(crate) fn integrate_on_facets<G>(mesh: &Mesh, facets: &[usize], quad_degree: usize, g: G) -> f64
where
    G: Fn(usize, &[f64], Point) -> f64 + Sync,
{
    let fdim = mesh.dim() - 1;
    let rule = QuadratureRule::simplex(fdim, quad_degree);
    let scale = 1.0 / QuadratureRule::reference_measure(fdim);
    let local: Vec<f64> = facets
        .par_iter()
        .map(|&fi| {
            let bf = &mesh.boundary_facets()[fi];
            let verts = mesh.facet_vertices(bf);
            let mut s = 0.0;
            for q in 0..rule.len() {
                let eta = rule.point(q);
                s += rule.weight(q) * scale * bf.measure * g(fi, eta, facet_point(mesh, verts, eta));
            }
            s
        })
        .collect();
    local.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_unit_square;

    fn square(n: usize) -> Arc<Mesh> {
        Arc::new(generate_unit_square(n).unwrap())
    }

    fn square_velocity(x: Point) -> [f64; 3] {
        [20.0 * x[0] * x[1].powi(3), 5.0 * x[0].powi(4) - 5.0 * x[1].powi(4), 0.0]
    }

    #[test]
    fn p2_node_count() {
        let mesh = square(4);
        let v = FunctionSpace::new(mesh.clone(), ElementKind::P2, 2);
        // (2n + 1)^2 nodes on a structured square.
        assert_eq!(v.n_nodes(), 81);
        assert_eq!(v.n_dofs(), 162);
    }

    #[test]
    fn constant_interpolates_exactly() {
        let space = FunctionSpace::new(square(3), ElementKind::P1, 1);
        let f = Field::interpolate(space, &|_| [3.0, 0.0, 0.0]);
        assert!(f.values().iter().all(|&v| v == 3.0));
    }

    #[test]
    fn p2_interpolant_at_corner_node() {
        let space = FunctionSpace::new(square(4), ElementKind::P2, 2);
        let f = Field::interpolate(space.clone(), &square_velocity);
        let node = space
            .node_coords()
            .iter()
            .position(|x| x[0] == 1.0 && x[1] == 1.0)
            .unwrap();
        let dm = space.dofmap();
        assert_eq!(f.values()[dm.dof(node, 0)], 20.0);
        assert_eq!(f.values()[dm.dof(node, 1)], 0.0);
    }

    #[test]
    fn p2_reproduces_quadratics() {
        let quad = |x: Point| [x[0] * x[0] - 2.0 * x[0] * x[1] + 0.5, 3.0 * x[1] * x[1] + x[0], 0.0];
        let space = FunctionSpace::new(square(3), ElementKind::P2, 2);
        let f = Field::interpolate(space, &quad);
        assert!(f.l2_error(&quad, 8) < 1e-13);
    }

    #[test]
    fn zero_field_against_one_measures_domain() {
        let space = FunctionSpace::new(square(4), ElementKind::P1, 1);
        let f = Field::zeros(space);
        assert!((f.l2_error(&|_| [1.0, 0.0, 0.0], 4) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn p2_interpolation_converges_at_third_order() {
        let err = |n| {
            let space = FunctionSpace::new(square(n), ElementKind::P2, 2);
            Field::interpolate(space, &square_velocity).l2_error(&square_velocity, 8)
        };
        let rate = (err(8) / err(16)).log2();
        assert!((rate - 3.0).abs() < 0.1, "rate {rate}");
    }

    #[test]
    fn gradient_of_linear_field_is_exact() {
        let lin = |x: Point| [2.0 * x[0] - x[1], 0.5 * x[1], 0.0];
        let space = FunctionSpace::new(square(2), ElementKind::P2, 2);
        let f = Field::interpolate(space, &lin);
        let g = f.gradient_in_cell(3, &[0.2, 0.3]);
        assert!((g[0][0] - 2.0).abs() < 1e-13 && (g[0][1] + 1.0).abs() < 1e-13);
        assert!(g[1][0].abs() < 1e-13 && (g[1][1] - 0.5).abs() < 1e-13);
    }

    #[test]
    fn boundary_spaces_and_traces() {
        let mesh = square(4);
        let lin = |x: Point| [x[0] + 2.0 * x[1], 0.0, 0.0];
        for kind in [ElementKind::P1, ElementKind::DG1] {
            let space = FunctionSpace::boundary(mesh.clone(), kind, 1).unwrap();
            let f = Field::interpolate(space, &lin);
            let all: Vec<usize> = (0..mesh.boundary_facets().len()).collect();
            assert!(f.l2_error_on_facets(&all, &lin, 4) < 1e-14);
        }
        let dg0 = FunctionSpace::boundary(mesh.clone(), ElementKind::DG0, 1).unwrap();
        assert_eq!(dg0.n_nodes(), 16);
        assert!(FunctionSpace::boundary(mesh, ElementKind::P2, 1).is_err());
    }

    #[test]
    fn cell_trace_on_facet_matches_point_value() {
        let mesh = square(3);
        let space = FunctionSpace::new(mesh.clone(), ElementKind::P2, 2);
        let f = Field::interpolate(space, &square_velocity);
        let quad = |x: Point| square_velocity(x);
        for (fi, bf) in mesh.boundary_facets().iter().enumerate() {
            let x = facet_point(&mesh, mesh.facet_vertices(bf), &[0.0]);
            let u = f.value_on_facet(fi, &[0.0]);
            let e = quad(x);
            assert!((u[0] - e[0]).abs() < 1e-12 && (u[1] - e[1]).abs() < 1e-12);
        }
    }
}
