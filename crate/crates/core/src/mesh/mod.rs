//! Simplicial meshes (triangles in 2D, tetrahedra in 3D) with boundary
//! region markers and per-cell geometry.

mod generate;
mod gmsh;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

pub use generate::{generate_cylinder, generate_unit_square};
pub use gmsh::{parse_gmsh, read_gmsh, write_gmsh, TagMap};

use crate::error::{Error, Result};
use crate::geometry::{self, Mat3, Point};

/// Integer boundary region marker.
pub type Tag = i32;

/// Named region markers used by the built-in meshes and the benchmark cases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionTags {
    pub inlet: Tag,
    pub outlet: Tag,
    pub wall: Tag,
    pub left: Tag,
    pub right: Tag,
    pub bottom: Tag,
    pub top: Tag,
}

impl RegionTags {
    pub const STANDARD: RegionTags = RegionTags {
        inlet: 1,
        outlet: 2,
        wall: 3,
        left: 11,
        right: 12,
        bottom: 13,
        top: 14,
    };

    /// Sides of the unit square in the order left, right, bottom, top.
    pub fn sides(&self) -> [Tag; 4] {
        [self.left, self.right, self.bottom, self.top]
    }

    pub fn by_name(&self, name: &str) -> Option<Tag> {
        match name {
            "inlet" => Some(self.inlet),
            "outlet" => Some(self.outlet),
            "wall" => Some(self.wall),
            "left" => Some(self.left),
            "right" => Some(self.right),
            "bottom" => Some(self.bottom),
            "top" => Some(self.top),
            _ => None,
        }
    }

    pub fn name_of(&self, tag: Tag) -> Option<&'static str> {
        [
            ("inlet", self.inlet),
            ("outlet", self.outlet),
            ("wall", self.wall),
            ("left", self.left),
            ("right", self.right),
            ("bottom", self.bottom),
            ("top", self.top),
        ]
        .into_iter()
        .find(|&(_, t)| t == tag)
        .map(|(name, _)| name)
    }
}

impl Default for RegionTags {
    fn default() -> Self {
        Self::STANDARD
    }
}

/// Affine map `x = origin + jacobian * xi` from the reference simplex.
#[derive(Clone, Debug)]
pub struct CellGeometry {
    pub origin: Point,
    pub jacobian: Mat3,
    /// `J^{-T}`, maps reference gradients to physical gradients.
    pub inverse_transpose: Mat3,
    /// Positive determinant of the Jacobian.
    pub det: f64,
}

#[derive(Clone, Debug)]
pub struct BoundaryFacet {
    /// Facet vertices; only the first `dim` entries are used.
    pub vertices: [usize; 3],
    pub cell: usize,
    /// Local facet index within `cell` (the facet opposite local vertex `local`).
    pub local: usize,
    pub marker: Tag,
    /// Outward unit normal.
    pub normal: Point,
    /// Length (2D) or area (3D).
    pub measure: f64,
}

#[derive(Clone, Debug)]
pub struct InteriorFacet {
    pub vertices: [usize; 3],
    pub cells: [usize; 2],
    pub locals: [usize; 2],
    /// Unit normal pointing out of `cells[0]`.
    pub normal: Point,
    pub measure: f64,
}

/// Facet data handed to marker classifiers during mesh construction.
pub struct FacetQuery<'a> {
    pub vertices: &'a [usize],
    pub centroid: Point,
    pub normal: Point,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    dim: usize,
    vertices: Vec<Point>,
    cells: Vec<usize>,
    boundary_facets: Vec<BoundaryFacet>,
    interior_facets: Vec<InteriorFacet>,
    h_cell: Vec<f64>,
    geometry: Vec<CellGeometry>,
}

/// Local vertex indices of local facet `local` (all cell vertices except `local`).
pub fn local_facet_vertices(dim: usize, local: usize) -> [usize; 3] {
    let mut out = [usize::MAX; 3];
    let mut k = 0;
    for v in 0..=dim {
        if v != local {
            out[k] = v;
            k += 1;
        }
    }
    out
}

impl Mesh {
    /// Builds a mesh from cell connectivity. Cells are reoriented to positive
    /// volume, facets are derived topologically and every boundary facet is
    /// assigned the marker returned by `marker`.
    pub fn from_cells<F>(
        dim: usize,
        vertices: Vec<Point>,
        mut cells: Vec<usize>,
        mut marker: F,
    ) -> Result<Mesh>
    where
        F: FnMut(&FacetQuery) -> Option<Tag>,
    {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidMesh(format!("unsupported dimension {dim}")));
        }
        let nv = dim + 1;
        if cells.is_empty() || !cells.len().is_multiple_of(nv) {
            return Err(Error::InvalidMesh(format!(
                "cell connectivity of length {} is not a non-empty multiple of {nv}",
                cells.len()
            )));
        }
        if let Some(&bad) = cells.iter().find(|&&v| v >= vertices.len()) {
            return Err(Error::InvalidMesh(format!(
                "cell references vertex {bad} but only {} vertices exist",
                vertices.len()
            )));
        }
        let n_cells = cells.len() / nv;

        let mut geometry = Vec::with_capacity(n_cells);
        let mut h_cell = Vec::with_capacity(n_cells);
        for c in 0..n_cells {
            let cell = &mut cells[c * nv..(c + 1) * nv];
            let mut jac = jacobian(&vertices, cell, dim);
            let mut d = geometry::det(&jac, dim);
            if d < 0.0 {
                cell.swap(0, 1);
                jac = jacobian(&vertices, cell, dim);
                d = geometry::det(&jac, dim);
            }
            let longest = max_edge(&vertices, cell);
            if !(d > 1e-12 * longest.powi(dim as i32)) {
                return Err(Error::DegenerateCell { cell: c, volume: d });
            }
            let inv = geometry::inverse(&jac, dim).ok_or(Error::DegenerateCell { cell: c, volume: d })?;
            let inverse_transpose = geometry::transpose(&inv);
            h_cell.push(circumdiameter(&vertices, cell, &inverse_transpose, dim));
            geometry.push(CellGeometry {
                origin: vertices[cell[0]],
                jacobian: jac,
                inverse_transpose,
                det: d,
            });
        }

        // Facet topology, in order of first appearance.
        let mut index: HashMap<[usize; 3], usize> = HashMap::new();
        let mut owners: Vec<Vec<(usize, usize)>> = Vec::new();
        for c in 0..n_cells {
            let cell = &cells[c * nv..(c + 1) * nv];
            for local in 0..nv {
                let key = facet_key(cell, local, dim);
                let id = *index.entry(key).or_insert_with(|| {
                    owners.push(Vec::new());
                    owners.len() - 1
                });
                owners[id].push((c, local));
            }
        }

        let mut boundary_facets = Vec::new();
        let mut interior_facets = Vec::new();
        for own in &owners {
            match own.as_slice() {
                &[(c, local)] => {
                    let cell = &cells[c * nv..(c + 1) * nv];
                    let (verts, normal, measure) = facet_geometry(&vertices, cell, local, dim);
                    let centroid = centroid(&vertices, &verts[..dim]);
                    let query = FacetQuery {
                        vertices: &verts[..dim],
                        centroid,
                        normal,
                    };
                    let tag = marker(&query).ok_or_else(|| Error::UntaggedFacet {
                        vertices: verts[..dim].to_vec(),
                    })?;
                    boundary_facets.push(BoundaryFacet {
                        vertices: verts,
                        cell: c,
                        local,
                        marker: tag,
                        normal,
                        measure,
                    });
                }
                &[(c0, l0), (c1, l1)] => {
                    let cell = &cells[c0 * nv..(c0 + 1) * nv];
                    let (verts, normal, measure) = facet_geometry(&vertices, cell, l0, dim);
                    interior_facets.push(InteriorFacet {
                        vertices: verts,
                        cells: [c0, c1],
                        locals: [l0, l1],
                        normal,
                        measure,
                    });
                }
                more => {
                    return Err(Error::InvalidMesh(format!(
                        "non-manifold facet shared by {} cells",
                        more.len()
                    )))
                }
            }
        }

        Ok(Mesh {
            dim,
            vertices,
            cells,
            boundary_facets,
            interior_facets,
            h_cell,
            geometry,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.h_cell.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let nv = self.dim + 1;
        &self.cells[c * nv..(c + 1) * nv]
    }

    pub fn cells(&self) -> impl Iterator<Item = &[usize]> {
        self.cells.chunks_exact(self.dim + 1)
    }

    pub fn geometry(&self, c: usize) -> &CellGeometry {
        &self.geometry[c]
    }

    /// Circumdiameter of cell `c`.
    pub fn h(&self, c: usize) -> f64 {
        self.h_cell[c]
    }

    pub fn h_cells(&self) -> &[f64] {
        &self.h_cell
    }

    pub fn max_h(&self) -> f64 {
        self.h_cell.iter().cloned().fold(0.0, f64::max)
    }

    pub fn cell_volume(&self, c: usize) -> f64 {
        let fact = if self.dim == 2 { 2.0 } else { 6.0 };
        self.geometry[c].det / fact
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary_facets
    }

    pub fn interior_facets(&self) -> &[InteriorFacet] {
        &self.interior_facets
    }

    pub fn facet_vertices<'a>(&self, facet: &'a BoundaryFacet) -> &'a [usize] {
        &facet.vertices[..self.dim]
    }

    /// Distinct boundary markers present on the mesh.
    pub fn markers(&self) -> BTreeSet<Tag> {
        self.boundary_facets.iter().map(|f| f.marker).collect()
    }

    /// Indices into [`Mesh::boundary_facets`] of the facets carrying any of `tags`.
    pub fn facets_with_markers(&self, tags: &[Tag]) -> Vec<usize> {
        self.boundary_facets
            .iter()
            .enumerate()
            .filter(|(_, f)| tags.contains(&f.marker))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn boundary_measure(&self, tags: &[Tag]) -> f64 {
        self.boundary_facets
            .iter()
            .filter(|f| tags.contains(&f.marker))
            .map(|f| f.measure)
            .sum()
    }

    /// Outward unit normal of a boundary facet.
    pub fn facet_normal(&self, facet: &BoundaryFacet) -> Point {
        facet.normal
    }

    /// Physical point of reference coordinates `xi` in cell `c`.
    pub fn map_to_physical(&self, c: usize, xi: &[f64]) -> Point {
        let g = &self.geometry[c];
        let mut x = g.origin;
        for i in 0..self.dim {
            for j in 0..self.dim {
                x[i] += g.jacobian[i][j] * xi[j];
            }
        }
        x
    }

    pub fn cell_centroid(&self, c: usize) -> Point {
        centroid(&self.vertices, self.cell(c))
    }

    pub fn facet_centroid(&self, facet: &BoundaryFacet) -> Point {
        centroid(&self.vertices, self.facet_vertices(facet))
    }
}

fn jacobian(vertices: &[Point], cell: &[usize], dim: usize) -> Mat3 {
    let mut jac = [[0.0; 3]; 3];
    let x0 = vertices[cell[0]];
    for j in 0..dim {
        let xj = vertices[cell[j + 1]];
        for i in 0..dim {
            jac[i][j] = xj[i] - x0[i];
        }
    }
    jac
}

fn max_edge(vertices: &[Point], cell: &[usize]) -> f64 {
    let mut longest: f64 = 0.0;
    for a in 0..cell.len() {
        for b in a + 1..cell.len() {
            longest = longest.max(geometry::norm(&geometry::sub(&vertices[cell[a]], &vertices[cell[b]])));
        }
    }
    longest
}

/// Diameter of the circumscribed circle/sphere. The circumcenter `c`
/// (relative to vertex 0) solves `(x_i - x_0) . c = |x_i - x_0|^2 / 2`,
/// i.e. `J^T c = b`.
fn circumdiameter(vertices: &[Point], cell: &[usize], inverse_transpose: &Mat3, dim: usize) -> f64 {
    let x0 = vertices[cell[0]];
    let mut b = [0.0; 3];
    for i in 0..dim {
        let e = geometry::sub(&vertices[cell[i + 1]], &x0);
        b[i] = 0.5 * geometry::dot(&e, &e);
    }
    let c = geometry::mat_vec(inverse_transpose, &b, dim);
    2.0 * geometry::norm(&c)
}

fn facet_key(cell: &[usize], local: usize, dim: usize) -> [usize; 3] {
    let lv = local_facet_vertices(dim, local);
    let mut key = [usize::MAX; 3];
    for k in 0..dim {
        key[k] = cell[lv[k]];
    }
    key[..dim].sort_unstable();
    key
}

fn centroid(vertices: &[Point], ids: &[usize]) -> Point {
    let mut c = [0.0; 3];
    for &v in ids {
        c = geometry::add(&c, &vertices[v]);
    }
    geometry::scale(&c, 1.0 / ids.len() as f64)
}

/// Vertices, outward unit normal (w.r.t. the given cell) and measure of a local facet.
fn facet_geometry(vertices: &[Point], cell: &[usize], local: usize, dim: usize) -> ([usize; 3], Point, f64) {
    let lv = local_facet_vertices(dim, local);
    let mut verts = [usize::MAX; 3];
    for k in 0..dim {
        verts[k] = cell[lv[k]];
    }
    let a = vertices[verts[0]];
    let (mut n, measure) = if dim == 2 {
        let t = geometry::sub(&vertices[verts[1]], &a);
        let len = geometry::norm(&t);
        ([t[1] / len, -t[0] / len, 0.0], len)
    } else {
        let c = geometry::cross(
            &geometry::sub(&vertices[verts[1]], &a),
            &geometry::sub(&vertices[verts[2]], &a),
        );
        let len = geometry::norm(&c);
        (geometry::scale(&c, 1.0 / len), 0.5 * len)
    };
    let inward = geometry::sub(&vertices[cell[local]], &a);
    if geometry::dot(&inward, &n) > 0.0 {
        n = geometry::scale(&n, -1.0);
    }
    (verts, n, measure)
}
