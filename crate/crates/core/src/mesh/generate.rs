//! Structured mesh generators for the benchmark geometries.

use std::f64::consts::PI;

use super::{Mesh, RegionTags};
use crate::error::{Error, Result};
use crate::geometry::Point;

/// Unit square with `n` cells per side. Every grid square is split along
/// its lower-left to upper-right diagonal. Sides carry the standard
/// left/right/bottom/top markers.
pub fn generate_unit_square(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidArgument("unit square needs n >= 1".into()));
    }
    let tags = RegionTags::STANDARD;
    let h = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            // Exact 0 and 1 on the boundary.
            let x = if i == n { 1.0 } else { i as f64 * h };
            let y = if j == n { 1.0 } else { j as f64 * h };
            vertices.push([x, y, 0.0]);
        }
    }
    let mut cells = Vec::with_capacity(6 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = j * (n + 1) + i;
            let v10 = v00 + 1;
            let v01 = v00 + n + 1;
            let v11 = v01 + 1;
            cells.extend_from_slice(&[v00, v10, v11, v00, v11, v01]);
        }
    }
    Mesh::from_cells(2, vertices, cells, |q| {
        let [x, y, _] = q.centroid;
        let eps = 1e-12;
        if y < eps {
            Some(tags.bottom)
        } else if y > 1.0 - eps {
            Some(tags.top)
        } else if x < eps {
            Some(tags.left)
        } else if x > 1.0 - eps {
            Some(tags.right)
        } else {
            None
        }
    })
}

/// Tetrahedral pipe of the given radius and length along the z-axis.
///
/// The cross-section is a disk triangulated with concentric rings; the
/// outermost ring has `n_circum` points on the circle. The disk is extruded
/// into `n_axial` layers of prisms and every prism is split into three
/// tetrahedra so that neighbouring prisms share conforming diagonals.
/// Facets are marked inlet (z = 0), outlet (z = length) and wall.
pub fn generate_cylinder(radius: f64, length: f64, n_circum: usize, n_axial: usize) -> Result<Mesh> {
    if n_circum < 6 || n_axial == 0 {
        return Err(Error::InvalidArgument(format!(
            "cylinder needs n_circum >= 6 and n_axial >= 1, got {n_circum} and {n_axial}"
        )));
    }
    if !(radius > 0.0 && length > 0.0) {
        return Err(Error::InvalidArgument("cylinder radius and length must be positive".into()));
    }
    let tags = RegionTags::STANDARD;
    let (disk, triangles) = triangulate_disk(radius, n_circum);
    let n_disk = disk.len();

    let mut vertices = Vec::with_capacity(n_disk * (n_axial + 1));
    for l in 0..=n_axial {
        let z = if l == n_axial { length } else { length * l as f64 / n_axial as f64 };
        vertices.extend(disk.iter().map(|p| [p[0], p[1], z]));
    }

    let mut cells = Vec::with_capacity(triangles.len() * n_axial * 12);
    for l in 0..n_axial {
        let bottom = l * n_disk;
        let top = (l + 1) * n_disk;
        for tri in &triangles {
            let mut t = *tri;
            t.sort_unstable();
            let [a, b, c] = t;
            let (a0, b0, c0) = (bottom + a, bottom + b, bottom + c);
            let (a1, b1, c1) = (top + a, top + b, top + c);
            // On every quad face the diagonal joins the lower-index bottom
            // vertex to the higher-index top vertex.
            cells.extend_from_slice(&[a0, b0, c0, c1]);
            cells.extend_from_slice(&[a0, b0, b1, c1]);
            cells.extend_from_slice(&[a0, a1, b1, c1]);
        }
    }

    let eps = 1e-9 * length.max(radius);
    Mesh::from_cells(3, vertices, cells, |q| {
        let z = q.centroid[2];
        if z < eps {
            Some(tags.inlet)
        } else if z > length - eps {
            Some(tags.outlet)
        } else if q.normal[2].abs() < 1e-9 {
            Some(tags.wall)
        } else {
            None
        }
    })
}

/// Disk points (center, then rings outward) and triangles.
fn triangulate_disk(radius: f64, n_circum: usize) -> (Vec<Point>, Vec<[usize; 3]>) {
    let n_rings = ((n_circum as f64 / 6.0).round() as usize).max(1);
    let mut points = vec![[0.0, 0.0, 0.0]];
    let mut rings: Vec<Vec<usize>> = Vec::with_capacity(n_rings);
    for k in 1..=n_rings {
        let m = if k == n_rings {
            n_circum
        } else {
            ((n_circum * k) as f64 / n_rings as f64).round().max(3.0) as usize
        };
        let r = if k == n_rings { radius } else { radius * k as f64 / n_rings as f64 };
        let start = points.len();
        for j in 0..m {
            let theta = 2.0 * PI * j as f64 / m as f64;
            points.push([r * theta.cos(), r * theta.sin(), 0.0]);
        }
        rings.push((start..start + m).collect());
    }

    let mut triangles = Vec::new();
    let first = &rings[0];
    for j in 0..first.len() {
        triangles.push([0, first[j], first[(j + 1) % first.len()]]);
    }
    for pair in rings.windows(2) {
        let (inner, outer) = (&pair[0], &pair[1]);
        let (mi, mo) = (inner.len(), outer.len());
        let angle = |j: usize, m: usize| 2.0 * PI * j as f64 / m as f64;
        let (mut i, mut o) = (0, 0);
        while i < mi || o < mo {
            let next_inner = if i < mi { angle(i + 1, mi) } else { f64::INFINITY };
            let next_outer = if o < mo { angle(o + 1, mo) } else { f64::INFINITY };
            if next_inner < next_outer {
                triangles.push([inner[i % mi], outer[o % mo], inner[(i + 1) % mi]]);
                i += 1;
            } else {
                triangles.push([inner[i % mi], outer[o % mo], outer[(o + 1) % mo]]);
                o += 1;
            }
        }
    }
    (points, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{dot, norm, scale};

    #[test]
    fn unit_square_counts() {
        let mesh = generate_unit_square(8).unwrap();
        assert_eq!(mesh.n_vertices(), 81);
        assert_eq!(mesh.n_cells(), 128);
    }

    #[test]
    fn single_square_circumdiameter_is_hypotenuse() {
        let mesh = generate_unit_square(1).unwrap();
        for c in 0..mesh.n_cells() {
            assert!((mesh.h(c) - 2.0_f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn unit_square_area_and_perimeter() {
        let mesh = generate_unit_square(16).unwrap();
        let area: f64 = (0..mesh.n_cells()).map(|c| mesh.cell_volume(c)).sum();
        assert!((area - 1.0).abs() < 1e-14);
        let perimeter: f64 = mesh.boundary_facets().iter().map(|f| f.measure).sum();
        assert!((perimeter - 4.0).abs() < 1e-14);
    }

    #[test]
    fn unit_square_top_normal() {
        let mesh = generate_unit_square(4).unwrap();
        let top = RegionTags::STANDARD.top;
        for f in mesh.boundary_facets().iter().filter(|f| f.marker == top) {
            assert!((f.normal[0]).abs() < 1e-15 && (f.normal[1] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn refinement_halves_max_h() {
        for n in [2, 4, 8, 16] {
            let coarse = generate_unit_square(n).unwrap().max_h();
            let fine = generate_unit_square(2 * n).unwrap().max_h();
            assert!((coarse / 2.0 - fine).abs() < 1e-14);
        }
    }

    #[test]
    fn cylinder_markers_and_normals() {
        let (r, l) = (1e-3, 2e-3);
        let tags = RegionTags::STANDARD;
        let mesh = generate_cylinder(r, l, 12, 4).unwrap();
        let inlet_area = mesh.boundary_measure(&[tags.inlet]);
        let circle = std::f64::consts::PI * r * r;
        assert!(inlet_area < circle && inlet_area > 0.9 * circle);
        for f in mesh.boundary_facets() {
            if f.marker == tags.wall {
                assert!(f.normal[2].abs() < 1e-12);
                let c = mesh.facet_centroid(f);
                let radial = scale(&[c[0], c[1], 0.0], 1.0 / norm(&[c[0], c[1], 0.0]));
                assert!(dot(&radial, &f.normal) > 0.95);
            } else if f.marker == tags.inlet {
                assert!((f.normal[2] + 1.0).abs() < 1e-14);
            } else {
                assert_eq!(f.marker, tags.outlet);
                assert!((f.normal[2] - 1.0).abs() < 1e-14);
            }
        }
        for f in mesh.interior_facets() {
            assert_ne!(f.cells[0], f.cells[1]);
        }
    }

    #[test]
    fn cylinder_wall_vertices_on_circle() {
        let r = 1e-3;
        let mesh = generate_cylinder(r, 2e-3, 18, 3).unwrap();
        let wall = RegionTags::STANDARD.wall;
        for f in mesh.boundary_facets().iter().filter(|f| f.marker == wall) {
            for &v in mesh.facet_vertices(f) {
                let p = mesh.vertex(v);
                assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - r).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn cylinder_inlet_area_converges_from_below() {
        let r = 1.0;
        let circle = std::f64::consts::PI;
        let mut previous = 0.0;
        for n in [6, 12, 24, 48] {
            let mesh = generate_cylinder(r, 1.0, n, 1).unwrap();
            let a = mesh.boundary_measure(&[RegionTags::STANDARD.inlet]);
            assert!(a < circle && a > previous);
            previous = a;
        }
    }

    #[test]
    fn cylinder_rejects_bad_arguments() {
        assert!(generate_cylinder(1.0, 1.0, 5, 1).is_err());
        assert!(generate_cylinder(1.0, 1.0, 6, 0).is_err());
    }
}
