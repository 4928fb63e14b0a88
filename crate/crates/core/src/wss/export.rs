use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::field::WssField;
use crate::error::Result;
use crate::fem::reference_nodes;
use crate::fem::ElementKind;
use crate::geometry::norm;

/// One row per stored node: id (vertex id for CG1, node id for DG),
/// coordinates, WSS components and magnitude.
pub fn write_wss_csv(field: &WssField, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "id,x,y,z,tau_x,tau_y,tau_z,magnitude")?;
    for piece in field.pieces() {
        let space = piece.field.space();
        let dm = space.dofmap();
        let values = piece.field.values();
        for &node in &piece.nodes {
            let x = space.node_coords()[node];
            let mut t = [0.0; 3];
            for (i, ti) in t.iter_mut().enumerate().take(dm.ncomp()) {
                *ti = values[dm.dof(node, i)];
            }
            writeln!(
                out,
                "{node},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                x[0],
                x[1],
                x[2],
                t[0],
                t[1],
                t[2],
                norm(&t)
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

/// VTK unstructured grid of the covered facets. Facet vertices are
/// duplicated per facet so continuous and discontinuous fields are written
/// alike; point data holds the tangential WSS and its magnitude.
pub fn write_wss_vtu(field: &WssField, path: impl AsRef<Path>) -> Result<()> {
    let mesh = field.mesh();
    let dim = mesh.dim();
    let facets = field.facets();
    let corners = reference_nodes(ElementKind::P1, dim - 1);
    let n_points = facets.len() * dim;
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, r#"<?xml version="1.0"?>"#)?;
    writeln!(out, r#"<VTKFile type="UnstructuredGrid" version="0.1" byte_order="LittleEndian">"#)?;
    writeln!(out, "<UnstructuredGrid>")?;
    writeln!(out, r#"<Piece NumberOfPoints="{n_points}" NumberOfCells="{}">"#, facets.len())?;
    writeln!(out, "<Points>")?;
    writeln!(out, r#"<DataArray type="Float64" NumberOfComponents="3" format="ascii">"#)?;
    for &f in &facets {
        for &v in mesh.facet_vertices(&mesh.boundary_facets()[f]) {
            let x = mesh.vertex(v);
            writeln!(out, "{:e} {:e} {:e}", x[0], x[1], x[2])?;
        }
    }
    writeln!(out, "</DataArray>\n</Points>")?;
    writeln!(out, "<Cells>")?;
    writeln!(out, r#"<DataArray type="Int64" Name="connectivity" format="ascii">"#)?;
    for k in 0..facets.len() {
        let ids: Vec<String> = (0..dim).map(|j| (k * dim + j).to_string()).collect();
        writeln!(out, "{}", ids.join(" "))?;
    }
    writeln!(out, "</DataArray>")?;
    writeln!(out, r#"<DataArray type="Int64" Name="offsets" format="ascii">"#)?;
    for k in 0..facets.len() {
        writeln!(out, "{}", (k + 1) * dim)?;
    }
    writeln!(out, "</DataArray>")?;
    writeln!(out, r#"<DataArray type="UInt8" Name="types" format="ascii">"#)?;
    let vtk_type = if dim == 2 { 3 } else { 5 };
    for _ in &facets {
        writeln!(out, "{vtk_type}")?;
    }
    writeln!(out, "</DataArray>\n</Cells>")?;
    writeln!(out, r#"<PointData Vectors="wss" Scalars="wss_magnitude">"#)?;
    let values: Vec<[f64; 3]> = facets
        .iter()
        .flat_map(|&f| corners.iter().map(move |eta| field.value(f, eta)))
        .collect();
    writeln!(out, r#"<DataArray type="Float64" Name="wss" NumberOfComponents="3" format="ascii">"#)?;
    for t in &values {
        writeln!(out, "{:e} {:e} {:e}", t[0], t[1], t[2])?;
    }
    writeln!(out, "</DataArray>")?;
    writeln!(out, r#"<DataArray type="Float64" Name="wss_magnitude" format="ascii">"#)?;
    for t in &values {
        writeln!(out, "{:e}", norm(t))?;
    }
    writeln!(out, "</DataArray>\n</PointData>")?;
    writeln!(out, "</Piece>\n</UnstructuredGrid>\n</VTKFile>")?;
    out.flush()?;
    Ok(())
}
