//! Lagrange bases on reference simplices.
//!
//! Local ordering: vertices first, then (for P2) edges in the order of
//! [`edge_vertices`]. Gradients are returned in reference coordinates.

use serde::{Deserialize, Serialize};

use crate::geometry::Point;

/// Largest local basis size (P2 on a tetrahedron).
pub const MAX_LOCAL: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ElementKind {
    P1,
    P2,
    DG0,
    DG1,
}

impl ElementKind {
    pub fn degree(self) -> usize {
        match self {
            ElementKind::DG0 => 0,
            ElementKind::P1 | ElementKind::DG1 => 1,
            ElementKind::P2 => 2,
        }
    }

    pub fn is_discontinuous(self) -> bool {
        matches!(self, ElementKind::DG0 | ElementKind::DG1)
    }

    /// Number of local basis functions on a `dim`-simplex.
    pub fn n_local(self, dim: usize) -> usize {
        match self {
            ElementKind::DG0 => 1,
            ElementKind::P1 | ElementKind::DG1 => dim + 1,
            ElementKind::P2 => (dim + 1) * (dim + 2) / 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ElementKind::P1 => "P1",
            ElementKind::P2 => "P2",
            ElementKind::DG0 => "DG0",
            ElementKind::DG1 => "DG1",
        }
    }
}

/// Local vertex pairs spanning the P2 edge dofs of a `dim`-simplex.
pub fn edge_vertices(dim: usize) -> &'static [[usize; 2]] {
    match dim {
        1 => &[[0, 1]],
        2 => &[[0, 1], [1, 2], [0, 2]],
        3 => &[[0, 1], [1, 2], [0, 2], [0, 3], [1, 3], [2, 3]],
        _ => unreachable!("dimension {dim}"),
    }
}

/// Basis values and reference gradients at one point.
#[derive(Clone, Copy, Debug)]
pub struct BasisValues {
    pub n: usize,
    pub values: [f64; MAX_LOCAL],
    pub grads: [Point; MAX_LOCAL],
}

impl BasisValues {
    pub fn values(&self) -> &[f64] {
        &self.values[..self.n]
    }

    pub fn grads(&self) -> &[Point] {
        &self.grads[..self.n]
    }
}

/// Evaluates the basis of `kind` on the `dim`-simplex at reference point `xi`.
pub fn tabulate_basis(kind: ElementKind, dim: usize, xi: &[f64]) -> BasisValues {
    let mut out = BasisValues {
        n: kind.n_local(dim),
        values: [0.0; MAX_LOCAL],
        grads: [[0.0; 3]; MAX_LOCAL],
    };
    let mut lambda = [0.0; 4];
    let mut dlambda = [[0.0; 3]; 4];
    lambda[0] = 1.0 - xi[..dim].iter().sum::<f64>();
    for j in 0..dim {
        lambda[j + 1] = xi[j];
        dlambda[0][j] = -1.0;
        dlambda[j + 1][j] = 1.0;
    }
    match kind {
        ElementKind::DG0 => out.values[0] = 1.0,
        ElementKind::P1 | ElementKind::DG1 => {
            out.values[..=dim].copy_from_slice(&lambda[..=dim]);
            out.grads[..=dim].copy_from_slice(&dlambda[..=dim]);
        }
        ElementKind::P2 => {
            for i in 0..=dim {
                let l = lambda[i];
                out.values[i] = l * (2.0 * l - 1.0);
                for k in 0..3 {
                    out.grads[i][k] = (4.0 * l - 1.0) * dlambda[i][k];
                }
            }
            for (e, &[a, b]) in edge_vertices(dim).iter().enumerate() {
                let i = dim + 1 + e;
                out.values[i] = 4.0 * lambda[a] * lambda[b];
                for k in 0..3 {
                    out.grads[i][k] = 4.0 * (lambda[a] * dlambda[b][k] + lambda[b] * dlambda[a][k]);
                }
            }
        }
    }
    out
}

/// Reference coordinates of the Lagrange nodes of `kind`.
pub fn reference_nodes(kind: ElementKind, dim: usize) -> Vec<[f64; 3]> {
    let vertex = |i: usize| {
        let mut x = [0.0; 3];
        if i > 0 {
            x[i - 1] = 1.0;
        }
        x
    };
    match kind {
        ElementKind::DG0 => {
            let mut x = [0.0; 3];
            x[..dim].iter_mut().for_each(|v| *v = 1.0 / (dim + 1) as f64);
            vec![x]
        }
        ElementKind::P1 | ElementKind::DG1 => (0..=dim).map(vertex).collect(),
        ElementKind::P2 => {
            let mut nodes: Vec<[f64; 3]> = (0..=dim).map(vertex).collect();
            for &[a, b] in edge_vertices(dim) {
                let (xa, xb) = (vertex(a), vertex(b));
                nodes.push([0.5 * (xa[0] + xb[0]), 0.5 * (xa[1] + xb[1]), 0.5 * (xa[2] + xb[2])]);
            }
            nodes
        }
    }
}
