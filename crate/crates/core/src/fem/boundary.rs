use faer::linalg::solvers::Solve;
use faer::Mat;

use super::basis::{tabulate_basis, ElementKind};
use super::quadrature::QuadratureRule;
use super::space::{FunctionSpace, Support};
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, Factorization, SparsityBuilder};

/// Scalar mass matrix of a boundary space restricted to a set of facets,
/// compacted to the nodes touched by those facets.
#[derive(Clone, Debug)]
pub struct BoundaryMass {
    kind: ElementKind,
    facets: Vec<usize>,
    nodes: Vec<usize>,
    compact: Vec<usize>,
    matrix: CsrMatrix,
    nloc: usize,
}

impl BoundaryMass {
    pub fn kind(&self) -> ElementKind {
        self.kind
    }

    pub fn facets(&self) -> &[usize] {
        &self.facets
    }

    /// Space nodes supported on the region, ascending.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Compact index of a space node, if it lies on the region.
    pub fn compact_index(&self, node: usize) -> Option<usize> {
        match self.compact[node] {
            usize::MAX => None,
            k => Some(k),
        }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Solves `M x = b` for several right-hand sides given in compact
    /// numbering. Discontinuous spaces are solved facet by facet.
    pub fn solve(&self, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if self.kind.is_discontinuous() {
            let mut out: Vec<Vec<f64>> = rhs.iter().map(|b| vec![0.0; b.len()]).collect();
            let n = self.nloc;
            let mut idx = Vec::with_capacity(n);
            for f in 0..self.facets.len() {
                // Discontinuous nodes of a facet are contiguous in compact order.
                idx.clear();
                idx.extend(f * n..(f + 1) * n);
                let block = Mat::from_fn(n, n, |i, j| self.matrix.get(idx[i], idx[j]));
                let lu = block.partial_piv_lu();
                let b = Mat::from_fn(n, rhs.len(), |i, k| rhs[k][idx[i]]);
                let x = lu.solve(&b);
                for (k, o) in out.iter_mut().enumerate() {
                    for i in 0..n {
                        o[idx[i]] = x[(i, k)];
                    }
                }
            }
            Ok(out)
        } else {
            let lu = Factorization::new(&self.matrix)?;
            rhs.iter().map(|b| lu.solve(b)).collect()
        }
    }
}

/// Assembles `M_ij = int phi_i phi_j ds` over the listed boundary facets.
pub fn boundary_mass_matrix(space: &FunctionSpace, facets: &[usize]) -> Result<BoundaryMass> {
    if space.dofmap().support() != Support::BoundaryFacets {
        return Err(Error::InvalidArgument("boundary mass matrix needs a boundary space".into()));
    }
    if facets.is_empty() {
        return Err(Error::EmptyRegion(Vec::new()));
    }
    let mesh = space.mesh();
    let kind = space.kind();
    let fdim = mesh.dim() - 1;
    let dm = space.dofmap();
    let nloc = dm.n_local();

    let mut facets = facets.to_vec();
    facets.sort_unstable();
    facets.dedup();

    let mut compact = vec![usize::MAX; dm.n_nodes()];
    let mut nodes: Vec<usize> = facets.iter().flat_map(|&f| dm.nodes(f).iter().copied()).collect();
    nodes.sort_unstable();
    nodes.dedup();
    for (k, &n) in nodes.iter().enumerate() {
        compact[n] = k;
    }

    let mut pattern = SparsityBuilder::new(nodes.len(), nodes.len());
    for &f in &facets {
        let local: Vec<usize> = dm.nodes(f).iter().map(|&n| compact[n]).collect();
        pattern.insert_block(&local, &local);
    }
    let mut matrix = pattern.build()?;

    let rule = QuadratureRule::simplex(fdim, 2 * kind.degree());
    let scale = 1.0 / QuadratureRule::reference_measure(fdim);
    let tab: Vec<_> = (0..rule.len()).map(|q| tabulate_basis(kind, fdim, rule.point(q))).collect();
    for &f in &facets {
        let measure = mesh.boundary_facets()[f].measure;
        let local: Vec<usize> = dm.nodes(f).iter().map(|&n| compact[n]).collect();
        for (q, b) in tab.iter().enumerate() {
            let w = rule.weight(q) * scale * measure;
            for i in 0..nloc {
                for j in 0..nloc {
                    matrix.add(local[i], local[j], w * (b.values[i] * b.values[j]));
                }
            }
        }
    }
    Ok(BoundaryMass {
        kind,
        facets,
        nodes,
        compact,
        matrix,
        nloc,
    })
}
