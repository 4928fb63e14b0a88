use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;

use super::problem::{BoundaryCondition, ElementPair, FlowProblem, Stabilization, StressModel};
use crate::error::{Error, Result};
use crate::fem::{
    cell_reference_from_facet, tabulate_basis, ElementKind, Field, FunctionSpace, QuadratureRule, MAX_LOCAL,
};
use crate::geometry::{dot, Point};
use crate::linalg::{CsrMatrix, SparsityBuilder};
use crate::mesh::{Mesh, Tag};

const CHUNK: usize = 1024;

/// Spaces and global numbering of a mixed problem. Unknowns are ordered
/// `[velocity | pressure | multiplier]`; the multiplier enforcing a
/// mean-zero pressure exists only when no boundary marker fixes the
/// pressure level.
#[derive(Debug)]
pub struct Discretization {
    mesh: Arc<Mesh>,
    element: ElementPair,
    velocity: Arc<FunctionSpace>,
    pressure: Arc<FunctionSpace>,
    multiplier: Option<usize>,
    pattern: CsrMatrix,
}

impl Discretization {
    pub fn new(problem: &FlowProblem) -> Result<Discretization> {
        let mesh = problem.mesh.clone();
        let dim = mesh.dim();
        let velocity = FunctionSpace::new(mesh.clone(), problem.element.velocity_kind(), dim);
        let pressure = FunctionSpace::new(mesh.clone(), ElementKind::P1, 1);
        let n_v = velocity.n_dofs();
        let n_p = pressure.n_dofs();
        let multiplier = problem.needs_pressure_constraint().then_some(n_v + n_p);
        let n_total = n_v + n_p + multiplier.map_or(0, |_| 1);

        let mut disc = Discretization {
            mesh,
            element: problem.element,
            velocity,
            pressure,
            multiplier,
            pattern: CsrMatrix::identity(0),
        };
        let mut builder = SparsityBuilder::new(n_total, n_total);
        let mut dofs = Vec::new();
        for c in 0..disc.mesh.n_cells() {
            disc.cell_dofs(c, &mut dofs);
            builder.insert_block(&dofs, &dofs);
        }
        if problem.element == ElementPair::P1P1 {
            let mut other = Vec::new();
            for f in disc.mesh.interior_facets() {
                disc.cell_dofs(f.cells[0], &mut dofs);
                disc.cell_dofs(f.cells[1], &mut other);
                builder.insert_block(&dofs, &other);
                builder.insert_block(&other, &dofs);
            }
        }
        disc.pattern = builder.build()?;
        Ok(disc)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn element(&self) -> ElementPair {
        self.element
    }

    pub fn velocity(&self) -> &Arc<FunctionSpace> {
        &self.velocity
    }

    pub fn pressure(&self) -> &Arc<FunctionSpace> {
        &self.pressure
    }

    pub fn n_velocity(&self) -> usize {
        self.velocity.n_dofs()
    }

    pub fn n_pressure(&self) -> usize {
        self.pressure.n_dofs()
    }

    pub fn multiplier(&self) -> Option<usize> {
        self.multiplier
    }

    pub fn n_total(&self) -> usize {
        self.pattern.nrows()
    }

    pub fn zero_matrix(&self) -> CsrMatrix {
        self.pattern.clone()
    }

    /// Local velocity basis count of a cell.
    pub(crate) fn nv_local(&self) -> usize {
        self.velocity.dofmap().n_local()
    }

    /// Global unknowns of cell `c`: velocity `(a, i)` at local position
    /// `a * dim + i`, then pressure nodes, then the multiplier.
    pub fn cell_dofs(&self, c: usize, out: &mut Vec<usize>) {
        out.clear();
        let dim = self.mesh.dim();
        let vdm = self.velocity.dofmap();
        for &node in vdm.nodes(c) {
            for i in 0..dim {
                out.push(vdm.dof(node, i));
            }
        }
        let n_v = self.n_velocity();
        out.extend(self.pressure.dofmap().nodes(c).iter().map(|&n| n_v + n));
        if let Some(m) = self.multiplier {
            out.push(m);
        }
    }

    pub fn split(&self, u: &[f64]) -> (Field, Field, Option<f64>) {
        let n_v = self.n_velocity();
        let n_p = self.n_pressure();
        let v = Field::new(self.velocity.clone(), u[..n_v].to_vec()).expect("velocity length");
        let p = Field::new(self.pressure.clone(), u[n_v..n_v + n_p].to_vec()).expect("pressure length");
        (v, p, self.multiplier.map(|m| u[m]))
    }

    pub fn join(&self, v: &Field, p: &Field, multiplier: Option<f64>) -> Vec<f64> {
        let mut u = Vec::with_capacity(self.n_total());
        u.extend_from_slice(v.values());
        u.extend_from_slice(p.values());
        if self.multiplier.is_some() {
            u.push(multiplier.unwrap_or(0.0));
        }
        u
    }
}

/// Dense element contribution with its global unknowns.
pub(crate) struct LocalSystem {
    pub dofs: Vec<usize>,
    pub mat: Vec<f64>,
    pub vec: Vec<f64>,
}

impl LocalSystem {
    pub fn new(dofs: Vec<usize>) -> LocalSystem {
        let n = dofs.len();
        LocalSystem {
            dofs,
            mat: vec![0.0; n * n],
            vec: vec![0.0; n],
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let n = self.dofs.len();
        self.mat[i * n + j] += v;
    }
}

/// Computes element contributions in parallel and adds them in item order,
/// so results do not depend on the number of workers.
pub(crate) fn scatter<K>(n_items: usize, kernel: K, mut matrix: Option<&mut CsrMatrix>, mut rhs: Option<&mut [f64]>)
where
    K: Fn(usize) -> Option<LocalSystem> + Sync,
{
    let mut start = 0;
    while start < n_items {
        let end = (start + CHUNK).min(n_items);
        let locals: Vec<Option<LocalSystem>> = (start..end).into_par_iter().map(&kernel).collect();
        for local in locals.into_iter().flatten() {
            let n = local.dofs.len();
            if let Some(m) = matrix.as_deref_mut() {
                for (i, &r) in local.dofs.iter().enumerate() {
                    for (j, &c) in local.dofs.iter().enumerate() {
                        let v = local.mat[i * n + j];
                        if v != 0.0 {
                            m.add(r, c, v);
                        }
                    }
                }
            }
            if let Some(b) = rhs.as_deref_mut() {
                for (i, &r) in local.dofs.iter().enumerate() {
                    b[r] += local.vec[i];
                }
            }
        }
        start = end;
    }
}

/// Velocity and pressure basis with physical gradients at one point of a cell.
pub(crate) struct PointBasis {
    pub phi: [f64; MAX_LOCAL],
    pub grad: [Point; MAX_LOCAL],
    pub np: usize,
    pub psi: [f64; 4],
    pub grad_psi: [Point; 4],
}

pub(crate) fn eval_basis(disc: &Discretization, c: usize, xi: &[f64]) -> PointBasis {
    let mesh = &disc.mesh;
    let dim = mesh.dim();
    let it = &mesh.geometry(c).inverse_transpose;
    let bv = tabulate_basis(disc.velocity.kind(), dim, xi);
    let bp = tabulate_basis(ElementKind::P1, dim, xi);
    let mut out = PointBasis {
        phi: bv.values,
        grad: [[0.0; 3]; MAX_LOCAL],
        np: bp.n,
        psi: [0.0; 4],
        grad_psi: [[0.0; 3]; 4],
    };
    for a in 0..bv.n {
        out.grad[a] = crate::geometry::mat_vec(it, &bv.grads[a], dim);
    }
    for a in 0..bp.n {
        out.psi[a] = bp.values[a];
        out.grad_psi[a] = crate::geometry::mat_vec(it, &bp.grads[a], dim);
    }
    out
}

/// Traction `T(phi e_j, 0) n` of a velocity basis function with physical gradient `g`.
#[inline]
pub(crate) fn basis_traction(stress: StressModel, mu: f64, g: &Point, n: &Point, j: usize, dim: usize) -> Point {
    let gn = dot(g, n);
    let mut t = [0.0; 3];
    t[j] = mu * gn;
    if stress == StressModel::SymmetricGradient {
        for i in 0..dim {
            t[i] += mu * g[i] * n[j];
        }
    }
    t
}

/// Stress tensor `T(v, p)` from a velocity gradient and pressure.
pub(crate) fn stress_tensor(stress: StressModel, mu: f64, grad_v: &[[f64; 3]; 3], p: f64, dim: usize) -> [[f64; 3]; 3] {
    let mut t = [[0.0; 3]; 3];
    for i in 0..dim {
        for j in 0..dim {
            t[i][j] = match stress {
                StressModel::FullGradient => mu * grad_v[i][j],
                StressModel::SymmetricGradient => mu * (grad_v[i][j] + grad_v[j][i]),
            };
        }
        t[i][i] -= p;
    }
    t
}

/// Local indices of the velocity basis functions not vanishing on local facet `local`.
pub(crate) fn facet_local_nodes(kind: ElementKind, dim: usize, local: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..=dim).filter(|&a| a != local).collect();
    if kind == ElementKind::P2 {
        for (e, &[a, b]) in crate::fem::edge_vertices(dim).iter().enumerate() {
            if a != local && b != local {
                out.push(dim + 1 + e);
            }
        }
    }
    out
}

/// Which Nitsche terms enter an assembly.
#[derive(Clone, Copy, Debug)]
pub(crate) enum NitscheMode {
    /// Consistency, adjoint and penalty terms on every Nitsche marker.
    Full,
    /// Only the adjoint and penalty terms: the consistency term is the
    /// boundary flux being evaluated.
    Leftovers,
}

#[derive(Clone, Copy)]
pub(crate) struct AssemblyOptions<'a> {
    pub nitsche: NitscheMode,
    /// Velocity entering the streamline-weighted interior penalty term.
    pub advecting: Option<&'a Field>,
    /// Scale applied to body force and boundary data.
    pub data_scale: f64,
}

impl Default for AssemblyOptions<'_> {
    fn default() -> Self {
        AssemblyOptions {
            nitsche: NitscheMode::Full,
            advecting: None,
            data_scale: 1.0,
        }
    }
}

/// Unconstrained linear operator and load vector: viscous and pressure
/// terms, body force, Nitsche terms, stabilization and the pressure
/// constraint. Strong Dirichlet conditions are not applied.
pub(crate) fn assemble_linear(
    problem: &FlowProblem,
    disc: &Discretization,
    opts: &AssemblyOptions,
) -> Result<(CsrMatrix, Vec<f64>)> {
    let mut matrix = disc.zero_matrix();
    let mut rhs = vec![0.0; disc.n_total()];
    assemble_cells(problem, disc, opts.data_scale, &mut matrix, &mut rhs);
    for (&tag, bc) in &problem.bcs {
        if let BoundaryCondition::NitscheDirichlet(g) = bc {
            let terms = match opts.nitsche {
                NitscheMode::Full => NitscheTerms::ALL,
                NitscheMode::Leftovers => NitscheTerms {
                    consistency: false,
                    adjoint: true,
                    penalty: true,
                },
            };
            let scale = opts.data_scale;
            let value = move |x: Point| g(x).map(|v| v * scale);
            nitsche_terms(problem, disc, tag, &value, terms, &mut matrix, &mut rhs);
        }
    }
    match problem.stabilization {
        Stabilization::None => {}
        Stabilization::BurmanHansbo { gamma_p, gamma_v } => {
            bh_stabilization(problem, disc, gamma_p, gamma_v, &mut matrix);
        }
        Stabilization::InteriorPenalty {
            alpha_i,
            alpha_v,
            alpha_p,
        } => {
            crate::navier_stokes::cip_stabilization(disc, alpha_i, alpha_v, alpha_p, opts.advecting, &mut matrix);
        }
    }
    Ok((matrix, rhs))
}

fn assemble_cells(problem: &FlowProblem, disc: &Discretization, data_scale: f64, matrix: &mut CsrMatrix, rhs: &mut [f64]) {
    let mesh = disc.mesh();
    let dim = mesh.dim();
    let mu = problem.viscosity;
    let sym = problem.stress == StressModel::SymmetricGradient;
    let rule = QuadratureRule::simplex(dim, problem.element.cell_quad_degree());
    let nv = disc.nv_local();
    let kernel = |c: usize| {
        let mut dofs = Vec::new();
        disc.cell_dofs(c, &mut dofs);
        let mut local = LocalSystem::new(dofs);
        let p0 = nv * dim;
        let det = mesh.geometry(c).det;
        for q in 0..rule.len() {
            let xi = rule.point(q);
            let w = rule.weight(q) * det;
            let b = eval_basis(disc, c, xi);
            for a in 0..nv {
                for bb in 0..nv {
                    let g = w * mu * dot(&b.grad[a], &b.grad[bb]);
                    for i in 0..dim {
                        local.add(a * dim + i, bb * dim + i, g);
                    }
                    if sym {
                        for i in 0..dim {
                            for j in 0..dim {
                                local.add(a * dim + i, bb * dim + j, w * mu * b.grad[bb][i] * b.grad[a][j]);
                            }
                        }
                    }
                }
                for k in 0..b.np {
                    for i in 0..dim {
                        let v = w * b.psi[k] * b.grad[a][i];
                        local.add(a * dim + i, p0 + k, -v);
                        local.add(p0 + k, a * dim + i, v);
                    }
                }
            }
            if disc.multiplier.is_some() {
                let m = p0 + b.np;
                for k in 0..b.np {
                    local.add(m, p0 + k, w * b.psi[k]);
                    local.add(p0 + k, m, w * b.psi[k]);
                }
            }
            if let Some(f) = &problem.body_force {
                let fx = f(mesh.map_to_physical(c, xi));
                for a in 0..nv {
                    for i in 0..dim {
                        local.vec[a * dim + i] += w * data_scale * fx[i] * b.phi[a];
                    }
                }
            }
        }
        Some(local)
    };
    scatter(mesh.n_cells(), kernel, Some(matrix), Some(rhs));
}

/// Selects the three Nitsche terms individually.
#[derive(Clone, Copy, Debug)]
pub struct NitscheTerms {
    pub consistency: bool,
    pub adjoint: bool,
    pub penalty: bool,
}

impl NitscheTerms {
    pub const ALL: NitscheTerms = NitscheTerms {
        consistency: true,
        adjoint: true,
        penalty: true,
    };
}

/// Non-symmetric Nitsche terms on the facets of `marker`:
/// `-int (T(v,p) n).w + int (T(w,q) n).(v - g) + beta mu / h int (v - g).w`.
pub fn nitsche_terms(
    problem: &FlowProblem,
    disc: &Discretization,
    marker: Tag,
    g: &(dyn Fn(Point) -> [f64; 3] + Sync),
    terms: NitscheTerms,
    matrix: &mut CsrMatrix,
    rhs: &mut [f64],
) {
    let mesh = disc.mesh();
    let dim = mesh.dim();
    let mu = problem.viscosity;
    let beta = problem.nitsche.beta;
    let facets = mesh.facets_with_markers(&[marker]);
    let degree = 2 * problem.element.velocity_kind().degree() + 2;
    let rule = QuadratureRule::simplex(dim - 1, degree);
    let ref_measure = QuadratureRule::reference_measure(dim - 1);
    let nv = disc.nv_local();
    let kernel = |k: usize| {
        let bf = &mesh.boundary_facets()[facets[k]];
        let c = bf.cell;
        let mut dofs = Vec::new();
        disc.cell_dofs(c, &mut dofs);
        let mut local = LocalSystem::new(dofs);
        let p0 = nv * dim;
        let n = bf.normal;
        let h = mesh.h(c);
        let fverts = mesh.facet_vertices(bf);
        for q in 0..rule.len() {
            let eta = rule.point(q);
            let w = rule.weight(q) * bf.measure / ref_measure;
            let xi = cell_reference_from_facet(mesh.cell(c), fverts, eta);
            let x = mesh.map_to_physical(c, &xi);
            let gx = g(x);
            let b = eval_basis(disc, c, &xi);
            for a in 0..nv {
                for i in 0..dim {
                    let row = a * dim + i;
                    let ta = basis_traction(problem.stress, mu, &b.grad[a], &n, i, dim);
                    for bb in 0..nv {
                        for j in 0..dim {
                            let col = bb * dim + j;
                            let mut v = 0.0;
                            if terms.consistency {
                                let tb = basis_traction(problem.stress, mu, &b.grad[bb], &n, j, dim);
                                v -= b.phi[a] * tb[i];
                            }
                            if terms.adjoint {
                                v += ta[j] * b.phi[bb];
                            }
                            if terms.penalty && i == j {
                                v += beta * mu / h * b.phi[a] * b.phi[bb];
                            }
                            local.add(row, col, w * v);
                        }
                    }
                    if terms.consistency {
                        for k in 0..b.np {
                            local.add(row, p0 + k, w * b.phi[a] * b.psi[k] * n[i]);
                        }
                    }
                    let mut r = 0.0;
                    if terms.adjoint {
                        r += dot(&ta, &gx);
                    }
                    if terms.penalty {
                        r += beta * mu / h * b.phi[a] * gx[i];
                    }
                    local.vec[row] += w * r;
                }
            }
            if terms.adjoint {
                for k in 0..b.np {
                    for bb in 0..nv {
                        for j in 0..dim {
                            local.add(p0 + k, bb * dim + j, -w * b.psi[k] * b.phi[bb] * n[j]);
                        }
                    }
                    local.vec[p0 + k] -= w * b.psi[k] * dot(&gx, &n);
                }
            }
        }
        Some(local)
    };
    scatter(facets.len(), kernel, Some(matrix), Some(rhs));
}

/// Unknowns of the two cells of an interior facet (union, first cell first)
/// and, for each cell, the position of its local unknowns in that union.
pub(crate) fn facet_pair_dofs(disc: &Discretization, cells: [usize; 2]) -> (Vec<usize>, [Vec<usize>; 2]) {
    let mut d0 = Vec::new();
    let mut d1 = Vec::new();
    disc.cell_dofs(cells[0], &mut d0);
    disc.cell_dofs(cells[1], &mut d1);
    let mut union = d0.clone();
    let map0: Vec<usize> = (0..d0.len()).collect();
    let map1: Vec<usize> = d1
        .iter()
        .map(|d| match union.iter().position(|u| u == d) {
            Some(k) => k,
            None => {
                union.push(*d);
                union.len() - 1
            }
        })
        .collect();
    (union, [map0, map1])
}

/// Gradient-jump stabilization for P1/P1 over interior facets:
/// `gamma_p h^(s+1) [n.grad p][n.grad q] + gamma_v h^(s+1) [div v][div w]`.
/// Each facet is visited once and weighted with the mean of the two cell
/// factors `h_K^(s_K+1)`.
pub fn bh_stabilization(problem: &FlowProblem, disc: &Discretization, gamma_p: f64, gamma_v: f64, matrix: &mut CsrMatrix) {
    let mesh = disc.mesh();
    let dim = mesh.dim();
    let nu = problem.kinematic_viscosity();
    let nv = disc.nv_local();
    let centroid = vec![1.0 / (dim + 1) as f64; dim];
    let weight = |c: usize| {
        let h = mesh.h(c);
        let s = if nu >= h { 2 } else { 1 };
        h.powi(s + 1)
    };
    let kernel = |k: usize| {
        let f = &mesh.interior_facets()[k];
        let (dofs, maps) = facet_pair_dofs(disc, f.cells);
        let nl = dofs.len();
        let mut jump_p = vec![0.0; nl];
        let mut jump_div = vec![0.0; nl];
        for (side, &c) in f.cells.iter().enumerate() {
            let sign = if side == 0 { 1.0 } else { -1.0 };
            let b = eval_basis(disc, c, &centroid);
            for a in 0..nv {
                for i in 0..dim {
                    jump_div[maps[side][a * dim + i]] += sign * b.grad[a][i];
                }
            }
            for kk in 0..b.np {
                jump_p[maps[side][nv * dim + kk]] += sign * dot(&b.grad_psi[kk], &f.normal);
            }
        }
        let hw = 0.5 * (weight(f.cells[0]) + weight(f.cells[1])) * f.measure;
        let mut local = LocalSystem::new(dofs);
        for r in 0..nl {
            for s in 0..nl {
                let v = hw * (gamma_p * jump_p[r] * jump_p[s] + gamma_v * jump_div[r] * jump_div[s]);
                local.add(r, s, v);
            }
        }
        Some(local)
    };
    scatter(mesh.interior_facets().len(), kernel, Some(matrix), None);
}

/// Strongly constrained unknowns and their values. Full Dirichlet markers
/// take precedence over tangential constraints at shared nodes.
pub(crate) fn strong_constraints(
    problem: &FlowProblem,
    disc: &Discretization,
    data_scale: f64,
) -> Result<BTreeMap<usize, f64>> {
    let mesh = disc.mesh();
    let dim = mesh.dim();
    let vdm = disc.velocity().dofmap();
    let coords = disc.velocity().node_coords();
    let kind = disc.velocity().kind();
    let mut out = BTreeMap::new();
    let facet_nodes = |fi: usize| -> Vec<usize> {
        let bf = &mesh.boundary_facets()[fi];
        let nodes = vdm.nodes(bf.cell);
        facet_local_nodes(kind, dim, bf.local).into_iter().map(|a| nodes[a]).collect()
    };
    for (&tag, bc) in &problem.bcs {
        if let BoundaryCondition::StrongDirichlet(g) = bc {
            for fi in mesh.facets_with_markers(&[tag]) {
                for node in facet_nodes(fi) {
                    if out.contains_key(&vdm.dof(node, 0)) {
                        continue;
                    }
                    let v = g(coords[node]);
                    for i in 0..dim {
                        out.insert(vdm.dof(node, i), data_scale * v[i]);
                    }
                }
            }
        }
    }
    for (&tag, bc) in &problem.bcs {
        if let BoundaryCondition::TangentialZero = bc {
            let facets = mesh.facets_with_markers(&[tag]);
            let axis = facets
                .first()
                .and_then(|&fi| {
                    let n = mesh.boundary_facets()[fi].normal;
                    (0..dim).find(|&k| (n[k].abs() - 1.0).abs() < 1e-9)
                })
                .ok_or_else(|| {
                    Error::InvalidProblem(format!("marker {tag}: tangential_zero needs an axis-aligned flat boundary"))
                })?;
            for &fi in &facets {
                let n = mesh.boundary_facets()[fi].normal;
                if (n[axis].abs() - 1.0).abs() >= 1e-9 {
                    return Err(Error::InvalidProblem(format!(
                        "marker {tag}: tangential_zero needs an axis-aligned flat boundary"
                    )));
                }
                for node in facet_nodes(fi) {
                    for i in (0..dim).filter(|&i| i != axis) {
                        out.entry(vdm.dof(node, i)).or_insert(0.0);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Replaces constrained rows by `scale * e_r` with right-hand side
/// `scale * value` and moves constrained columns of the remaining rows to
/// the right-hand side.
pub(crate) fn apply_constraints(matrix: &mut CsrMatrix, rhs: &mut [f64], constraints: &BTreeMap<usize, f64>, scale: f64) {
    let mut value = vec![None; matrix.nrows()];
    for (&d, &g) in constraints {
        value[d] = Some(g);
    }
    for r in 0..matrix.nrows() {
        if let Some(g) = value[r] {
            matrix.set_identity_row(r, scale);
            rhs[r] = scale * g;
            continue;
        }
        let (cols, vals) = matrix.row_mut(r);
        for (&c, v) in cols.iter().zip(vals.iter_mut()) {
            if let Some(g) = value[c] {
                rhs[r] -= *v * g;
                *v = 0.0;
            }
        }
    }
}

/// Mean absolute diagonal over the unconstrained velocity rows, used to
/// scale identity rows so they match the rest of the system.
pub(crate) fn diagonal_scale(matrix: &CsrMatrix, n_velocity: usize, constraints: &BTreeMap<usize, f64>) -> f64 {
    let (sum, count) = (0..n_velocity)
        .filter(|r| !constraints.contains_key(r))
        .map(|r| matrix.get(r, r).abs())
        .fold((0.0, 0usize), |(s, n), d| (s + d, n + 1));
    if count == 0 || sum == 0.0 {
        1.0
    } else {
        sum / count as f64
    }
}
