//! Steady incompressible Navier-Stokes flow solved by Newton's method with
//! continuation in the boundary data.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{cell_reference_from_facet, Field, QuadratureRule};
use crate::geometry::dot;
use crate::linalg::{self, norm, CsrMatrix, SparseSystem};
use crate::stokes::{
    apply_constraints, assemble_linear, diagonal_scale, eval_basis, facet_pair_dofs, scatter, strong_constraints,
    AssemblyOptions, Discretization, FlowProblem, LocalSystem, Solution,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NsConfig {
    /// Relative residual at which an iteration is accepted.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    /// Increasing data scale factors ending at 1.
    pub continuation: Vec<f64>,
    /// Factor on the convective term; 0 reduces the equations to Stokes.
    pub convection_scale: f64,
}

impl Default for NsConfig {
    fn default() -> Self {
        NsConfig {
            newton_tol: 1e-10,
            max_newton_iters: 20,
            continuation: vec![1.0],
            convection_scale: 1.0,
        }
    }
}

impl NsConfig {
    fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0) {
            return Err(Error::InvalidArgument(format!("Newton tolerance must be positive, got {}", self.newton_tol)));
        }
        let c = &self.continuation;
        if c.is_empty() || c.iter().any(|s| !(*s > 0.0)) || c.windows(2).any(|w| w[1] <= w[0]) || *c.last().unwrap() != 1.0
        {
            return Err(Error::InvalidArgument(format!(
                "continuation factors must be positive, increasing and end at 1, got {c:?}"
            )));
        }
        Ok(())
    }
}

/// Residual history of one continuation step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuationStep {
    pub scale: f64,
    /// Relative residual before each Newton update and after the last one.
    pub residuals: Vec<f64>,
}

impl ContinuationStep {
    /// Number of Newton updates performed.
    pub fn iterations(&self) -> usize {
        self.residuals.len().saturating_sub(1)
    }
}

#[derive(Clone, Debug)]
pub struct NsSolution {
    pub solution: Solution,
    pub log: Vec<ContinuationStep>,
}

/// Adds the convective term `rho int ((grad v) v) . w` to `residual` and its
/// exact linearization `rho int ((grad du) v + (grad v) du) . w` to `jacobian`.
pub(crate) fn assemble_convection(
    disc: &Discretization,
    rho: f64,
    v: &Field,
    jacobian: Option<&mut CsrMatrix>,
    residual: Option<&mut [f64]>,
) {
    let mesh = disc.mesh();
    let dim = mesh.dim();
    let rule = QuadratureRule::simplex(dim, disc.element().cell_quad_degree());
    let nv = disc.nv_local();
    let kernel = |c: usize| {
        let mut dofs = Vec::new();
        disc.cell_dofs(c, &mut dofs);
        let mut local = LocalSystem::new(dofs);
        let det = mesh.geometry(c).det;
        for q in 0..rule.len() {
            let xi = rule.point(q);
            let w = rule.weight(q) * det * rho;
            let b = eval_basis(disc, c, xi);
            let vx = v.value_in_cell(c, xi);
            let gv = v.gradient_in_cell(c, xi);
            let mut conv = [0.0; 3];
            for i in 0..dim {
                conv[i] = (0..dim).map(|j| gv[i][j] * vx[j]).sum();
            }
            for a in 0..nv {
                for i in 0..dim {
                    local.vec[a * dim + i] += w * b.phi[a] * conv[i];
                }
                for bb in 0..nv {
                    let adv = w * b.phi[a] * dot(&b.grad[bb], &vx);
                    for i in 0..dim {
                        local.add(a * dim + i, bb * dim + i, adv);
                        for j in 0..dim {
                            local.add(a * dim + i, bb * dim + j, w * b.phi[a] * gv[i][j] * b.phi[bb]);
                        }
                    }
                }
            }
        }
        Some(local)
    };
    scatter(mesh.n_cells(), kernel, jacobian, residual);
}

/// Continuous interior penalty over interior facets for P1/P1:
/// `alpha_i h^2 int |v.n|^2 [grad u]:[grad w] + alpha_v h^2 int [grad u]:[grad w]
///  + alpha_p h^2 int [grad p].[grad q]`, with `h^2` the mean over the two
/// cells and `v` the advecting velocity (taken as zero when absent).
pub fn cip_stabilization(
    disc: &Discretization,
    alpha_i: f64,
    alpha_v: f64,
    alpha_p: f64,
    advecting: Option<&Field>,
    matrix: &mut CsrMatrix,
) {
    let mesh = disc.mesh();
    let dim = mesh.dim();
    let nv = disc.nv_local();
    let centroid = vec![1.0 / (dim + 1) as f64; dim];
    let rule = QuadratureRule::simplex(dim - 1, 2);
    let ref_measure = QuadratureRule::reference_measure(dim - 1);
    let kernel = |k: usize| {
        let f = &mesh.interior_facets()[k];
        let (dofs, maps) = facet_pair_dofs(disc, f.cells);
        let nl = dofs.len();
        // Gradient jump of the scalar basis function behind each unknown,
        // and the velocity component it carries (usize::MAX for pressure).
        let mut jump = vec![[0.0; 3]; nl];
        let mut comp = vec![usize::MAX; nl];
        for (side, &c) in f.cells.iter().enumerate() {
            let sign = if side == 0 { 1.0 } else { -1.0 };
            let b = eval_basis(disc, c, &centroid);
            for a in 0..nv {
                for i in 0..dim {
                    let r = maps[side][a * dim + i];
                    comp[r] = i;
                    for l in 0..dim {
                        jump[r][l] += sign * b.grad[a][l];
                    }
                }
            }
            for kk in 0..b.np {
                let r = maps[side][nv * dim + kk];
                for l in 0..dim {
                    jump[r][l] += sign * b.grad_psi[kk][l];
                }
            }
        }
        let h2 = 0.5 * (mesh.h(f.cells[0]).powi(2) + mesh.h(f.cells[1]).powi(2));
        let mut flux2 = 0.0;
        if let (Some(v), true) = (advecting, alpha_i != 0.0) {
            let c0 = f.cells[0];
            for q in 0..rule.len() {
                let xi = cell_reference_from_facet(mesh.cell(c0), &f.vertices[..dim], rule.point(q));
                let vn = dot(&v.value_in_cell(c0, &xi), &f.normal);
                flux2 += rule.weight(q) * f.measure / ref_measure * vn * vn;
            }
        }
        let wv = h2 * (alpha_v * f.measure + alpha_i * flux2);
        let wp = h2 * alpha_p * f.measure;
        let mut local = LocalSystem::new(dofs);
        for r in 0..nl {
            for s in 0..nl {
                let jj = dot(&jump[r], &jump[s]);
                if comp[r] != usize::MAX && comp[r] == comp[s] {
                    local.add(r, s, wv * jj);
                } else if comp[r] == usize::MAX && comp[s] == usize::MAX {
                    local.add(r, s, wp * jj);
                }
            }
        }
        Some(local)
    };
    scatter(mesh.interior_facets().len(), kernel, Some(matrix), None);
}

/// Unconstrained Navier-Stokes residual `K u - F + C(u)` and Jacobian
/// `K + dC(u)` at `u`. The streamline-weighted interior penalty weight is
/// evaluated at `u` but not differentiated.
pub fn assemble_ns_residual_and_jacobian(
    problem: &FlowProblem,
    disc: &Discretization,
    u: &[f64],
    data_scale: f64,
    convection_scale: f64,
) -> Result<(Vec<f64>, CsrMatrix)> {
    let (v, _, _) = disc.split(u);
    let opts = AssemblyOptions {
        advecting: Some(&v),
        data_scale,
        ..AssemblyOptions::default()
    };
    let (mut jacobian, f) = assemble_linear(problem, disc, &opts)?;
    let mut residual = jacobian.matvec(u);
    for (r, fi) in residual.iter_mut().zip(&f) {
        *r -= fi;
    }
    if convection_scale != 0.0 {
        assemble_convection(
            disc,
            convection_scale * problem.density,
            &v,
            Some(&mut jacobian),
            Some(&mut residual),
        );
    }
    Ok((residual, jacobian))
}

/// Newton iteration starting from the Stokes solution at the first
/// continuation factor.
pub fn newton_solve(problem: &FlowProblem, config: &NsConfig) -> Result<NsSolution> {
    problem.validate()?;
    config.validate()?;
    let disc = Discretization::new(problem)?;
    let s0 = config.continuation[0];
    let opts = AssemblyOptions {
        data_scale: s0,
        ..AssemblyOptions::default()
    };
    let (mut matrix, mut rhs) = assemble_linear(problem, &disc, &opts)?;
    let constraints = strong_constraints(problem, &disc, s0)?;
    let scale = diagonal_scale(&matrix, disc.n_velocity(), &constraints);
    apply_constraints(&mut matrix, &mut rhs, &constraints, scale);
    let u = linalg::solve(&SparseSystem::new(matrix, rhs)?)?;
    newton_from(problem, config, disc, u)
}

/// Newton iteration from a given initial guess (typically a Stokes solution
/// of the same problem).
pub fn newton_solve_from(problem: &FlowProblem, config: &NsConfig, initial: &Solution) -> Result<NsSolution> {
    problem.validate()?;
    config.validate()?;
    let disc = Discretization::new(problem)?;
    let u = disc.join(&initial.velocity, &initial.pressure, initial.multiplier);
    if u.len() != disc.n_total() {
        return Err(Error::ConfigurationMismatch {
            expected: problem.fingerprint().0,
            found: initial.fingerprint.0.clone(),
        });
    }
    newton_from(problem, config, disc, u)
}

fn newton_from(problem: &FlowProblem, config: &NsConfig, disc: Discretization, mut u: Vec<f64>) -> Result<NsSolution> {
    let mut log = Vec::new();
    for (step, &s) in config.continuation.iter().enumerate() {
        let constraints = strong_constraints(problem, &disc, s)?;
        if step > 0 {
            for (&d, &g) in &constraints {
                u[d] = g;
            }
        }
        let reference = {
            let mut lift = vec![0.0; u.len()];
            for (&d, &g) in &constraints {
                lift[d] = g;
            }
            let (r, _) = assemble_ns_residual_and_jacobian(problem, &disc, &lift, s, config.convection_scale)?;
            let n = free_norm(&r, &constraints);
            if n > 0.0 {
                n
            } else {
                1.0
            }
        };
        let mut residuals = Vec::new();
        loop {
            let (mut r, mut jac) = assemble_ns_residual_and_jacobian(problem, &disc, &u, s, config.convection_scale)?;
            let rel = free_norm(&r, &constraints) / reference;
            residuals.push(rel);
            if !rel.is_finite() {
                return Err(Error::NewtonDiverged { log: residuals });
            }
            if rel <= config.newton_tol {
                break;
            }
            let n = residuals.len();
            if n >= 4 && (n - 3..n).all(|k| residuals[k] > residuals[k - 1]) {
                return Err(Error::NewtonDiverged { log: residuals });
            }
            if n > config.max_newton_iters {
                return Err(Error::NewtonMaxIterations {
                    iterations: config.max_newton_iters,
                    log: residuals,
                });
            }
            r.iter_mut().for_each(|v| *v = -*v);
            let zero: BTreeMap<usize, f64> = constraints.keys().map(|&d| (d, 0.0)).collect();
            let scale = diagonal_scale(&jac, disc.n_velocity(), &zero);
            apply_constraints(&mut jac, &mut r, &zero, scale);
            let du = linalg::solve(&SparseSystem::new(jac, r)?)?;
            for (ui, di) in u.iter_mut().zip(&du) {
                *ui += di;
            }
        }
        log.push(ContinuationStep { scale: s, residuals });
    }
    let (velocity, pressure, multiplier) = disc.split(&u);
    Ok(NsSolution {
        solution: Solution {
            velocity,
            pressure,
            multiplier,
            fingerprint: problem.fingerprint(),
            convective: config.convection_scale != 0.0,
        },
        log,
    })
}

fn free_norm(r: &[f64], constraints: &BTreeMap<usize, f64>) -> f64 {
    let free: Vec<f64> = r
        .iter()
        .enumerate()
        .map(|(i, &v)| if constraints.contains_key(&i) { 0.0 } else { v })
        .collect();
    norm(&free)
}
