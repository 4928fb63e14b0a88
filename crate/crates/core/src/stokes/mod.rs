//! Stationary Stokes problem: Taylor-Hood with strong Dirichlet conditions
//! or stabilized equal-order elements with Nitsche conditions.

mod assembly;
mod problem;

use std::collections::BTreeMap;

pub use assembly::{bh_stabilization, nitsche_terms, Discretization, NitscheTerms};
pub(crate) use assembly::{
    apply_constraints, assemble_linear, diagonal_scale, eval_basis, facet_pair_dofs, scatter,
    strong_constraints, stress_tensor, AssemblyOptions, LocalSystem, NitscheMode,
};
pub use problem::{
    BoundaryCondition, ConfigFingerprint, ElementPair, FlowProblem, NitscheConfig, Solution, Stabilization,
    StressModel,
};

use crate::error::Result;
use crate::linalg::{self, SparseSystem};

/// Assembled Stokes system with strong conditions applied.
#[derive(Debug)]
pub struct StokesSystem {
    pub discretization: Discretization,
    pub system: SparseSystem,
    /// Strongly constrained unknowns and their prescribed values.
    pub constraints: BTreeMap<usize, f64>,
}

pub fn assemble_stokes(problem: &FlowProblem) -> Result<StokesSystem> {
    problem.validate()?;
    let disc = Discretization::new(problem)?;
    let (mut matrix, mut rhs) = assemble_linear(problem, &disc, &AssemblyOptions::default())?;
    let constraints = strong_constraints(problem, &disc, 1.0)?;
    let scale = diagonal_scale(&matrix, disc.n_velocity(), &constraints);
    apply_constraints(&mut matrix, &mut rhs, &constraints, scale);
    Ok(StokesSystem {
        discretization: disc,
        system: SparseSystem::new(matrix, rhs)?,
        constraints,
    })
}

pub fn solve_stokes(problem: &FlowProblem) -> Result<Solution> {
    let assembled = assemble_stokes(problem)?;
    let u = linalg::solve(&assembled.system)?;
    let (velocity, pressure, multiplier) = assembled.discretization.split(&u);
    Ok(Solution {
        velocity,
        pressure,
        multiplier,
        fingerprint: problem.fingerprint(),
        convective: false,
    })
}
