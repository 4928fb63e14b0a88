//! Benchmark case definitions and the per-level solve.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::analytic::{AnalyticCase, PIPE_LENGTH, PIPE_RADIUS};
use crate::error::{Error, Result};
use crate::fem::{CoordFn, Field};
use crate::mesh::{generate_cylinder, generate_unit_square, Mesh, RegionTags, Tag};
use crate::navier_stokes::{newton_solve_from, NsConfig};
use crate::stokes::{solve_stokes, BoundaryCondition, ElementPair, FlowProblem, Solution, Stabilization};
use crate::wss::{
    boundary_flux_wss, boundary_flux_wss_2d_per_side, project_wss, project_wss_2d_per_side, wss_stats, WssField,
    WssMethod, WSS_NORM_DEGREE,
};

/// Quadrature degree of velocity and pressure error norms.
pub const ERROR_NORM_DEGREE: usize = 8;

/// The benchmark configurations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    /// Unit square Stokes flow with a polynomial exact solution.
    Stokes2d,
    /// Stokes flow in a straight pipe.
    Poiseuille3d,
    /// Steady Navier-Stokes flow in the same pipe, compared with Stokes.
    NsPipe,
}

impl CaseKind {
    pub const ALL: [CaseKind; 3] = [CaseKind::Stokes2d, CaseKind::Poiseuille3d, CaseKind::NsPipe];

    pub fn name(self) -> &'static str {
        match self {
            CaseKind::Stokes2d => "stokes2d",
            CaseKind::Poiseuille3d => "poiseuille3d",
            CaseKind::NsPipe => "ns_pipe",
        }
    }

    pub fn parse(s: &str) -> Option<CaseKind> {
        CaseKind::ALL.into_iter().find(|c| c.name() == s)
    }

    pub fn dim(self) -> usize {
        match self {
            CaseKind::Stokes2d => 2,
            _ => 3,
        }
    }

    pub fn analytic(self) -> AnalyticCase {
        match self {
            CaseKind::Stokes2d => AnalyticCase::stokes2d(),
            _ => AnalyticCase::poiseuille3d(),
        }
    }

    /// Regions on which WSS is evaluated.
    pub fn wss_region(self) -> Vec<Tag> {
        let tags = RegionTags::STANDARD;
        match self {
            CaseKind::Stokes2d => tags.sides().to_vec(),
            _ => vec![tags.wall],
        }
    }
}

impl fmt::Display for CaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Optional replacements of the default solver parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub beta: Option<f64>,
    pub gamma_p: Option<f64>,
    pub gamma_v: Option<f64>,
    pub alpha_i: Option<f64>,
    pub alpha_v: Option<f64>,
    pub alpha_p: Option<f64>,
    pub newton_tol: Option<f64>,
    pub max_newton_iters: Option<usize>,
}

/// A convergence study: case, discretization, WSS methods and mesh levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub case: CaseKind,
    pub element: ElementPair,
    pub wss: Vec<WssMethod>,
    pub levels: Vec<usize>,
    pub overrides: Overrides,
    /// Number of levels solved concurrently.
    pub workers: usize,
    /// Number of coarsest levels left out of the rate fits.
    pub fit_skip: usize,
}

impl CaseSpec {
    /// All four WSS methods on the default levels of the case.
    pub fn new(case: CaseKind, element: ElementPair) -> CaseSpec {
        CaseSpec {
            case,
            element,
            wss: WssMethod::ALL.to_vec(),
            levels: default_levels(case),
            overrides: Overrides::default(),
            workers: 1,
            fit_skip: 0,
        }
    }

    pub fn with_levels(mut self, levels: impl IntoIterator<Item = usize>) -> Self {
        self.levels = levels.into_iter().collect();
        self
    }

    pub fn with_wss(mut self, methods: impl IntoIterator<Item = WssMethod>) -> Self {
        self.wss = methods.into_iter().collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "rate fitting needs at least 2 levels, got {:?}",
                self.levels
            )));
        }
        if self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!("levels must increase, got {:?}", self.levels)));
        }
        if self.levels.len() < self.fit_skip + 2 {
            return Err(Error::InvalidArgument(format!(
                "skipping {} levels leaves fewer than 2 of {:?} for rate fitting",
                self.fit_skip, self.levels
            )));
        }
        if self.workers == 0 {
            return Err(Error::InvalidArgument("workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// Levels solved by default: unit squares with 8 to 128 cells per side, and
/// pipes with 16 to 40 points around the circumference.
pub fn default_levels(_case: CaseKind) -> Vec<usize> {
    (0..5).collect()
}

/// Mesh of a level together with its target edge length.
pub struct LevelMesh {
    pub mesh: Arc<Mesh>,
    pub target_edge: f64,
}

/// Builds the mesh of a level: `2^(3 + level)` cells per side of the unit
/// square, or `16 + 6 level` points around the pipe (a target edge of
/// about 0.4 mm on level 0) with the axial spacing matched to the
/// circumferential one.
pub fn level_mesh(case: CaseKind, level: usize) -> Result<LevelMesh> {
    match case {
        CaseKind::Stokes2d => {
            if level > 10 {
                return Err(Error::InvalidArgument(format!("level {level} is too fine for the unit square")));
            }
            let n = 1usize << (3 + level);
            Ok(LevelMesh {
                mesh: Arc::new(generate_unit_square(n)?),
                target_edge: 1.0 / n as f64,
            })
        }
        _ => {
            let n_circum = 16 + 6 * level;
            let edge = std::f64::consts::TAU * PIPE_RADIUS / n_circum as f64;
            let n_axial = ((PIPE_LENGTH / edge).round() as usize).max(1);
            Ok(LevelMesh {
                mesh: Arc::new(generate_cylinder(PIPE_RADIUS, PIPE_LENGTH, n_circum, n_axial)?),
                target_edge: edge,
            })
        }
    }
}

/// Flow problem of a case on a given mesh. P2/P1 imposes Dirichlet data
/// strongly; P1/P1 imposes it with Nitsche's method and is stabilized
/// (Burman-Hansbo for Stokes, interior penalty for Navier-Stokes).
pub fn build_problem(case: CaseKind, element: ElementPair, mesh: Arc<Mesh>, overrides: &Overrides) -> Result<FlowProblem> {
    if mesh.dim() != case.dim() {
        return Err(Error::InconsistentDimension(format!(
            "case {case} needs a {}D mesh, got {}D",
            case.dim(),
            mesh.dim()
        )));
    }
    let exact = case.analytic();
    let tags = RegionTags::STANDARD;
    let markers = mesh.markers();
    let required: Vec<Tag> = match case {
        CaseKind::Stokes2d => tags.sides().to_vec(),
        _ => vec![tags.inlet, tags.outlet, tags.wall],
    };
    if let Some(missing) = required.iter().find(|t| !markers.contains(t)) {
        return Err(Error::EmptyRegion(vec![*missing]));
    }
    let dirichlet = |g: CoordFn| match element {
        ElementPair::P2P1 => BoundaryCondition::StrongDirichlet(g),
        ElementPair::P1P1 => BoundaryCondition::NitscheDirichlet(g),
    };
    let v = exact.velocity.clone();
    let g: CoordFn = Arc::new(move |x| v(x));
    let mut problem = FlowProblem::new(mesh, element, exact.stress, exact.viscosity).with_density(exact.density);
    match case {
        CaseKind::Stokes2d => {
            for side in tags.sides() {
                problem = problem.with_bc(side, dirichlet(g.clone()));
            }
        }
        _ => {
            let zero: CoordFn = Arc::new(|_| [0.0; 3]);
            problem = problem
                .with_bc(tags.inlet, dirichlet(g))
                .with_bc(tags.wall, dirichlet(zero))
                .with_bc(tags.outlet, BoundaryCondition::TangentialZero);
        }
    }
    if element == ElementPair::P1P1 {
        let default = match case {
            CaseKind::Stokes2d => Stabilization::BH_2D,
            CaseKind::Poiseuille3d => Stabilization::BH_3D,
            CaseKind::NsPipe => Stabilization::CIP,
        };
        let stabilization = match default {
            Stabilization::BurmanHansbo { gamma_p, gamma_v } => Stabilization::BurmanHansbo {
                gamma_p: overrides.gamma_p.unwrap_or(gamma_p),
                gamma_v: overrides.gamma_v.unwrap_or(gamma_v),
            },
            Stabilization::InteriorPenalty {
                alpha_i,
                alpha_v,
                alpha_p,
            } => Stabilization::InteriorPenalty {
                alpha_i: overrides.alpha_i.unwrap_or(alpha_i),
                alpha_v: overrides.alpha_v.unwrap_or(alpha_v),
                alpha_p: overrides.alpha_p.unwrap_or(alpha_p),
            },
            Stabilization::None => Stabilization::None,
        };
        problem = problem.with_stabilization(stabilization);
    }
    if let Some(beta) = overrides.beta {
        problem = problem.with_beta(beta);
    }
    problem.validate()?;
    Ok(problem)
}

/// Newton parameters with overrides applied.
pub fn ns_config(overrides: &Overrides) -> NsConfig {
    let mut config = NsConfig::default();
    if let Some(tol) = overrides.newton_tol {
        config.newton_tol = tol;
    }
    if let Some(n) = overrides.max_newton_iters {
        config.max_newton_iters = n;
    }
    config
}

/// WSS of one method on the evaluation region of a case. The unit square is
/// evaluated side by side.
pub fn compute_wss(case: CaseKind, problem: &FlowProblem, solution: &Solution, method: WssMethod) -> Result<WssField> {
    match (case, method) {
        (CaseKind::Stokes2d, WssMethod::Bflux) => boundary_flux_wss_2d_per_side(solution, problem),
        (CaseKind::Stokes2d, m) => project_wss_2d_per_side(solution, problem, m.space()),
        (_, WssMethod::Bflux) => boundary_flux_wss(solution, problem, &case.wss_region()),
        (_, m) => project_wss(
            &solution.velocity,
            problem.viscosity,
            problem.stress,
            &case.wss_region(),
            m.space(),
        ),
    }
}

/// Error and mean magnitude of one WSS method on one level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WssLevel {
    pub error: f64,
    /// Area-weighted mean of `|tau|` over the region.
    pub mean: f64,
}

/// Navier-Stokes versus Stokes comparison on one level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NsLevel {
    pub newton_iterations: usize,
    /// Relative residual after the last Newton update.
    pub final_residual: f64,
    /// `||v_NS - v_Stokes|| / ||v_Stokes||` in L2.
    pub velocity_rel_diff: f64,
    /// Stokes WSS errors and means, per method.
    pub stokes_wss: BTreeMap<WssMethod, WssLevel>,
    /// `|mean_NS - mean_Stokes| / mean_Stokes`, per method.
    pub wss_mean_rel_diff: BTreeMap<WssMethod, f64>,
}

/// Results of one mesh level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub level: usize,
    /// Largest cell circumdiameter.
    pub h: f64,
    /// Target edge length of a generated mesh; `None` for mesh files.
    pub target_edge: Option<f64>,
    pub cells: usize,
    pub dofs_v: usize,
    pub dofs_p: usize,
    pub err_v: f64,
    pub err_p: f64,
    pub wss: BTreeMap<WssMethod, WssLevel>,
    /// `||tau_bflux - tau_cg1|| / ||tau_cg1||`, when both were computed.
    pub bflux_cg1_rel_diff: Option<f64>,
    pub ns: Option<NsLevel>,
    /// Wall-clock seconds spent on the level.
    pub wall_time: f64,
}

/// Solves one level of a study on its generated mesh.
pub fn run_level(spec: &CaseSpec, level: usize) -> Result<LevelResult> {
    let lm = level_mesh(spec.case, level)?;
    run_on_mesh(spec, level, lm.mesh, Some(lm.target_edge))
}

/// Solves a case on a given mesh and evaluates all errors.
pub fn run_on_mesh(spec: &CaseSpec, level: usize, mesh: Arc<Mesh>, target_edge: Option<f64>) -> Result<LevelResult> {
    let start = Instant::now();
    let case = spec.case;
    let exact = case.analytic();
    let problem = build_problem(case, spec.element, mesh.clone(), &spec.overrides)?;
    let stokes = solve_stokes(&problem)?;
    // Per-method errors and means, and the relative L2 difference between
    // the boundary-flux and CG1 fields when both are requested.
    let wss_of = |solution: &Solution| -> Result<(BTreeMap<WssMethod, WssLevel>, Option<f64>)> {
        let mut out = BTreeMap::new();
        let mut fields = BTreeMap::new();
        for &m in &spec.wss {
            let field = compute_wss(case, &problem, solution, m)?;
            let error = field.l2_error_tagged(&|tag, x, n| exact.wss_exact(tag, x, n), WSS_NORM_DEGREE);
            let mean = wss_stats(&field)?.avg;
            out.insert(m, WssLevel { error, mean });
            if matches!(m, WssMethod::Bflux | WssMethod::Cg1) {
                fields.insert(m, field);
            }
        }
        let diff = match (fields.get(&WssMethod::Bflux), fields.get(&WssMethod::Cg1)) {
            (Some(b), Some(c)) => Some(b.l2_difference(c, WSS_NORM_DEGREE) / c.l2_norm(WSS_NORM_DEGREE)),
            _ => None,
        };
        Ok((out, diff))
    };
    let (stokes_wss, stokes_diff) = wss_of(&stokes)?;
    let (solution, (wss, bflux_cg1_rel_diff), ns) = if case == CaseKind::NsPipe {
        let ns = newton_solve_from(&problem, &ns_config(&spec.overrides), &stokes)?;
        let (wss, wss_diff) = wss_of(&ns.solution)?;
        let last = ns.log.last().expect("at least one continuation step");
        let diff = Field::new(
            stokes.velocity.space().clone(),
            ns.solution
                .velocity
                .values()
                .iter()
                .zip(stokes.velocity.values())
                .map(|(a, b)| a - b)
                .collect(),
        )?;
        let zero = |_| [0.0; 3];
        let velocity_rel_diff =
            diff.l2_error(&zero, ERROR_NORM_DEGREE) / stokes.velocity.l2_error(&zero, ERROR_NORM_DEGREE);
        let wss_mean_rel_diff = wss
            .iter()
            .map(|(m, w)| (*m, (w.mean - stokes_wss[m].mean).abs() / stokes_wss[m].mean))
            .collect();
        let info = NsLevel {
            newton_iterations: ns.log.iter().map(|s| s.iterations()).sum(),
            final_residual: *last.residuals.last().unwrap_or(&f64::NAN),
            velocity_rel_diff,
            stokes_wss,
            wss_mean_rel_diff,
        };
        (ns.solution, (wss, wss_diff), Some(info))
    } else {
        (stokes, (stokes_wss, stokes_diff), None)
    };
    let v = exact.velocity.clone();
    let p = exact.pressure.clone();
    let err_v = solution.velocity.l2_error(&|x| v(x), ERROR_NORM_DEGREE);
    let err_p = solution.pressure.l2_error(&|x| [p(x), 0.0, 0.0], ERROR_NORM_DEGREE);
    Ok(LevelResult {
        level,
        h: mesh.max_h(),
        target_edge,
        cells: mesh.n_cells(),
        dofs_v: solution.velocity.values().len(),
        dofs_p: solution.pressure.values().len(),
        err_v,
        err_p,
        wss,
        bflux_cg1_rel_diff,
        ns,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
