use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{CoordFn, ElementKind, Field};
use crate::mesh::{Mesh, Tag};

/// Velocity/pressure element pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementPair {
    /// Taylor-Hood: quadratic velocity, linear pressure.
    P2P1,
    /// Equal-order linear velocity and pressure with jump stabilization.
    P1P1,
}

impl ElementPair {
    pub fn velocity_kind(self) -> ElementKind {
        match self {
            ElementPair::P2P1 => ElementKind::P2,
            ElementPair::P1P1 => ElementKind::P1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ElementPair::P2P1 => "p2p1",
            ElementPair::P1P1 => "p1p1",
        }
    }

    /// Cell quadrature degree used in assembly.
    pub fn cell_quad_degree(self) -> usize {
        match self {
            ElementPair::P2P1 => 5,
            ElementPair::P1P1 => 3,
        }
    }
}

/// Viscous part of the Cauchy stress.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StressModel {
    /// `T = -p I + mu grad v`.
    FullGradient,
    /// `T = -p I + 2 mu D(v)` with `D = (grad v + grad v^T) / 2`.
    SymmetricGradient,
}

#[derive(Clone)]
pub enum BoundaryCondition {
    /// Velocity prescribed by replacing the rows of the boundary dofs.
    StrongDirichlet(CoordFn),
    /// Velocity imposed weakly with the non-symmetric Nitsche method.
    NitscheDirichlet(CoordFn),
    /// Natural outflow condition `T n = 0`.
    DoNothing,
    /// Do-nothing in the normal direction, tangential velocity strongly zero.
    /// The marker must be a flat facet set with an axis-aligned normal.
    TangentialZero,
}

impl BoundaryCondition {
    pub fn mode(&self) -> &'static str {
        match self {
            BoundaryCondition::StrongDirichlet(_) => "strong_dirichlet",
            BoundaryCondition::NitscheDirichlet(_) => "nitsche_dirichlet",
            BoundaryCondition::DoNothing => "do_nothing",
            BoundaryCondition::TangentialZero => "tangential_zero",
        }
    }

    pub fn dirichlet_value(&self) -> Option<&CoordFn> {
        match self {
            BoundaryCondition::StrongDirichlet(g) | BoundaryCondition::NitscheDirichlet(g) => Some(g),
            _ => None,
        }
    }
}

impl fmt::Debug for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mode())
    }
}

/// Interior-facet jump stabilization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stabilization {
    None,
    /// Pressure-gradient and divergence jump penalties with weights
    /// `gamma h^(s+1)`, `s = 2` where `nu >= h_K`, else `s = 1`.
    BurmanHansbo { gamma_p: f64, gamma_v: f64 },
    /// Continuous interior penalty on velocity and pressure gradient jumps,
    /// with an additional streamline-weighted velocity term.
    InteriorPenalty { alpha_i: f64, alpha_v: f64, alpha_p: f64 },
}

impl Stabilization {
    pub const BH_2D: Stabilization = Stabilization::BurmanHansbo {
        gamma_p: 1e-2,
        gamma_v: 1e-2,
    };
    pub const BH_3D: Stabilization = Stabilization::BurmanHansbo {
        gamma_p: 1.0,
        gamma_v: 1e-3,
    };
    pub const CIP: Stabilization = Stabilization::InteriorPenalty {
        alpha_i: 1e-3,
        alpha_v: 1e-3,
        alpha_p: 1.0,
    };

    fn validate(&self) -> Result<()> {
        let weights: &[f64] = match self {
            Stabilization::None => &[],
            Stabilization::BurmanHansbo { gamma_p, gamma_v } => &[*gamma_p, *gamma_v],
            Stabilization::InteriorPenalty {
                alpha_i,
                alpha_v,
                alpha_p,
            } => &[*alpha_i, *alpha_v, *alpha_p],
        };
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidProblem(format!("stabilization weights must be non-negative: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NitscheConfig {
    /// Dimensionless penalty parameter.
    pub beta: f64,
}

impl Default for NitscheConfig {
    fn default() -> Self {
        NitscheConfig { beta: 100.0 }
    }
}

/// Stationary incompressible flow problem.
#[derive(Clone)]
pub struct FlowProblem {
    pub mesh: Arc<Mesh>,
    pub element: ElementPair,
    pub stress: StressModel,
    /// Dynamic viscosity in Pa s.
    pub viscosity: f64,
    /// Density in kg/m^3.
    pub density: f64,
    pub body_force: Option<CoordFn>,
    pub bcs: BTreeMap<Tag, BoundaryCondition>,
    pub stabilization: Stabilization,
    pub nitsche: NitscheConfig,
}

impl fmt::Debug for FlowProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FlowProblem")
            .field("element", &self.element)
            .field("stress", &self.stress)
            .field("viscosity", &self.viscosity)
            .field("density", &self.density)
            .field("bcs", &self.bcs)
            .field("stabilization", &self.stabilization)
            .field("nitsche", &self.nitsche)
            .finish_non_exhaustive()
    }
}

impl FlowProblem {
    /// Problem with unit density, no body force, no boundary conditions,
    /// no stabilization and the default Nitsche penalty.
    pub fn new(mesh: Arc<Mesh>, element: ElementPair, stress: StressModel, viscosity: f64) -> FlowProblem {
        FlowProblem {
            mesh,
            element,
            stress,
            viscosity,
            density: 1.0,
            body_force: None,
            bcs: BTreeMap::new(),
            stabilization: Stabilization::None,
            nitsche: NitscheConfig::default(),
        }
    }

    pub fn with_bc(mut self, tag: Tag, bc: BoundaryCondition) -> Self {
        self.bcs.insert(tag, bc);
        self
    }

    pub fn with_stabilization(mut self, stabilization: Stabilization) -> Self {
        self.stabilization = stabilization;
        self
    }

    pub fn with_density(mut self, density: f64) -> Self {
        self.density = density;
        self
    }

    pub fn with_body_force(mut self, f: CoordFn) -> Self {
        self.body_force = Some(f);
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.nitsche.beta = beta;
        self
    }

    /// Kinematic viscosity `mu / rho`.
    pub fn kinematic_viscosity(&self) -> f64 {
        self.viscosity / self.density
    }

    /// True if no marker leaves the pressure level free, so that a mean-zero
    /// constraint is needed.
    pub fn needs_pressure_constraint(&self) -> bool {
        !self
            .bcs
            .values()
            .any(|bc| matches!(bc, BoundaryCondition::DoNothing | BoundaryCondition::TangentialZero))
    }

    pub fn validate(&self) -> Result<()> {
        for tag in self.mesh.markers() {
            if !self.bcs.contains_key(&tag) {
                return Err(Error::MissingBoundaryCondition(tag));
            }
        }
        if !(self.viscosity > 0.0 && self.viscosity.is_finite()) {
            return Err(Error::InvalidProblem(format!("viscosity must be positive, got {}", self.viscosity)));
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return Err(Error::InvalidProblem(format!("density must be positive, got {}", self.density)));
        }
        if !(self.nitsche.beta >= 0.0 && self.nitsche.beta.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "Nitsche penalty must be non-negative, got {}",
                self.nitsche.beta
            )));
        }
        self.stabilization.validate()?;
        match (self.element, self.stabilization) {
            (ElementPair::P1P1, Stabilization::None) => {
                return Err(Error::InvalidProblem("P1/P1 requires a stabilization".into()))
            }
            (ElementPair::P2P1, Stabilization::BurmanHansbo { .. } | Stabilization::InteriorPenalty { .. }) => {
                return Err(Error::InvalidProblem(
                    "jump stabilization is only implemented for P1/P1".into(),
                ))
            }
            _ => {}
        }
        Ok(())
    }

    /// Summary of every setting that affects the discrete operator.
    pub fn fingerprint(&self) -> ConfigFingerprint {
        let bcs: Vec<String> = self.bcs.iter().map(|(t, bc)| format!("{t}:{}", bc.mode())).collect();
        ConfigFingerprint(format!(
            "element={};stress={:?};mu={:e};rho={:e};beta={:e};stabilization={:?};bcs=[{}]",
            self.element.name(),
            self.stress,
            self.viscosity,
            self.density,
            self.nitsche.beta,
            self.stabilization,
            bcs.join(",")
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfigFingerprint(pub String);

impl fmt::Display for ConfigFingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Discrete velocity/pressure pair together with the configuration it solves.
#[derive(Clone, Debug)]
pub struct Solution {
    pub velocity: Field,
    pub pressure: Field,
    /// Lagrange multiplier of the mean-zero pressure constraint, if present.
    pub multiplier: Option<f64>,
    pub fingerprint: ConfigFingerprint,
    /// Whether the convective term was part of the solved equations.
    pub convective: bool,
}
