//! Closed-form benchmark solutions with their gradients and exact wall
//! shear stress traces.
//!
//! The 2D traces were derived by hand from `T = -p I + mu grad v` with
//! `v = (20 x y^3, 5 x^4 - 5 y^4)`: on each side of the unit square the
//! tangential traction is linear in the boundary coordinate (zero on the
//! left and bottom sides, `(0, 20)` on the right side and `(60 x, 0)` on the
//! top side). The registry test checks them against the gradients.

use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::geometry::{Mat3, Point};
use crate::mesh::{RegionTags, Tag};
use crate::stokes::StressModel;

/// Radius of the benchmark pipe in metres.
pub const PIPE_RADIUS: f64 = 1e-3;
/// Length of the benchmark pipe in metres.
pub const PIPE_LENGTH: f64 = 2e-3;
/// Dynamic viscosity of the pipe cases (density 1).
pub const PIPE_VISCOSITY: f64 = 4e-3;
/// Centreline inflow velocity of the pipe cases in m/s.
pub const PIPE_MAX_VELOCITY: f64 = 1.0;

pub type VectorFn = Arc<dyn Fn(Point) -> [f64; 3] + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type TensorFn = Arc<dyn Fn(Point) -> Mat3 + Send + Sync>;
/// Exact WSS as a function of a boundary point and the outward normal.
pub type WssTraceFn = Arc<dyn Fn(Point, Point) -> [f64; 3] + Send + Sync>;

/// Exact solution of a benchmark case.
#[derive(Clone)]
pub struct AnalyticCase {
    pub name: &'static str,
    pub dim: usize,
    pub viscosity: f64,
    pub density: f64,
    pub stress: StressModel,
    pub velocity: VectorFn,
    /// `g[i][j] = d v_i / d x_j`.
    pub velocity_gradient: TensorFn,
    pub velocity_laplacian: VectorFn,
    pub pressure: ScalarFn,
    pub pressure_gradient: VectorFn,
    pub body_force: VectorFn,
    /// Exact WSS trace per boundary region.
    pub wss: Vec<(Tag, WssTraceFn)>,
    /// Random interior points for the strong-form check.
    sample: fn(&mut StdRng) -> Point,
}

impl AnalyticCase {
    /// Unit square Stokes flow with `mu = 1` and no body force.
    pub fn stokes2d() -> AnalyticCase {
        let tags = RegionTags::STANDARD;
        let zero: WssTraceFn = Arc::new(|_, _| [0.0; 3]);
        AnalyticCase {
            name: "stokes2d",
            dim: 2,
            viscosity: 1.0,
            density: 1.0,
            stress: StressModel::FullGradient,
            velocity: Arc::new(|x| [20.0 * x[0] * x[1].powi(3), 5.0 * x[0].powi(4) - 5.0 * x[1].powi(4), 0.0]),
            velocity_gradient: Arc::new(|x| {
                [
                    [20.0 * x[1].powi(3), 60.0 * x[0] * x[1] * x[1], 0.0],
                    [20.0 * x[0].powi(3), -20.0 * x[1].powi(3), 0.0],
                    [0.0; 3],
                ]
            }),
            velocity_laplacian: Arc::new(|x| [120.0 * x[0] * x[1], 60.0 * x[0] * x[0] - 60.0 * x[1] * x[1], 0.0]),
            pressure: Arc::new(|x| 60.0 * x[0] * x[0] * x[1] - 20.0 * x[1].powi(3) - 5.0),
            pressure_gradient: Arc::new(|x| [120.0 * x[0] * x[1], 60.0 * x[0] * x[0] - 60.0 * x[1] * x[1], 0.0]),
            body_force: Arc::new(|_| [0.0; 3]),
            wss: vec![
                (tags.left, zero.clone()),
                (tags.right, Arc::new(|_, _| [0.0, 20.0, 0.0])),
                (tags.bottom, zero),
                (tags.top, Arc::new(|x, _| [60.0 * x[0], 0.0, 0.0])),
            ],
            sample: |rng| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), 0.0],
        }
    }

    /// Fully developed flow in the benchmark pipe along the z-axis, with
    /// density 1. It solves both the Stokes and the Navier-Stokes equations.
    pub fn poiseuille3d() -> AnalyticCase {
        let tags = RegionTags::STANDARD;
        let (r2, u, mu) = (PIPE_RADIUS * PIPE_RADIUS, PIPE_MAX_VELOCITY, PIPE_VISCOSITY);
        let dpdz = -4.0 * mu * u / r2;
        let wall_wss = -2.0 * mu * u / PIPE_RADIUS;
        AnalyticCase {
            name: "poiseuille3d",
            dim: 3,
            viscosity: mu,
            density: 1.0,
            stress: StressModel::SymmetricGradient,
            velocity: Arc::new(move |x| [0.0, 0.0, u * (1.0 - (x[0] * x[0] + x[1] * x[1]) / r2)]),
            velocity_gradient: Arc::new(move |x| {
                [[0.0; 3], [0.0; 3], [-2.0 * u * x[0] / r2, -2.0 * u * x[1] / r2, 0.0]]
            }),
            velocity_laplacian: Arc::new(move |_| [0.0, 0.0, -4.0 * u / r2]),
            pressure: Arc::new(move |x| dpdz * (x[2] - PIPE_LENGTH)),
            pressure_gradient: Arc::new(move |_| [0.0, 0.0, dpdz]),
            body_force: Arc::new(|_| [0.0; 3]),
            wss: vec![(tags.wall, Arc::new(move |_, _| [0.0, 0.0, wall_wss]))],
            sample: |rng| {
                let r = PIPE_RADIUS * rng.gen_range(0.0_f64..1.0).sqrt();
                let t = rng.gen_range(0.0..std::f64::consts::TAU);
                [r * t.cos(), r * t.sin(), rng.gen_range(0.0..PIPE_LENGTH)]
            },
        }
    }

    pub fn by_name(name: &str) -> Option<AnalyticCase> {
        match name {
            "stokes2d" => Some(Self::stokes2d()),
            "poiseuille3d" => Some(Self::poiseuille3d()),
            _ => None,
        }
    }

    /// Exact WSS trace on the given region, if the case defines one.
    pub fn wss_on(&self, tag: Tag) -> Option<&WssTraceFn> {
        self.wss.iter().find(|(t, _)| *t == tag).map(|(_, f)| f)
    }

    /// Exact WSS on the region `tag`; NaN where the case defines none, so
    /// that errors against an undefined trace cannot pass silently.
    pub fn wss_exact(&self, tag: Tag, x: Point, n: Point) -> [f64; 3] {
        self.wss_on(tag).map_or([f64::NAN; 3], |f| f(x, n))
    }

    /// Largest strong-form residual of the momentum and continuity
    /// equations `rho (grad v) v - mu lap v + grad p - f` and `div v` over
    /// `n` random interior points, scaled by the magnitude of the viscous
    /// term so the check is unit independent.
    pub fn strong_residual(&self, n: usize, seed: u64, convective: bool) -> f64 {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..n {
            let x = (self.sample)(&mut rng);
            let v = (self.velocity)(x);
            let g = (self.velocity_gradient)(x);
            let lap = (self.velocity_laplacian)(x);
            let gp = (self.pressure_gradient)(x);
            let f = (self.body_force)(x);
            let scale = 1.0 + self.viscosity * lap.iter().map(|c| c.abs()).fold(0.0, f64::max);
            for i in 0..self.dim {
                let conv: f64 = if convective {
                    self.density * (0..self.dim).map(|j| g[i][j] * v[j]).sum::<f64>()
                } else {
                    0.0
                };
                let r = conv - self.viscosity * lap[i] + gp[i] - f[i];
                worst = worst.max(r.abs() / scale);
            }
            let div: f64 = (0..self.dim).map(|i| g[i][i]).sum();
            worst = worst.max(div.abs() / scale);
        }
        worst
    }

    /// Tangential part of the exact traction `T n` computed from the
    /// gradients, for checking the stored traces.
    pub fn traction_wss(&self, x: Point, n: Point) -> [f64; 3] {
        let g = (self.velocity_gradient)(x);
        let p = (self.pressure)(x);
        let mut t = [0.0; 3];
        for i in 0..self.dim {
            for j in 0..self.dim {
                let sym = match self.stress {
                    StressModel::FullGradient => g[i][j],
                    StressModel::SymmetricGradient => g[i][j] + g[j][i],
                };
                t[i] += self.viscosity * sym * n[j];
            }
            t[i] -= p * n[i];
        }
        crate::geometry::tangential(&t, &n)
    }
}
