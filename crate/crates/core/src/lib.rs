//! Mixed finite elements for Stokes and steady Navier-Stokes flow with
//! wall shear stress post-processing.

pub mod error;
pub mod fem;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod navier_stokes;
pub mod stokes;
pub mod wss;

pub use error::{Error, Result};
