//! Wall shear stress: L2 projection onto boundary spaces, boundary-flux
//! evaluation, statistics, low-shear area and export.

mod export;
mod field;
mod flux;
mod projection;

pub use export::{write_wss_csv, write_wss_vtu};
pub use field::{lsa, wss_stats, BoundarySpaceKind, TraceFn, WssField, WssMethod, WssPiece, WssStats, WSS_NORM_DEGREE};
pub use flux::{boundary_flux_wss, boundary_flux_wss_2d_per_side, project_wss_2d_per_side};
pub use projection::project_wss;
