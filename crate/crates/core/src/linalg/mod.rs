//! Sparse matrices, assembly and direct solves.

mod csr;
mod solve;

pub use csr::{assemble, CsrMatrix, SparseSystem, SparsityBuilder};
pub use solve::{solve, Factorization, RESIDUAL_TOLERANCE};

pub(crate) use solve::norm;
