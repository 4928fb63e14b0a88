use std::panic::AssertUnwindSafe;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::lu::{factorize_symbolic_lu, LuRef, NumericLu, SymbolicLu};
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut, Par};

use super::csr::{CsrMatrix, SparseSystem};
use crate::error::{Error, Result};

/// Relative residual `||Ax - b|| / (1 + ||b||)` required of every solve.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

const REFINEMENT_STEPS: usize = 3;

/// A trailing row and column with more than this many multiples of
/// `sqrt(n)` entries is treated as a border and eliminated separately.
const DENSE_FACTOR: f64 = 10.0;

/// Sparse LU factorization of a square matrix.
///
/// A dense trailing row and column (such as a mean-value constraint) makes
/// the symbolic fill estimate of the sparse LU explode. Such a border is
/// split off: with `A = [K c; r^T d]` the factorization works on
/// `M = K + s e_k e_k^T`, which is nonsingular even when `K` has a one
/// dimensional null space, and recovers the bordered solution from three
/// solves with `M` and a 2x2 system.
pub struct Factorization<'a> {
    matrix: &'a CsrMatrix,
    inner: Inner,
}

enum Inner {
    Direct(SparseLu),
    Bordered(Border),
}

struct Border {
    lu: SparseLu,
    k: usize,
    shift: f64,
    row: Vec<(usize, f64)>,
    corner: f64,
    /// `M^{-1} c`
    mc: Vec<f64>,
    /// `M^{-1} e_k`
    mk: Vec<f64>,
}

impl<'a> Factorization<'a> {
    pub fn new(matrix: &'a CsrMatrix) -> Result<Factorization<'a>> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::InvalidArgument(format!(
                "cannot factor a {}x{} matrix",
                n,
                matrix.ncols()
            )));
        }
        if let Some(r) = (0..n).find(|&r| matrix.row(r).1.iter().all(|&v| v == 0.0)) {
            return Err(Error::SingularMatrix { row: r });
        }
        if matrix.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericallySingular);
        }
        let inner = match border_split(matrix)? {
            Some(border) => Inner::Bordered(border),
            None => Inner::Direct(SparseLu::new(matrix)?),
        };
        Ok(Factorization { matrix, inner })
    }

    /// Solves `A x = b` with a few steps of iterative refinement and checks
    /// the relative residual.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.matrix.nrows();
        if b.len() != n {
            return Err(Error::InvalidArgument(format!(
                "right-hand side has length {} for a system of size {n}",
                b.len()
            )));
        }
        let b_norm = norm(b);
        let mut x = self.apply(b);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericallySingular);
        }
        let mut res = residual(self.matrix, &x, b);
        let mut rel = norm(&res) / (1.0 + b_norm);
        for _ in 0..REFINEMENT_STEPS {
            if rel <= 0.01 * RESIDUAL_TOLERANCE {
                break;
            }
            let dx = self.apply(&res);
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
            let trial_res = residual(self.matrix, &trial, b);
            let trial_rel = norm(&trial_res) / (1.0 + b_norm);
            if !(trial_rel < rel) {
                break;
            }
            x = trial;
            res = trial_res;
            rel = trial_rel;
        }
        if !rel.is_finite() {
            return Err(Error::NumericallySingular);
        }
        if rel > RESIDUAL_TOLERANCE {
            return Err(Error::ResidualTooLarge {
                achieved: rel,
                tolerance: RESIDUAL_TOLERANCE,
            });
        }
        Ok(x)
    }

    fn apply(&self, b: &[f64]) -> Vec<f64> {
        match &self.inner {
            Inner::Direct(lu) => {
                let mut x = b.to_vec();
                lu.solve_in_place(&mut x);
                x
            }
            Inner::Bordered(border) => border.apply(b),
        }
    }
}

impl Border {
    fn apply(&self, b: &[f64]) -> Vec<f64> {
        let m = b.len() - 1;
        let mut a = b[..m].to_vec();
        self.lu.solve_in_place(&mut a);
        let dot = |v: &[f64]| self.row.iter().map(|&(j, r)| r * v[j]).sum::<f64>();
        // Unknowns: the border value `l` and `t = x_k`, with
        // x = a - l mc + s t mk.
        let (a11, a12, b1) = (1.0 - self.shift * self.mk[self.k], self.mc[self.k], a[self.k]);
        let (a21, a22, b2) = (
            self.shift * dot(&self.mk),
            self.corner - dot(&self.mc),
            b[m] - dot(&a),
        );
        let det = a11 * a22 - a12 * a21;
        let l = (a11 * b2 - a21 * b1) / det;
        let t = (a22 * b1 - a12 * b2) / det;
        let mut x: Vec<f64> = (0..m)
            .map(|i| a[i] - l * self.mc[i] + self.shift * t * self.mk[i])
            .collect();
        x.push(l);
        x
    }
}

/// Splits off a dense trailing row and column, if there is one.
fn border_split(matrix: &CsrMatrix) -> Result<Option<Border>> {
    let n = matrix.nrows();
    let threshold = DENSE_FACTOR * (n as f64).sqrt();
    let m = n.saturating_sub(1);
    let last = matrix.row(m);
    if n < 2 || (last.0.len() as f64) <= threshold {
        return Ok(None);
    }
    let mut col = vec![0.0; m];
    let mut triplets = Vec::with_capacity(matrix.nnz());
    for r in 0..m {
        let (cols, vals) = matrix.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            if c < m {
                triplets.push((r, c, v));
            } else {
                col[r] = v;
            }
        }
    }
    let row: Vec<(usize, f64)> = last
        .0
        .iter()
        .zip(last.1)
        .filter(|(&c, _)| c < m)
        .map(|(&c, &v)| (c, v))
        .collect();
    let corner = matrix.get(m, m);
    // Shift the diagonal where the border couples most strongly; the shift
    // is scaled to the magnitude of that row.
    let Some(&(k, _)) = row
        .iter()
        .filter(|&&(j, _)| col[j] != 0.0)
        .max_by(|a, b| (a.1 * col[a.0]).abs().total_cmp(&(b.1 * col[b.0]).abs()))
    else {
        return Ok(None);
    };
    let shift = matrix
        .row(k)
        .1
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    triplets.push((k, k, shift));
    let shifted = CsrMatrix::from_triplets(m, m, &triplets)?;
    let lu = SparseLu::new(&shifted)?;
    let mut mc = col;
    lu.solve_in_place(&mut mc);
    let mut mk = vec![0.0; m];
    mk[k] = 1.0;
    lu.solve_in_place(&mut mk);
    Ok(Some(Border {
        lu,
        k,
        shift,
        row,
        corner,
        mc,
        mk,
    }))
}

/// The CSR arrays of `A` are handed to faer as the CSC arrays of `A^T`, so
/// solves with `A` go through the transposed triangular solves.
struct SparseLu {
    symbolic: SymbolicLu<usize>,
    numeric: NumericLu<usize, f64>,
}

impl SparseLu {
    fn new(matrix: &CsrMatrix) -> Result<SparseLu> {
        let n = matrix.nrows();
        // Explicit zeros (eliminated Dirichlet couplings) would only add
        // fill, so the factored pattern keeps nonzeros and the diagonal.
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(matrix.nnz());
        let mut values = Vec::with_capacity(matrix.nnz());
        row_ptr.push(0);
        for r in 0..n {
            let (cols, vals) = matrix.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if v != 0.0 || c == r {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let structure = SymbolicSparseColMatRef::new_checked(n, n, &row_ptr, None, &col_idx);
        let symbolic = factorize_symbolic_lu(structure, Default::default())
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let transposed = SparseColMatRef::new(structure, &values);
        let mut numeric = NumericLu::new();
        let mut buffer = MemBuffer::try_new(
            symbolic.factorize_numeric_lu_scratch::<f64>(Par::Seq, Default::default()),
        )
        .map_err(|_| Error::Factorization("workspace allocation failed".into()))?;
        // The simplicial kernel panics on an exactly zero pivot instead of
        // returning an error.
        std::panic::catch_unwind(AssertUnwindSafe(|| {
            symbolic
                .factorize_numeric_lu(
                    &mut numeric,
                    transposed,
                    Par::Seq,
                    MemStack::new(&mut buffer),
                    Default::default(),
                )
                .map(|_| ())
        }))
        .map_err(|_| Error::NumericallySingular)?
        .map_err(|e| match e {
            LuError::SymbolicSingular { index } => Error::SingularMatrix { row: index },
            LuError::Generic(e) => Error::Factorization(format!("{e:?}")),
        })?;
        Ok(SparseLu { symbolic, numeric })
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let n = x.len();
        // SAFETY: `numeric` was produced by `symbolic.factorize_numeric_lu`
        // on a matrix with the structure used to build `symbolic`.
        let lu = unsafe { LuRef::new_unchecked(&self.symbolic, &self.numeric) };
        let mut buffer =
            MemBuffer::new(self.symbolic.solve_transpose_in_place_scratch::<f64>(1, Par::Seq));
        lu.solve_transpose_in_place_with_conj(
            Conj::No,
            MatMut::from_column_major_slice_mut(x, n, 1),
            Par::Seq,
            MemStack::new(&mut buffer),
        );
    }
}

/// Solves a square sparse system by LU factorization.
pub fn solve(system: &SparseSystem) -> Result<Vec<f64>> {
    Factorization::new(&system.matrix)?.solve(&system.rhs)
}

fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    a.matvec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect()
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
