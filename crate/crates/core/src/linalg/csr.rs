use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted, unique column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate triplets. The result does not depend on triplet order:
    /// duplicates are accumulated in a canonical (sorted) order.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<CsrMatrix> {
        if let Some(&(row, col, _)) = triplets.iter().find(|t| t.0 >= nrows || t.1 >= ncols) {
            return Err(Error::IndexOutOfBounds { row, col, nrows, ncols });
        }
        let mut sorted = triplets.to_vec();
        sorted.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Matrix with the given pattern and all values zero. Column indices of
    /// each row must be sorted and unique.
    pub fn from_pattern(nrows: usize, ncols: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>) -> Result<CsrMatrix> {
        if row_ptr.len() != nrows + 1 || *row_ptr.last().unwrap() != col_idx.len() {
            return Err(Error::InvalidArgument("inconsistent CSR row offsets".into()));
        }
        for r in 0..nrows {
            let cols = &col_idx[row_ptr[r]..row_ptr[r + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!("row {r} columns not sorted and unique")));
            }
            if let Some(&col) = cols.iter().find(|&&c| c >= ncols) {
                return Err(Error::IndexOutOfBounds { row: r, col, nrows, ncols });
            }
        }
        let nnz = col_idx.len();
        Ok(CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        })
    }

    pub fn identity(n: usize) -> CsrMatrix {
        CsrMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    pub fn row_mut(&mut self, r: usize) -> (&[usize], &mut [f64]) {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[range.clone()], &mut self.values[range])
    }

    /// Position of entry `(r, c)` in the value array, if it is in the pattern.
    #[inline]
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let start = self.row_ptr[r];
        self.col_idx[start..self.row_ptr[r + 1]]
            .binary_search(&c)
            .ok()
            .map(|k| start + k)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.position(r, c).map_or(0.0, |k| self.values[k])
    }

    /// Adds `v` to entry `(r, c)`, which must be in the pattern.
    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let k = self
            .position(r, c)
            .unwrap_or_else(|| panic!("entry ({r}, {c}) outside the sparsity pattern"));
        self.values[k] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect()
    }

    /// `A^T x`.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += v * xr;
            }
        }
        y
    }

    /// Replaces row `r` by `diag * e_r`.
    pub fn set_identity_row(&mut self, r: usize, diag: f64) {
        let (cols, vals) = self.row_mut(r);
        for (&c, v) in cols.iter().zip(vals.iter_mut()) {
            *v = if c == r { diag } else { 0.0 };
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.nrows == self.ncols
            && (0..self.nrows).all(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).all(|(&c, &v)| (v - self.get(c, r)).abs() <= tol)
            })
    }

    /// Writes the matrix in MatrixMarket coordinate format.
    pub fn write_matrix_market(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                writeln!(out, "{} {} {:e}", r + 1, c + 1, v)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Collects the nonzero pattern of a matrix row by row.
#[derive(Clone, Debug)]
pub struct SparsityBuilder {
    ncols: usize,
    rows: Vec<Vec<usize>>,
}

impl SparsityBuilder {
    pub fn new(nrows: usize, ncols: usize) -> SparsityBuilder {
        SparsityBuilder {
            ncols,
            rows: vec![Vec::new(); nrows],
        }
    }

    pub fn insert(&mut self, r: usize, c: usize) {
        self.rows[r].push(c);
    }

    /// Inserts the dense block `rows x cols`.
    pub fn insert_block(&mut self, rows: &[usize], cols: &[usize]) {
        for &r in rows {
            self.rows[r].extend_from_slice(cols);
        }
    }

    pub fn build(self) -> Result<CsrMatrix> {
        let nrows = self.rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for mut row in self.rows {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(&row);
            row_ptr.push(col_idx.len());
        }
        CsrMatrix::from_pattern(nrows, self.ncols, row_ptr, col_idx)
    }
}

/// Sparse matrix together with a right-hand side.
#[derive(Clone, Debug)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

impl SparseSystem {
    pub fn new(matrix: CsrMatrix, rhs: Vec<f64>) -> Result<SparseSystem> {
        if matrix.nrows() != rhs.len() {
            return Err(Error::InvalidArgument(format!(
                "matrix has {} rows but right-hand side has length {}",
                matrix.nrows(),
                rhs.len()
            )));
        }
        Ok(SparseSystem { matrix, rhs })
    }

    pub fn size(&self) -> usize {
        self.rhs.len()
    }
}

/// Builds a matrix from triplets, summing duplicates.
pub fn assemble(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<CsrMatrix> {
    CsrMatrix::from_triplets(nrows, ncols, triplets)
}
