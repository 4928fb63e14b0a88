//! Collapsed-coordinate (conical product) quadrature on reference simplices.
//!
//! The reference simplex is `{xi_i >= 0, sum xi_i <= 1}`. Rules are built
//! from Gauss-Jacobi rules through the Duffy map, so any exactness degree is
//! available. Rules are cached per `(dim, degree)`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use faer::{Mat, Side};

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    dim: usize,
    degree: usize,
    /// Reference coordinates, `dim` entries per point.
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Rule on the `dim`-dimensional reference simplex exact for polynomials
    /// of total degree `degree`. `dim` may be 1, 2 or 3.
    pub fn simplex(dim: usize, degree: usize) -> Arc<QuadratureRule> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<QuadratureRule>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("quadrature cache poisoned");
        guard
            .entry((dim, degree))
            .or_insert_with(|| Arc::new(build(dim, degree)))
            .clone()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, q: usize) -> &[f64] {
        &self.points[q * self.dim..(q + 1) * self.dim]
    }

    /// Barycentric coordinates `(1 - sum xi, xi_1, ..., xi_dim)` of point `q`.
    pub fn barycentric(&self, q: usize) -> Vec<f64> {
        let xi = self.point(q);
        let mut out = Vec::with_capacity(self.dim + 1);
        out.push(1.0 - xi.iter().sum::<f64>());
        out.extend_from_slice(xi);
        out
    }

    pub fn weight(&self, q: usize) -> f64 {
        self.weights[q]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Measure of the reference simplex: 1, 1/2, 1/6.
    pub fn reference_measure(dim: usize) -> f64 {
        match dim {
            0 => 1.0,
            1 => 1.0,
            2 => 0.5,
            3 => 1.0 / 6.0,
            _ => unreachable!(),
        }
    }
}

fn build(dim: usize, degree: usize) -> QuadratureRule {
    // Each 1D factor must integrate a polynomial of degree `degree` against
    // its Jacobi weight, so n points with 2n - 1 >= degree suffice.
    let n = degree / 2 + 1;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match dim {
        1 => {
            let (x, w) = gauss_jacobi(n, 0.0);
            for (xi, wi) in x.iter().zip(&w) {
                points.push(*xi);
                weights.push(*wi);
            }
        }
        2 => {
            let (xu, wu) = gauss_jacobi(n, 1.0);
            let (xv, wv) = gauss_jacobi(n, 0.0);
            for (u, a) in xu.iter().zip(&wu) {
                for (v, b) in xv.iter().zip(&wv) {
                    points.extend_from_slice(&[*u, v * (1.0 - u)]);
                    weights.push(a * b);
                }
            }
        }
        3 => {
            let (xu, wu) = gauss_jacobi(n, 2.0);
            let (xv, wv) = gauss_jacobi(n, 1.0);
            let (xw, ww) = gauss_jacobi(n, 0.0);
            for (u, a) in xu.iter().zip(&wu) {
                for (v, b) in xv.iter().zip(&wv) {
                    for (w, c) in xw.iter().zip(&ww) {
                        points.extend_from_slice(&[*u, v * (1.0 - u), w * (1.0 - u) * (1.0 - v)]);
                        weights.push(a * b * c);
                    }
                }
            }
        }
        _ => panic!("no quadrature for dimension {dim}"),
    }
    QuadratureRule {
        dim,
        degree,
        points,
        weights,
    }
}

/// Gauss-Jacobi rule on `[0, 1]` for the weight `(1 - x)^alpha`, via the
/// Golub-Welsch eigenvalue method on the Jacobi matrix of `P_n^(alpha, 0)`.
pub(crate) fn gauss_jacobi(n: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    let beta = 0.0;
    let ab = alpha + beta;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    for k in 0..n {
        let kf = k as f64;
        diag[k] = if k == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
        };
        if k >= 1 {
            let num = 4.0 * kf * (kf + alpha) * (kf + beta) * (kf + ab);
            let den = (2.0 * kf + ab).powi(2) * (2.0 * kf + ab + 1.0) * (2.0 * kf + ab - 1.0);
            off[k - 1] = (num / den).sqrt();
        }
    }
    let jacobi = Mat::from_fn(n, n, |i, j| {
        if i == j {
            diag[i]
        } else if i == j + 1 {
            off[j]
        } else if j == i + 1 {
            off[i]
        } else {
            0.0
        }
    });
    let evd = jacobi
        .self_adjoint_eigen(Side::Lower)
        .expect("symmetric tridiagonal eigenproblem");
    // Integral of (1 - t)^alpha over [-1, 1].
    let mu0 = 2f64.powf(ab + 1.0) / (ab + 1.0);
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let t = s[i];
            let w = mu0 * u[(0, i)] * u[(0, i)];
            // Map [-1, 1] -> [0, 1]: (1 - t) = 2 (1 - x), dt = 2 dx.
            ((t + 1.0) / 2.0, w / 2f64.powf(alpha + 1.0))
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}
