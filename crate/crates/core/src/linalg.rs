//! Small dense linear-algebra kernels for the WLS normal equations.
//!
//! Problem sizes here are a few hundred states at most, so a dense
//! symmetric matrix with an in-place Cholesky factorization is the right
//! tool; no general matrix library is needed.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    /// The matrix is not (numerically) positive definite. Carries the
    /// pivot index that failed and a rough condition estimate from the
    /// pivots factored so far.
    #[error("matrix not positive definite at pivot {pivot} (condition estimate {cond_estimate:.3e})")]
    NotPositiveDefinite { pivot: usize, cond_estimate: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Dense square symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    /// Maximum absolute asymmetry `max |A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// In-place lower Cholesky factorization `A = L L^T`.
    pub fn cholesky(mut self) -> Result<CholeskyFactor, LinalgError> {
        let n = self.n;
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot = 0.0f64;
        for j in 0..n {
            let mut d = self.get(j, j);
            for k in 0..j {
                let l = self.get(j, k);
                d -= l * l;
            }
            if !(d > 0.0) || !d.is_finite() {
                let cond = if min_pivot > 0.0 && min_pivot.is_finite() {
                    (max_pivot / min_pivot).powi(2)
                } else {
                    f64::INFINITY
                };
                return Err(LinalgError::NotPositiveDefinite { pivot: j, cond_estimate: cond });
            }
            let d = d.sqrt();
            min_pivot = min_pivot.min(d);
            max_pivot = max_pivot.max(d);
            self.data[j * n + j] = d;
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= self.get(i, k) * self.get(j, k);
                }
                self.data[i * n + j] = s / d;
            }
        }
        Ok(CholeskyFactor { n, data: self.data, min_pivot, max_pivot })
    }
}

/// Lower-triangular Cholesky factor of an SPD matrix.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    data: Vec<f64>,
    min_pivot: f64,
    max_pivot: f64,
}

impl CholeskyFactor {
    /// Rough 2-norm condition estimate of the factored matrix,
    /// `(max diag(L) / min diag(L))^2`.
    pub fn condition_estimate(&self) -> f64 {
        (self.max_pivot / self.min_pivot).powi(2)
    }

    /// Solves `A x = b` given `A = L L^T`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if b.len() != self.n {
            return Err(LinalgError::DimensionMismatch { expected: self.n, got: b.len() });
        }
        let n = self.n;
        let mut x = b.to_vec();
        // forward: L y = b
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.data[i * n + k] * x[k];
            }
            x[i] = s / self.data[i * n + i];
        }
        // backward: L^T x = y
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.data[k * n + i] * x[k];
            }
            x[i] = s / self.data[i * n + i];
        }
        Ok(x)
    }
}

/// Infinity norm of a vector.
pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
