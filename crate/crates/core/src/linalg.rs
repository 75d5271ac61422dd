//! Small dense matrices for the brute-force oracles.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for l in 0..n {
                let a = self.data[i * n + l];
                if a == 0.0 {
                    continue;
                }
                let src = &other.data[l * n..(l + 1) * n];
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        out
    }

    fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    fn off_diagonal_norm2(&self) -> f64 {
        let n = self.dim;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += self.data[i * n + j] * self.data[i * n + j];
                }
            }
        }
        s
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

/// Eigen-decomposition `A = V diag(values) V^T` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Column `j` is the eigenvector of `values[j]`.
    pub vectors: Matrix,
}

/// Cyclic Jacobi rotations until the off-diagonal mass is negligible.
///
/// The input must be symmetric; only sizes up to a few hundred are sensible.
pub fn symmetric_eigen(a: &Matrix) -> SymmetricEigen {
    const MAX_SWEEPS: usize = 100;
    let n = a.dim();
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    let tol = (f64::EPSILON * scale) * (f64::EPSILON * scale);

    for _ in 0..MAX_SWEEPS {
        if m.off_diagonal_norm2() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + math::sqrt(theta * theta + 1.0));
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let s = t * c;

                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    SymmetricEigen {
        values: (0..n).map(|i| m[(i, i)]).collect(),
        vectors: v,
    }
}

/// `exp(A)` for symmetric `A` through its eigen-decomposition.
pub fn expm_symmetric(a: &Matrix) -> Matrix {
    let eig = symmetric_eigen(a);
    let n = a.dim();
    let w: Vec<f64> = eig.values.iter().map(|&l| math::exp(l)).collect();
    let mut out = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for (l, &wl) in w.iter().enumerate() {
                s += eig.vectors[(i, l)] * wl * eig.vectors[(j, l)];
            }
            out[(i, j)] = s;
        }
    }
    out
}

/// `exp(A)` for an entrywise non-negative matrix by scaling and squaring a
/// truncated Taylor series.
///
/// Every term is non-negative, so there is no cancellation and each entry
/// carries a small *relative* error even when it is many orders of magnitude
/// below the largest one. Eigen-reconstruction only bounds absolute error.
pub fn expm_nonnegative(a: &Matrix) -> Matrix {
    assert!(
        a.as_slice().iter().all(|&v| v >= 0.0),
        "expm_nonnegative requires a non-negative matrix"
    );
    let n = a.dim();
    // Infinity norm bounds the spectral radius.
    let norm = (0..n)
        .map(|i| a.row(i).iter().sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = a.scaled(scale);

    let mut sum = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for order in 1..=60 {
        term = term.matmul(&x).scaled(1.0 / order as f64);
        sum = sum.add(&term);
        // Stop only once the last term is negligible for *every* entry.
        let converged = term
            .data
            .iter()
            .zip(&sum.data)
            .all(|(&t, &s)| t <= 1e-18 * s);
        if converged {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum);
    }
    sum
}
