//! Dense complex linear algebra shared by the model and Liouville modules.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

use crate::error::{QfptError, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Refuse to invert matrices whose 1-norm condition number exceeds this.
pub const MAX_CONDITION: f64 = 1e12;

/// Eigenvector bases with a worse condition number are not trusted for
/// spectral evaluation of matrix functions.
pub const EIGEN_CONDITION_LIMIT: f64 = 1e8;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Largest absolute entry.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Induced 1-norm (max column sum).
pub fn norm1(m: &CMatrix) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).norm()))
}

/// Eigenvalues of a general complex matrix (diagonal of its complex Schur form).
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<C64>> {
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| QfptError::InvalidSystem("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Inverse via LU with partial pivoting, refusing ill-conditioned input.
pub fn inverse_checked(m: &CMatrix) -> Result<CMatrix> {
    let inv = m
        .clone()
        .lu()
        .try_inverse()
        .ok_or(QfptError::IllConditioned {
            condition: f64::INFINITY,
        })?;
    let condition = norm1(m) * norm1(&inv);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(QfptError::IllConditioned { condition });
    }
    Ok(inv)
}

/// Diagonalization `A = V diag(values) V^{-1}`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<C64>,
    pub vectors: CMatrix,
    pub inverse_vectors: CMatrix,
    /// 1-norm condition number of `vectors`.
    pub condition: f64,
}

impl EigenDecomposition {
    /// Returns `None` when the matrix is (numerically) defective or the
    /// eigenvector basis is worse conditioned than `EIGEN_CONDITION_LIMIT`.
    pub fn new(m: &CMatrix) -> Option<Self> {
        let n = m.nrows();
        assert_eq!(n, m.ncols(), "eigendecomposition requires a square matrix");
        let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)?;
        let (q, t) = schur.unpack();
        let scale = max_abs(&t).max(f64::MIN_POSITIVE);
        let tiny = 1e-14 * scale;

        // Eigenvectors of the upper-triangular factor by back substitution.
        let mut x = CMatrix::zeros(n, n);
        for k in 0..n {
            let lambda = t[(k, k)];
            x[(k, k)] = cr(1.0);
            for j in (0..k).rev() {
                let mut acc = C64::new(0.0, 0.0);
                for l in (j + 1)..=k {
                    acc += t[(j, l)] * x[(l, k)];
                }
                let denom = t[(j, j)] - lambda;
                if denom.norm() <= tiny {
                    if acc.norm() <= 1e-12 * scale {
                        x[(j, k)] = C64::new(0.0, 0.0);
                    } else {
                        return None;
                    }
                } else {
                    x[(j, k)] = -acc / denom;
                }
            }
            let norm = x.column(k).norm();
            x.column_mut(k).unscale_mut(norm);
        }
        let vectors = q * x;
        let inverse_vectors = vectors.clone().lu().try_inverse()?;
        let condition = norm1(&vectors) * norm1(&inverse_vectors);
        if !condition.is_finite() || condition >= EIGEN_CONDITION_LIMIT {
            return None;
        }
        let values = (0..n).map(|i| t[(i, i)]).collect();
        Some(Self {
            values,
            vectors,
            inverse_vectors,
            condition,
        })
    }

    /// `V f(Λ) V^{-1}`.
    pub fn apply_fn(&self, f: impl Fn(C64) -> C64) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let fj = f(self.values[j]);
            for i in 0..n {
                scaled[(i, j)] *= fj;
            }
        }
        scaled * &self.inverse_vectors
    }
}

/// Hermitian part check: max |H - H^†|.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

/// Sum a slice with pairwise (cascade) summation in fixed index order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

pub fn pairwise_sum_c(xs: &[C64]) -> C64 {
    match xs.len() {
        0 => C64::new(0.0, 0.0),
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum_c(a) + pairwise_sum_c(b)
        }
    }
}
