//! Dense real symmetric matrices and the handful of spectral utilities the
//! estimators and the conic solver share.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense real symmetric `p × p` matrix.
///
/// The upper triangle is authoritative on construction; the stored matrix is
/// always exactly symmetric.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl SymMatrix {
    /// Builds a symmetric matrix from a square matrix, copying the upper
    /// triangle onto the lower one.
    pub fn from_upper(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::InvalidInput(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let mut m = m;
        let p = m.nrows();
        for j in 0..p {
            for i in (j + 1)..p {
                m[(i, j)] = m[(j, i)];
            }
        }
        Ok(Self { inner: m })
    }

    /// Builds a matrix from rows, requiring exact symmetry.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        if p == 0 || rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidInput("rows must form a non-empty square".into()));
        }
        let m = DMatrix::from_fn(p, p, |i, j| rows[i][j]);
        for i in 0..p {
            for j in 0..i {
                if m[(i, j)] != m[(j, i)] {
                    return Err(Error::InvalidInput(format!(
                        "entries ({i},{j}) and ({j},{i}) differ"
                    )));
                }
            }
        }
        Ok(Self { inner: m })
    }

    /// Builds a matrix from a function of `(i, j)` evaluated on the upper triangle.
    pub fn from_fn(p: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        assert!(p >= 1, "dimension must be positive");
        let m = DMatrix::from_fn(p, p, |i, j| if i <= j { f(i, j) } else { f(j, i) });
        Self { inner: m }
    }

    pub fn zeros(p: usize) -> Self {
        Self::from_fn(p, |_, _| 0.0)
    }

    pub fn identity(p: usize) -> Self {
        Self::from_fn(p, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_diagonal(values: &[f64]) -> Self {
        Self::from_fn(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    /// The rank-one matrix `x xᵀ`.
    pub fn outer(x: &[f64]) -> Self {
        Self::from_fn(x.len(), |i, j| x[i] * x[j])
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    /// Sets entry `(i, j)` and its mirror `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.inner[(i, j)] = value;
        self.inner[(j, i)] = value;
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            inner: &self.inner * alpha,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.inner.iter().all(|v| v.is_finite())
    }

    /// Frobenius inner product `⟨self, other⟩`.
    pub fn dot(&self, other: &SymMatrix) -> f64 {
        self.inner.dot(&other.inner)
    }

    /// Largest absolute entry difference against `other`.
    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        self.inner
            .iter()
            .zip(other.inner.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Quadratic form `xᵀ M x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let v = DVector::from_column_slice(x);
        v.dot(&(&self.inner * &v))
    }

    /// Inverse through a Cholesky factorization; fails unless the matrix is
    /// numerically positive definite.
    pub fn inverse_pd(&self) -> Result<SymMatrix> {
        let chol = self.inner.clone().cholesky().ok_or(Error::SingularMatrix)?;
        SymMatrix::from_upper(chol.inverse())
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(eig_sym(self)?.values[0])
    }

    pub(crate) fn from_raw(inner: DMatrix<f64>) -> Self {
        debug_assert!(inner.is_square());
        Self { inner }
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<f64>> = self.clone().into();
        f.debug_struct("SymMatrix").field("rows", &rows).finish()
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        let p = m.dim();
        (0..p).map(|i| (0..p).map(|j| m.get(i, j)).collect()).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        SymMatrix::from_rows(&rows)
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;

    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix::from_raw(&self.inner + &rhs.inner)
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;

    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix::from_raw(&self.inner - &rhs.inner)
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;

    fn mul(self, rhs: f64) -> SymMatrix {
        self.scaled(rhs)
    }
}

/// Eigenvalues in nondecreasing order with matching orthonormal eigenvectors
/// stored column-wise.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenPair {
    /// `V diag(f(λ)) Vᵀ`, the spectral map of `f`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let p = self.values.len();
        let mut scaled = self.vectors.clone();
        for (k, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            scaled.column_mut(k).scale_mut(w);
        }
        let mut m = &scaled * self.vectors.transpose();
        for j in 0..p {
            for i in (j + 1)..p {
                let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        SymMatrix::from_raw(m)
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.reconstruct_with(|l| l)
    }
}

/// Symmetric eigendecomposition with ascending eigenvalues.
pub fn eig_sym(m: &SymMatrix) -> Result<EigenPair> {
    if !m.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let p = m.dim();
    let eig = SymmetricEigen::new(m.as_matrix().clone());
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(p, p, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(EigenPair { values, vectors })
}

/// Largest eigenvalue magnitude.
pub fn spectral_norm(m: &SymMatrix) -> Result<f64> {
    let eig = eig_sym(m)?;
    let lo = eig.values.first().copied().unwrap_or(0.0);
    let hi = eig.values.last().copied().unwrap_or(0.0);
    Ok(lo.abs().max(hi.abs()))
}

pub fn frobenius_norm(m: &SymMatrix) -> Result<f64> {
    if !m.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    Ok(m.as_matrix().norm())
}

/// Rescales `m` to unit trace.
pub fn trace_normalize(m: &SymMatrix) -> Result<SymMatrix> {
    let tr = m.trace();
    if !(tr > 0.0) || !tr.is_finite() {
        return Err(Error::DegenerateScale(tr));
    }
    Ok(m.scaled(1.0 / tr))
}

/// Rescales `estimate` so that its trace matches `truth`.
pub fn align_scale(estimate: &SymMatrix, truth: &SymMatrix) -> Result<SymMatrix> {
    if estimate.dim() != truth.dim() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            estimate.dim(),
            truth.dim()
        )));
    }
    let te = estimate.trace();
    let tt = truth.trace();
    if !(te > 0.0) {
        return Err(Error::DegenerateScale(te));
    }
    if !(tt > 0.0) {
        return Err(Error::DegenerateScale(tt));
    }
    Ok(estimate.scaled(tt / te))
}
