//! Scaled symmetric vectorization and Euclidean projection onto the
//! supported cones.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SymMatrix;

/// Length of `svec` for a `d × d` matrix.
pub const fn svec_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Position of entry `(i, j)` in `svec`. The upper triangle is enumerated
/// column by column: `(0,0), (0,1), (1,1), (0,2), ...`.
pub fn svec_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    j * (j + 1) / 2 + i
}

/// Weight applied to entry `(i, j)` by `svec`: 1 on the diagonal, √2 off it.
pub fn svec_weight(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        std::f64::consts::SQRT_2
    }
}

/// Side length `d` with `d(d+1)/2 = len`, if one exists.
pub fn svec_side(len: usize) -> Option<usize> {
    let d = (((8 * len + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
    (d..=d + 1).find(|&d| svec_len(d) == len && d > 0)
}

/// Symmetric vectorization preserving the Frobenius inner product.
pub fn svec(m: &SymMatrix) -> Vec<f64> {
    svec_dense(m.as_matrix())
}

pub(crate) fn svec_dense(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    let mut out = Vec::with_capacity(svec_len(d));
    for j in 0..d {
        for i in 0..=j {
            out.push(m[(i, j)] * svec_weight(i, j));
        }
    }
    out
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64]) -> Result<SymMatrix> {
    let d = svec_side(v.len()).ok_or_else(|| {
        Error::InvalidInput(format!("length {} is not a triangular number", v.len()))
    })?;
    Ok(SymMatrix::from_raw(smat_dense(v, d)))
}

pub(crate) fn smat_dense(v: &[f64], d: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    let mut k = 0;
    for j in 0..d {
        for i in 0..=j {
            let value = v[k] / svec_weight(i, j);
            m[(i, j)] = value;
            m[(j, i)] = value;
            k += 1;
        }
    }
    m
}

/// Cartesian product of cones in a fixed order: zero cone, nonnegative
/// orthant, then PSD blocks in `svec` form.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub zero_dim: usize,
    pub nonneg_dim: usize,
    pub psd_block_dims: Vec<usize>,
}

impl ConeSpec {
    pub fn total_dim(&self) -> usize {
        self.zero_dim + self.nonneg_dim + self.psd_block_dims.iter().map(|&d| svec_len(d)).sum::<usize>()
    }

    /// Row ranges `(offset, side)` of every PSD block.
    pub fn psd_blocks(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let mut offset = self.zero_dim + self.nonneg_dim;
        self.psd_block_dims.iter().map(move |&d| {
            let start = offset;
            offset += svec_len(d);
            (start, d)
        })
    }
}

/// Euclidean projection of `s` onto the cone `K`.
pub fn project_cone(s: &[f64], cone: &ConeSpec) -> Result<Vec<f64>> {
    if s.len() != cone.total_dim() {
        return Err(Error::InvalidInput(format!(
            "vector length {} does not match cone dimension {}",
            s.len(),
            cone.total_dim()
        )));
    }
    let mut out = s.to_vec();
    project_primal_in_place(&mut out, cone);
    Ok(out)
}

/// In-place projection onto `K`.
pub(crate) fn project_primal_in_place(s: &mut [f64], cone: &ConeSpec) {
    s[..cone.zero_dim].iter_mut().for_each(|v| *v = 0.0);
    project_nonneg_and_psd(s, cone);
}

/// In-place projection onto the dual cone `K*`: the zero cone's dual is free,
/// the other cones are self-dual.
pub(crate) fn project_dual_in_place(y: &mut [f64], cone: &ConeSpec) {
    project_nonneg_and_psd(y, cone);
}

fn project_nonneg_and_psd(v: &mut [f64], cone: &ConeSpec) {
    let lo = cone.zero_dim;
    let hi = lo + cone.nonneg_dim;
    v[lo..hi].iter_mut().for_each(|e| *e = e.max(0.0));
    for (offset, d) in cone.psd_blocks() {
        project_psd_block(&mut v[offset..offset + svec_len(d)], d);
    }
}

/// Clips the negative eigenvalues of `smat(block)` to zero.
pub(crate) fn project_psd_block(block: &mut [f64], d: usize) {
    if d == 1 {
        block[0] = block[0].max(0.0);
        return;
    }
    let m = smat_dense(block, d);
    if is_positive_definite(&m) {
        return;
    }
    let eig = SymmetricEigen::new(m);
    let negative = eig.eigenvalues.iter().filter(|l| **l < 0.0).count();
    if negative == 0 {
        return;
    }
    if negative == d {
        block.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    // Rebuild from whichever side of the spectrum has fewer terms.
    let keep_positive = d - negative <= negative;
    let mut out = if keep_positive { DMatrix::zeros(d, d) } else { smat_dense(block, d) };
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        let coef = match (keep_positive, l > 0.0) {
            (true, true) => l,
            (false, false) if l < 0.0 => -l,
            _ => continue,
        };
        let v = eig.eigenvectors.column(k);
        for j in 0..d {
            for i in 0..=j {
                out[(i, j)] += coef * v[i] * v[j];
            }
        }
    }
    let mut k = 0;
    for j in 0..d {
        for i in 0..=j {
            block[k] = out[(i, j)] * svec_weight(i, j);
            k += 1;
        }
    }
}

/// Cholesky attempt on a small dense symmetric matrix.
fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    let d = m.nrows();
    let mut l = vec![0.0; d * d];
    for j in 0..d {
        let mut diag = m[(j, j)];
        for k in 0..j {
            diag -= l[j * d + k] * l[j * d + k];
        }
        if !(diag > 0.0) {
            return false;
        }
        let pivot = diag.sqrt();
        l[j * d + j] = pivot;
        for i in j + 1..d {
            let mut v = m[(i, j)];
            for k in 0..j {
                v -= l[i * d + k] * l[j * d + k];
            }
            l[i * d + j] = v / pivot;
        }
    }
    true
}

/// Distance from `s` to the cone, measured as the norm of `s − Π_K(s)`.
pub fn cone_distance(s: &[f64], cone: &ConeSpec) -> f64 {
    let mut p = s.to_vec();
    project_primal_in_place(&mut p, cone);
    p.iter().zip(s).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}
