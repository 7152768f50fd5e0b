//! Shape-matrix estimators: sample covariance, Tyler's M-estimator, norm
//! projection onto a structure set, and the COCA relaxation.
//!
//! Every estimator reports a trace-one shape matrix.

mod coca;
mod projection;
mod tyler;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::conic::{svec_index, svec_len, svec_weight, AffineExpr, ProblemBuilder, Residuals, SolveStatus};
use crate::error::{Error, Result};
use crate::matrix::{eig_sym, frobenius_norm, trace_normalize, SymMatrix};
use crate::sampler::SampleSet;

pub use coca::{build_coca_problem, coca, coca_objective, relaxation_gap, CocaProblem};
pub use projection::{build_projection_problem, project_estimator};
pub use tyler::{tyler, TylerOptions};

/// Matrix norm used by the projection and COCA objectives.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixNorm {
    #[default]
    Spectral,
    Frobenius,
}

impl MatrixNorm {
    pub fn of(&self, m: &SymMatrix) -> Result<f64> {
        match self {
            MatrixNorm::Spectral => crate::matrix::spectral_norm(m),
            MatrixNorm::Frobenius => frobenius_norm(m),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EstimatorStatus {
    ClosedForm,
    /// Fixed-point iteration met its tolerance.
    Converged,
    /// Fixed-point iteration hit its budget.
    IterationLimit,
    Solver(SolveStatus),
}

#[derive(Debug, Clone)]
pub struct EstimatorResult {
    /// Trace-one estimate.
    pub shape: SymMatrix,
    /// Objective value at the reported point (projection and COCA).
    pub objective: Option<f64>,
    /// Relaxation weights `dᵢ` in the units of the original samples (COCA).
    pub d_values: Vec<f64>,
    pub iterations: usize,
    pub status: EstimatorStatus,
    /// Minimizer before trace normalization (projection).
    pub unnormalized: Option<SymMatrix>,
    /// KKT residuals of the underlying conic solve.
    pub solver_residuals: Option<Residuals>,
    /// Thresholds those residuals had to meet.
    pub solver_tolerances: Option<Residuals>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl EstimatorResult {
    fn closed_form(shape: SymMatrix) -> Self {
        Self {
            shape,
            objective: None,
            d_values: Vec::new(),
            iterations: 0,
            status: EstimatorStatus::ClosedForm,
            unnormalized: None,
            solver_residuals: None,
            solver_tolerances: None,
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn diagnostic(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).copied()
    }

    /// Whether the recorded solver residuals meet their thresholds; `true`
    /// for estimators without a conic solve.
    pub fn within_solver_tolerance(&self) -> bool {
        match (self.solver_residuals, self.solver_tolerances) {
            (Some(r), Some(t)) => r.primal <= t.primal && r.dual <= t.dual && r.gap <= t.gap,
            _ => true,
        }
    }
}

fn dyad_sum(samples: &SampleSet, weights: impl Iterator<Item = f64>) -> DMatrix<f64> {
    let p = samples.dim();
    let mut acc = DMatrix::zeros(p, p);
    for (x, w) in samples.iter().zip(weights) {
        let v = DVector::from_column_slice(x);
        acc.syger(w, &v, &v, 1.0);
    }
    acc.fill_upper_triangle_with_lower_triangle();
    acc
}

/// `(1/n) Σ xᵢxᵢᵀ`, trace-normalized. The raw trace is kept under the
/// diagnostic key `trace`.
pub fn sample_covariance(samples: &SampleSet) -> Result<EstimatorResult> {
    let n = samples.count() as f64;
    let raw = SymMatrix::from_raw(dyad_sum(samples, std::iter::repeat(1.0 / n)));
    let trace = raw.trace();
    let mut result = EstimatorResult::closed_form(trace_normalize(&raw)?);
    result.diagnostics.insert("trace".into(), trace);
    Ok(result)
}

fn check_positive_definite(c: &SymMatrix) -> Result<()> {
    let eig = eig_sym(c)?;
    let scale = frobenius_norm(c)?;
    if eig.values[0] <= 1e-12 * scale || scale == 0.0 {
        return Err(Error::SingularMatrix);
    }
    Ok(())
}

/// Tyler's moment map `f(C) = (p/n) Σ xᵢxᵢᵀ / (xᵢᵀC⁻¹xᵢ)`.
pub fn moment_map(c: &SymMatrix, samples: &SampleSet) -> Result<SymMatrix> {
    if c.dim() != samples.dim() {
        return Err(Error::InvalidInput("matrix and samples differ in dimension".into()));
    }
    if let Some(index) = samples.first_zero() {
        return Err(Error::DegenerateSample { index });
    }
    check_positive_definite(c)?;
    Ok(moment_map_unchecked(c, samples)?.0)
}

/// Moment map plus the Mahalanobis weights `p / (xᵢᵀC⁻¹xᵢ)`.
pub(crate) fn moment_map_unchecked(c: &SymMatrix, samples: &SampleSet) -> Result<(SymMatrix, Vec<f64>)> {
    let p = samples.dim() as f64;
    let n = samples.count() as f64;
    let chol = c.as_matrix().clone().cholesky().ok_or(Error::SingularMatrix)?;
    let weights: Vec<f64> = samples
        .iter()
        .map(|x| {
            let mut z = DVector::from_column_slice(x);
            chol.l_dirty().solve_lower_triangular_mut(&mut z);
            p / z.norm_squared()
        })
        .collect();
    let f = dyad_sum(samples, weights.iter().map(|w| w / n));
    Ok((SymMatrix::from_raw(f), weights))
}

/// Appends PSD blocks expressing `‖R‖ ≤ t`, where `residual[k]` is the `svec`
/// coordinate `k` of the `p × p` residual matrix `R`.
///
/// The spectral norm uses `tI − R ⪰ 0` and `tI + R ⪰ 0`. The Frobenius norm
/// uses the arrow block `[[t·I, svec R], [svec Rᵀ, t]] ⪰ 0`, which holds iff
/// `t ≥ ‖svec R‖₂ = ‖R‖_F`.
pub(crate) fn add_norm_epigraph(
    builder: &mut ProblemBuilder,
    t: usize,
    residual: &[AffineExpr],
    p: usize,
    norm: MatrixNorm,
) {
    let len = svec_len(p);
    assert_eq!(residual.len(), len);
    match norm {
        MatrixNorm::Spectral => {
            for sign in [-1.0, 1.0] {
                let mut exprs = Vec::with_capacity(len);
                for j in 0..p {
                    for i in 0..=j {
                        let r = &residual[svec_index(i, j)];
                        let mut e = AffineExpr::constant(sign * r.constant);
                        if i == j {
                            e.add_term(t, 1.0);
                        }
                        for &(col, v) in &r.terms {
                            e.add_term(col, sign * v);
                        }
                        exprs.push(e);
                    }
                }
                builder.add_psd(p, exprs);
            }
        }
        MatrixNorm::Frobenius => {
            let d = len + 1;
            let mut exprs = Vec::with_capacity(svec_len(d));
            for j in 0..d {
                for i in 0..=j {
                    let e = if i == j {
                        AffineExpr::default().term(t, 1.0)
                    } else if j == len {
                        let r = &residual[i];
                        let w = svec_weight(i, j);
                        AffineExpr {
                            terms: r.terms.iter().map(|&(c, v)| (c, w * v)).collect(),
                            constant: w * r.constant,
                        }
                    } else {
                        AffineExpr::default()
                    };
                    exprs.push(e);
                }
            }
            builder.add_psd(d, exprs);
        }
    }
}

/// Symmetric matrix from a solver `svec` slice with negative eigenvalues
/// clipped, so tiny solver infeasibilities do not leak into reported shapes.
pub(crate) fn psd_from_svec(v: &[f64]) -> Result<SymMatrix> {
    let m = crate::conic::smat(v)?;
    let eig = eig_sym(&m)?;
    if eig.values[0] >= 0.0 {
        Ok(m)
    } else {
        Ok(eig.reconstruct_with(|l| l.max(0.0)))
    }
}
