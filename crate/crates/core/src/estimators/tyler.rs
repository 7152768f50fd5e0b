use serde::{Deserialize, Serialize};

use super::{moment_map_unchecked, sample_covariance, EstimatorResult, EstimatorStatus};
use crate::error::{Error, Result};
use crate::matrix::{eig_sym, frobenius_norm, trace_normalize, SymMatrix};
use crate::sampler::{normalize_samples, SampleSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TylerOptions {
    /// Stop once `‖C − trace_normalize(f(C))‖_F` falls to this value.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for TylerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

/// Relative eigenvalue floor below which the normalized samples are treated as
/// confined to a proper subspace.
const DEGENERACY_FLOOR: f64 = 1e-12;

/// Tyler's shape estimator by fixed-point iteration from `I/p`.
///
/// The returned matrix `C` satisfies `‖C − trace_normalize(f(C))‖_F ≤ tol`
/// (reported as diagnostic `residual`). Fails with [`Error::NotExist`] when
/// `n ≤ p` and with [`Error::NoConvergence`], carrying the last iterate, when
/// the budget runs out.
pub fn tyler(samples: &SampleSet, opts: TylerOptions) -> Result<EstimatorResult> {
    let p = samples.dim();
    let n = samples.count();
    if n <= p {
        return Err(Error::NotExist { n, p });
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::InvalidInput("tolerance and iteration budget must be positive".into()));
    }
    // f depends on each sample only through its direction.
    let unit = normalize_samples(samples)?;

    let scatter = sample_covariance(&unit)?.shape;
    let eig = eig_sym(&scatter)?;
    let condition = eig.values[p - 1] / eig.values[0].max(f64::MIN_POSITIVE);
    if eig.values[0] <= DEGENERACY_FLOOR * eig.values[p - 1] {
        return Err(Error::DegenerateData(format!(
            "samples span a proper subspace (condition number {condition:e})"
        )));
    }

    let finish = |c: SymMatrix, residual: f64, iterations: usize, status| {
        let mut r = EstimatorResult::closed_form(c);
        r.iterations = iterations;
        r.status = status;
        r.diagnostics.insert("residual".into(), residual);
        r.diagnostics.insert("scatter_condition".into(), condition);
        r
    };

    let mut c = SymMatrix::identity(p).scaled(1.0 / p as f64);
    let mut residual = f64::INFINITY;
    for iter in 0..opts.max_iter {
        let (f, _) = moment_map_unchecked(&c, &unit).map_err(|_| {
            Error::DegenerateData(format!("iterate became singular at step {iter}"))
        })?;
        let next = trace_normalize(&f)?;
        residual = frobenius_norm(&(&next - &c))?;
        if residual <= opts.tol {
            return Ok(finish(c, residual, iter, EstimatorStatus::Converged));
        }
        c = next;
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        best: Box::new(finish(c, residual, opts.max_iter, EstimatorStatus::IterationLimit)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::moment_map;
    use crate::sampler::{sample_elliptical, TextureLaw};

    fn set(rows: Vec<Vec<f64>>) -> SampleSet {
        SampleSet::from_vectors(rows).unwrap()
    }

    #[test]
    fn scalar_case_is_one() {
        let r = tyler(&set(vec![vec![3.0], vec![-0.1], vec![7.0]]), TylerOptions::default()).unwrap();
        assert_eq!(r.shape, SymMatrix::identity(1));
    }

    #[test]
    fn not_exist_below_dimension() {
        let x = set(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(
            tyler(&x, TylerOptions::default()),
            Err(Error::NotExist { n: 2, p: 2 })
        ));
    }

    #[test]
    fn degenerate_subspace_detected() {
        let x = set(vec![vec![1.0, 1.0, 0.0], vec![1.0, 2.0, 0.0], vec![2.0, 1.0, 0.0], vec![1.0, -1.0, 0.0]]);
        assert!(matches!(tyler(&x, TylerOptions::default()), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn budget_exhaustion_returns_best_iterate() {
        let c = SymMatrix::from_fn(4, |i, j| 0.9f64.powi((j - i) as i32));
        let x = sample_elliptical(&c, TextureLaw::chi_square(1), 12, 8).unwrap();
        let opts = TylerOptions { tol: 1e-14, max_iter: 3 };
        match tyler(&x, opts) {
            Err(Error::NoConvergence { iterations, best }) => {
                assert_eq!(iterations, 3);
                assert_eq!(best.status, EstimatorStatus::IterationLimit);
                assert!((best.shape.trace() - 1.0).abs() < 1e-12);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    /// Oracle: 10⁴ plain fixed-point steps without early stopping.
    fn long_iteration(x: &SampleSet) -> SymMatrix {
        let p = x.dim();
        let mut c = SymMatrix::identity(p).scaled(1.0 / p as f64);
        for _ in 0..10_000 {
            let next = trace_normalize(&moment_map(&c, x).unwrap()).unwrap();
            let step = frobenius_norm(&(&next - &c)).unwrap();
            c = next;
            if step <= 1e-14 {
                break;
            }
        }
        c
    }

    #[test]
    fn matches_long_iteration_oracle() {
        let x = set(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]);
        let oracle = long_iteration(&x);
        let est = tyler(&x, TylerOptions { tol: 1e-10, max_iter: 10_000 }).unwrap();
        assert!(est.shape.max_abs_diff(&oracle) <= 1e-8);
        // By symmetry of the data the two diagonal entries agree.
        assert!((oracle.get(0, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_and_rescaling_invariance() {
        let c = SymMatrix::from_fn(5, |i, j| 0.7f64.powi((j - i) as i32));
        let x = sample_elliptical(&c, TextureLaw::chi_square(1), 50, 21).unwrap();
        let r = tyler(&x, TylerOptions::default()).unwrap();
        let f = trace_normalize(&moment_map(&r.shape, &x).unwrap()).unwrap();
        assert!(frobenius_norm(&(&r.shape - &f)).unwrap() <= 1e-10);
        assert!(r.diagnostic("residual").unwrap() <= 1e-10);

        let factors: Vec<f64> = (0..50).map(|i| 10f64.powf((i % 7) as f64 - 3.0)).collect();
        let scaled = tyler(&x.rescaled(&factors).unwrap(), TylerOptions::default()).unwrap();
        assert!(scaled.shape.max_abs_diff(&r.shape) <= 1e-8);
    }
}
