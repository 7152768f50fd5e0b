//! Quick invariant checks run by `coca-bench selftest`.

use coca::conic::{self, kkt_residuals, ProblemBuilder, SolveStatus, SolverOptions};
use coca::estimators::{coca, moment_map, tyler, MatrixNorm, TylerOptions};
use coca::structures::{make_toeplitz_target, StructureSpec};
use coca::{sample_elliptical, trace_normalize, SampleSet, SymMatrix, TextureLaw};

use crate::{run_experiment, squared_error, to_csv, ErrorMetric, ExperimentConfig};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<String, String>) -> Check {
    match f() {
        Ok(detail) => Check { name, passed: true, detail },
        Err(detail) => Check { name, passed: false, detail },
    }
}

fn ensure(cond: bool, detail: String) -> Result<String, String> {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

pub fn run_all() -> Vec<Check> {
    vec![
        check("squared error examples", || {
            let c = make_toeplitz_target(3, 0.5).map_err(err)?;
            let same = squared_error(&c, &c, ErrorMetric::Frobenius).map_err(err)?;
            let scaled = squared_error(&c.scaled(2.0), &c, ErrorMetric::Frobenius).map_err(err)?;
            let hand = squared_error(
                &SymMatrix::from_diagonal(&[2.0, 0.0]),
                &SymMatrix::identity(2),
                ErrorMetric::Frobenius,
            )
            .map_err(err)?;
            ensure(
                same < 1e-24 && scaled < 1e-24 && (hand - 2.0).abs() < 1e-12,
                format!("{same:e} {scaled:e} {hand}"),
            )
        }),
        check("lp optimum", || {
            // min x + y  s.t.  x + 2y = 2, x, y >= 0  ->  1 at (0, 1)
            let mut b = ProblemBuilder::new();
            let v = b.add_variables("v", 2);
            b.add_objective(v.start, 1.0);
            b.add_objective(v.start + 1, 1.0);
            b.add_equality(vec![(v.start, 1.0), (v.start + 1, 2.0)], 2.0);
            for k in v {
                b.add_nonneg(conic::AffineExpr::default().term(k, 1.0));
            }
            let problem = b.build();
            let sol = conic::solve(&problem, &SolverOptions::default()).map_err(err)?;
            let kkt = kkt_residuals(&problem, &sol).map_err(err)?.max();
            ensure(
                sol.status == SolveStatus::Optimal && (sol.objective - 1.0).abs() < 1e-5 && kkt < 1e-6,
                format!("status {:?}, objective {}, kkt {kkt:e}", sol.status, sol.objective),
            )
        }),
        check("tyler fixed point", || {
            let c = make_toeplitz_target(4, 0.7).map_err(err)?;
            let x = sample_elliptical(&c, TextureLaw::chi_square(1), 30, 1).map_err(err)?;
            let r = tyler(&x, TylerOptions::default()).map_err(err)?;
            let image = trace_normalize(&moment_map(&r.shape, &x).map_err(err)?).map_err(err)?;
            let res = r.shape.max_abs_diff(&image);
            ensure(res < 1e-9, format!("residual {res:e}"))
        }),
        check("coca single sample", || {
            let x = SampleSet::from_vectors(vec![vec![3.0, 4.0]]).map_err(err)?;
            let r = coca(&x, &StructureSpec::Unconstrained, MatrixNorm::Spectral, &SolverOptions::default())
                .map_err(err)?;
            let expected = SymMatrix::from_rows(&[vec![0.36, 0.48], vec![0.48, 0.64]]).map_err(err)?;
            let diff = r.shape.max_abs_diff(&expected);
            ensure(diff < 1e-5, format!("max deviation {diff:e}"))
        }),
        check("smoke run determinism", || {
            let config = ExperimentConfig::preset("smoke").map_err(err)?;
            let a = to_csv(&run_experiment(&config, Some(1)).map_err(err)?);
            let b = to_csv(&run_experiment(&config, Some(2)).map_err(err)?);
            ensure(a == b && a.lines().count() == 2, format!("{} lines", a.lines().count()))
        }),
    ]
}
