//! A first-order conic solver for programs over products of the zero cone,
//! the nonnegative orthant and PSD cones:
//!
//! ```text
//! minimize    cᵀz
//! subject to  A z + s = b,   s ∈ K
//! ```
//!
//! PSD blocks are stored with [`svec`]. Solutions come with primal, dual and
//! gap residuals; [`kkt_residuals`] recomputes them without touching solver
//! internals.

mod admm;
mod cone;
mod problem;
mod sparse;

use serde::{Deserialize, Serialize};

pub use admm::RELAXATION;
pub use cone::{
    cone_distance, project_cone, smat, svec, svec_index, svec_len, svec_side, svec_weight, ConeSpec,
};
pub use problem::{AffineExpr, ConicProblem, ProblemBuilder, VariableBlock};
pub use sparse::CsrMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    MaxIters,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub eps_abs: f64,
    pub eps_rel: f64,
    /// Threshold on normalized infeasibility/unboundedness certificates.
    pub eps_infeas: f64,
    pub max_iters: usize,
    /// Initial primal/dual balance of the splitting metric.
    pub scale: f64,
    pub adaptive_scale: bool,
    pub equilibration_iters: usize,
    /// Iterations between convergence checks.
    pub check_interval: usize,
    /// Anderson acceleration memory; 0 disables it.
    pub anderson_memory: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            eps_abs: 1e-7,
            eps_rel: 1e-6,
            eps_infeas: 1e-8,
            max_iters: 50_000,
            scale: 0.1,
            adaptive_scale: true,
            equilibration_iters: 20,
            check_interval: 10,
            anderson_memory: 10,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.eps_abs, self.eps_rel, self.eps_infeas, self.scale];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || self.max_iters == 0 {
            return Err(Error::InvalidInput(format!("invalid solver options {self:?}")));
        }
        Ok(())
    }

    pub fn with_tolerances(mut self, eps_abs: f64, eps_rel: f64) -> Self {
        self.eps_abs = eps_abs;
        self.eps_rel = eps_rel;
        self
    }
}

/// Infinity-norm KKT residuals: `‖Az + s − b‖`, `‖Aᵀy + c‖` and `|cᵀz + bᵀy|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    /// Primal decision vector.
    pub z: Vec<f64>,
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    pub status: SolveStatus,
    pub residuals: Residuals,
    pub iterations: usize,
    /// `cᵀz`.
    pub objective: f64,
}

impl ConicSolution {
    fn new(
        problem: &ConicProblem,
        z: Vec<f64>,
        s: Vec<f64>,
        y: Vec<f64>,
        status: SolveStatus,
        residuals: Residuals,
        iterations: usize,
    ) -> Self {
        let objective = problem.c.iter().zip(&z).map(|(c, x)| c * x).sum();
        Self {
            z,
            s,
            y,
            status,
            residuals,
            iterations,
            objective,
        }
    }

    /// Values of a named variable block.
    pub fn block<'a>(&'a self, problem: &ConicProblem, name: &str) -> Option<&'a [f64]> {
        problem.variable(name).map(|v| &self.z[v.range()])
    }
}

/// Solves the conic program. Exhausting the iteration budget is not an
/// error: the best iterate is returned with status [`SolveStatus::MaxIters`].
pub fn solve(problem: &ConicProblem, opts: &SolverOptions) -> Result<ConicSolution> {
    admm::solve(problem, opts)
}

/// Recomputes the infinity-norm KKT residuals of a candidate primal-dual
/// triple straight from the problem triplets.
pub fn kkt_residuals(problem: &ConicProblem, sol: &ConicSolution) -> Result<Residuals> {
    let (n, m) = (problem.num_vars(), problem.num_rows());
    if sol.z.len() != n || sol.s.len() != m || sol.y.len() != m {
        return Err(Error::InvalidInput("solution dimensions do not match problem".into()));
    }
    let mut primal = problem.b.iter().map(|b| -b).collect::<Vec<f64>>();
    let mut dual = problem.c.clone();
    for (i, j, a) in problem.a.triplets() {
        primal[i] += a * sol.z[j];
        dual[j] += a * sol.y[i];
    }
    for (p, s) in primal.iter_mut().zip(&sol.s) {
        *p += s;
    }
    let cz: f64 = problem.c.iter().zip(&sol.z).map(|(c, z)| c * z).sum();
    let by: f64 = problem.b.iter().zip(&sol.y).map(|(b, y)| b * y).sum();
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(Residuals {
        primal: norm(&primal),
        dual: norm(&dual),
        gap: (cz + by).abs(),
    })
}

/// Acceptance thresholds `eps_abs + eps_rel·scale` for each residual of a
/// candidate, with the scale terms `max(‖Az‖, ‖s‖, ‖b‖)`, `max(‖Aᵀy‖, ‖c‖)`
/// and `max(|cᵀz|, |bᵀy|)` recomputed from the problem triplets.
pub fn kkt_tolerances(problem: &ConicProblem, sol: &ConicSolution, opts: &SolverOptions) -> Result<Residuals> {
    let (n, m) = (problem.num_vars(), problem.num_rows());
    if sol.z.len() != n || sol.s.len() != m || sol.y.len() != m {
        return Err(Error::InvalidInput("solution dimensions do not match problem".into()));
    }
    let mut az = vec![0.0; m];
    let mut aty = vec![0.0; n];
    for (i, j, a) in problem.a.triplets() {
        az[i] += a * sol.z[j];
        aty[j] += a * sol.y[i];
    }
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let cz: f64 = problem.c.iter().zip(&sol.z).map(|(c, z)| c * z).sum();
    let by: f64 = problem.b.iter().zip(&sol.y).map(|(b, y)| b * y).sum();
    let tol = |scale: f64| opts.eps_abs + opts.eps_rel * scale;
    Ok(Residuals {
        primal: tol(norm(&az).max(norm(&sol.s)).max(norm(&problem.b))),
        dual: tol(norm(&aty).max(norm(&problem.c))),
        gap: tol(cz.abs().max(by.abs())),
    })
}
