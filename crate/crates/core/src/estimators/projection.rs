use super::{add_norm_epigraph, psd_from_svec, EstimatorResult, EstimatorStatus, MatrixNorm};
use crate::conic::{self, kkt_residuals, kkt_tolerances, svec, svec_len, AffineExpr, ConicProblem, ProblemBuilder, SolveStatus, SolverOptions};
use crate::error::{Error, Result};
use crate::matrix::{trace_normalize, SymMatrix};
use crate::structures::{compile_constraints, StructureSpec};

/// `min ‖M − Ĉ‖ over M ∈ S ∩ P(p)` as a conic program with variables
/// `svec(M)` (block `m`) and the epigraph scalar `t`.
pub fn build_projection_problem(
    pilot: &SymMatrix,
    spec: &StructureSpec,
    norm: MatrixNorm,
) -> Result<ConicProblem> {
    let p = pilot.dim();
    if !pilot.is_finite() {
        return Err(Error::InvalidInput("pilot estimate has non-finite entries".into()));
    }
    let set = compile_constraints(spec, p)?;
    let len = svec_len(p);
    let mut b = ProblemBuilder::new();
    let m = b.add_variables("m", len);
    let t = b.add_variables("t", 1).start;
    b.add_objective(t, 1.0);
    set.add_to(&mut b, m.clone());
    b.add_psd(p, m.clone().map(|k| AffineExpr::default().term(k, 1.0)).collect());
    let target = svec(pilot);
    let residual: Vec<AffineExpr> = (0..len)
        .map(|k| AffineExpr::constant(-target[k]).term(m.start + k, 1.0))
        .collect();
    add_norm_epigraph(&mut b, t, &residual, p, norm);
    Ok(b.build())
}

/// Nearest point to `pilot` in `S ∩ P(p)` in the chosen norm. The reported
/// shape is trace-normalized; the raw minimizer is kept in
/// [`EstimatorResult::unnormalized`].
pub fn project_estimator(
    pilot: &SymMatrix,
    spec: &StructureSpec,
    norm: MatrixNorm,
    opts: &SolverOptions,
) -> Result<EstimatorResult> {
    let problem = build_projection_problem(pilot, spec, norm)?;
    let sol = conic::solve(&problem, opts)?;
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(Error::Infeasible),
        other => return Err(Error::SolverFailure(other)),
    }
    let minimizer = psd_from_svec(sol.block(&problem, "m").expect("m block"))?;
    let objective = norm.of(&(&minimizer - pilot))?;
    let residuals = kkt_residuals(&problem, &sol)?;
    let mut result = EstimatorResult::closed_form(trace_normalize(&minimizer)?);
    result.objective = Some(objective);
    result.iterations = sol.iterations;
    result.status = EstimatorStatus::Solver(sol.status);
    result.unnormalized = Some(minimizer);
    result.solver_residuals = Some(residuals);
    result.solver_tolerances = Some(kkt_tolerances(&problem, &sol, opts)?);
    result.diagnostics.insert("solver_objective".into(), sol.objective);
    Ok(result)
}
