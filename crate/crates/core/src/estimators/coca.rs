use std::ops::Range;

use super::{add_norm_epigraph, dyad_sum, psd_from_svec, EstimatorResult, EstimatorStatus, MatrixNorm};
use crate::conic::{
    self, kkt_residuals, kkt_tolerances, svec_index, svec_len, svec_weight, AffineExpr, ConicProblem, ProblemBuilder,
    SolveStatus, SolverOptions,
};
use crate::error::{Error, Result};
use crate::matrix::{trace_normalize, SymMatrix};
use crate::sampler::{normalize_samples, SampleSet};
use crate::structures::{compile_constraints, StructureSpec};

/// The COCA program for a sample set together with its variable layout.
///
/// Samples enter the program as unit directions; `norms` holds the original
/// lengths so that weights can be mapped back.
#[derive(Debug, Clone)]
pub struct CocaProblem {
    pub problem: ConicProblem,
    pub c_vars: Range<usize>,
    pub d_vars: Range<usize>,
    pub t_var: usize,
    pub aux_vars: Range<usize>,
    pub norms: Vec<f64>,
}

/// Builds
///
/// ```text
/// minimize    ‖C − (1/n) Σ dᵢ sᵢsᵢᵀ‖
/// subject to  trace C = 1,  C ∈ S,  C ⪰ (dᵢ/p) sᵢsᵢᵀ,  dᵢ ≥ 0
/// ```
///
/// over unit directions `sᵢ = xᵢ/‖xᵢ‖`.
pub fn build_coca_problem(samples: &SampleSet, spec: &StructureSpec, norm: MatrixNorm) -> Result<CocaProblem> {
    let p = samples.dim();
    let n = samples.count();
    let set = compile_constraints(spec, p)?;
    let unit = normalize_samples(samples)?;
    let norms = samples
        .iter()
        .map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let len = svec_len(p);

    let mut b = ProblemBuilder::new();
    let c = b.add_variables("c", len);
    let d = b.add_variables("d", n);
    let t = b.add_variables("t", 1).start;
    b.add_objective(t, 1.0);

    b.add_equality((0..p).map(|i| (c.start + svec_index(i, i), 1.0)).collect(), 1.0);
    let aux = set.add_to(&mut b, c.clone());
    for k in d.clone() {
        b.add_nonneg(AffineExpr::default().term(k, 1.0));
    }

    let inv_p = 1.0 / p as f64;
    let inv_n = 1.0 / n as f64;
    let mut residual: Vec<AffineExpr> = (0..len)
        .map(|k| AffineExpr::default().term(c.start + k, 1.0))
        .collect();
    for (idx, s) in unit.iter().enumerate() {
        let mut block = Vec::with_capacity(len);
        for j in 0..p {
            for i in 0..=j {
                let k = svec_index(i, j);
                let dyad = svec_weight(i, j) * s[i] * s[j];
                block.push(AffineExpr::default().term(c.start + k, 1.0).term(d.start + idx, -inv_p * dyad));
                residual[k].add_term(d.start + idx, -inv_n * dyad);
            }
        }
        b.add_psd(p, block);
    }
    add_norm_epigraph(&mut b, t, &residual, p, norm);

    Ok(CocaProblem {
        problem: b.build(),
        c_vars: c,
        d_vars: d,
        t_var: t,
        aux_vars: aux,
        norms,
    })
}

/// `‖C − (1/n) Σ dᵢ xᵢxᵢᵀ‖` in the units of the given samples.
pub fn coca_objective(c: &SymMatrix, d: &[f64], samples: &SampleSet, norm: MatrixNorm) -> Result<f64> {
    if c.dim() != samples.dim() || d.len() != samples.count() {
        return Err(Error::InvalidInput("dimension mismatch between C, d and samples".into()));
    }
    let inv_n = 1.0 / samples.count() as f64;
    let fit = SymMatrix::from_raw(dyad_sum(samples, d.iter().map(|w| w * inv_n)));
    norm.of(&(c - &fit))
}

/// The COCA estimator. Works for any `n ≥ 1`, including `n < p`.
///
/// The weights in `d_values` refer to the original (unnormalized) samples.
pub fn coca(
    samples: &SampleSet,
    spec: &StructureSpec,
    norm: MatrixNorm,
    opts: &SolverOptions,
) -> Result<EstimatorResult> {
    let built = build_coca_problem(samples, spec, norm)?;
    let problem = &built.problem;
    let sol = conic::solve(problem, opts)?;
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(Error::Infeasible),
        other => return Err(Error::SolverFailure(other)),
    }
    let raw = psd_from_svec(&sol.z[built.c_vars.clone()])?;
    let shape = trace_normalize(&raw)?;
    let mut d_values: Vec<f64> = sol.z[built.d_vars.clone()]
        .iter()
        .zip(&built.norms)
        .map(|(d, r)| d.max(0.0) / (r * r))
        .collect();
    // Pull each weight back onto its LMI so the reported pair is feasible.
    let mut clipped = 0.0f64;
    if let Ok((_, limits)) = super::moment_map_unchecked(&shape, samples) {
        for (d, limit) in d_values.iter_mut().zip(limits) {
            if *d > limit {
                clipped = clipped.max(*d - limit);
                *d = limit;
            }
        }
    }
    let objective = coca_objective(&shape, &d_values, samples, norm)?;

    let mut result = EstimatorResult::closed_form(shape);
    result.objective = Some(objective);
    result.d_values = d_values;
    result.iterations = sol.iterations;
    result.status = EstimatorStatus::Solver(sol.status);
    result.solver_residuals = Some(kkt_residuals(problem, &sol)?);
    result.solver_tolerances = Some(kkt_tolerances(problem, &sol, opts)?);
    result.diagnostics.insert("solver_objective".into(), sol.objective);
    result.diagnostics.insert("raw_trace".into(), raw.trace());
    result.diagnostics.insert("max_weight_clip".into(), clipped);
    Ok(result)
}

/// `gᵢ = p/(xᵢᵀC⁻¹xᵢ) − dᵢ`: slack of each relaxed inequality at the reported
/// point. Zero gaps mean the Tyler equations hold.
pub fn relaxation_gap(result: &EstimatorResult, samples: &SampleSet) -> Result<Vec<f64>> {
    if result.d_values.len() != samples.count() || result.shape.dim() != samples.dim() {
        return Err(Error::InvalidInput("result does not belong to these samples".into()));
    }
    super::check_positive_definite(&result.shape)?;
    let (_, weights) = super::moment_map_unchecked(&result.shape, samples)?;
    Ok(weights.iter().zip(&result.d_values).map(|(w, d)| w - d).collect())
}
