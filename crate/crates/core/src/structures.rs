//! Convex structure sets for shape matrices and their compiled constraint
//! form.
//!
//! A [`StructureSpec`] describes a set `S ⊂ P(p)`. [`compile_constraints`]
//! turns it into linear rows over the entries of `C` plus auxiliary variables
//! living in nonnegative or PSD cones; [`AffineConstraintSet::add_to`] lowers
//! those rows into a [`ProblemBuilder`].

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::conic::{
    self, svec_index, svec_len, svec_weight, AffineExpr, ProblemBuilder, SolveStatus, SolverOptions,
};
use crate::error::{Error, Result};
use crate::matrix::{eig_sym, frobenius_norm, SymMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StructureSpec {
    Unconstrained,
    /// Entries depend only on `|i − j|`.
    Toeplitz,
    /// Entries with `|i − j| > bandwidth` vanish.
    Banded { bandwidth: usize },
    /// `C = X + σ²I` with `X ⪰ 0` and `trace(X) ≤ nuclear_bound`.
    LowRankPlusNoise {
        noise_variance: f64,
        nuclear_bound: f64,
    },
    /// `C = Σ pₖ aₖaₖᵀ` with `pₖ ≥ 0` and `Σ pₖ ≤ l1_bound`.
    LinearParam { atoms: Vec<Vec<f64>>, l1_bound: f64 },
}

impl StructureSpec {
    pub fn name(&self) -> &'static str {
        match self {
            StructureSpec::Unconstrained => "unconstrained",
            StructureSpec::Toeplitz => "toeplitz",
            StructureSpec::Banded { .. } => "banded",
            StructureSpec::LowRankPlusNoise { .. } => "low_rank_plus_noise",
            StructureSpec::LinearParam { .. } => "linear_param",
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if p == 0 {
            return Err(Error::InvalidSpec("dimension must be positive".into()));
        }
        match self {
            StructureSpec::Unconstrained | StructureSpec::Toeplitz => Ok(()),
            StructureSpec::Banded { bandwidth } if *bandwidth >= p => Err(Error::InvalidSpec(
                format!("bandwidth {bandwidth} must be below dimension {p}"),
            )),
            StructureSpec::Banded { .. } => Ok(()),
            StructureSpec::LowRankPlusNoise {
                noise_variance,
                nuclear_bound,
            } => {
                if !(*noise_variance >= 0.0) || !noise_variance.is_finite() {
                    return Err(Error::InvalidSpec("noise variance must be >= 0".into()));
                }
                if !(*nuclear_bound > 0.0) || !nuclear_bound.is_finite() {
                    return Err(Error::InvalidSpec("nuclear bound must be > 0".into()));
                }
                Ok(())
            }
            StructureSpec::LinearParam { atoms, l1_bound } => {
                if !(*l1_bound > 0.0) || !l1_bound.is_finite() {
                    return Err(Error::InvalidSpec("l1 bound must be > 0".into()));
                }
                if atoms.is_empty() {
                    return Err(Error::InvalidSpec("at least one atom required".into()));
                }
                for (k, a) in atoms.iter().enumerate() {
                    if a.len() != p {
                        return Err(Error::InvalidSpec(format!(
                            "atom {k} has length {}, expected {p}",
                            a.len()
                        )));
                    }
                    if a.iter().any(|v| !v.is_finite()) || a.iter().all(|&v| v == 0.0) {
                        return Err(Error::InvalidSpec(format!("atom {k} must be finite and nonzero")));
                    }
                }
                Ok(())
            }
        }
    }
}

/// One linear row `Σ coef·C[i][j] + Σ coef·aux[k]  (= or ≤)  rhs`.
///
/// Entries of `C` are referenced by upper-triangle position `(i, j)`, `i ≤ j`,
/// in plain matrix units. Auxiliary variables use their own coordinates
/// (`svec` for PSD blocks).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub c_terms: Vec<(usize, usize, f64)>,
    pub aux_terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearRow {
    /// Value of the `C` part minus the right-hand side, auxiliaries ignored.
    pub fn c_residual(&self, m: &SymMatrix) -> f64 {
        self.c_terms.iter().map(|&(i, j, v)| v * m.get(i, j)).sum::<f64>() - self.rhs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxCone {
    Nonneg,
    /// A PSD block of the given side, stored as `svec`.
    Psd(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuxBlock {
    pub cone: AuxCone,
    pub start: usize,
    pub len: usize,
}

/// Compiled form of a structure set over a `p × p` matrix `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineConstraintSet {
    pub dim: usize,
    pub equalities: Vec<LinearRow>,
    /// Rows of the form `… ≤ rhs`.
    pub inequalities: Vec<LinearRow>,
    pub aux_dim: usize,
    pub aux_blocks: Vec<AuxBlock>,
}

impl AffineConstraintSet {
    fn empty(p: usize) -> Self {
        Self {
            dim: p,
            equalities: Vec::new(),
            inequalities: Vec::new(),
            aux_dim: 0,
            aux_blocks: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.equalities.is_empty() && self.inequalities.is_empty() && self.aux_dim == 0
    }

    /// Adds the auxiliary variables and all rows to `builder`, with `svec(C)`
    /// occupying `c_vars`. Returns the auxiliary variable range.
    pub fn add_to(&self, builder: &mut ProblemBuilder, c_vars: Range<usize>) -> Range<usize> {
        assert_eq!(c_vars.len(), svec_len(self.dim));
        let aux = builder.add_variables("structure_aux", self.aux_dim);
        let lower = |row: &LinearRow| -> Vec<(usize, f64)> {
            row.c_terms
                .iter()
                .map(|&(i, j, v)| (c_vars.start + svec_index(i, j), v / svec_weight(i, j)))
                .chain(row.aux_terms.iter().map(|&(k, v)| (aux.start + k, v)))
                .collect()
        };
        for row in &self.equalities {
            builder.add_equality(lower(row), row.rhs);
        }
        for row in &self.inequalities {
            let mut expr = AffineExpr::constant(row.rhs);
            for (col, v) in lower(row) {
                expr.add_term(col, -v);
            }
            builder.add_nonneg(expr);
        }
        for block in &self.aux_blocks {
            let vars = (aux.start + block.start)..(aux.start + block.start + block.len);
            match block.cone {
                AuxCone::Nonneg => {
                    for k in vars {
                        builder.add_nonneg(AffineExpr::default().term(k, 1.0));
                    }
                }
                AuxCone::Psd(d) => {
                    builder.add_psd(d, vars.map(|k| AffineExpr::default().term(k, 1.0)).collect());
                }
            }
        }
        aux
    }
}

fn upper_pairs(p: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..p).flat_map(move |j| (0..=j).map(move |i| (i, j)))
}

/// Compiles a structure set into linear rows and auxiliary cones.
pub fn compile_constraints(spec: &StructureSpec, p: usize) -> Result<AffineConstraintSet> {
    spec.validate(p)?;
    let mut set = AffineConstraintSet::empty(p);
    match spec {
        StructureSpec::Unconstrained => {}
        StructureSpec::Toeplitz => {
            for k in 0..p {
                for i in 0..p.saturating_sub(k + 1) {
                    set.equalities.push(LinearRow {
                        c_terms: vec![(i, i + k, 1.0), (i + 1, i + 1 + k, -1.0)],
                        aux_terms: vec![],
                        rhs: 0.0,
                    });
                }
            }
        }
        StructureSpec::Banded { bandwidth } => {
            for (i, j) in upper_pairs(p).filter(|&(i, j)| j - i > *bandwidth) {
                set.equalities.push(LinearRow {
                    c_terms: vec![(i, j, 1.0)],
                    aux_terms: vec![],
                    rhs: 0.0,
                });
            }
        }
        StructureSpec::LowRankPlusNoise {
            noise_variance,
            nuclear_bound,
        } => {
            // Auxiliary X in svec form; C − X = σ²I, trace X ≤ β.
            set.aux_dim = svec_len(p);
            set.aux_blocks.push(AuxBlock {
                cone: AuxCone::Psd(p),
                start: 0,
                len: svec_len(p),
            });
            for (i, j) in upper_pairs(p) {
                set.equalities.push(LinearRow {
                    c_terms: vec![(i, j, 1.0)],
                    aux_terms: vec![(svec_index(i, j), -1.0 / svec_weight(i, j))],
                    rhs: if i == j { *noise_variance } else { 0.0 },
                });
            }
            set.inequalities.push(LinearRow {
                c_terms: vec![],
                aux_terms: (0..p).map(|i| (svec_index(i, i), 1.0)).collect(),
                rhs: *nuclear_bound,
            });
        }
        StructureSpec::LinearParam { atoms, l1_bound } => {
            let k = atoms.len();
            set.aux_dim = k;
            set.aux_blocks.push(AuxBlock {
                cone: AuxCone::Nonneg,
                start: 0,
                len: k,
            });
            for (i, j) in upper_pairs(p) {
                set.equalities.push(LinearRow {
                    c_terms: vec![(i, j, 1.0)],
                    aux_terms: atoms
                        .iter()
                        .enumerate()
                        .map(|(m, a)| (m, -a[i] * a[j]))
                        .filter(|&(_, v)| v != 0.0)
                        .collect(),
                    rhs: 0.0,
                });
            }
            set.inequalities.push(LinearRow {
                c_terms: vec![],
                aux_terms: (0..k).map(|m| (m, 1.0)).collect(),
                rhs: *l1_bound,
            });
        }
    }
    Ok(set)
}

/// Exact Frobenius projection onto the linear subspace of a Toeplitz or
/// banded structure (positive semidefiniteness is not enforced).
pub fn project_frobenius(spec: &StructureSpec, m: &SymMatrix) -> Result<SymMatrix> {
    let p = m.dim();
    spec.validate(p)?;
    match spec {
        StructureSpec::Toeplitz => {
            let means: Vec<f64> = (0..p)
                .map(|k| (0..p - k).map(|i| m.get(i, i + k)).sum::<f64>() / (p - k) as f64)
                .collect();
            Ok(SymMatrix::from_fn(p, |i, j| means[j - i]))
        }
        StructureSpec::Banded { bandwidth } => Ok(SymMatrix::from_fn(p, |i, j| {
            if j - i > *bandwidth {
                0.0
            } else {
                m.get(i, j)
            }
        })),
        other => Err(Error::UnsupportedSpec(other.name().into())),
    }
}

/// Smallest `t ≥ 0` such that every compiled row holds to within `t` at
/// `C = m`, over all auxiliary variables in their cones. Computed with the
/// conic solver; zero (up to solver accuracy) exactly when `m` is
/// reachable through the auxiliary parameterization.
pub fn feasibility_gap(spec: &StructureSpec, m: &SymMatrix, opts: &SolverOptions) -> Result<f64> {
    let set = compile_constraints(spec, m.dim())?;
    if set.aux_dim == 0 {
        let worst = set
            .equalities
            .iter()
            .map(|r| r.c_residual(m).abs())
            .chain(set.inequalities.iter().map(|r| r.c_residual(m).max(0.0)))
            .fold(0.0, f64::max);
        return Ok(worst);
    }
    let mut b = ProblemBuilder::new();
    let t = b.add_variables("t", 1).start;
    let aux = b.add_variables("structure_aux", set.aux_dim);
    b.add_objective(t, 1.0);
    let aux_expr = |row: &LinearRow, sign: f64| -> AffineExpr {
        // sign·(row(m, aux) − rhs) ≤ t  ⇔  t − sign·(row(m, aux) − rhs) ≥ 0
        let mut e = AffineExpr::constant(-sign * row.c_residual(m)).term(t, 1.0);
        for &(k, v) in &row.aux_terms {
            e.add_term(aux.start + k, -sign * v);
        }
        e
    };
    for row in &set.equalities {
        b.add_nonneg(aux_expr(row, 1.0));
        b.add_nonneg(aux_expr(row, -1.0));
    }
    for row in &set.inequalities {
        b.add_nonneg(aux_expr(row, 1.0));
    }
    for block in &set.aux_blocks {
        let vars = (aux.start + block.start)..(aux.start + block.start + block.len);
        match block.cone {
            AuxCone::Nonneg => vars.for_each(|k| b.add_nonneg(AffineExpr::default().term(k, 1.0))),
            AuxCone::Psd(d) => {
                b.add_psd(d, vars.map(|k| AffineExpr::default().term(k, 1.0)).collect())
            }
        }
    }
    let problem = b.build();
    let sol = conic::solve(&problem, opts)?;
    match sol.status {
        SolveStatus::Optimal | SolveStatus::MaxIters => Ok(sol.z[t].max(0.0)),
        other => Err(Error::SolverFailure(other)),
    }
}

/// Whether `m` lies in `S ∩ P(p)` up to `tol`: every compiled row holds to
/// within `tol` in matrix-entry units for some feasible auxiliaries, and the
/// smallest eigenvalue is at least `−tol·max(1, ‖m‖_F)`.
pub fn contains(spec: &StructureSpec, m: &SymMatrix, tol: f64) -> bool {
    let p = m.dim();
    if spec.validate(p).is_err() || !m.is_finite() {
        return false;
    }
    let scale = frobenius_norm(m).unwrap_or(f64::INFINITY).max(1.0);
    let psd_ok = |x: &SymMatrix| {
        eig_sym(x)
            .map(|e| e.values[0] >= -tol * scale)
            .unwrap_or(false)
    };
    if !psd_ok(m) {
        return false;
    }
    match spec {
        StructureSpec::LowRankPlusNoise {
            noise_variance,
            nuclear_bound,
        } => {
            let x = m - &SymMatrix::identity(p).scaled(*noise_variance);
            psd_ok(&x) && x.trace() <= nuclear_bound + tol
        }
        StructureSpec::LinearParam { .. } => {
            let eps = (0.1 * tol).max(1e-12);
            let opts = SolverOptions::default().with_tolerances(eps, eps);
            matches!(feasibility_gap(spec, m, &opts), Ok(gap) if gap <= tol)
        }
        _ => match compile_constraints(spec, p) {
            Ok(set) => set.equalities.iter().all(|r| r.c_residual(m).abs() <= tol),
            Err(_) => false,
        },
    }
}

/// `C_ij = ρ^|i−j|`, a positive definite Toeplitz matrix.
pub fn make_toeplitz_target(p: usize, rho: f64) -> Result<SymMatrix> {
    if p == 0 {
        return Err(Error::InvalidSpec("dimension must be positive".into()));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidSpec(format!("rho = {rho} must lie in (0, 1)")));
    }
    Ok(SymMatrix::from_fn(p, |i, j| rho.powi((j - i) as i32)))
}

/// Largest dimension of the pentadiagonal benchmark matrix.
pub const BANDED_TARGET_MAX_DIM: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct BandedTarget {
    pub matrix: SymMatrix,
    /// Smallest eigenvalue before any shift.
    pub min_eigenvalue: f64,
    /// Multiple of the identity added to restore definiteness (0 if none).
    pub shift: f64,
}

/// Leading `p × p` block of the 20-dimensional pentadiagonal matrix with
/// `21, …, 40` on the diagonal, `1, …, 19` on the first off-diagonal and
/// `1, …, 18` on the second. If it is not numerically positive definite,
/// `δI` with `δ = max(0, 1e-3 − λ_min)` is added and reported.
pub fn make_banded_target(p: usize) -> Result<BandedTarget> {
    if p == 0 || p > BANDED_TARGET_MAX_DIM {
        return Err(Error::InvalidSpec(format!(
            "banded target dimension must be in 1..={BANDED_TARGET_MAX_DIM}, got {p}"
        )));
    }
    let mut matrix = SymMatrix::from_fn(p, |i, j| match j - i {
        0 => (21 + i) as f64,
        1 | 2 => (i + 1) as f64,
        _ => 0.0,
    });
    let min_eigenvalue = eig_sym(&matrix)?.values[0];
    let norm = frobenius_norm(&matrix)?;
    let mut shift = 0.0;
    if min_eigenvalue < 1e-8 * norm {
        shift = (1e-3 - min_eigenvalue).max(0.0);
        matrix = &matrix + &SymMatrix::identity(p).scaled(shift);
    }
    Ok(BandedTarget {
        matrix,
        min_eigenvalue,
        shift,
    })
}
