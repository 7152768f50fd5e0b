//! Douglas–Rachford splitting on the homogeneous self-dual embedding.
//!
//! The embedding looks for `u = (x, y, τ) ∈ Rⁿ × K* × R₊` and
//! `v = (0, s, κ) ∈ {0}ⁿ × K × R₊` with `v = Q u`, where
//!
//! ```text
//!     ⎡  0   Aᵀ  c ⎤
//! Q = ⎢ −A   0   b ⎥
//!     ⎣ −cᵀ −bᵀ  0 ⎦
//! ```
//!
//! Each iteration solves one linear system with `R + Q` (`R` a diagonal
//! metric) through a cached Cholesky factor of `ρₓI + Aᵀ R_y⁻¹ A`, then
//! projects onto the cones. The data are Ruiz-equilibrated first, and the
//! dual metric `R_y = 1/scale` is adapted to balance primal and dual progress.

use nalgebra::{DMatrix, DVector};

use super::cone::{project_dual_in_place, project_primal_in_place, ConeSpec};
use super::sparse::CsrMatrix;
use super::{ConicProblem, ConicSolution, Residuals, SolveStatus, SolverOptions};
use crate::error::{Error, Result};

/// Over-relaxation factor of the splitting iteration.
pub const RELAXATION: f64 = 1.5;

const RHO_X: f64 = 1e-6;
/// Equality rows get a metric weight this many times heavier than cone rows.
const ZERO_CONE_BOOST: f64 = 1e3;
const TAU_WEIGHT: f64 = 1.0;
const SCALING_MIN: f64 = 1e-4;
const SCALING_MAX: f64 = 1e4;
const SCALE_MIN: f64 = 1e-6;
const SCALE_MAX: f64 = 1e6;
const ADAPT_MIN_INTERVAL: usize = 50;
const ADAPT_TRIGGER: f64 = 3.0;
/// An accelerated point is kept only if its fixed-point residual is at most
/// this multiple of the residual at the point it was extrapolated from.
const AA_SAFEGUARD: f64 = 1.0;
const AA_REGULARIZATION: f64 = 1e-10;

/// Type-II Anderson acceleration of the fixed-point map `w ↦ T(w)`, with
/// inner products taken in the splitting metric.
struct Anderson {
    memory: usize,
    dw: Vec<Vec<f64>>,
    df: Vec<Vec<f64>>,
    /// Gram matrix of the stored `df` columns.
    gram: Vec<Vec<f64>>,
    last: Option<(Vec<f64>, Vec<f64>)>,
    /// Plain iterate to fall back to, with the residual norm to beat.
    pending: Option<(Vec<f64>, f64)>,
}

impl Anderson {
    fn new(memory: usize) -> Self {
        Self {
            memory,
            dw: Vec::new(),
            df: Vec::new(),
            gram: Vec::new(),
            last: None,
            pending: None,
        }
    }

    fn reset(&mut self) {
        self.dw.clear();
        self.df.clear();
        self.gram.clear();
        self.last = None;
        self.pending = None;
    }

    /// Given the current point `w` and its image `t = T(w)`, overwrites `t`
    /// with the next point.
    fn step(&mut self, w: &[f64], t: &mut Vec<f64>, metric: &[f64]) {
        if self.memory == 0 {
            return;
        }
        let mdot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(metric).map(|((x, y), r)| x * y * r).sum() };
        let f: Vec<f64> = t.iter().zip(w).map(|(a, b)| a - b).collect();
        let f_norm = mdot(&f, &f).sqrt();
        if let Some((fallback, bound)) = self.pending.take() {
            if !(f_norm <= AA_SAFEGUARD * bound) {
                self.reset();
                *t = fallback;
                return;
            }
        }
        if let Some((mut w_last, mut f_last)) = self.last.take() {
            if self.dw.len() == self.memory {
                self.dw.remove(0);
                self.df.remove(0);
                self.gram.remove(0);
                self.gram.iter_mut().for_each(|row| {
                    row.remove(0);
                });
            }
            w_last.iter_mut().zip(w).for_each(|(l, c)| *l = c - *l);
            f_last.iter_mut().zip(&f).for_each(|(l, c)| *l = c - *l);
            let row: Vec<f64> = self.df.iter().map(|col| mdot(col, &f_last)).collect();
            for (g, v) in self.gram.iter_mut().zip(&row) {
                g.push(*v);
            }
            let mut row = row;
            row.push(mdot(&f_last, &f_last));
            self.gram.push(row);
            self.dw.push(w_last);
            self.df.push(f_last);
        }
        self.last = Some((w.to_vec(), f.clone()));
        let k = self.df.len();
        if k == 0 {
            return;
        }
        let trace: f64 = (0..k).map(|i| self.gram[i][i]).sum();
        let reg = AA_REGULARIZATION * trace + f64::MIN_POSITIVE;
        let gram = DMatrix::from_fn(k, k, |i, j| self.gram[i][j] + if i == j { reg } else { 0.0 });
        let rhs = DVector::from_iterator(k, self.df.iter().map(|col| mdot(col, &f)));
        let gamma = match gram.cholesky() {
            Some(c) => c.solve(&rhs),
            None => {
                self.reset();
                return;
            }
        };
        if gamma.iter().any(|g| !g.is_finite()) {
            self.reset();
            return;
        }
        let plain = t.clone();
        for (i, g) in gamma.iter().enumerate() {
            for ((tv, dw), df) in t.iter_mut().zip(&self.dw[i]).zip(&self.df[i]) {
                *tv -= g * (dw + df);
            }
        }
        self.pending = Some((plain, f_norm));
    }
}

/// Equilibrated copy of the problem data: `Â = D A E`, `b̂ = σ_b D b`,
/// `ĉ = σ_c E c`.
struct Scaled {
    a: CsrMatrix,
    b: Vec<f64>,
    c: Vec<f64>,
    row: Vec<f64>,
    col: Vec<f64>,
    sigma_b: f64,
    sigma_c: f64,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn clamp_scaling(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        1.0
    } else {
        v.clamp(SCALING_MIN, SCALING_MAX)
    }
}

fn equilibrate(problem: &ConicProblem, iters: usize) -> Scaled {
    let m = problem.num_rows();
    let n = problem.num_vars();
    let mut a = problem.a.clone();
    let mut row = vec![1.0; m];
    let mut col = vec![1.0; n];
    for _ in 0..iters {
        let (rn, cn) = a.abs_max_norms();
        let mut dr: Vec<f64> = rn.iter().map(|&r| clamp_scaling(1.0 / r.sqrt())).collect();
        let dc: Vec<f64> = cn.iter().map(|&c| clamp_scaling(1.0 / c.sqrt())).collect();
        // A PSD block must be scaled uniformly to keep the cone invariant.
        for (offset, d) in problem.cone.psd_blocks() {
            let len = super::cone::svec_len(d);
            let block = &mut dr[offset..offset + len];
            let mean_log = block.iter().map(|v| v.ln()).sum::<f64>() / len as f64;
            block.iter_mut().for_each(|v| *v = mean_log.exp());
        }
        a.scale(&dr, &dc);
        row.iter_mut().zip(&dr).for_each(|(r, s)| *r *= s);
        col.iter_mut().zip(&dc).for_each(|(c, s)| *c *= s);
    }
    let b: Vec<f64> = problem.b.iter().zip(&row).map(|(v, d)| v * d).collect();
    let c: Vec<f64> = problem.c.iter().zip(&col).map(|(v, e)| v * e).collect();
    let sigma_b = clamp_scaling(1.0 / inf_norm(&b));
    let sigma_c = clamp_scaling(1.0 / inf_norm(&c));
    Scaled {
        a,
        b: b.iter().map(|v| v * sigma_b).collect(),
        c: c.iter().map(|v| v * sigma_c).collect(),
        row,
        col,
        sigma_b,
        sigma_c,
    }
}

/// Cached solver for `(R + Q) ũ = r`.
struct LinearSystem {
    factor: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    rho_y_inv: Vec<f64>,
    rho_y: Vec<f64>,
    /// `K⁻¹ h` with `h = (ĉ, b̂)`.
    g: Vec<f64>,
    h_dot_g: f64,
}

impl LinearSystem {
    fn new(data: &Scaled, cone: &ConeSpec, scale: f64) -> Result<Self> {
        let n = data.c.len();
        let m = data.b.len();
        let rho_y_inv: Vec<f64> = (0..m)
            .map(|i| if i < cone.zero_dim { ZERO_CONE_BOOST * scale } else { scale })
            .collect();
        let rho_y = rho_y_inv.iter().map(|v| 1.0 / v).collect();
        let mut f = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            f[(j, j)] = RHO_X;
        }
        let mut nz: Vec<(usize, f64)> = Vec::new();
        for (i, &w) in rho_y_inv.iter().enumerate() {
            nz.clear();
            nz.extend(data.a.row(i));
            for &(j, vj) in &nz {
                for &(k, vk) in &nz {
                    f[(j, k)] += w * vj * vk;
                }
            }
        }
        let factor = f.cholesky().ok_or(Error::SingularMatrix)?;
        let mut sys = Self {
            factor,
            rho_y_inv,
            rho_y,
            g: Vec::new(),
            h_dot_g: 0.0,
        };
        let h: Vec<f64> = data.c.iter().chain(&data.b).copied().collect();
        let mut g = vec![0.0; n + m];
        sys.solve_k(&data.a, &h, &mut g);
        sys.h_dot_g = dot(&h, &g);
        sys.g = g;
        Ok(sys)
    }

    /// Solves `K z = r` with `K = [[ρₓI, Aᵀ], [−A, R_y]]`.
    fn solve_k(&self, a: &CsrMatrix, r: &[f64], z: &mut [f64]) {
        let n = a.ncols();
        let (rx, ry) = r.split_at(n);
        let weighted: Vec<f64> = ry.iter().zip(&self.rho_y_inv).map(|(v, w)| v * w).collect();
        let mut at = vec![0.0; n];
        a.tmul_vec(&weighted, &mut at);
        let mut zx = DVector::from_iterator(n, rx.iter().zip(&at).map(|(x, t)| x - t));
        self.factor.solve_mut(&mut zx);
        let (out_x, out_y) = z.split_at_mut(n);
        out_x.copy_from_slice(zx.as_slice());
        a.mul_vec(out_x, out_y);
        for ((o, r), w) in out_y.iter_mut().zip(ry).zip(&self.rho_y_inv) {
            *o = (*o + r) * w;
        }
    }
}

struct Candidate {
    x: Vec<f64>,
    s: Vec<f64>,
    y: Vec<f64>,
    residuals: Residuals,
    merit: f64,
}

struct Check {
    residuals: Residuals,
    converged: bool,
    merit: f64,
    rel_primal: f64,
    rel_dual: f64,
}

fn check_optimality(
    problem: &ConicProblem,
    x: &[f64],
    s: &[f64],
    y: &[f64],
    opts: &SolverOptions,
) -> Check {
    let mut ax = vec![0.0; problem.num_rows()];
    problem.a.mul_vec(x, &mut ax);
    let mut aty = vec![0.0; problem.num_vars()];
    problem.a.tmul_vec(y, &mut aty);
    let primal = ax
        .iter()
        .zip(s)
        .zip(&problem.b)
        .fold(0.0f64, |m, ((a, s), b)| m.max((a + s - b).abs()));
    let dual = aty
        .iter()
        .zip(&problem.c)
        .fold(0.0f64, |m, (a, c)| m.max((a + c).abs()));
    let cx = dot(&problem.c, x);
    let by = dot(&problem.b, y);
    let gap = (cx + by).abs();

    let p_scale = inf_norm(&ax).max(inf_norm(s)).max(inf_norm(&problem.b));
    let d_scale = inf_norm(&aty).max(inf_norm(&problem.c));
    let g_scale = cx.abs().max(by.abs());
    let tol_p = opts.eps_abs + opts.eps_rel * p_scale;
    let tol_d = opts.eps_abs + opts.eps_rel * d_scale;
    let tol_g = opts.eps_abs + opts.eps_rel * g_scale;
    let merit = (primal / tol_p).max(dual / tol_d).max(gap / tol_g);
    Check {
        residuals: Residuals { primal, dual, gap },
        converged: primal <= tol_p && dual <= tol_d && gap <= tol_g,
        merit,
        rel_primal: primal / p_scale.max(1e-12),
        rel_dual: dual / d_scale.max(1e-12),
    }
}

pub(super) fn solve(problem: &ConicProblem, opts: &SolverOptions) -> Result<ConicSolution> {
    problem.validate()?;
    opts.validate()?;
    let n = problem.num_vars();
    let m = problem.num_rows();
    let cone = &problem.cone;
    let data = equilibrate(problem, opts.equilibration_iters);

    let mut scale = opts.scale;
    let mut sys = LinearSystem::new(&data, cone, scale)?;
    let len = n + m + 1;

    // u = (0, 0, 1), v = (0, 0, 1), w = u + R⁻¹ v.
    let mut w = vec![0.0; len];
    w[len - 1] = 1.0 + 1.0 / TAU_WEIGHT;
    let mut u = vec![0.0; len];
    let mut u_tilde = vec![0.0; len];
    let mut rhs = vec![0.0; len - 1];
    let mut z = vec![0.0; len - 1];
    let mut v_s = vec![0.0; m];
    let mut last_adapt = 0usize;
    let mut best: Option<Candidate> = None;
    let check_every = opts.check_interval.max(1);
    let mut anderson = Anderson::new(opts.anderson_memory);
    let mut w_next = vec![0.0; len];
    let metric_of = |sys: &LinearSystem| -> Vec<f64> {
        let mut r = vec![RHO_X; n];
        r.extend(&sys.rho_y);
        r.push(TAU_WEIGHT);
        r
    };
    let mut metric = metric_of(&sys);

    let unscale_x = |ux: &[f64], tau: f64| -> Vec<f64> {
        ux.iter()
            .zip(&data.col)
            .map(|(v, e)| v * e / (tau * data.sigma_b))
            .collect()
    };
    let unscale_s = |vs: &[f64], tau: f64| -> Vec<f64> {
        let mut s: Vec<f64> = vs
            .iter()
            .zip(&data.row)
            .map(|(v, d)| v / (d * tau * data.sigma_b))
            .collect();
        project_primal_in_place(&mut s, cone);
        s
    };
    let unscale_y = |uy: &[f64], tau: f64| -> Vec<f64> {
        uy.iter()
            .zip(&data.row)
            .map(|(v, d)| v * d / (tau * data.sigma_c))
            .collect()
    };

    for iter in 1..=opts.max_iters {
        // ũ = (R + Q)⁻¹ R w
        for j in 0..n {
            rhs[j] = RHO_X * w[j];
        }
        for i in 0..m {
            rhs[n + i] = sys.rho_y[i] * w[n + i];
        }
        let r_tau = TAU_WEIGHT * w[len - 1];
        sys.solve_k(&data.a, &rhs, &mut z);
        let h_dot_z = dot(&data.c, &z[..n]) + dot(&data.b, &z[n..]);
        let tau_tilde = (r_tau + h_dot_z) / (TAU_WEIGHT + sys.h_dot_g);
        for k in 0..len - 1 {
            u_tilde[k] = z[k] - tau_tilde * sys.g[k];
        }
        u_tilde[len - 1] = tau_tilde;

        // u = Π_C(2ũ − w)
        for k in 0..len {
            u[k] = 2.0 * u_tilde[k] - w[k];
        }
        project_dual_in_place(&mut u[n..n + m], cone);
        u[len - 1] = u[len - 1].max(0.0);

        let due = iter % check_every == 0 || iter == opts.max_iters;
        if due {
            // v = R (w − 2ũ + u), restricted to the s and κ components.
            for i in 0..m {
                v_s[i] = sys.rho_y[i] * (w[n + i] - 2.0 * u_tilde[n + i] + u[n + i]);
            }
        }

        for k in 0..len {
            w_next[k] = w[k] + RELAXATION * (u[k] - u_tilde[k]);
        }
        anderson.step(&w, &mut w_next, &metric);
        std::mem::swap(&mut w, &mut w_next);

        if !due {
            continue;
        }

        let tau = u[len - 1];
        if tau > 0.0 {
            let x = unscale_x(&u[..n], tau);
            let s = unscale_s(&v_s, tau);
            let y = unscale_y(&u[n..n + m], tau);
            let check = check_optimality(problem, &x, &s, &y, opts);
            if check.converged {
                return Ok(ConicSolution::new(
                    problem,
                    x,
                    s,
                    y,
                    SolveStatus::Optimal,
                    check.residuals,
                    iter,
                ));
            }
            if best.as_ref().is_none_or(|b| check.merit < b.merit) {
                best = Some(Candidate {
                    x,
                    s,
                    y,
                    residuals: check.residuals,
                    merit: check.merit,
                });
            }

            if opts.adaptive_scale && iter - last_adapt >= ADAPT_MIN_INTERVAL {
                let factor = (check.rel_primal / check.rel_dual.max(1e-300)).sqrt();
                if factor.is_finite() && !(1.0 / ADAPT_TRIGGER..=ADAPT_TRIGGER).contains(&factor) {
                    let new_scale = (scale * factor).clamp(SCALE_MIN, SCALE_MAX);
                    if new_scale != scale {
                        // Keep (u, v) and re-express w = u + R⁻¹v in the new metric.
                        scale = new_scale;
                        sys = LinearSystem::new(&data, cone, scale)?;
                        for i in 0..m {
                            w[n + i] = u[n + i] + v_s[i] * sys.rho_y_inv[i];
                        }
                        anderson.reset();
                        metric = metric_of(&sys);
                        last_adapt = iter;
                    }
                }
            }
        }

        if let Some(status) = certificate(problem, &data, &u, &v_s, n, m, opts.eps_infeas) {
            let (x, s, y) = match status {
                SolveStatus::Infeasible => {
                    let y: Vec<f64> = u[n..n + m].iter().zip(&data.row).map(|(v, d)| v * d).collect();
                    let by = -dot(&problem.b, &y);
                    (vec![f64::NAN; n], vec![f64::NAN; m], y.iter().map(|v| v / by).collect())
                }
                _ => {
                    let x: Vec<f64> = u[..n].iter().zip(&data.col).map(|(v, e)| v * e).collect();
                    let cx = -dot(&problem.c, &x);
                    let s: Vec<f64> = v_s.iter().zip(&data.row).map(|(v, d)| v / d / cx).collect();
                    (x.iter().map(|v| v / cx).collect(), s, vec![f64::NAN; m])
                }
            };
            let residuals = Residuals {
                primal: f64::NAN,
                dual: f64::NAN,
                gap: f64::NAN,
            };
            return Ok(ConicSolution::new(problem, x, s, y, status, residuals, iter));
        }
    }

    let best = match best {
        Some(b) => b,
        None => {
            let x = vec![0.0; n];
            let s = vec![0.0; m];
            let y = vec![0.0; m];
            let check = check_optimality(problem, &x, &s, &y, opts);
            Candidate {
                x,
                s,
                y,
                residuals: check.residuals,
                merit: check.merit,
            }
        }
    };
    Ok(ConicSolution::new(
        problem,
        best.x,
        best.s,
        best.y,
        SolveStatus::MaxIters,
        best.residuals,
        opts.max_iters,
    ))
}

/// Farkas-type certificates read off the unnormalized embedding iterate.
fn certificate(
    problem: &ConicProblem,
    data: &Scaled,
    u: &[f64],
    v_s: &[f64],
    n: usize,
    m: usize,
    eps: f64,
) -> Option<SolveStatus> {
    let y: Vec<f64> = u[n..n + m].iter().zip(&data.row).map(|(v, d)| v * d).collect();
    let by = dot(&problem.b, &y);
    if by < 0.0 {
        let mut aty = vec![0.0; n];
        problem.a.tmul_vec(&y, &mut aty);
        if inf_norm(&aty) / -by <= eps {
            return Some(SolveStatus::Infeasible);
        }
    }
    let x: Vec<f64> = u[..n].iter().zip(&data.col).map(|(v, e)| v * e).collect();
    let cx = dot(&problem.c, &x);
    if cx < 0.0 {
        let mut ax = vec![0.0; m];
        problem.a.mul_vec(&x, &mut ax);
        let worst = ax
            .iter()
            .zip(v_s)
            .zip(&data.row)
            .fold(0.0f64, |acc, ((a, s), d)| acc.max((a + s / d).abs()));
        if worst / -cx <= eps {
            return Some(SolveStatus::Unbounded);
        }
    }
    None
}
