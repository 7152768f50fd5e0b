//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use coca::conic::{svec, AffineExpr, ConicProblem, ProblemBuilder};
use coca::SymMatrix;

pub type M3 = [[f64; 3]; 3];

/// Eigenvalues of a symmetric 3×3 matrix by the trigonometric formula,
/// ascending.
pub fn eig3(a: &M3) -> [f64; 3] {
    let p1 = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    if p1 == 0.0 {
        let mut d = [a[0][0], a[1][1], a[2][2]];
        d.sort_by(f64::total_cmp);
        return d;
    }
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let mut b = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            b[i][j] = (a[i][j] - if i == j { q } else { 0.0 }) / p;
        }
    }
    let r = (det3(&b) / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let hi = q + 2.0 * p * phi.cos();
    let lo = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    [lo, 3.0 * q - hi - lo, hi]
}

pub fn det3(a: &M3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// `xᵀA⁻¹x` through the adjugate.
pub fn inv_quad3(a: &M3, x: &[f64; 3]) -> f64 {
    let mut adj = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            adj[i][j] = a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0];
        }
    }
    let det = det3(a);
    let mut q = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            q += x[i] * adj[i][j] * x[j];
        }
    }
    q / det
}

fn ternary(lo: f64, hi: f64, iters: usize, f: impl Fn(f64) -> f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    for _ in 0..iters {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if f(m1) <= f(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    f(0.5 * (a + b))
}

/// Brute-force COCA objective for `p = 3`, Toeplitz structure, spectral
/// norm and two samples. The trace-one Toeplitz matrix has diagonal `1/3`
/// and free parameters `(a₁, a₂)`; these are grid-searched, first at step
/// `0.01` and then at step `10⁻³` around the best cell. For each grid point
/// the weights are minimized by nested ternary search over the feasible
/// intervals `0 ≤ dᵢ ≤ 3/(sᵢᵀC⁻¹sᵢ)` (the objective is jointly convex).
pub fn coca_grid_oracle(x1: [f64; 3], x2: [f64; 3]) -> f64 {
    let unit = |x: [f64; 3]| {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        [x[0] / r, x[1] / r, x[2] / r]
    };
    let (s1, s2) = (unit(x1), unit(x2));
    let a0 = 1.0 / 3.0;
    let eval = |a1: f64, a2: f64| -> Option<f64> {
        let c = [[a0, a1, a2], [a1, a0, a1], [a2, a1, a0]];
        if eig3(&c)[0] <= 1e-9 {
            return None;
        }
        let b1 = 3.0 / inv_quad3(&c, &s1);
        let b2 = 3.0 / inv_quad3(&c, &s2);
        let obj = |d1: f64, d2: f64| {
            let mut r = c;
            for i in 0..3 {
                for j in 0..3 {
                    r[i][j] -= 0.5 * (d1 * s1[i] * s1[j] + d2 * s2[i] * s2[j]);
                }
            }
            let e = eig3(&r);
            e[0].abs().max(e[2].abs())
        };
        Some(ternary(0.0, b1, 40, |d1| ternary(0.0, b2, 40, |d2| obj(d1, d2))))
    };
    let mut best = (f64::INFINITY, 0.0, 0.0);
    let coarse = 0.01;
    let steps = (2.0 * a0 / coarse).ceil() as i64;
    for i in 0..=steps {
        for j in 0..=steps {
            let (a1, a2) = (-a0 + i as f64 * coarse, -a0 + j as f64 * coarse);
            if let Some(v) = eval(a1, a2) {
                if v < best.0 {
                    best = (v, a1, a2);
                }
            }
        }
    }
    let fine = 1e-3;
    let (c1, c2) = (best.1, best.2);
    for i in -20..=20 {
        for j in -20..=20 {
            let (a1, a2) = (c1 + i as f64 * fine, c2 + j as f64 * fine);
            if let Some(v) = eval(a1, a2) {
                best.0 = best.0.min(v);
            }
        }
    }
    best.0
}

/// Small conic programs with optimal values known in closed form.
pub fn oracle_library() -> Vec<(&'static str, ConicProblem, f64)> {
    let mut out = Vec::new();
    let var = |k: usize| AffineExpr::default().term(k, 1.0);

    // minimize x s.t. x ≥ 1
    let mut b = ProblemBuilder::new();
    let x = b.add_variables("x", 1).start;
    b.add_objective(x, 1.0);
    b.add_nonneg(AffineExpr::constant(-1.0).term(x, 1.0));
    out.push(("lp lower bound", b.build(), 1.0));

    // minimize x + y s.t. x + 2y ≥ 2, 3x + y ≥ 3, x, y ≥ 0  → (4/5, 3/5)
    let mut b = ProblemBuilder::new();
    let v = b.add_variables("xy", 2);
    let (x, y) = (v.start, v.start + 1);
    b.add_objective(x, 1.0);
    b.add_objective(y, 1.0);
    b.add_nonneg(AffineExpr::constant(-2.0).term(x, 1.0).term(y, 2.0));
    b.add_nonneg(AffineExpr::constant(-3.0).term(x, 3.0).term(y, 1.0));
    b.add_nonneg(var(x));
    b.add_nonneg(var(y));
    out.push(("lp two constraints", b.build(), 1.4));

    // minimize 2x + 3y + z s.t. x + y + z = 1, x, y, z ≥ 0
    let mut b = ProblemBuilder::new();
    let v = b.add_variables("xyz", 3);
    for (k, c) in [2.0, 3.0, 1.0].into_iter().enumerate() {
        b.add_objective(v.start + k, c);
        b.add_nonneg(var(v.start + k));
    }
    b.add_equality(v.clone().map(|k| (k, 1.0)).collect(), 1.0);
    out.push(("lp simplex", b.build(), 1.0));

    // minimize −x s.t. −1 ≤ x ≤ 3
    let mut b = ProblemBuilder::new();
    let x = b.add_variables("x", 1).start;
    b.add_objective(x, -1.0);
    b.add_nonneg(AffineExpr::constant(3.0).term(x, -1.0));
    b.add_nonneg(AffineExpr::constant(1.0).term(x, 1.0));
    out.push(("lp upper bound", b.build(), -3.0));

    // minimum / maximum eigenvalue programs: min ⟨±A, X⟩, trace X = 1, X ⪰ 0
    let sqrt2 = 2f64.sqrt();
    let eig_cases: Vec<(&'static str, SymMatrix, f64, f64)> = vec![
        ("min eig diag(1,2)", SymMatrix::from_diagonal(&[1.0, 2.0]), 1.0, 1.0),
        (
            "min eig [[2,1],[1,2]]",
            SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap(),
            1.0,
            1.0,
        ),
        (
            "min eig tridiagonal 3x3",
            SymMatrix::from_rows(&[vec![4.0, 1.0, 0.0], vec![1.0, 4.0, 1.0], vec![0.0, 1.0, 4.0]]).unwrap(),
            1.0,
            4.0 - sqrt2,
        ),
        (
            "max eig [[2,1],[1,2]]",
            SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap(),
            -1.0,
            -3.0,
        ),
    ];
    for (name, a, sign, truth) in eig_cases {
        let d = a.dim();
        let mut b = ProblemBuilder::new();
        let x = b.add_variables("x", d * (d + 1) / 2);
        for (k, c) in svec(&a).into_iter().enumerate() {
            b.add_objective(x.start + k, sign * c);
        }
        b.add_equality((0..d).map(|i| (x.start + i * (i + 3) / 2, 1.0)).collect(), 1.0);
        b.add_psd(d, x.clone().map(var).collect());
        out.push((name, b.build(), truth));
    }

    // spectral-norm epigraphs: minimize t s.t. −tI ⪯ A − xI·shift ⪯ tI
    let epi_cases: Vec<(&'static str, SymMatrix, bool, f64)> = vec![
        ("spectral diag(3,-4)", SymMatrix::from_diagonal(&[3.0, -4.0]), false, 4.0),
        (
            "spectral [[1,2],[2,1]]",
            SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap(),
            false,
            3.0,
        ),
        ("spectral shifted diag(1,5)", SymMatrix::from_diagonal(&[1.0, 5.0]), true, 2.0),
        (
            "spectral swap 3x3",
            SymMatrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 0.5]]).unwrap(),
            false,
            1.0,
        ),
    ];
    for (name, a, shifted, truth) in epi_cases {
        let d = a.dim();
        let mut b = ProblemBuilder::new();
        let t = b.add_variables("t", 1).start;
        let shift = b.add_variables("shift", 1).start;
        b.add_objective(t, 1.0);
        if !shifted {
            b.add_equality(vec![(shift, 1.0)], 0.0);
        }
        let av = svec(&a);
        for sign in [1.0, -1.0] {
            let mut exprs = Vec::new();
            for j in 0..d {
                for i in 0..=j {
                    let k = j * (j + 1) / 2 + i;
                    let mut e = AffineExpr::constant(sign * av[k]);
                    if i == j {
                        e.add_term(t, 1.0);
                        e.add_term(shift, -sign);
                    }
                    exprs.push(e);
                }
            }
            b.add_psd(d, exprs);
        }
        out.push((name, b.build(), truth));
    }

    // minimize trace X s.t. X₁₂ = 1, X ⪰ 0  → X = [[1,1],[1,1]]
    let mut b = ProblemBuilder::new();
    let x = b.add_variables("x", 3);
    b.add_objective(x.start, 1.0);
    b.add_objective(x.start + 2, 1.0);
    b.add_equality(vec![(x.start + 1, 1.0 / sqrt2)], 1.0);
    b.add_psd(2, x.clone().map(var).collect());
    out.push(("sdp fixed off-diagonal", b.build(), 2.0));

    out
}
