mod common;

use coca::conic::SolverOptions;
use coca::estimators::{
    coca, coca_objective, moment_map, project_estimator, relaxation_gap, tyler, MatrixNorm, TylerOptions,
};
use coca::structures::{contains, feasibility_gap, make_toeplitz_target, project_frobenius, StructureSpec};
use coca::{align_scale, frobenius_norm, sample_elliptical, trace_normalize, SymMatrix, TextureLaw};
use proptest::prelude::*;

#[test]
fn moment_identity_monte_carlo() {
    let c = make_toeplitz_target(3, 0.8).unwrap();
    let x = sample_elliptical(&c, TextureLaw::chi_square(1), 100_000, 2024).unwrap();
    let inv = c.inverse_pd().unwrap();
    let mut acc = [[0.0; 3]; 3];
    for v in x.iter() {
        let w = 3.0 / inv.quad_form(v);
        for i in 0..3 {
            for j in 0..3 {
                acc[i][j] += w * v[i] * v[j];
            }
        }
    }
    let n = x.count() as f64;
    let mean = SymMatrix::from_fn(3, |i, j| acc[i][j] / n);
    let rel = frobenius_norm(&(&mean - &c)).unwrap() / frobenius_norm(&c).unwrap();
    assert!(rel < 0.05, "{rel}");
    // The library moment map is the same average.
    let f = moment_map(&c, &x).unwrap();
    assert!(f.max_abs_diff(&mean) < 1e-10);
}

#[test]
fn coca_matches_grid_oracle() {
    let c = make_toeplitz_target(3, 0.6).unwrap();
    let opts = SolverOptions::default().with_tolerances(1e-9, 1e-8);
    for seed in [11, 12] {
        let x = sample_elliptical(&c, TextureLaw::chi_square(1), 2, seed).unwrap();
        let r = coca(&x, &StructureSpec::Toeplitz, MatrixNorm::Spectral, &opts).unwrap();
        let s = x.samples();
        let oracle = common::coca_grid_oracle([s[0][0], s[0][1], s[0][2]], [s[1][0], s[1][1], s[1][2]]);
        let obj = r.objective.unwrap();
        assert!((obj - oracle).abs() <= 5e-3, "seed {seed}: {obj} vs {oracle}");
        assert!(obj <= oracle + 1e-5);
    }
}

#[test]
fn coca_below_feasible_point_bound() {
    let truth = make_toeplitz_target(4, 0.7).unwrap();
    let spec = StructureSpec::Toeplitz;
    let opts = SolverOptions::default();
    let mut checked = 0;
    for seed in 0..6 {
        let x = sample_elliptical(&truth, TextureLaw::chi_square(1), 12, seed).unwrap();
        let ty = tyler(&x, TylerOptions::default()).unwrap().shape;
        let candidate = project_frobenius(&spec, &ty).unwrap();
        if !contains(&spec, &candidate, 1e-12) || candidate.min_eigenvalue().unwrap() <= 0.0 {
            continue;
        }
        let candidate = trace_normalize(&candidate).unwrap();
        let inv = candidate.inverse_pd().unwrap();
        let d: Vec<f64> = x.iter().map(|v| 4.0 / inv.quad_form(v)).collect();
        let bound = coca_objective(&candidate, &d, &x, MatrixNorm::Spectral).unwrap();
        let r = coca(&x, &spec, MatrixNorm::Spectral, &opts).unwrap();
        assert!(r.objective.unwrap() <= bound + 1e-5, "seed {seed}");
        checked += 1;
    }
    assert!(checked >= 3);
}

#[test]
fn coca_gaps_are_nonnegative() {
    let truth = make_toeplitz_target(4, 0.7).unwrap();
    let x = sample_elliptical(&truth, TextureLaw::chi_square(1), 10, 3).unwrap();
    let r = coca(&x, &StructureSpec::Toeplitz, MatrixNorm::Spectral, &SolverOptions::default()).unwrap();
    for (g, v) in relaxation_gap(&r, &x).unwrap().iter().zip(x.iter()) {
        let norm2: f64 = v.iter().map(|a| a * a).sum();
        assert!(g * norm2 >= -1e-6, "{g}");
    }
}

#[test]
fn unconstrained_coca_is_tyler() {
    let truth = make_toeplitz_target(5, 0.5).unwrap();
    let opts = SolverOptions::default().with_tolerances(1e-9, 1e-8);
    for seed in 0..3 {
        let x = sample_elliptical(&truth, TextureLaw::chi_square(1), 25, seed).unwrap();
        let r = coca(&x, &StructureSpec::Unconstrained, MatrixNorm::Spectral, &opts).unwrap();
        let ty = tyler(&x, TylerOptions::default()).unwrap().shape;
        let aligned = align_scale(&r.shape, &ty).unwrap();
        let rel = frobenius_norm(&(&aligned - &ty)).unwrap() / frobenius_norm(&ty).unwrap();
        assert!(rel <= 1e-3, "seed {seed}: {rel}");
        assert!(r.objective.unwrap() <= 1e-6);
    }
}

#[test]
fn projection_of_tyler_stays_in_set() {
    let truth = make_toeplitz_target(4, 0.9).unwrap();
    let x = sample_elliptical(&truth, TextureLaw::chi_square(1), 30, 8).unwrap();
    let ty = tyler(&x, TylerOptions::default()).unwrap().shape;
    for norm in [MatrixNorm::Spectral, MatrixNorm::Frobenius] {
        let r = project_estimator(&ty, &StructureSpec::Toeplitz, norm, &SolverOptions::default()).unwrap();
        assert!(contains(&StructureSpec::Toeplitz, &r.shape, 1e-6));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn low_rank_gap_agrees_with_closed_form(
        seed in any::<u64>(),
        noise in 0.05f64..1.0,
        bound in 0.5f64..3.0,
    ) {
        let spec = StructureSpec::LowRankPlusNoise { noise_variance: noise, nuclear_bound: bound };
        let mut next = coca::sampler::uniform_stream(seed, 0);
        let v: Vec<f64> = (0..3).map(|_| next() - 0.5).collect();
        let scale = 2.0 * bound * next();
        let norm2: f64 = v.iter().map(|a| a * a).sum();
        let x = SymMatrix::outer(&v).scaled(scale / norm2);
        let m = &x + &SymMatrix::identity(3).scaled(noise);
        prop_assume!((scale - bound).abs() > 0.05);
        let opts = SolverOptions::default().with_tolerances(1e-9, 1e-9);
        let gap = feasibility_gap(&spec, &m, &opts).unwrap();
        if scale < bound {
            prop_assert!(gap <= 1e-6, "gap {}", gap);
            prop_assert!(contains(&spec, &m, 1e-9));
        } else {
            prop_assert!(gap > 1e-4, "gap {}", gap);
            prop_assert!(!contains(&spec, &m, 1e-9));
        }
    }
}
