//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p coca-bench --test acceptance`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::time::Instant;

use coca::conic::{kkt_residuals, solve, SolveStatus, SolverOptions};
use coca::estimators::{coca, moment_map, tyler, EstimatorStatus, MatrixNorm, TylerOptions};
use coca::sampler::derive_seed;
use coca::structures::{make_toeplitz_target, StructureSpec};
use coca::{align_scale, eig_sym, frobenius_norm, sample_elliptical, trace_normalize, Error, SymMatrix, TextureLaw};
use coca_bench::{run_experiment, to_csv, EstimatorKind, ExperimentConfig, ResultTable, Target};

type Outcome = Result<String, String>;

fn ensure(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn tight() -> SolverOptions {
    SolverOptions::default().with_tolerances(1e-9, 1e-8)
}

fn chi1() -> TextureLaw {
    TextureLaw::chi_square(1)
}

fn unconstrained_coca_is_tyler() -> Outcome {
    let truth = make_toeplitz_target(5, 0.5).map_err(|e| e.to_string())?;
    let mut worst_rel = 0.0f64;
    let mut worst_obj = 0.0f64;
    let mut passed = 0;
    for t in 0..20u64 {
        let x = sample_elliptical(&truth, chi1(), 25, derive_seed(1, &[t])).unwrap();
        let r = coca(&x, &StructureSpec::Unconstrained, MatrixNorm::Spectral, &tight()).unwrap();
        let ty = tyler(&x, TylerOptions::default()).unwrap().shape;
        let aligned = align_scale(&r.shape, &ty).unwrap();
        let rel = frobenius_norm(&(&aligned - &ty)).unwrap() / frobenius_norm(&ty).unwrap();
        let obj = r.objective.unwrap();
        worst_rel = worst_rel.max(rel);
        worst_obj = worst_obj.max(obj);
        if rel <= 1e-3 && obj <= 1e-6 {
            passed += 1;
        }
    }
    ensure(
        passed == 20,
        format!("{passed}/20 trials, worst relative deviation {worst_rel:.2e}, worst objective {worst_obj:.2e}"),
    )
}

fn tyler_fixed_point() -> Outcome {
    let truth = make_toeplitz_target(5, 0.7).unwrap();
    let x = sample_elliptical(&truth, chi1(), 50, 5).unwrap();
    let r = tyler(&x, TylerOptions::default()).unwrap();
    let image = trace_normalize(&moment_map(&r.shape, &x).unwrap()).unwrap();
    let residual = frobenius_norm(&(&r.shape - &image)).unwrap();
    let factors: Vec<f64> = (0..50).map(|i| 0.05 + 3.0 * ((i * 37 % 50) as f64)).collect();
    let y = x.rescaled(&factors).unwrap();
    let shift = tyler(&y, TylerOptions::default()).unwrap().shape.max_abs_diff(&r.shape);
    ensure(
        residual <= 1e-10 && shift <= 1e-8,
        format!("residual {residual:.2e}, rescaling change {shift:.2e}"),
    )
}

fn moment_identity() -> Outcome {
    let c = make_toeplitz_target(3, 0.8).unwrap();
    let x = sample_elliptical(&c, chi1(), 100_000, 2024).unwrap();
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
    ensure(rel <= 0.05, format!("relative error {rel:.3e}"))
}

fn conic_oracles() -> Outcome {
    let library = common::oracle_library();
    let opts = SolverOptions::default().with_tolerances(1e-9, 1e-9);
    let mut worst_obj = 0.0f64;
    let mut worst_kkt = 0.0f64;
    let mut bad = Vec::new();
    for (name, problem, truth) in &library {
        let sol = solve(problem, &opts).unwrap();
        let err = (sol.objective - truth).abs();
        let kkt = kkt_residuals(problem, &sol).unwrap().max();
        worst_obj = worst_obj.max(err);
        worst_kkt = worst_kkt.max(kkt);
        if sol.status != SolveStatus::Optimal || err > 1e-5 || kkt > 1e-6 {
            bad.push(*name);
        }
    }
    ensure(
        bad.is_empty() && library.len() >= 10,
        format!(
            "{} problems, worst objective error {worst_obj:.2e}, worst kkt {worst_kkt:.2e}, failing {bad:?}",
            library.len()
        ),
    )
}

fn grid_oracle() -> Outcome {
    let c = make_toeplitz_target(3, 0.6).unwrap();
    let mut worst = 0.0f64;
    for seed in 100..105 {
        let x = sample_elliptical(&c, chi1(), 2, seed).unwrap();
        let r = coca(&x, &StructureSpec::Toeplitz, MatrixNorm::Spectral, &tight()).unwrap();
        let s = x.samples();
        let oracle = common::coca_grid_oracle([s[0][0], s[0][1], s[0][2]], [s[1][0], s[1][1], s[1][2]]);
        worst = worst.max((r.objective.unwrap() - oracle).abs());
    }
    ensure(worst <= 5e-3, format!("5 instances, worst objective gap {worst:.2e}"))
}

fn exists_below_dimension() -> Outcome {
    let truth = make_toeplitz_target(10, 0.8).unwrap();
    let mut ok = 0;
    let mut tyler_refused = 0;
    for t in 0..20u64 {
        let x = sample_elliptical(&truth, chi1(), 5, derive_seed(6, &[t])).unwrap();
        if let Ok(r) = coca(&x, &StructureSpec::Toeplitz, MatrixNorm::Spectral, &SolverOptions::default()) {
            let min = eig_sym(&r.shape).unwrap().values[0];
            if r.status == EstimatorStatus::Solver(SolveStatus::Optimal)
                && min >= 0.0
                && (r.shape.trace() - 1.0).abs() <= 1e-12
            {
                ok += 1;
            }
        }
        if matches!(tyler(&x, TylerOptions::default()), Err(Error::NotExist { n: 5, p: 10 })) {
            tyler_refused += 1;
        }
    }
    ensure(
        ok == 20 && tyler_refused == 20,
        format!("coca optimal with PSD trace-one output on {ok}/20, tyler NotExist on {tyler_refused}/20"),
    )
}

fn median(table: &ResultTable, kind: EstimatorKind, n: usize) -> f64 {
    table.cell(kind, n).map_or(f64::NAN, |c| c.mse_median)
}

fn figure_ordering() -> Outcome {
    let mut lines = Vec::new();
    let mut all = true;
    for preset in ["toeplitz-desk", "banded-desk"] {
        let config = ExperimentConfig::preset(preset).unwrap();
        let table = run_experiment(&config, None).map_err(|e| e.to_string())?;
        let grid = &config.n_grid;
        let wins = grid
            .iter()
            .filter(|&&n| median(&table, EstimatorKind::Coca, n) <= median(&table, EstimatorKind::Proj, n))
            .count();
        let below_sample = grid[..2].iter().all(|&n| {
            let s = median(&table, EstimatorKind::Sample, n);
            median(&table, EstimatorKind::Coca, n) <= s && median(&table, EstimatorKind::Proj, n) <= s
        });
        let failures: usize = table.cells.iter().map(|c| c.failures).sum();
        let medians: Vec<String> = grid
            .iter()
            .map(|&n| {
                format!(
                    "n={n}: sample {:.3} proj {:.3} coca {:.3}",
                    median(&table, EstimatorKind::Sample, n),
                    median(&table, EstimatorKind::Proj, n),
                    median(&table, EstimatorKind::Coca, n)
                )
            })
            .collect();
        all &= wins >= 3 && below_sample;
        lines.push(format!(
            "{preset}: coca <= proj on {wins}/4, both <= sample at smallest two n: {below_sample}, failures {failures} [{}]",
            medians.join("; ")
        ));
    }
    ensure(all, lines.join(" | "))
}

fn consistency() -> Outcome {
    let config = ExperimentConfig {
        p: 5,
        target: Target::Toeplitz { rho: 0.8 },
        structure: StructureSpec::Toeplitz,
        texture: chi1(),
        n_grid: vec![50, 200, 800],
        trials: 50,
        base_seed: 8,
        estimators: vec![EstimatorKind::Coca],
        norm: MatrixNorm::Spectral,
        solver: SolverOptions::default().with_tolerances(1e-6, 1e-5),
        tyler: TylerOptions::default(),
        metric: Default::default(),
    };
    let table = run_experiment(&config, None).map_err(|e| e.to_string())?;
    let medians: Vec<f64> = config.n_grid.iter().map(|&n| median(&table, EstimatorKind::Coca, n)).collect();
    let failures: usize = table.cells.iter().map(|c| c.failures).sum();
    ensure(
        medians.windows(2).all(|w| w[1] < w[0]),
        format!(
            "medians {} at n = {:?}, failures {failures}",
            medians.iter().map(|m| format!("{m:.4e}")).collect::<Vec<_>>().join(" > "),
            config.n_grid
        ),
    )
}

fn determinism() -> Outcome {
    let config = ExperimentConfig {
        p: 4,
        target: Target::Toeplitz { rho: 0.7 },
        structure: StructureSpec::Toeplitz,
        texture: chi1(),
        n_grid: vec![3, 6, 12],
        trials: 6,
        base_seed: 9,
        estimators: EstimatorKind::ALL.to_vec(),
        norm: MatrixNorm::Spectral,
        solver: SolverOptions::default(),
        tyler: TylerOptions::default(),
        metric: Default::default(),
    };
    let runs: Vec<String> = [1, 3, 1, 4]
        .iter()
        .map(|&threads| to_csv(&run_experiment(&config, Some(threads)).unwrap()))
        .collect();
    ensure(
        runs.iter().all(|r| r == &runs[0]),
        format!("{} runs with 1, 3, 1 and 4 workers, {} bytes each", runs.len(), runs[0].len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("unconstrained COCA equals Tyler", unconstrained_coca_is_tyler),
        ("Tyler fixed point and rescaling invariance", tyler_fixed_point),
        ("moment identity", moment_identity),
        ("conic solver oracle suite", conic_oracles),
        ("COCA matches grid-search oracle", grid_oracle),
        ("COCA exists below dimension", exists_below_dimension),
        ("desk-scale Toeplitz and banded ordering", figure_ordering),
        ("empirical consistency", consistency),
        ("determinism across worker counts", determinism),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {}: {name} ({detail}; {secs:.1}s)", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}: {name} ({detail}; {secs:.1}s)", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
