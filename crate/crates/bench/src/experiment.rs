use coca::estimators::{coca, project_estimator, sample_covariance, tyler, EstimatorResult};
use coca::sampler::derive_seed;
use coca::{align_scale, frobenius_norm, sample_elliptical, spectral_norm, SampleSet, SymMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ErrorMetric, EstimatorKind, ExperimentConfig};
use crate::BenchError;

/// `‖align_scale(estimate, truth) − truth‖²` in the chosen norm.
pub fn squared_error(estimate: &SymMatrix, truth: &SymMatrix, metric: ErrorMetric) -> coca::Result<f64> {
    let diff = &align_scale(estimate, truth)? - truth;
    let e = match metric {
        ErrorMetric::Frobenius => frobenius_norm(&diff)?,
        ErrorMetric::Spectral => spectral_norm(&diff)?,
    };
    Ok(e * e)
}

/// Sample set of trial `t` at sample size `n`.
pub fn trial_samples(config: &ExperimentConfig, truth: &SymMatrix, n: usize, t: usize) -> coca::Result<SampleSet> {
    let seed = derive_seed(config.base_seed, &[n as u64, t as u64]);
    sample_elliptical(truth, config.texture, n, seed)
}

/// What one estimator did on one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrialOutcome {
    /// Errors in the configured metric and in the spectral norm.
    Ok { error: f64, spectral: f64 },
    Failed,
    /// The estimator is undefined for this sample size.
    Absent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub estimator: EstimatorKind,
    pub n: usize,
    pub trials: usize,
    #[serde(with = "nan_as_null")]
    pub mse_mean: f64,
    #[serde(with = "nan_as_null")]
    pub mse_median: f64,
    #[serde(with = "nan_as_null")]
    pub mse_stderr: f64,
    pub failures: usize,
    /// Same statistics for the squared spectral-norm error.
    #[serde(with = "nan_as_null")]
    pub spectral_mean: f64,
    #[serde(with = "nan_as_null")]
    pub spectral_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMetadata {
    pub version: String,
    pub config: ExperimentConfig,
    pub banded_shift_applied: bool,
    pub banded_shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub metadata: TableMetadata,
    pub cells: Vec<Cell>,
}

impl ResultTable {
    pub fn cell(&self, estimator: EstimatorKind, n: usize) -> Option<&Cell> {
        self.cells.iter().find(|c| c.estimator == estimator && c.n == n)
    }

    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Runs every (n, trial) pair on a pool of `threads` workers (all cores if
/// `None`). The table does not depend on the worker count.
pub fn run_experiment(config: &ExperimentConfig, threads: Option<usize>) -> Result<ResultTable, BenchError> {
    config.validate()?;
    let target = config.target.resolve(config.p)?;
    let truth = &target.matrix;

    let units: Vec<(usize, usize)> = config
        .n_grid
        .iter()
        .flat_map(|&n| (0..config.trials).map(move |t| (n, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| BenchError::Pool(e.to_string()))?;
    let outcomes: Vec<Vec<TrialOutcome>> =
        pool.install(|| units.par_iter().map(|&(n, t)| run_trial(config, truth, n, t)).collect());

    let mut cells = Vec::new();
    for (k, &kind) in config.estimators.iter().enumerate() {
        for (g, &n) in config.n_grid.iter().enumerate() {
            let slot = &outcomes[g * config.trials..(g + 1) * config.trials];
            if let Some(cell) = aggregate(kind, n, slot.iter().map(|o| o[k])) {
                cells.push(cell);
            }
        }
    }
    Ok(ResultTable {
        metadata: TableMetadata {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            banded_shift_applied: target.shift > 0.0,
            banded_shift: target.shift,
        },
        cells,
    })
}

fn run_trial(config: &ExperimentConfig, truth: &SymMatrix, n: usize, t: usize) -> Vec<TrialOutcome> {
    let samples = match trial_samples(config, truth, n, t) {
        Ok(s) => s,
        Err(_) => return vec![TrialOutcome::Failed; config.estimators.len()],
    };
    let wants = |k| config.estimators.contains(&k);
    let sample = sample_covariance(&samples);
    let tyler_defined = n > config.p;
    let ty = if tyler_defined && (wants(EstimatorKind::Tyler) || wants(EstimatorKind::Proj)) {
        Some(tyler(&samples, config.tyler))
    } else {
        None
    };

    let score = |r: &EstimatorResult| -> TrialOutcome {
        match (
            squared_error(&r.shape, truth, config.metric),
            squared_error(&r.shape, truth, ErrorMetric::Spectral),
        ) {
            (Ok(error), Ok(spectral)) if error.is_finite() => TrialOutcome::Ok { error, spectral },
            _ => TrialOutcome::Failed,
        }
    };
    let scored = |r: &coca::Result<EstimatorResult>| r.as_ref().map_or(TrialOutcome::Failed, score);

    config
        .estimators
        .iter()
        .map(|kind| match kind {
            EstimatorKind::Sample => scored(&sample),
            EstimatorKind::Tyler => match &ty {
                None => TrialOutcome::Absent,
                Some(r) => scored(r),
            },
            EstimatorKind::Proj => {
                let pilot = match &ty {
                    Some(Ok(r)) => Ok(&r.shape),
                    _ => sample.as_ref().map(|r| &r.shape).map_err(|_| ()),
                };
                match pilot {
                    Ok(pilot) => scored(&project_estimator(pilot, &config.structure, config.norm, &config.solver)),
                    Err(()) => TrialOutcome::Failed,
                }
            }
            EstimatorKind::Coca => match coca(&samples, &config.structure, config.norm, &config.solver) {
                Ok(r) if r.objective.is_some_and(|o| o >= 0.0) && r.within_solver_tolerance() => score(&r),
                _ => TrialOutcome::Failed,
            },
        })
        .collect()
}

fn aggregate(estimator: EstimatorKind, n: usize, outcomes: impl Iterator<Item = TrialOutcome>) -> Option<Cell> {
    let mut errors = Vec::new();
    let mut spectral = Vec::new();
    let mut failures = 0;
    let mut trials = 0;
    for o in outcomes {
        match o {
            TrialOutcome::Absent => continue,
            TrialOutcome::Failed => failures += 1,
            TrialOutcome::Ok { error, spectral: s } => {
                errors.push(error);
                spectral.push(s);
            }
        }
        trials += 1;
    }
    if trials == 0 {
        return None;
    }
    let (mse_mean, mse_stderr) = mean_and_stderr(&errors);
    let (spectral_mean, _) = mean_and_stderr(&spectral);
    Some(Cell {
        estimator,
        n,
        trials,
        mse_mean,
        mse_median: median(&mut errors),
        mse_stderr,
        failures,
        spectral_mean,
        spectral_median: median(&mut spectral),
    })
}

fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}
