use std::fmt;
use std::path::Path;

use coca::conic::SolverOptions;
use coca::estimators::{MatrixNorm, TylerOptions};
use coca::structures::{make_banded_target, make_toeplitz_target, StructureSpec};
use coca::{SymMatrix, TextureLaw};
use serde::{Deserialize, Serialize};

use crate::BenchError;

/// Where the true shape matrix comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    /// `C_ij = rho^|i−j|`.
    Toeplitz { rho: f64 },
    /// Leading block of the 20-dimensional pentadiagonal benchmark matrix,
    /// shifted if needed.
    BandedPaper,
    Explicit { matrix: SymMatrix },
}

/// A resolved target and whether a definiteness shift was applied to it.
#[derive(Debug, Clone)]
pub struct ResolvedTarget {
    pub matrix: SymMatrix,
    pub shift: f64,
}

impl Target {
    pub fn resolve(&self, p: usize) -> Result<ResolvedTarget, BenchError> {
        let (matrix, shift) = match self {
            Target::Toeplitz { rho } => (make_toeplitz_target(p, *rho)?, 0.0),
            Target::BandedPaper => {
                let t = make_banded_target(p)?;
                (t.matrix, t.shift)
            }
            Target::Explicit { matrix } => {
                if matrix.dim() != p {
                    return Err(BenchError::Config(format!(
                        "explicit target is {}x{}, expected p = {p}",
                        matrix.dim(),
                        matrix.dim()
                    )));
                }
                (matrix.clone(), 0.0)
            }
        };
        Ok(ResolvedTarget { matrix, shift })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Sample,
    Tyler,
    Proj,
    Coca,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::Sample,
        EstimatorKind::Tyler,
        EstimatorKind::Proj,
        EstimatorKind::Coca,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Sample => "sample",
            EstimatorKind::Tyler => "tyler",
            EstimatorKind::Proj => "proj",
            EstimatorKind::Coca => "coca",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Norm used for the squared error after trace alignment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMetric {
    #[default]
    Frobenius,
    Spectral,
}

/// One Monte Carlo experiment. Serialized as JSON; every field except
/// `p`, `target`, `structure`, `n_grid` and `trials` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub p: usize,
    pub target: Target,
    pub structure: StructureSpec,
    #[serde(default = "default_texture")]
    pub texture: TextureLaw,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub norm: MatrixNorm,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub tyler: TylerOptions,
    #[serde(default)]
    pub metric: ErrorMetric,
}

fn default_texture() -> TextureLaw {
    TextureLaw::chi_square(1)
}

fn default_estimators() -> Vec<EstimatorKind> {
    EstimatorKind::ALL.to_vec()
}

/// Names accepted by [`ExperimentConfig::preset`].
pub const PRESETS: [&str; 5] = ["smoke", "toeplitz-desk", "banded-desk", "toeplitz-paper", "banded-paper"];

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self, BenchError> {
        let desk_grid = vec![5, 10, 20, 40];
        let full_grid = vec![10, 20, 40, 80];
        let base = |p, target, structure, n_grid, trials| ExperimentConfig {
            p,
            target,
            structure,
            texture: default_texture(),
            n_grid,
            trials,
            base_seed: 2014,
            estimators: default_estimators(),
            norm: MatrixNorm::Spectral,
            solver: SolverOptions::default(),
            tyler: TylerOptions::default(),
            metric: ErrorMetric::Frobenius,
        };
        let config = match name {
            "smoke" => ExperimentConfig {
                estimators: vec![EstimatorKind::Sample],
                ..base(3, Target::Toeplitz { rho: 0.5 }, StructureSpec::Toeplitz, vec![4], 2)
            },
            "toeplitz-desk" => base(10, Target::Toeplitz { rho: 0.8 }, StructureSpec::Toeplitz, desk_grid, 100),
            "banded-desk" => base(
                10,
                Target::BandedPaper,
                StructureSpec::Banded { bandwidth: 2 },
                desk_grid,
                100,
            ),
            "toeplitz-paper" => base(20, Target::Toeplitz { rho: 0.8 }, StructureSpec::Toeplitz, full_grid, 1000),
            "banded-paper" => base(
                20,
                Target::BandedPaper,
                StructureSpec::Banded { bandwidth: 2 },
                full_grid,
                1000,
            ),
            other => {
                return Err(BenchError::Config(format!(
                    "unknown preset {other:?}; expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(config)
    }

    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let config: Self = serde_json::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |msg: String| Err(BenchError::Config(msg));
        if self.p == 0 {
            return bad("p must be positive".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.n_grid.is_empty() {
            return bad("n_grid must not be empty".into());
        }
        if self.n_grid[0] == 0 || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("n_grid must be positive and strictly ascending, got {:?}", self.n_grid));
        }
        if self.estimators.is_empty() {
            return bad("at least one estimator required".into());
        }
        let mut sorted = self.estimators.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.estimators.len() {
            return bad("estimators must not repeat".into());
        }
        self.structure.validate(self.p)?;
        self.texture.validate()?;
        self.solver.validate()?;
        self.target.resolve(self.p)?;
        Ok(())
    }
}
