//! Seeded compound Gaussian sampling, `x = √τ · v` with `v ~ N(0, C)`.
//!
//! Randomness comes from ChaCha20 keyed by the 64-bit seed. The Gaussian
//! draws use stream [`GAUSSIAN_STREAM`] and the texture draws use stream
//! [`TEXTURE_STREAM`] of the same key, so two sample sets that share a seed
//! but differ in texture law share their Gaussian directions exactly.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{eig_sym, SymMatrix};

pub const GAUSSIAN_STREAM: u64 = 0;
pub const TEXTURE_STREAM: u64 = 1;

/// Law of the texture `τ` multiplying the Gaussian component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TextureLaw {
    /// `τ ~ χ²(dof)`, optionally divided by `dof` so that `E[τ] = 1`.
    ChiSquare {
        dof: u32,
        #[serde(default)]
        unit_mean: bool,
    },
    /// `τ = 1`: plain Gaussian samples.
    Constant,
}

impl TextureLaw {
    pub fn chi_square(dof: u32) -> Self {
        TextureLaw::ChiSquare {
            dof,
            unit_mean: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TextureLaw::ChiSquare { dof: 0, .. } => {
                Err(Error::InvalidInput("chi-square texture needs dof >= 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// `E[τ]`.
    pub fn mean(&self) -> f64 {
        match *self {
            TextureLaw::ChiSquare { unit_mean: true, .. } | TextureLaw::Constant => 1.0,
            TextureLaw::ChiSquare { dof, .. } => dof as f64,
        }
    }

    fn draw(&self, rng: &mut ChaCha20Rng) -> f64 {
        match *self {
            TextureLaw::Constant => 1.0,
            TextureLaw::ChiSquare { dof, unit_mean } => {
                let chi = ChiSquared::new(dof as f64).expect("dof validated");
                loop {
                    let tau: f64 = chi.sample(rng);
                    if tau > 0.0 {
                        return if unit_mean { tau / dof as f64 } else { tau };
                    }
                }
            }
        }
    }
}

/// `n` observations of a `p`-dimensional vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    dim: usize,
    samples: Vec<Vec<f64>>,
    /// Seed the set was generated from, if any.
    pub seed: Option<u64>,
    pub texture: Option<TextureLaw>,
}

impl SampleSet {
    /// Wraps externally supplied observations.
    pub fn from_vectors(samples: Vec<Vec<f64>>) -> Result<Self> {
        let dim = samples
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidInput("sample set is empty".into()))?;
        if dim == 0 {
            return Err(Error::InvalidInput("samples must have positive dimension".into()));
        }
        for (i, x) in samples.iter().enumerate() {
            if x.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "sample {i} has length {}, expected {dim}",
                    x.len()
                )));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("sample {i} is not finite")));
            }
        }
        Ok(Self {
            dim,
            samples,
            seed: None,
            texture: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.iter().map(Vec::as_slice)
    }

    /// Index of the first all-zero sample, if any.
    pub fn first_zero(&self) -> Option<usize> {
        self.samples.iter().position(|x| x.iter().all(|&v| v == 0.0))
    }

    /// Returns a copy with each sample multiplied by the matching factor.
    pub fn rescaled(&self, factors: &[f64]) -> Result<Self> {
        if factors.len() != self.count() {
            return Err(Error::InvalidInput("one factor per sample required".into()));
        }
        let samples = self
            .samples
            .iter()
            .zip(factors)
            .map(|(x, &c)| x.iter().map(|v| v * c).collect())
            .collect();
        Ok(Self {
            samples,
            ..self.clone()
        })
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed from a base seed and a list of indices:
/// `h₀ = splitmix64(base)`, `hₖ = splitmix64(hₖ₋₁ ⊕ indexₖ)`.
pub fn derive_seed(base: u64, indices: &[u64]) -> u64 {
    indices
        .iter()
        .fold(splitmix64(base), |h, &i| splitmix64(h ^ i))
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Square-root factor `L` with `L Lᵀ = shape`, via Cholesky when the shape is
/// positive definite and via the eigendecomposition otherwise.
fn shape_factor(shape: &SymMatrix) -> Result<DMatrix<f64>> {
    if let Some(chol) = shape.as_matrix().clone().cholesky() {
        return Ok(chol.l());
    }
    let eig = eig_sym(shape)?;
    let scale = crate::matrix::frobenius_norm(shape)?;
    if eig.values[0] < -1e-10 * scale {
        return Err(Error::InvalidShape {
            min_eigenvalue: eig.values[0],
        });
    }
    let mut l = eig.vectors.clone();
    for (k, &lambda) in eig.values.iter().enumerate() {
        l.column_mut(k).scale_mut(lambda.max(0.0).sqrt());
    }
    Ok(l)
}

/// Draws `n` compound Gaussian samples with the given shape matrix.
pub fn sample_elliptical(
    shape: &SymMatrix,
    texture: TextureLaw,
    n: usize,
    seed: u64,
) -> Result<SampleSet> {
    texture.validate()?;
    if n == 0 {
        return Err(Error::InvalidInput("need at least one sample".into()));
    }
    if !shape.is_finite() {
        return Err(Error::InvalidInput("shape has non-finite entries".into()));
    }
    let tr = shape.trace();
    if !(tr > 0.0) {
        return Err(Error::DegenerateScale(tr));
    }
    let p = shape.dim();
    let factor = shape_factor(shape)?;
    let mut gauss = stream_rng(seed, GAUSSIAN_STREAM);
    let mut tex = stream_rng(seed, TEXTURE_STREAM);

    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let v = loop {
            let z = DVector::from_fn(p, |_, _| gauss.sample::<f64, _>(StandardNormal));
            let v = &factor * z;
            if v.iter().any(|&e| e != 0.0) {
                break v;
            }
        };
        let root_tau = texture.draw(&mut tex).sqrt();
        samples.push(v.iter().map(|e| e * root_tau).collect());
    }
    Ok(SampleSet {
        dim: p,
        samples,
        seed: Some(seed),
        texture: Some(texture),
    })
}

/// Projects every sample onto the unit sphere, `sᵢ = xᵢ / ‖xᵢ‖₂`.
pub fn normalize_samples(set: &SampleSet) -> Result<SampleSet> {
    let samples = set
        .samples
        .iter()
        .enumerate()
        .map(|(index, x)| {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                Err(Error::DegenerateSample { index })
            } else {
                Ok(x.iter().map(|v| v / norm).collect())
            }
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(SampleSet {
        samples,
        ..set.clone()
    })
}

/// Uniform draw in `[0, 1)` from a derived stream; handy for tests that need
/// auxiliary randomness tied to a seed.
pub fn uniform_stream(seed: u64, stream: u64) -> impl FnMut() -> f64 {
    let mut rng = stream_rng(seed, stream);
    move || rng.random::<f64>()
}
