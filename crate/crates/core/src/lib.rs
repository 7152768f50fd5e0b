//! Structured shape-matrix estimation for elliptically distributed data.
//!
//! The crate provides the classical estimators (sample covariance, Tyler's
//! M-estimator, projection onto a structure set) and COCA, a convex
//! relaxation of the moment-matching problem solved as a semidefinite
//! program by the built-in [`conic`] solver.

pub mod conic;
pub mod error;
pub mod estimators;
pub mod matrix;
pub mod sampler;
pub mod structures;

pub use error::{Error, Result};
pub use matrix::{align_scale, eig_sym, frobenius_norm, spectral_norm, trace_normalize, EigenPair, SymMatrix};
pub use sampler::{normalize_samples, sample_elliptical, SampleSet, TextureLaw};
