//! Pain-state detection from windowed multi-channel hemodynamic signals.
//!
//! The pipeline is:
//!
//! 1. [`dataset`]: recording sessions, windowing/labeling, JSON-lines I/O and a
//!    seeded synthetic cohort generator.
//! 2. [`cwt`]: Morlet continuous wavelet transform on a ten-voices-per-octave
//!    scale grid, producing magnitude scalograms.
//! 3. [`features`]: five band features (mean, max, std, argmax location, slope)
//!    per band per channel, z-score normalization and CSV I/O.
//! 4. [`hblr`]: hierarchical Bayesian logistic regression with a truncated
//!    stick-breaking Dirichlet-process prior, fitted by mean-field coordinate
//!    ascent on a Jaakkola-Jordan bounded evidence lower bound.
//! 5. [`baselines`]: pooled L1/L2 logistic regression and SMO-trained SVMs.
//! 6. [`eval`]: balancing, stratified per-task folds, metrics, the
//!    cross-validation harness and cluster-recovery scoring.

pub mod baselines;
pub mod config;
pub mod cwt;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod hblr;
pub mod seed;

pub use error::{Error, Result};
