//! Conditional generative sampling.
//!
//! A conditional generator `G(eta, x)` maps reference noise
//! `eta ~ N(0, I_m)` and a covariate `x` to a draw from the conditional law
//! of `Y` given `X = x`. It is learned by matching the joint law of
//! `(X, G(eta, X))` to that of `(X, Y)` under the variational (dual) form of
//! the KL divergence, with a neural critic standing in for the log density
//! ratio. Once trained, any conditional functional (mean, SD, quantiles,
//! prediction intervals, density curves) is a Monte Carlo average over
//! generator draws.
//!
//! Modules:
//!
//! - [`nn`]: dense ReLU networks, backprop, Adam.
//! - [`divergence`]: conjugates and the empirical dual objective.
//! - [`trainer`]: the alternating critic-ascent / generator-descent loop.
//! - [`sampler`]: Monte Carlo functionals of a trained generator.
//! - [`simdata`]: simulation models with ground-truth functionals.
//! - [`ckde`]: conditional kernel density baseline.
//! - [`eval`]: metrics and the replication harness.
//! - [`dataio`]: CSV ingestion, one-hot encoding, splits.

pub mod ckde;
pub mod dataio;
pub mod divergence;
mod error;
pub mod eval;
pub mod io;
pub mod nn;
pub mod rng;
pub mod sampler;
pub mod simdata;
pub mod stats;
pub mod trainer;

pub use error::{Error, Result};
