//! Denoising of unknown unknowns in sparse binary records.
//!
//! A zero in a binary record may be a true negative or a positive that was
//! never recorded. This crate provides:
//!
//! * [`data`]: bit-packed record matrices, a latent-factor generator and the
//!   one-sided mixture corruption used to create noisy/clean pairs;
//! * [`oracle`]: the exact MSE-optimal denoiser for mixture corruption,
//!   computed by enumeration on small discrete distributions;
//! * [`nn`]: a small reverse-mode autodiff engine, losses and AdamW;
//! * [`denoisers`]: MLP, DAE and set-attention denoisers and their training loop;
//! * [`thresholding`]: learned per-dimension thresholds over a frozen denoiser;
//! * [`baselines`]: prevalence, nearest-neighbour and soft-impute imputers;
//! * [`eval`]: AUPRC, bootstrap intervals, spectrum diagnostics and the
//!   hold-one-code-out downstream task.

pub mod baselines;
pub mod data;
pub mod denoisers;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod nn;
pub mod oracle;
pub mod par;
pub mod rng;
pub mod thresholding;

pub use data::{BinaryMatrix, ProbMatrix};
pub use error::{Error, Result};

/// Anything that maps a noisy matrix to per-position scores.
pub trait Imputer: Sync {
    fn impute(&self, noisy: &BinaryMatrix) -> Result<ProbMatrix>;
}
