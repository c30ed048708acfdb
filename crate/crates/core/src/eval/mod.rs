//! Metrics, bootstrap intervals, spectral diagnostics and the held-out-code
//! downstream task.

mod auprc;
mod bootstrap;
mod holdout;
mod report;
mod spectrum;

pub use auprc::auprc;
pub use bootstrap::{bootstrap_ci, BootstrapResult, BootstrapSpec};
pub use holdout::{holdout_code_task, ClassifierConfig, HoldoutResult, LogisticRegression};
pub use report::{evaluate_denoiser, macro_auprc_on_rows, EvalReport};
pub use spectrum::{column_covariance, spectrum_diagnostic, Spectrum};
