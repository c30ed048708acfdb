//! Non-neural imputation baselines.

mod knn;
mod prevalence;
mod soft_impute;

pub use knn::{knn_impute, nearest_neighbor, KnnConfig};
pub use prevalence::{prevalence_impute, Identity, PrevalenceImputer};
pub use soft_impute::{soft_impute, SoftImputeConfig, SoftImputeResult};
