//! Reverse-mode differentiation and neural building blocks.

pub mod gradcheck;
mod graph;
pub mod init;
mod layers;
mod loss;
mod optim;
mod params;
mod tensor;

pub use gradcheck::{grad_check, GradCheckReport};
pub use graph::{sigmoid, Grads, Graph, Var};
pub use layers::{LayerNorm, Linear};
pub use loss::{ce_loss, weighted_ce_loss, LossSpec};
pub use optim::{AdamW, AdamWConfig};
pub use params::{ParamId, Params};
pub use tensor::Tensor;
