//! Neural denoisers: MLP, DAE and set-attention architectures.

mod checkpoint;
mod model;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint_from, save_checkpoint, write_checkpoint_to};
pub use model::{Arch, DenoiserModel, Hyper};
pub use train::{apply_input_mask, train_denoiser, TrainConfig, TrainReport};
