use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{Arch, DenoiserModel};
use crate::data::BinaryMatrix;
use crate::error::{Error, Result};
use crate::nn::{AdamW, AdamWConfig, LossSpec};
use crate::rng::{self, Domain};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub loss: LossSpec,
    /// Probability of zeroing each input entry per step.
    pub mask_prob: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optim: AdamWConfig,
    pub seed: u64,
}

impl TrainConfig {
    pub fn for_arch(arch: Arch, seed: u64) -> Self {
        Self {
            loss: LossSpec::default(),
            mask_prob: 0.3,
            epochs: 50,
            batch_size: arch.default_batch_size(),
            optim: AdamWConfig::default(),
            seed,
        }
    }

    pub fn with_epochs(mut self, epochs: usize) -> Self {
        self.epochs = epochs;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if !(0.0..1.0).contains(&self.mask_prob) {
            return Err(Error::InvalidArgument(format!("mask_prob must lie in [0, 1), got {}", self.mask_prob)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// Mean per-row loss for each epoch.
    pub loss_curve: Vec<f64>,
    pub steps: usize,
}

impl TrainReport {
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "epoch,mean_loss")?;
        for (e, l) in self.loss_curve.iter().enumerate() {
            writeln!(w, "{},{l}", e + 1)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(&mut f).map_err(|e| Error::io(path, e))
    }
}

/// Zeroes each entry of `input` independently with probability `p`.
pub fn apply_input_mask(input: &mut [f64], p: f64, rng: &mut impl Rng) {
    for v in input.iter_mut() {
        let u: f64 = rng.random();
        if u < p {
            *v = 0.0;
        }
    }
}

/// Trains `model` on `(noisy, clean)` pairs with weighted cross-entropy.
///
/// Each step masks the noisy batch, scores the masked input, and weights
/// terms where the masked input disagrees with the clean target by `lambda`.
pub fn train_denoiser(
    model: &mut DenoiserModel,
    noisy: &BinaryMatrix,
    clean: &BinaryMatrix,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if noisy.shape() != clean.shape() {
        return Err(Error::shape("train_denoiser pairs", noisy.shape(), clean.shape()));
    }
    if noisy.n_cols() != model.n_cols() {
        return Err(Error::shape("train_denoiser columns", model.n_cols(), noisy.n_cols()));
    }
    let n = noisy.n_rows();
    let mut report = TrainReport::default();
    if cfg.epochs == 0 {
        return Ok(report);
    }
    if n == 0 {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let mut opt = AdamW::new(cfg.optim);
    let mut order: Vec<usize> = (0..n).collect();
    let mut params = model.params().clone();
    for epoch in 0..cfg.epochs {
        let mut shuffle_rng = rng::stream(cfg.seed, Domain::Train, 2 * epoch as u64);
        let mut mask_rng = rng::stream(cfg.seed, Domain::Train, 2 * epoch as u64 + 1);
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for (step, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut input = noisy.gather_f64(batch);
            apply_input_mask(&mut input, cfg.mask_prob, &mut mask_rng);
            let target = clean.gather_f64(batch);
            let diverged = |e: Error| match e {
                Error::NonFinite { .. } => Error::Diverged { epoch: epoch + 1, step: step + 1 },
                other => other,
            };
            let (loss, grads) =
                model.loss_and_grad(&params, &input, &target, batch.len(), &cfg.loss).map_err(diverged)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch: epoch + 1, step: step + 1 });
            }
            opt.step(&mut params, &grads).map_err(diverged)?;
            total += loss;
            report.steps += 1;
        }
        report.loss_curve.push(total / n as f64);
    }
    model.params_mut().load_from(&params)?;
    Ok(report)
}
