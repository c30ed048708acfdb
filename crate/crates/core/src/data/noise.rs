use std::ops::Range;

use rand::Rng;

use super::BinaryMatrix;
use crate::error::{Error, Result};
use crate::par;
use crate::rng::{self, Domain};

/// Mixture corruption law: with probability `beta` a row passes through
/// untouched; otherwise each 1 in dimension `d` independently drops to 0
/// with probability `drop_prob[d]`. Zeros never flip.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub beta: f64,
    pub drop_prob: Vec<f64>,
}

impl NoiseSpec {
    pub fn new(beta: f64, drop_prob: Vec<f64>) -> Result<Self> {
        let spec = Self { beta, drop_prob };
        spec.validate()?;
        Ok(spec)
    }

    pub fn uniform(beta: f64, drop: f64, n_cols: usize) -> Result<Self> {
        Self::new(beta, vec![drop; n_cols])
    }

    pub fn n_cols(&self) -> usize {
        self.drop_prob.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidArgument(format!("beta = {} outside [0,1]", self.beta)));
        }
        if let Some((d, p)) = self
            .drop_prob
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(Error::InvalidArgument(format!("drop_prob[{d}] = {p} outside [0,1]")));
        }
        Ok(())
    }
}

/// Applies the mixture corruption row by row. Row `i` consumes one draw for
/// the clean/noisy branch, then one draw per dimension, from its own stream.
pub fn corrupt(x_clean: &BinaryMatrix, noise: &NoiseSpec, seed: u64) -> Result<BinaryMatrix> {
    noise.validate()?;
    if noise.n_cols() != x_clean.n_cols() {
        return Err(Error::shape("corrupt: drop_prob length", x_clean.n_cols(), noise.n_cols()));
    }
    let t = x_clean.n_cols();
    let rows = par::map_range(x_clean.n_rows(), |i| {
        let mut row = x_clean.row_words(i).to_vec();
        let mut r = rng::stream(seed, Domain::Corrupt, i as u64);
        let keep_row = r.random::<f64>() < noise.beta;
        for d in 0..t {
            let u: f64 = r.random();
            if !keep_row && u < noise.drop_prob[d] {
                row[d / 64] &= !(1u64 << (d % 64));
            }
        }
        row
    });
    Ok(BinaryMatrix::from_packed_rows(t, rows))
}

/// Drops ones independently per (row, dimension) so that the expected
/// prevalence of dimension `d` becomes `target_prev[d]`.
pub fn prevalence_match_mask(
    x_clean: &BinaryMatrix,
    target_prev: &[f64],
    seed: u64,
) -> Result<BinaryMatrix> {
    let t = x_clean.n_cols();
    if target_prev.len() != t {
        return Err(Error::shape("prevalence_match_mask: target length", t, target_prev.len()));
    }
    let prev = x_clean.column_prevalence();
    let exceeded: Vec<(usize, f64, f64)> = target_prev
        .iter()
        .zip(&prev)
        .enumerate()
        .filter(|(_, (&tgt, &p))| !(tgt >= 0.0 && tgt <= p + 1e-12))
        .map(|(d, (&tgt, &p))| (d, tgt, p))
        .collect();
    if !exceeded.is_empty() {
        return Err(Error::PrevalenceExceeded(exceeded));
    }
    let retain: Vec<f64> = target_prev
        .iter()
        .zip(&prev)
        .map(|(&tgt, &p)| if p > 0.0 { (tgt / p).min(1.0) } else { 1.0 })
        .collect();
    let rows = par::map_range(x_clean.n_rows(), |i| {
        let mut row = x_clean.row_words(i).to_vec();
        let mut r = rng::stream(seed, Domain::PrevalenceMask, i as u64);
        for (d, &keep) in retain.iter().enumerate() {
            let u: f64 = r.random();
            if u >= keep {
                row[d / 64] &= !(1u64 << (d % 64));
            }
        }
        row
    });
    Ok(BinaryMatrix::from_packed_rows(t, rows))
}

/// Element-wise OR of two equally shaped matrices.
pub fn or_merge(a: &BinaryMatrix, b: &BinaryMatrix) -> Result<BinaryMatrix> {
    if a.shape() != b.shape() {
        return Err(Error::shape("or_merge", a.shape(), b.shape()));
    }
    let mut out = a.clone();
    for (o, w) in out.bits.iter_mut().zip(&b.bits) {
        *o |= w;
    }
    Ok(out)
}

/// Contiguous row ranges for the train / threshold-fit / test splits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    pub train: Range<usize>,
    pub fit: Range<usize>,
    pub test: Range<usize>,
}

/// Splits `n_rows` by fractions `(train, fit)`; the test split takes the
/// remainder.
pub fn split_rows(n_rows: usize, train_frac: f64, fit_frac: f64) -> Result<Splits> {
    if !(0.0..=1.0).contains(&train_frac)
        || !(0.0..=1.0).contains(&fit_frac)
        || train_frac + fit_frac > 1.0 + 1e-12
    {
        return Err(Error::InvalidArgument(format!(
            "split fractions {train_frac}/{fit_frac} do not fit in [0,1]"
        )));
    }
    let n_train = (train_frac * n_rows as f64).floor() as usize;
    let n_fit = ((fit_frac * n_rows as f64).floor() as usize).min(n_rows - n_train);
    Ok(Splits {
        train: 0..n_train,
        fit: n_train..n_train + n_fit,
        test: n_train + n_fit..n_rows,
    })
}
