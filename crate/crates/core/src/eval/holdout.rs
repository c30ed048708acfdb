use rand::seq::SliceRandom;

use super::{auprc, bootstrap_ci, BootstrapResult, BootstrapSpec};
use crate::data::BinaryMatrix;
use crate::error::{Error, Result};
use crate::nn::sigmoid;
use crate::rng::{self, Domain};
use crate::Imputer;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierConfig {
    pub lr: f64,
    pub l2: f64,
    pub epochs: usize,
    /// Fraction of rows used to fit the classifier; the rest are scored.
    pub train_frac: f64,
    pub seed: u64,
}

impl ClassifierConfig {
    pub fn new(seed: u64) -> Self {
        Self { lr: 0.5, l2: 1e-4, epochs: 500, train_frac: 0.5, seed }
    }
}

/// L2-regularised logistic regression fitted by full-batch gradient descent.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticRegression {
    /// Fits on row-major `n × d` features.
    pub fn fit(x: &[f64], d: usize, y: &[bool], cfg: &ClassifierConfig) -> Self {
        let n = y.len();
        let mut w = vec![0.0; d];
        let mut b = 0.0;
        if n == 0 {
            return Self { weights: w, bias: b };
        }
        let mut gw = vec![0.0; d];
        for _ in 0..cfg.epochs {
            gw.iter_mut().for_each(|g| *g = 0.0);
            let mut gb = 0.0;
            for (row, &label) in x.chunks(d.max(1)).zip(y) {
                let z: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b;
                let r = sigmoid(z) - f64::from(u8::from(label));
                for (g, v) in gw.iter_mut().zip(row) {
                    *g += r * v;
                }
                gb += r;
            }
            for (wi, g) in w.iter_mut().zip(&gw) {
                *wi -= cfg.lr * (g / n as f64 + cfg.l2 * *wi);
            }
            b -= cfg.lr * gb / n as f64;
        }
        Self { weights: w, bias: b }
    }

    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let d = self.weights.len();
        x.chunks(d.max(1))
            .map(|row| sigmoid(row.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.bias))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutResult {
    pub target_dim: usize,
    /// `None` when the scored rows contain no positive label.
    pub auprc: Option<f64>,
    pub ci: Option<BootstrapResult>,
    pub n_train: usize,
    pub n_test: usize,
}

/// Zeroes `target_dim` in `noisy`, imputes with `method`, fits a classifier
/// on the imputed features of a seeded subset of rows to predict the clean
/// code, and scores the remaining rows.
pub fn holdout_code_task(
    method: &dyn Imputer,
    clean: &BinaryMatrix,
    noisy: &BinaryMatrix,
    target_dim: usize,
    cfg: &ClassifierConfig,
    boot: &BootstrapSpec,
) -> Result<HoldoutResult> {
    if clean.shape() != noisy.shape() {
        return Err(Error::shape("holdout: clean vs noisy", clean.shape(), noisy.shape()));
    }
    let (n, t) = noisy.shape();
    if target_dim >= t {
        return Err(Error::InvalidArgument(format!("target dimension {target_dim} out of range 0..{t}")));
    }
    if !(cfg.train_frac > 0.0 && cfg.train_frac < 1.0) {
        return Err(Error::InvalidArgument(format!("train_frac must lie in (0, 1), got {}", cfg.train_frac)));
    }
    let features = method.impute(&noisy.with_column_cleared(target_dim))?;
    if features.shape() != noisy.shape() {
        return Err(Error::shape("holdout: imputed features", noisy.shape(), features.shape()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(cfg.seed, Domain::Classifier, 0));
    let n_train = (cfg.train_frac * n as f64).round() as usize;
    let (train, test) = order.split_at(n_train);
    let gather = |rows: &[usize]| -> (Vec<f64>, Vec<bool>) {
        let x = rows.iter().flat_map(|&i| features.row(i).iter().copied()).collect();
        let y = rows.iter().map(|&i| clean.get(i, target_dim)).collect();
        (x, y)
    };
    let (xtr, ytr) = gather(train);
    let (xte, yte) = gather(test);
    let model = LogisticRegression::fit(&xtr, t, &ytr, cfg);
    let scores = model.predict(&xte);
    let score = auprc(&scores, &yte);
    let ci = score.and_then(|_| {
        let metric = |rows: &[usize]| {
            let s: Vec<f64> = rows.iter().map(|&k| scores[k]).collect();
            let l: Vec<bool> = rows.iter().map(|&k| yte[k]).collect();
            auprc(&s, &l)
        };
        bootstrap_ci(test.len(), metric, boot).ok()
    });
    Ok(HoldoutResult { target_dim, auprc: score, ci, n_train: train.len(), n_test: test.len() })
}
