//! Learned per-dimension thresholds over a frozen denoiser.
//!
//! On positions with `x̃ = 0` the combiner keeps the denoiser output `g`
//! when it clears the threshold and reverts to the input (0) otherwise.
//! Hard mode uses the indicator; soft mode weights `g` by
//! `σ(α (g − φ))`, which tends to the hard rule as `α → ∞`.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;

use crate::data::io::header_field;
use crate::data::{BinaryMatrix, ProbMatrix};
use crate::denoisers::DenoiserModel;
use crate::error::{Error, Result};
use crate::nn::{sigmoid, AdamW, AdamWConfig, LossSpec};
use crate::rng::{self, Domain};

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdVector {
    pub phi: Vec<f64>,
    /// Upper bound on each `phi`; 1 where the bound is undefined.
    pub cap: Vec<f64>,
    pub alpha: f64,
}

impl ThresholdVector {
    /// All-zero thresholds under the given caps.
    pub fn zeros(cap: Vec<f64>, alpha: f64) -> Self {
        Self { phi: vec![0.0; cap.len()], cap, alpha }
    }

    pub fn n_cols(&self) -> usize {
        self.phi.len()
    }

    /// Clamps every `phi[j]` into `[0, cap[j]]`.
    pub fn project(&mut self) {
        for (p, &c) in self.phi.iter_mut().zip(&self.cap) {
            *p = p.clamp(0.0, c);
        }
    }

    pub fn satisfies_caps(&self) -> bool {
        self.phi.iter().zip(&self.cap).all(|(&p, &c)| (0.0..=c).contains(&p))
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "thr v1 T={} alpha={}", self.phi.len(), self.alpha)?;
        for (j, (p, c)) in self.phi.iter().zip(&self.cap).enumerate() {
            writeln!(w, "{j} {p} {c}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_to(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
    }

    pub fn read_from(reader: impl BufRead, path: &Path) -> Result<Self> {
        let perr = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line, message };
        let mut lines = reader.lines();
        let header = lines.next().ok_or_else(|| perr(1, "empty file".into()))?.map_err(|e| Error::io(path, e))?;
        let tokens: Vec<&str> = header.split_whitespace().collect();
        if tokens.len() != 4 || tokens[0] != "thr" || tokens[1] != "v1" {
            return Err(perr(1, format!("expected `thr v1 T=<T> alpha=<alpha>`, got `{header}`")));
        }
        let t: usize = header_field(tokens.get(2).copied(), "T", path)?;
        let alpha: f64 = header_field(tokens.get(3).copied(), "alpha", path)?;
        let mut phi = Vec::with_capacity(t);
        let mut cap = Vec::with_capacity(t);
        for (k, line) in lines.enumerate() {
            let lineno = k + 2;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let parsed = match f.as_slice() {
                [j, p, c] => j
                    .parse::<usize>()
                    .ok()
                    .zip(p.parse::<f64>().ok())
                    .zip(c.parse::<f64>().ok())
                    .map(|((j, p), c)| (j, p, c)),
                _ => None,
            };
            let (j, p, c) = parsed.ok_or_else(|| perr(lineno, format!("expected `j phi cap`, got `{line}`")))?;
            if j != phi.len() {
                return Err(perr(lineno, format!("expected dimension {}, got {j}", phi.len())));
            }
            phi.push(p);
            cap.push(c);
        }
        if phi.len() != t {
            return Err(perr(t + 2, format!("expected {t} dimensions, found {}", phi.len())));
        }
        Ok(Self { phi, cap, alpha })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(BufReader::new(f), path)
    }
}

/// Per-dimension mean outputs on `(x̃=0, x=0)` and `(x̃=0, x=1)` positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Caps {
    pub m00: Vec<Option<f64>>,
    pub m01: Vec<Option<f64>>,
}

impl Caps {
    /// `m00` with undefined dimensions set to 1.
    pub fn cap_vector(&self) -> Vec<f64> {
        self.m00.iter().map(|m| m.unwrap_or(1.0)).collect()
    }
}

fn check_triplet(g: &ProbMatrix, noisy: &BinaryMatrix, clean: Option<&BinaryMatrix>) -> Result<()> {
    if g.shape() != noisy.shape() {
        return Err(Error::shape("threshold inputs", g.shape(), noisy.shape()));
    }
    if let Some(c) = clean {
        if c.shape() != noisy.shape() {
            return Err(Error::shape("threshold pairs", noisy.shape(), c.shape()));
        }
    }
    Ok(())
}

/// Cap statistics from precomputed denoiser outputs `g`.
pub fn compute_caps(g: &ProbMatrix, noisy: &BinaryMatrix, clean: &BinaryMatrix) -> Result<Caps> {
    check_triplet(g, noisy, Some(clean))?;
    let (n, t) = g.shape();
    let mut sums = vec![[0.0f64; 2]; t];
    let mut counts = vec![[0usize; 2]; t];
    for i in 0..n {
        for j in 0..t {
            if !noisy.get(i, j) {
                let k = clean.get(i, j) as usize;
                sums[j][k] += g.get(i, j);
                counts[j][k] += 1;
            }
        }
    }
    let mean = |k: usize| -> Vec<Option<f64>> {
        (0..t).map(|j| (counts[j][k] > 0).then(|| sums[j][k] / counts[j][k] as f64)).collect()
    };
    Ok(Caps { m00: mean(0), m01: mean(1) })
}

pub fn compute_caps_for_model(model: &DenoiserModel, noisy: &BinaryMatrix, clean: &BinaryMatrix) -> Result<Caps> {
    compute_caps(&model.forward(noisy)?, noisy, clean)
}

/// Soft weight `σ(α (g − φ))`.
#[inline]
pub fn soft_weight(g: f64, phi: f64, alpha: f64) -> f64 {
    sigmoid(alpha * (g - phi))
}

#[inline]
fn combine(g: f64, phi: f64, alpha: f64, hard: bool) -> f64 {
    if hard {
        if g < phi {
            0.0
        } else {
            g
        }
    } else {
        soft_weight(g, phi, alpha) * g
    }
}

/// Thresholded combiner applied to precomputed outputs `g`.
pub fn apply_thresholded(g: &ProbMatrix, thr: &ThresholdVector, noisy: &BinaryMatrix, hard: bool) -> Result<ProbMatrix> {
    check_triplet(g, noisy, None)?;
    let t = g.n_cols();
    if thr.phi.len() != t || thr.cap.len() != t {
        return Err(Error::shape("apply_thresholded", t, (thr.phi.len(), thr.cap.len())));
    }
    let mut out = g.clone();
    for (i, row) in out.values_mut().chunks_mut(t.max(1)).enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if noisy.get(i, j) { 1.0 } else { combine(*v, thr.phi[j], thr.alpha, hard) };
        }
    }
    Ok(out)
}

pub fn apply_thresholded_model(
    model: &DenoiserModel,
    thr: &ThresholdVector,
    noisy: &BinaryMatrix,
    hard: bool,
) -> Result<ProbMatrix> {
    apply_thresholded(&model.forward(noisy)?, thr, noisy, hard)
}

/// A frozen denoiser followed by its fitted thresholds.
#[derive(Debug, Clone)]
pub struct ThresholdedDenoiser {
    pub model: DenoiserModel,
    pub thresholds: ThresholdVector,
    pub hard: bool,
}

impl crate::Imputer for ThresholdedDenoiser {
    fn impute(&self, noisy: &BinaryMatrix) -> Result<ProbMatrix> {
        apply_thresholded_model(&self.model, &self.thresholds, noisy, self.hard)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdFitConfig {
    pub loss: LossSpec,
    pub alpha: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl ThresholdFitConfig {
    pub fn new(seed: u64) -> Self {
        Self { loss: LossSpec::default(), alpha: 100.0, lr: 1e-2, epochs: 20, batch_size: 256, seed }
    }

    fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Weighted cross-entropy of the soft combiner over `rows`, and its gradient
/// with respect to `phi`.
pub fn soft_loss_and_grad(
    g: &ProbMatrix,
    noisy: &BinaryMatrix,
    clean: &BinaryMatrix,
    thr: &ThresholdVector,
    spec: &LossSpec,
    rows: &[usize],
) -> (f64, Vec<f64>) {
    let t = g.n_cols();
    let eps = spec.epsilon;
    let mut loss = 0.0;
    let mut grad = vec![0.0; t];
    for &i in rows {
        for j in 0..t {
            let target = clean.get(i, j);
            if noisy.get(i, j) {
                // Output fixed at 1; contributes a constant term.
                let w = if target { 1.0 } else { spec.lambda };
                let pc = 1.0 - eps;
                loss += w * -(if target { pc.ln() } else { (1.0 - pc).ln() });
                continue;
            }
            let w = if target { spec.lambda } else { 1.0 };
            let gij = g.get(i, j);
            let s = soft_weight(gij, thr.phi[j], thr.alpha);
            let f = s * gij;
            let fc = f.clamp(eps, 1.0 - eps);
            loss += w * -(if target { fc.ln() } else { (1.0 - fc).ln() });
            if f > eps && f < 1.0 - eps {
                let dl_df = if target { -1.0 / f } else { 1.0 / (1.0 - f) };
                let df_dphi = -thr.alpha * gij * s * (1.0 - s);
                grad[j] += w * dl_df * df_dphi;
            }
        }
    }
    (loss, grad)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdFitReport {
    pub thresholds: ThresholdVector,
    /// Mean per-row soft loss per epoch, measured after the epoch.
    pub loss_curve: Vec<f64>,
    pub initial_loss: f64,
}

/// Fits `phi` by AdamW on the soft combiner's weighted cross-entropy,
/// projecting into `[0, cap]` after each step. `g` holds the frozen
/// denoiser's outputs on `noisy`.
pub fn fit_thresholds(
    g: &ProbMatrix,
    noisy: &BinaryMatrix,
    clean: &BinaryMatrix,
    caps: &Caps,
    cfg: &ThresholdFitConfig,
) -> Result<ThresholdFitReport> {
    cfg.validate()?;
    check_triplet(g, noisy, Some(clean))?;
    let (n, t) = g.shape();
    if caps.m00.len() != t {
        return Err(Error::shape("fit_thresholds caps", t, caps.m00.len()));
    }
    let mut thr = ThresholdVector::zeros(caps.cap_vector(), cfg.alpha);
    let all: Vec<usize> = (0..n).collect();
    let full_loss = |thr: &ThresholdVector| soft_loss_and_grad(g, noisy, clean, thr, &cfg.loss, &all).0;
    let initial_loss = full_loss(&thr);
    let mut opt = AdamW::new(AdamWConfig::default().with_lr(cfg.lr).with_weight_decay(0.0));
    let mut order = all.clone();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng::stream(cfg.seed, Domain::Threshold, epoch as u64));
        for (step, batch) in order.chunks(cfg.batch_size).enumerate() {
            let (loss, grad) = soft_loss_and_grad(g, noisy, clean, &thr, &cfg.loss, batch);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch: epoch + 1, step: step + 1 });
            }
            opt.step_slice(&mut thr.phi, &grad)?;
            thr.project();
        }
        let l = full_loss(&thr);
        if !l.is_finite() {
            return Err(Error::Diverged { epoch: epoch + 1, step: 0 });
        }
        curve.push(l / n.max(1) as f64);
    }
    Ok(ThresholdFitReport { thresholds: thr, loss_curve: curve, initial_loss: initial_loss / n.max(1) as f64 })
}
