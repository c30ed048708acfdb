use rand::Rng;

use crate::error::{Error, Result};
use crate::par;
use crate::rng::{self, Domain};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapSpec {
    pub fraction: f64,
    pub reps: usize,
    pub seed: u64,
}

impl BootstrapSpec {
    pub fn new(seed: u64) -> Self {
        Self { fraction: 0.8, reps: 50, seed }
    }

    fn validate(&self) -> Result<()> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!("fraction must lie in (0, 1], got {}", self.fraction)));
        }
        if self.reps == 0 {
            return Err(Error::InvalidArgument("reps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub mean: f64,
    /// `1.96 · std` over replicates; 0 with a single valid replicate.
    pub half_width: f64,
    pub valid: usize,
    pub reps: usize,
}

impl BootstrapResult {
    pub fn interval(&self) -> (f64, f64) {
        (self.mean - self.half_width, self.mean + self.half_width)
    }
}

/// Rows of replicate `rep`: `⌊fraction·n⌋` indices drawn without replacement
/// by a partial Fisher–Yates shuffle on the replicate's own stream.
pub fn resample_rows(n: usize, fraction: f64, seed: u64, rep: usize) -> Vec<usize> {
    let k = (fraction * n as f64).floor() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    let mut r = rng::stream(seed, Domain::Bootstrap, rep as u64);
    for i in 0..k.min(n) {
        let j = r.random_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}

/// Mean and normal-approximation 95% half-width of `metric` over
/// row-subsampled replicates. Replicates where the metric is undefined are
/// skipped; at least 80% must be valid.
pub fn bootstrap_ci<F>(n_rows: usize, metric: F, spec: &BootstrapSpec) -> Result<BootstrapResult>
where
    F: Fn(&[usize]) -> Option<f64> + Sync + Send,
{
    spec.validate()?;
    let values: Vec<Option<f64>> =
        par::map_range(spec.reps, |rep| metric(&resample_rows(n_rows, spec.fraction, spec.seed, rep)));
    let valid: Vec<f64> = values.into_iter().flatten().collect();
    let invalid = spec.reps - valid.len();
    if valid.is_empty() || (valid.len() as f64) < 0.8 * spec.reps as f64 {
        return Err(Error::TooManyInvalidReplicates { invalid, reps: spec.reps });
    }
    let m = valid.len() as f64;
    // Shifting by the first value keeps a constant metric's mean exact.
    let shift = valid[0];
    let mean = shift + valid.iter().map(|v| v - shift).sum::<f64>() / m;
    let std = if valid.len() > 1 {
        (valid.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(BootstrapResult { mean, half_width: 1.96 * std, valid: valid.len(), reps: spec.reps })
}
