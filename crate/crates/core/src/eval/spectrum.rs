use std::io::Write;
use std::path::Path;

use rand::Rng;

use crate::data::BinaryMatrix;
use crate::error::{Error, Result};
use crate::linalg::{gemm, symmetric_eigenvalues};
use crate::par;
use crate::rng::{self, Domain};

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Covariance eigenvalues, descending.
    pub eigvals: Vec<f64>,
    /// Per-index 1st percentile over the null matrices.
    pub band_lo: Vec<f64>,
    /// Per-index 99th percentile over the null matrices.
    pub band_hi: Vec<f64>,
    pub warnings: Vec<String>,
}

impl Spectrum {
    pub fn above_band(&self) -> Vec<usize> {
        (0..self.eigvals.len()).filter(|&k| self.eigvals[k] > self.band_hi[k]).collect()
    }

    pub fn fraction_inside(&self) -> f64 {
        let inside = (0..self.eigvals.len())
            .filter(|&k| self.eigvals[k] >= self.band_lo[k] && self.eigvals[k] <= self.band_hi[k])
            .count();
        inside as f64 / self.eigvals.len().max(1) as f64
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "index,eigval,band_lo,band_hi")?;
        for k in 0..self.eigvals.len() {
            writeln!(w, "{k},{},{},{}", self.eigvals[k], self.band_lo[k], self.band_hi[k])?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(&mut f).map_err(|e| Error::io(path, e))
    }
}

/// Population covariance (`1/n`) of the columns of a row-major `n × t` array.
fn covariance_dense(x: &[f64], n: usize, t: usize) -> Vec<f64> {
    let mut c = vec![0.0; t * t];
    gemm(t, n, t, 1.0 / n as f64, x, (1, t), x, (t, 1), 0.0, &mut c, (t, 1));
    let mean: Vec<f64> = (0..t).map(|j| (0..n).map(|i| x[i * t + j]).sum::<f64>() / n as f64).collect();
    for a in 0..t {
        for b in 0..t {
            c[a * t + b] -= mean[a] * mean[b];
        }
    }
    c
}

pub fn column_covariance(x: &BinaryMatrix) -> Vec<f64> {
    let (n, t) = x.shape();
    let rows: Vec<usize> = (0..n).collect();
    covariance_dense(&x.gather_f64(&rows), n, t)
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 100].
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Covariance spectrum of `x` against prevalence-matched Bernoulli nulls.
pub fn spectrum_diagnostic(x: &BinaryMatrix, n_random: usize, seed: u64) -> Result<Spectrum> {
    let (n, t) = x.shape();
    if n == 0 || t == 0 {
        return Err(Error::InvalidArgument("spectrum of an empty matrix".into()));
    }
    if n_random == 0 {
        return Err(Error::InvalidArgument("n_random must be at least 1".into()));
    }
    let mut warnings = Vec::new();
    if n <= t {
        warnings.push(format!("{n} rows for {t} columns: covariance is rank-deficient"));
    }
    let prev = x.column_prevalence();
    if prev.iter().all(|&p| p == 0.0 || p == 1.0) {
        warnings.push("every column is constant: covariance is zero".into());
    }
    let eigvals = symmetric_eigenvalues(&column_covariance(x), t)?;
    let null: Vec<Vec<f64>> = par::try_map_range(n_random, |r| {
        let mut g = rng::stream(seed, Domain::Spectrum, r as u64);
        let dense: Vec<f64> = (0..n * t).map(|k| f64::from(u8::from(g.random::<f64>() < prev[k % t]))).collect();
        symmetric_eigenvalues(&covariance_dense(&dense, n, t), t)
    })?;
    let mut band_lo = Vec::with_capacity(t);
    let mut band_hi = Vec::with_capacity(t);
    for k in 0..t {
        let mut col: Vec<f64> = null.iter().map(|e| e[k]).collect();
        col.sort_by(f64::total_cmp);
        band_lo.push(percentile(&col, 1.0));
        band_hi.push(percentile(&col, 99.0));
    }
    Ok(Spectrum { eigvals, band_lo, band_hi, warnings })
}
