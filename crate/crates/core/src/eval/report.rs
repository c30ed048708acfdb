use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::auprc;
use crate::data::{BinaryMatrix, ProbMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    /// `None` for dimensions without any positive among scored positions.
    pub per_dim_auprc: Vec<Option<f64>>,
    pub macro_auprc: Option<f64>,
    pub micro_auprc: Option<f64>,
    /// 95% interval on the macro mean, when bootstrapped.
    pub ci: Option<(f64, f64)>,
    pub restrict_to_zeros: bool,
    pub seed: Option<u64>,
    pub runtime_seconds: f64,
}

#[derive(Serialize)]
struct Summary<'a> {
    method: &'a str,
    #[serde(rename = "macro")]
    macro_auprc: Option<f64>,
    micro: Option<f64>,
    ci_low: Option<f64>,
    ci_high: Option<f64>,
    seed: Option<u64>,
    runtime_seconds: f64,
    restrict_to_zeros: bool,
    excluded_dims: Vec<usize>,
}

impl EvalReport {
    /// Dimensions left out of the macro mean.
    pub fn excluded_dims(&self) -> Vec<usize> {
        self.per_dim_auprc.iter().enumerate().filter(|(_, v)| v.is_none()).map(|(j, _)| j).collect()
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "dim,auprc")?;
        for (j, v) in self.per_dim_auprc.iter().enumerate() {
            match v {
                Some(v) => writeln!(w, "{j},{v}")?,
                None => writeln!(w, "{j},NA")?,
            }
        }
        Ok(())
    }

    pub fn summary_json(&self) -> String {
        let s = Summary {
            method: &self.method,
            macro_auprc: self.macro_auprc,
            micro: self.micro_auprc,
            ci_low: self.ci.map(|c| c.0),
            ci_high: self.ci.map(|c| c.1),
            seed: self.seed,
            runtime_seconds: self.runtime_seconds,
            restrict_to_zeros: self.restrict_to_zeros,
            excluded_dims: self.excluded_dims(),
        };
        serde_json::to_string_pretty(&s).expect("summary serialises")
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(&mut f).map_err(|e| Error::io(path, e))
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.summary_json() + "\n").map_err(|e| Error::io(path, e))
    }
}

fn check_shapes(probs: &ProbMatrix, truth: &BinaryMatrix, noisy: &BinaryMatrix) -> Result<()> {
    if probs.shape() != truth.shape() {
        return Err(Error::shape("evaluate: scores vs truth", probs.shape(), truth.shape()));
    }
    if noisy.shape() != truth.shape() {
        return Err(Error::shape("evaluate: noisy vs truth", truth.shape(), noisy.shape()));
    }
    Ok(())
}

fn per_dim(probs: &ProbMatrix, truth: &BinaryMatrix, noisy: &BinaryMatrix, rows: &[usize], restrict: bool) -> Vec<Option<f64>> {
    let t = probs.n_cols();
    (0..t)
        .map(|j| {
            let (mut s, mut l) = (Vec::with_capacity(rows.len()), Vec::with_capacity(rows.len()));
            for &i in rows {
                if restrict && noisy.get(i, j) {
                    continue;
                }
                s.push(probs.get(i, j));
                l.push(truth.get(i, j));
            }
            auprc(&s, &l)
        })
        .collect()
}

fn mean_defined(v: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = v.iter().flatten().copied().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

/// Macro AUPRC over a subset of rows; used for bootstrap resampling.
pub fn macro_auprc_on_rows(
    probs: &ProbMatrix,
    truth: &BinaryMatrix,
    noisy: &BinaryMatrix,
    rows: &[usize],
    restrict_to_zeros: bool,
) -> Option<f64> {
    mean_defined(&per_dim(probs, truth, noisy, rows, restrict_to_zeros))
}

/// Per-dimension, macro and micro AUPRC of `probs` against `truth`. With
/// `restrict_to_zeros`, only positions where `noisy` is 0 are scored.
pub fn evaluate_denoiser(
    method: &str,
    probs: &ProbMatrix,
    truth: &BinaryMatrix,
    noisy: &BinaryMatrix,
    restrict_to_zeros: bool,
) -> Result<EvalReport> {
    check_shapes(probs, truth, noisy)?;
    let start = std::time::Instant::now();
    let (n, t) = probs.shape();
    let rows: Vec<usize> = (0..n).collect();
    let per_dim_auprc = per_dim(probs, truth, noisy, &rows, restrict_to_zeros);
    let (mut s, mut l) = (Vec::new(), Vec::new());
    for i in 0..n {
        for j in 0..t {
            if restrict_to_zeros && noisy.get(i, j) {
                continue;
            }
            s.push(probs.get(i, j));
            l.push(truth.get(i, j));
        }
    }
    Ok(EvalReport {
        method: method.to_string(),
        macro_auprc: mean_defined(&per_dim_auprc),
        micro_auprc: auprc(&s, &l),
        per_dim_auprc,
        ci: None,
        restrict_to_zeros,
        seed: None,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}
