use crate::data::{BinaryMatrix, ProbMatrix};
use crate::error::{Error, Result};
use crate::Imputer;

/// Keeps observed ones and scores every zero with its column's training
/// prevalence.
pub fn prevalence_impute(x_noisy: &BinaryMatrix, train_prev: &[f64]) -> Result<ProbMatrix> {
    let (n, t) = x_noisy.shape();
    if train_prev.len() != t {
        return Err(Error::shape("prevalence_impute", t, train_prev.len()));
    }
    let mut values = Vec::with_capacity(n * t);
    for _ in 0..n {
        values.extend_from_slice(train_prev);
    }
    let mut out = ProbMatrix::new(n, t, values)?;
    out.preserve_observed(x_noisy);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrevalenceImputer {
    pub prevalence: Vec<f64>,
}

impl Imputer for PrevalenceImputer {
    fn impute(&self, noisy: &BinaryMatrix) -> Result<ProbMatrix> {
        prevalence_impute(noisy, &self.prevalence)
    }
}

/// Returns the noisy matrix itself as scores.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Imputer for Identity {
    fn impute(&self, noisy: &BinaryMatrix) -> Result<ProbMatrix> {
        Ok(noisy.to_prob())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_cases() {
        let x = BinaryMatrix::from_strs(&["11", "00", "10"]).unwrap();
        let out = prevalence_impute(&x, &[0.2, 0.8]).unwrap();
        assert_eq!(out.row(0), &[1.0, 1.0]);
        assert_eq!(out.row(1), &[0.2, 0.8]);
        assert_eq!(out.row(2), &[1.0, 0.8]);
    }

    #[test]
    fn length_mismatch_rejected() {
        let x = BinaryMatrix::zeros(2, 3);
        assert!(prevalence_impute(&x, &[0.1]).is_err());
    }
}
