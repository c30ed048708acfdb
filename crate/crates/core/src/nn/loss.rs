use crate::error::{Error, Result};

/// Weighted cross-entropy settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    /// Weight on terms whose noisy input disagrees with the clean target.
    pub lambda: f64,
    /// Probability clamp applied before taking logs.
    pub epsilon: f64,
}

impl Default for LossSpec {
    fn default() -> Self {
        Self { lambda: 2.0, epsilon: 1e-7 }
    }
}

impl LossSpec {
    pub fn new(lambda: f64, epsilon: f64) -> Result<Self> {
        let spec = Self { lambda, epsilon };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 0.5), got {}", self.epsilon)));
        }
        Ok(())
    }

    /// Per-term weights: `lambda` where `noisy != target`, 1 elsewhere.
    pub fn weights(&self, target: &[f64], noisy: &[f64]) -> Vec<f64> {
        target
            .iter()
            .zip(noisy)
            .map(|(t, n)| if t != n { self.lambda } else { 1.0 })
            .collect()
    }
}

#[inline]
fn ce_term(p: f64, t: f64, eps: f64) -> f64 {
    let pc = p.clamp(eps, 1.0 - eps);
    -(t * pc.ln() + (1.0 - t) * (1.0 - pc).ln())
}

#[inline]
fn ce_term_grad(p: f64, t: f64, eps: f64) -> f64 {
    if p < eps || p > 1.0 - eps {
        0.0
    } else {
        -t / p + (1.0 - t) / (1.0 - p)
    }
}

pub(crate) fn ce_value_and_grad(probs: &[f64], target: &[f64], weights: &[f64], eps: f64) -> (f64, Vec<f64>) {
    let mut total = 0.0;
    let grad = probs
        .iter()
        .zip(target)
        .zip(weights)
        .map(|((&p, &t), &w)| {
            total += w * ce_term(p, t, eps);
            w * ce_term_grad(p, t, eps)
        })
        .collect();
    (total, grad)
}

fn check_len(context: &'static str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::shape(context, a, b));
    }
    Ok(())
}

/// Summed, ε-clamped binary cross-entropy (negative log-likelihood).
pub fn ce_loss(probs: &[f64], target: &[f64], epsilon: f64) -> Result<f64> {
    check_len("ce_loss", probs.len(), target.len())?;
    Ok(probs.iter().zip(target).map(|(&p, &t)| ce_term(p, t, epsilon)).sum())
}

/// Cross-entropy with terms where `noisy != target` weighted by `spec.lambda`.
pub fn weighted_ce_loss(probs: &[f64], target: &[f64], noisy: &[f64], spec: &LossSpec) -> Result<f64> {
    check_len("weighted_ce_loss", probs.len(), target.len())?;
    check_len("weighted_ce_loss", probs.len(), noisy.len())?;
    Ok(probs
        .iter()
        .zip(target)
        .zip(noisy)
        .map(|((&p, &t), &n)| {
            let w = if t != n { spec.lambda } else { 1.0 };
            w * ce_term(p, t, spec.epsilon)
        })
        .sum())
}
