use crate::data::{BinaryMatrix, ProbMatrix};
use crate::error::{Error, Result};
use crate::linalg::svd;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftImputeConfig {
    /// Singular-value shrinkage λ.
    pub shrinkage: f64,
    /// Singular values kept after shrinkage; `None` means `min(50, n, T)`.
    pub max_rank: Option<usize>,
    pub max_iters: usize,
    /// Stop once `‖Z_{k+1} − Z_k‖_F / ‖Z_k‖_F` falls below this.
    pub tol: f64,
}

impl Default for SoftImputeConfig {
    fn default() -> Self {
        Self { shrinkage: 1.0, max_rank: None, max_iters: 100, tol: 1e-4 }
    }
}

#[derive(Debug, Clone)]
pub struct SoftImputeResult {
    pub probs: ProbMatrix,
    /// `½‖P_Ω(X − Z)‖²_F + λ‖Z‖_*` after each iteration.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Matrix completion by iterated singular-value soft-thresholding.
///
/// Ones are observed, zeros are missing. Each iteration fills missing
/// entries from the current estimate and applies rank-capped SVT. The
/// result is clamped to [0,1] with observed positions set to 1.
pub fn soft_impute(x_noisy: &BinaryMatrix, cfg: &SoftImputeConfig) -> Result<SoftImputeResult> {
    let (n, t) = x_noisy.shape();
    if n == 0 || t == 0 {
        return Err(Error::InvalidArgument("soft_impute needs a non-empty matrix".into()));
    }
    if !(cfg.shrinkage >= 0.0) || cfg.max_iters == 0 {
        return Err(Error::InvalidArgument("shrinkage must be >= 0 and max_iters >= 1".into()));
    }
    let max_rank = cfg.max_rank.unwrap_or(50).min(n).min(t);
    let observed: Vec<bool> = (0..n).flat_map(|i| (0..t).map(move |j| (i, j))).map(|(i, j)| x_noisy.get(i, j)).collect();
    let mut z = vec![0.0; n * t];
    let mut objective = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..cfg.max_iters {
        let filled: Vec<f64> = z.iter().zip(&observed).map(|(&zv, &o)| if o { 1.0 } else { zv }).collect();
        let dec = svd(&filled, n, t).map_err(|e| match e {
            Error::SvdNoConvergence { .. } => Error::SvdNoConvergence { iterations: iterations + 1 },
            other => other,
        })?;
        let mut shrunk = dec.clone();
        let mut nuclear = 0.0;
        for (k, s) in shrunk.s.iter_mut().enumerate() {
            *s = if k < max_rank { (*s - cfg.shrinkage).max(0.0) } else { 0.0 };
            nuclear += *s;
        }
        let next = shrunk.reconstruct(max_rank);
        let diff: f64 = next.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let norm: f64 = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        z = next;
        iterations += 1;
        let fit: f64 = z.iter().zip(&observed).filter(|(_, &o)| o).map(|(&zv, _)| (1.0 - zv) * (1.0 - zv)).sum();
        objective.push(0.5 * fit + cfg.shrinkage * nuclear);
        if norm > 0.0 && diff / norm < cfg.tol || norm == 0.0 && diff == 0.0 {
            converged = true;
            break;
        }
    }
    let values = z.iter().zip(&observed).map(|(&v, &o)| if o { 1.0 } else { v.clamp(0.0, 1.0) }).collect();
    Ok(SoftImputeResult { probs: ProbMatrix::new(n, t, values)?, objective, iterations, converged })
}

impl crate::Imputer for SoftImputeConfig {
    fn impute(&self, noisy: &BinaryMatrix) -> Result<ProbMatrix> {
        Ok(soft_impute(noisy, self)?.probs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn all_ones_matrix() {
        let x = BinaryMatrix::ones(6, 4);
        let cfg = SoftImputeConfig { shrinkage: 0.5, ..Default::default() };
        let r = soft_impute(&x, &cfg).unwrap();
        assert!(r.converged);
        assert!(r.probs.values().iter().all(|&v| v == 1.0));
        // Fixed point (1 − λ/√(nT))·J: residual ½·nT·(λ/√(nT))² plus λ·(√(nT) − λ).
        let s = (24f64).sqrt();
        let expect = 0.5 * 0.25 + 0.5 * (s - 0.5);
        assert!((r.objective.last().unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn rank_one_completion() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let (n, t) = (60, 20);
        let u: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let v: Vec<bool> = (0..t).map(|_| rng.random_bool(0.5)).collect();
        let mut x = BinaryMatrix::zeros(n, t);
        let mut hidden = Vec::new();
        for i in 0..n {
            for j in 0..t {
                if u[i] && v[j] {
                    if rng.random_bool(0.1) {
                        hidden.push((i, j));
                    } else {
                        x.set(i, j, true);
                    }
                }
            }
        }
        assert!(!hidden.is_empty());
        let cfg = SoftImputeConfig { shrinkage: 1e-3, max_rank: Some(1), max_iters: 500, tol: 1e-9 };
        let r = soft_impute(&x, &cfg).unwrap();
        assert!(hidden.iter().all(|&(i, j)| r.probs.get(i, j) >= 0.8));
        for i in 0..n {
            for j in 0..t {
                if !(u[i] && v[j]) {
                    assert!(r.probs.get(i, j) < 0.2);
                }
            }
        }
    }

    #[test]
    fn objective_is_monotone() {
        for seed in 0..5 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<u8>> = (0..30).map(|_| (0..12).map(|_| rng.random_bool(0.3) as u8).collect()).collect();
            let x = BinaryMatrix::from_rows(&rows).unwrap();
            let cfg = SoftImputeConfig { shrinkage: 0.8, max_rank: Some(4), max_iters: 50, tol: 0.0 };
            let r = soft_impute(&x, &cfg).unwrap();
            for w in r.objective.windows(2) {
                assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0), "{:?}", r.objective);
            }
            assert!(x.is_subset_of(&BinaryMatrix::from_rows(
                &(0..30).map(|i| (0..12).map(|j| (r.probs.get(i, j) == 1.0) as u8).collect::<Vec<_>>()).collect::<Vec<_>>()
            ).unwrap()));
        }
    }

    #[test]
    fn empty_matrix_rejected() {
        assert!(soft_impute(&BinaryMatrix::zeros(0, 3), &SoftImputeConfig::default()).is_err());
    }
}
