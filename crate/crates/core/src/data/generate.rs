use rand::Rng;

use super::BinaryMatrix;
use crate::error::{Error, Result};
use crate::par;
use crate::rng::{self, Domain};

/// Deterministic rule `target := AND(sources)`, applied after sampling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AndRule {
    pub target: usize,
    pub sources: Vec<usize>,
}

impl std::str::FromStr for AndRule {
    type Err = Error;

    /// Parses `target:src1,src2,...`, e.g. `7:0,1`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("and-rule `{s}` is not `target:src,src,...`"));
        let (target, sources) = s.split_once(':').ok_or_else(bad)?;
        let target = target.trim().parse().map_err(|_| bad())?;
        let sources = sources
            .split(',')
            .map(|x| x.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad())?;
        if sources.is_empty() {
            return Err(bad());
        }
        Ok(AndRule { target, sources })
    }
}

/// Low-rank latent-factor Bernoulli generator for clean records.
///
/// Each row draws `rank` independent Bernoulli(½) factors `z`; code `d` is
/// then active with probability `clamp(base_prev[d] + factor_strength ·
/// ⟨loadings[d], z⟩, 0, 1)`. Loadings are uniform on [0,1) and derived from
/// the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub n_cols: usize,
    pub rank: usize,
    pub base_prev: Vec<f64>,
    pub factor_strength: f64,
    pub seed: u64,
    pub and_rules: Vec<AndRule>,
}

impl GeneratorSpec {
    /// Spec with the same base prevalence for every code.
    pub fn uniform(n_cols: usize, rank: usize, base_prev: f64, factor_strength: f64, seed: u64) -> Self {
        Self {
            n_cols,
            rank,
            base_prev: vec![base_prev; n_cols],
            factor_strength,
            seed,
            and_rules: Vec::new(),
        }
    }

    pub fn with_rule(mut self, rule: AndRule) -> Self {
        self.and_rules.push(rule);
        self
    }

    /// `n_cols × rank` factor loadings, row-major.
    pub fn loadings(&self) -> Vec<f64> {
        let mut r = rng::stream(self.seed, Domain::Loadings, 0);
        (0..self.n_cols * self.rank).map(|_| r.random::<f64>()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_prev.len() != self.n_cols {
            return Err(Error::shape("GeneratorSpec.base_prev", self.n_cols, self.base_prev.len()));
        }
        if !self.factor_strength.is_finite() || self.factor_strength < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "factor_strength must be finite and nonnegative, got {}",
                self.factor_strength
            )));
        }
        let loadings = self.loadings();
        for (d, &b) in self.base_prev.iter().enumerate() {
            if !(0.0..=1.0).contains(&b) {
                return Err(Error::InvalidArgument(format!("base_prev[{d}] = {b} outside [0,1]")));
            }
            let max_load: f64 = loadings[d * self.rank..(d + 1) * self.rank].iter().sum();
            let hi = b + self.factor_strength * max_load;
            if hi > 2.0 {
                return Err(Error::InvalidArgument(format!(
                    "code {d} activation probability reaches {hi:.3} before clamping (limit 2.0)"
                )));
            }
        }
        for rule in &self.and_rules {
            if rule.target >= self.n_cols || rule.sources.iter().any(|&s| s >= self.n_cols) {
                return Err(Error::InvalidArgument(format!("and-rule {rule:?} out of range")));
            }
            if rule.sources.contains(&rule.target) {
                return Err(Error::InvalidArgument(format!("and-rule {rule:?} is self-referential")));
            }
        }
        Ok(())
    }

    /// Activation probabilities of every code for a given factor vector.
    pub fn activation_probs(&self, loadings: &[f64], factors: &[bool]) -> Vec<f64> {
        (0..self.n_cols)
            .map(|d| {
                let dot: f64 = loadings[d * self.rank..(d + 1) * self.rank]
                    .iter()
                    .zip(factors)
                    .filter(|(_, &z)| z)
                    .map(|(l, _)| l)
                    .sum();
                (self.base_prev[d] + self.factor_strength * dot).clamp(0.0, 1.0)
            })
            .collect()
    }
}

/// Samples `n` clean rows. Row `i` uses its own random stream, so rows can
/// be generated in any order or in parallel with identical results.
pub fn sample_clean(spec: &GeneratorSpec, n: usize) -> Result<BinaryMatrix> {
    spec.validate()?;
    let loadings = spec.loadings();
    let t = spec.n_cols;
    let words = t.div_ceil(64);
    let rows = par::map_range(n, |i| {
        let mut r = rng::stream(spec.seed, Domain::Generate, i as u64);
        let factors: Vec<bool> = (0..spec.rank).map(|_| r.random::<f64>() < 0.5).collect();
        let probs = spec.activation_probs(&loadings, &factors);
        let mut row = vec![0u64; words];
        for (d, p) in probs.into_iter().enumerate() {
            if r.random::<f64>() < p {
                row[d / 64] |= 1 << (d % 64);
            }
        }
        for rule in &spec.and_rules {
            let on = rule.sources.iter().all(|&s| row[s / 64] >> (s % 64) & 1 == 1);
            let bit = 1u64 << (rule.target % 64);
            if on {
                row[rule.target / 64] |= bit;
            } else {
                row[rule.target / 64] &= !bit;
            }
        }
        row
    });
    Ok(BinaryMatrix::from_packed_rows(t, rows))
}
