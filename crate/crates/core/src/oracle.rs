//! Exact MSE-optimal denoising under mixture corruption, by enumeration.
//!
//! For a clean law `p(x)` on `{0,1}^T` and the corruption
//! `p(x̃|x) = β·δ(x̃ = x) + (1-β)·q(x̃|x)`, the optimal denoiser is
//!
//! ```text
//! f*(x̃) = ω(x̃)·x̃ + (1 - ω(x̃))·g*(x̃)
//! ω(x̃)  = p(x̃) / (p(x̃) + γ·q̃(x̃)),   γ = (1-β)/β
//! g*(x̃) = E_{q(x|x̃)}[x],              q̃(x̃) = Σ_x q(x̃|x)·p(x)
//! ```
//!
//! [`optimal_denoiser`] evaluates that closed form; [`posterior_mean_bruteforce`]
//! computes `E[x | x̃]` directly from the full mixture joint. The two must agree
//! on every reachable `x̃`.
//!
//! States are indexed by the binary encoding of `x` with dimension 0 as the
//! least-significant bit.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;

use crate::data::NoiseSpec;
use crate::error::{Error, Result};
use crate::par;

pub const MAX_DIMS: usize = 12;
const NORM_TOL: f64 = 1e-12;

/// Bits of state `index` as 0.0/1.0, dimension 0 first.
pub fn state_vector(index: usize, n_dims: usize) -> Vec<f64> {
    (0..n_dims).map(|d| ((index >> d) & 1) as f64).collect()
}

fn check_dims(n_dims: usize) -> Result<()> {
    if n_dims > MAX_DIMS {
        return Err(Error::InvalidArgument(format!(
            "T = {n_dims} exceeds the enumeration cap of {MAX_DIMS}"
        )));
    }
    Ok(())
}

/// Explicit probability table over `{0,1}^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    n_dims: usize,
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(n_dims: usize, probs: Vec<f64>) -> Result<Self> {
        check_dims(n_dims)?;
        if probs.len() != 1 << n_dims {
            return Err(Error::shape("DiscreteDistribution", 1usize << n_dims, probs.len()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidArgument("probabilities must be finite and nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidArgument(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { n_dims, probs })
    }

    pub fn uniform(n_dims: usize) -> Result<Self> {
        check_dims(n_dims)?;
        let n = 1usize << n_dims;
        Self::new(n_dims, vec![1.0 / n as f64; n])
    }

    pub fn point_mass(n_dims: usize, state: usize) -> Result<Self> {
        check_dims(n_dims)?;
        let mut probs = vec![0.0; 1 << n_dims];
        *probs
            .get_mut(state)
            .ok_or_else(|| Error::InvalidArgument(format!("state {state} out of range")))? = 1.0;
        Self::new(n_dims, probs)
    }

    /// Random law: flat-Dirichlet weights with roughly `sparsity` of the states
    /// zeroed out (at least one state keeps mass).
    pub fn random(n_dims: usize, sparsity: f64, rng: &mut impl Rng) -> Result<Self> {
        check_dims(n_dims)?;
        let n = 1usize << n_dims;
        let mut w: Vec<f64> = (0..n)
            .map(|_| {
                let e = -(1.0 - rng.random::<f64>()).ln();
                if rng.random::<f64>() < sparsity { 0.0 } else { e }
            })
            .collect();
        if w.iter().all(|&x| x == 0.0) {
            w[rng.random_range(0..n)] = 1.0;
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        // absorb the normalisation residue into the largest state
        let residue = 1.0 - w.iter().sum::<f64>();
        let (imax, _) = w
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc });
        w[imax] += residue;
        Self::new(n_dims, w)
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    pub fn n_states(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, state: usize) -> f64 {
        self.probs[state]
    }

    /// Per-dimension marginal `P(x_d = 1)`.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_dims];
        for (s, &p) in self.probs.iter().enumerate() {
            for (d, md) in m.iter_mut().enumerate() {
                if (s >> d) & 1 == 1 {
                    *md += p;
                }
            }
        }
        m
    }

    /// `dist v1 T=<T>` header, then one probability per line.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        (|| {
            writeln!(w, "dist v1 T={}", self.n_dims)?;
            for p in &self.probs {
                writeln!(w, "{p:e}")?;
            }
            w.flush()
        })()
        .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let perr = |line: usize, message: &str| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: message.to_string(),
        };
        let header = lines
            .next()
            .ok_or_else(|| perr(1, "empty file"))?
            .map_err(|e| Error::io(path, e))?;
        let mut tok = header.split_whitespace();
        if tok.next() != Some("dist") || tok.next() != Some("v1") {
            return Err(perr(1, "malformed header: expected `dist v1 T=<T>`"));
        }
        let n_dims: usize = crate::data::io::header_field(tok.next(), "T", path)?;
        check_dims(n_dims)?;
        let mut probs = Vec::with_capacity(1 << n_dims);
        for (k, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            probs.push(line.trim().parse().map_err(|_| perr(k + 2, "not a number"))?);
        }
        Self::new(n_dims, probs)
    }
}

/// The corruption law `β·δ + (1-β)·q` with `q` held as a sparse table:
/// `kernel[x]` lists `(x̃, q(x̃|x))` sorted by `x̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureNoiseExact {
    n_dims: usize,
    beta: f64,
    kernel: Vec<Vec<(usize, f64)>>,
}

impl MixtureNoiseExact {
    pub fn from_kernel(n_dims: usize, beta: f64, mut kernel: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        check_dims(n_dims)?;
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidArgument(format!("beta = {beta} outside [0,1]")));
        }
        let n = 1usize << n_dims;
        if kernel.len() != n {
            return Err(Error::shape("MixtureNoiseExact kernel rows", n, kernel.len()));
        }
        for (x, row) in kernel.iter_mut().enumerate() {
            row.sort_by_key(|&(s, _)| s);
            if row.iter().any(|&(s, q)| s >= n || !q.is_finite() || q < 0.0) {
                return Err(Error::InvalidArgument(format!("kernel row {x} has invalid entries")));
            }
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::InvalidArgument(format!("kernel row {x} repeats a state")));
            }
            let total: f64 = row.iter().map(|&(_, q)| q).sum();
            if (total - 1.0).abs() > NORM_TOL {
                return Err(Error::InvalidArgument(format!("kernel row {x} sums to {total}")));
            }
        }
        Ok(Self { n_dims, beta, kernel })
    }

    /// Enumerates the one-sided drop law of `spec`: each 1 of `x` survives
    /// with probability `1 - drop_prob[d]`, zeros stay zero.
    pub fn from_noise_spec(spec: &NoiseSpec) -> Result<Self> {
        spec.validate()?;
        let n_dims = spec.n_cols();
        check_dims(n_dims)?;
        let kernel = (0..1usize << n_dims)
            .map(|x| {
                let mut row = Vec::with_capacity(1 << x.count_ones());
                let mut sub = x;
                loop {
                    let q: f64 = (0..n_dims)
                        .filter(|d| (x >> d) & 1 == 1)
                        .map(|d| {
                            let rho = spec.drop_prob[d];
                            if (sub >> d) & 1 == 1 { 1.0 - rho } else { rho }
                        })
                        .product();
                    if q > 0.0 {
                        row.push((sub, q));
                    }
                    if sub == 0 {
                        break;
                    }
                    sub = (sub - 1) & x;
                }
                row
            })
            .collect();
        Self::from_kernel(n_dims, spec.beta, kernel)
    }

    /// `q(x̃|x) = δ(x̃ = x)`.
    pub fn identity(n_dims: usize, beta: f64) -> Result<Self> {
        check_dims(n_dims)?;
        Self::from_kernel(n_dims, beta, (0..1usize << n_dims).map(|x| vec![(x, 1.0)]).collect())
    }

    /// `q(x̃|x) = δ(x̃ = 0)`.
    pub fn zeroing(n_dims: usize, beta: f64) -> Result<Self> {
        check_dims(n_dims)?;
        Self::from_kernel(n_dims, beta, (0..1usize << n_dims).map(|_| vec![(0, 1.0)]).collect())
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `(1-β)/β`, or `None` when `β = 0`.
    pub fn gamma(&self) -> Option<f64> {
        (self.beta > 0.0).then(|| (1.0 - self.beta) / self.beta)
    }

    pub fn kernel_row(&self, x: usize) -> &[(usize, f64)] {
        &self.kernel[x]
    }

    /// `q(x̃|x)`.
    pub fn q(&self, x_tilde: usize, x: usize) -> f64 {
        let row = &self.kernel[x];
        row.binary_search_by_key(&x_tilde, |&(s, _)| s)
            .map_or(0.0, |k| row[k].1)
    }
}

fn check_pair(dist: &DiscreteDistribution, noise: &MixtureNoiseExact) -> Result<()> {
    if dist.n_dims != noise.n_dims {
        return Err(Error::shape("oracle: T of distribution vs noise", dist.n_dims, noise.n_dims));
    }
    let total: f64 = dist.probs.iter().sum();
    if (total - 1.0).abs() > NORM_TOL {
        return Err(Error::InvalidArgument(format!("distribution sums to {total}")));
    }
    Ok(())
}

fn state_index(x_tilde: &[u8], n_dims: usize) -> Result<usize> {
    if x_tilde.len() != n_dims {
        return Err(Error::shape("oracle: x̃ length", n_dims, x_tilde.len()));
    }
    x_tilde.iter().enumerate().try_fold(0usize, |acc, (d, &b)| match b {
        0 => Ok(acc),
        1 => Ok(acc | 1 << d),
        _ => Err(Error::InvalidArgument(format!("x̃[{d}] = {b} is not binary"))),
    })
}

/// Marginal of the noisy data under `q` alone: `q̃(x̃) = Σ_x q(x̃|x)·p(x)`.
pub fn marginal_q(dist: &DiscreteDistribution, noise: &MixtureNoiseExact) -> Result<Vec<f64>> {
    check_pair(dist, noise)?;
    let mut out = vec![0.0; dist.n_states()];
    for (x, &p) in dist.probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for &(s, q) in &noise.kernel[x] {
            out[s] += q * p;
        }
    }
    Ok(out)
}

/// `ω = p / (p + γ·q)`.
pub fn omega(p_val: f64, q_val: f64, gamma: f64) -> Result<f64> {
    if p_val < 0.0 || q_val < 0.0 || gamma < 0.0 {
        return Err(Error::InvalidArgument("omega arguments must be nonnegative".into()));
    }
    let den = p_val + gamma * q_val;
    if den <= 0.0 {
        return Err(Error::InvalidArgument("x̃ impossible under both branches".into()));
    }
    Ok((p_val / den).clamp(0.0, 1.0))
}

/// Precomputed ingredients of the closed form, shared across many `x̃`.
#[derive(Debug, Clone)]
pub struct OptimalDenoiser {
    n_dims: usize,
    beta: f64,
    p: Vec<f64>,
    q_tilde: Vec<f64>,
    /// `Σ_x x·q(x̃|x)·p(x)` per `x̃`, row-major `n_states × T`.
    q_first_moment: Vec<f64>,
}

impl OptimalDenoiser {
    pub fn new(dist: &DiscreteDistribution, noise: &MixtureNoiseExact) -> Result<Self> {
        let q_tilde = marginal_q(dist, noise)?;
        let t = dist.n_dims;
        let mut q_first_moment = vec![0.0; dist.n_states() * t];
        for (x, &p) in dist.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for &(s, q) in &noise.kernel[x] {
                for d in 0..t {
                    if (x >> d) & 1 == 1 {
                        q_first_moment[s * t + d] += q * p;
                    }
                }
            }
        }
        Ok(Self {
            n_dims: t,
            beta: noise.beta,
            p: dist.probs.clone(),
            q_tilde,
            q_first_moment,
        })
    }

    pub fn q_tilde(&self) -> &[f64] {
        &self.q_tilde
    }

    /// Probability of observing `x̃` under the full mixture.
    pub fn mixture_prob(&self, x_tilde: usize) -> f64 {
        self.beta * self.p[x_tilde] + (1.0 - self.beta) * self.q_tilde[x_tilde]
    }

    pub fn is_reachable(&self, x_tilde: usize) -> bool {
        self.mixture_prob(x_tilde) > 0.0
    }

    /// `ω(x̃)`; `None` when `β = 0` (the MMSE branch only).
    pub fn omega(&self, x_tilde: usize) -> Result<Option<f64>> {
        if !self.is_reachable(x_tilde) {
            return Err(Error::Unreachable { index: x_tilde });
        }
        if self.beta == 0.0 {
            return Ok(None);
        }
        let gamma = (1.0 - self.beta) / self.beta;
        omega(self.p[x_tilde], self.q_tilde[x_tilde], gamma).map(Some)
    }

    /// `g*(x̃) = E_{q(x|x̃)}[x]`; `None` where `q̃(x̃) = 0`.
    pub fn mmse(&self, x_tilde: usize) -> Option<Vec<f64>> {
        let qt = self.q_tilde[x_tilde];
        (qt > 0.0).then(|| {
            self.q_first_moment[x_tilde * self.n_dims..(x_tilde + 1) * self.n_dims]
                .iter()
                .map(|m| (m / qt).clamp(0.0, 1.0))
                .collect()
        })
    }

    /// `f*(x̃)` for the state with index `x_tilde`.
    pub fn denoise_state(&self, x_tilde: usize) -> Result<Vec<f64>> {
        let w = self.omega(x_tilde)?;
        let xt = state_vector(x_tilde, self.n_dims);
        let g = self.mmse(x_tilde);
        Ok(match (w, g) {
            (None, Some(g)) => g,
            (Some(w), Some(g)) => xt
                .iter()
                .zip(&g)
                .map(|(a, b)| w * a + (1.0 - w) * b)
                .collect(),
            // q̃(x̃) = 0 on a reachable state forces ω = 1
            (Some(_), None) => xt,
            (None, None) => return Err(Error::Unreachable { index: x_tilde }),
        })
    }

    /// `f*` on every state; `None` for unreachable ones.
    pub fn table(&self) -> Vec<Option<Vec<f64>>> {
        par::map_range(self.p.len(), |s| self.denoise_state(s).ok())
    }
}

/// Closed-form optimal denoiser at a single binary vector.
pub fn optimal_denoiser(
    dist: &DiscreteDistribution,
    noise: &MixtureNoiseExact,
    x_tilde: &[u8],
) -> Result<Vec<f64>> {
    let s = state_index(x_tilde, dist.n_dims)?;
    OptimalDenoiser::new(dist, noise)?.denoise_state(s)
}

/// `E[x | x̃]` under the full joint `p(x)·(β·δ(x̃=x) + (1-β)·q(x̃|x))`,
/// summing over every clean state with no decomposition.
pub fn posterior_mean_state(
    dist: &DiscreteDistribution,
    noise: &MixtureNoiseExact,
    x_tilde: usize,
) -> Result<Vec<f64>> {
    check_pair(dist, noise)?;
    let t = dist.n_dims;
    let mut num = vec![0.0; t];
    let mut den = 0.0;
    for x in 0..dist.n_states() {
        let channel = noise.beta * f64::from(u8::from(x == x_tilde))
            + (1.0 - noise.beta) * noise.q(x_tilde, x);
        let joint = dist.probs[x] * channel;
        if joint == 0.0 {
            continue;
        }
        den += joint;
        for (d, n) in num.iter_mut().enumerate() {
            if (x >> d) & 1 == 1 {
                *n += joint;
            }
        }
    }
    if den <= 0.0 {
        return Err(Error::Unreachable { index: x_tilde });
    }
    Ok(num.into_iter().map(|n| (n / den).clamp(0.0, 1.0)).collect())
}

pub fn posterior_mean_bruteforce(
    dist: &DiscreteDistribution,
    noise: &MixtureNoiseExact,
    x_tilde: &[u8],
) -> Result<Vec<f64>> {
    let s = state_index(x_tilde, dist.n_dims)?;
    posterior_mean_state(dist, noise, s)
}

/// Exact `E‖f(x̃) - x‖²` under `p(x)·p(x̃|x)`. `f` is queried once per
/// reachable state index.
pub fn mse_of_denoiser<F>(dist: &DiscreteDistribution, noise: &MixtureNoiseExact, f: F) -> Result<f64>
where
    F: Fn(usize) -> Vec<f64>,
{
    check_pair(dist, noise)?;
    let t = dist.n_dims;
    let q_tilde = marginal_q(dist, noise)?;
    let mut table: Vec<Option<Vec<f64>>> = vec![None; dist.n_states()];
    for (s, slot) in table.iter_mut().enumerate() {
        if noise.beta * dist.probs[s] + (1.0 - noise.beta) * q_tilde[s] > 0.0 {
            let v = f(s);
            if v.len() != t {
                return Err(Error::shape("mse_of_denoiser: f output", t, v.len()));
            }
            *slot = Some(v);
        }
    }
    let sq = |fx: &[f64], x: usize| -> f64 {
        fx.iter()
            .enumerate()
            .map(|(d, &v)| {
                let e = v - ((x >> d) & 1) as f64;
                e * e
            })
            .sum()
    };
    let mut total = 0.0;
    for (x, &p) in dist.probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        if noise.beta > 0.0 {
            total += p * noise.beta * sq(table[x].as_deref().expect("x reachable"), x);
        }
        if noise.beta < 1.0 {
            for &(s, q) in &noise.kernel[x] {
                total += p * (1.0 - noise.beta) * q * sq(table[s].as_deref().expect("x̃ reachable"), x);
            }
        }
    }
    Ok(total)
}

/// Largest absolute gap between the closed form and the brute-force
/// posterior mean over every reachable `x̃`.
pub fn closed_form_discrepancy(dist: &DiscreteDistribution, noise: &MixtureNoiseExact) -> Result<f64> {
    let fstar = OptimalDenoiser::new(dist, noise)?;
    let gaps = par::try_map_range(dist.n_states(), |s| -> Result<f64> {
        if !fstar.is_reachable(s) {
            return Ok(0.0);
        }
        let a = fstar.denoise_state(s)?;
        let b = posterior_mean_state(dist, noise, s)?;
        Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
    })?;
    Ok(gaps.into_iter().fold(0.0, f64::max))
}

/// Random instance for trial `trial`: a distribution over `n_dims` codes
/// with some zero-mass states and per-dimension drop probabilities in
/// [0, 1).
pub fn random_instance(n_dims: usize, beta: f64, seed: u64, trial: u64) -> Result<(DiscreteDistribution, MixtureNoiseExact)> {
    let mut r = crate::rng::stream(seed, crate::rng::Domain::Oracle, trial);
    let sparsity = r.random_range(0.0..0.5);
    let dist = DiscreteDistribution::random(n_dims, sparsity, &mut r)?;
    let drop: Vec<f64> = (0..n_dims).map(|_| r.random::<f64>()).collect();
    let noise = MixtureNoiseExact::from_noise_spec(&NoiseSpec::new(beta, drop)?)?;
    Ok((dist, noise))
}
