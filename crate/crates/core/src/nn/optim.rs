use super::{Params, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self { lr: 3e-4, weight_decay: 1e-5, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamWConfig {
    pub fn with_lr(mut self, lr: f64) -> Self {
        self.lr = lr;
        self
    }

    pub fn with_weight_decay(mut self, wd: f64) -> Self {
        self.weight_decay = wd;
        self
    }
}

/// AdamW with decoupled weight decay and bias-corrected moments.
#[derive(Debug, Clone)]
pub struct AdamW {
    cfg: AdamWConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(cfg: AdamWConfig) -> Self {
        Self { cfg, step: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn config(&self) -> &AdamWConfig {
        &self.cfg
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut Params, grads: &[Tensor]) -> Result<()> {
        if grads.len() != params.len() {
            return Err(Error::shape("adamw_step", params.len(), grads.len()));
        }
        let mut pairs = Vec::with_capacity(grads.len());
        for (p, g) in params.tensors_mut().iter_mut().zip(grads) {
            if p.shape() != g.shape() {
                return Err(Error::shape("adamw_step", p.shape(), g.shape()));
            }
            pairs.push((p.data_mut(), g.data()));
        }
        self.apply(pairs)
    }

    /// Single flat parameter vector.
    pub fn step_slice(&mut self, param: &mut [f64], grad: &[f64]) -> Result<()> {
        if param.len() != grad.len() {
            return Err(Error::shape("adamw_step", param.len(), grad.len()));
        }
        self.apply(vec![(param, grad)])
    }

    fn apply(&mut self, pairs: Vec<(&mut [f64], &[f64])>) -> Result<()> {
        if pairs.iter().any(|(_, g)| g.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFinite { op: "adamw_step gradient" });
        }
        if self.m.is_empty() {
            self.m = pairs.iter().map(|(p, _)| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        } else if self.m.len() != pairs.len() || self.m.iter().zip(&pairs).any(|(m, (p, _))| m.len() != p.len()) {
            return Err(Error::InvalidArgument("optimizer state does not match parameters".into()));
        }
        self.step += 1;
        let AdamWConfig { lr, weight_decay, beta1, beta2, eps } = self.cfg;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for ((p, g), (m, v)) in pairs.into_iter().zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for i in 0..p.len() {
                p[i] -= lr * weight_decay * p[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
