use rand::Rng;

use super::{init, Graph, ParamId, Params, Tensor, Var};
use crate::error::Result;

/// Affine map `x W + b` over the last axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub fn new(params: &mut Params, name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let w = params.add(format!("{name}.w"), init::glorot_uniform(fan_in, fan_out, rng));
        let b = Some(params.add(format!("{name}.b"), Tensor::zeros(vec![fan_out])));
        Self { w, b, fan_in, fan_out }
    }

    /// Linear map without a bias term.
    pub fn without_bias(params: &mut Params, name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let w = params.add(format!("{name}.w"), init::glorot_uniform(fan_in, fan_out, rng));
        Self { w, b: None, fan_in, fan_out }
    }

    pub fn forward(&self, g: &mut Graph, params: &Params, x: Var) -> Result<Var> {
        let w = g.param(params, self.w)?;
        let y = g.matmul(x, w)?;
        match self.b {
            Some(b) => {
                let b = g.param(params, b)?;
                g.add_bias(y, b)
            }
            None => Ok(y),
        }
    }

    /// Sets weights and bias to zero.
    pub fn zero(&self, params: &mut Params) {
        params.get_mut(self.w).data_mut().fill(0.0);
        if let Some(b) = self.b {
            params.get_mut(b).data_mut().fill(0.0);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNorm {
    pub fn new(params: &mut Params, name: &str, dim: usize) -> Self {
        let gamma = params.add(format!("{name}.gamma"), Tensor::new(vec![dim], vec![1.0; dim]).expect("shape"));
        let beta = params.add(format!("{name}.beta"), Tensor::zeros(vec![dim]));
        Self { gamma, beta }
    }

    pub fn forward(&self, g: &mut Graph, params: &Params, x: Var) -> Result<Var> {
        let gamma = g.param(params, self.gamma)?;
        let beta = g.param(params, self.beta)?;
        g.layer_norm(x, gamma, beta)
    }
}
