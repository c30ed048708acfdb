//! Tape-based reverse-mode differentiation.
//!
//! Operations append nodes to a [`Graph`]; [`Graph::backward`] walks the tape
//! in reverse and accumulates adjoints. Every op checks that its forward
//! output is finite.

use super::loss::{ce_value_and_grad, LossSpec};
use super::{ParamId, Params, Tensor};
use crate::error::{Error, Result};
use crate::linalg::gemm;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatMul { x: Var, w: Var },
    Add(Var, Var),
    AddBias { x: Var, b: Var },
    Scale(Var, f64),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Softmax(Var),
    Concat { a: Var, b: Var },
    Slice { x: Var, start: usize },
    Reshape(Var),
    Tile { x: Var, times: usize },
    Attention { q: Var, k: Var, v: Var, heads: usize, probs: Vec<f64> },
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    Loss { input: Var, local_grad: Vec<f64> },
    Sum(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// A single forward/backward computation.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Grads {
    grads: Vec<Option<Vec<f64>>>,
}

impl Grads {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }
}

fn acc<'a>(grads: &'a mut [Option<Vec<f64>>], nodes: &[Node], v: Var) -> &'a mut Vec<f64> {
    grads[v.0].get_or_insert_with(|| vec![0.0; nodes[v.0].value.numel()])
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

const LN_EPS: f64 = 1e-5;

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor, op: Op, name: &'static str) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn input(&mut self, t: Tensor) -> Result<Var> {
        self.push(t, Op::Input, "input")
    }

    pub fn param(&mut self, params: &Params, id: ParamId) -> Result<Var> {
        self.push(params.get(id).clone(), Op::Param(id), "param")
    }

    /// `x [.., k] · w [k, n] → [.., n]`.
    pub fn matmul(&mut self, x: Var, w: Var) -> Result<Var> {
        let (xv, wv) = (self.value(x), self.value(w));
        let k = xv.last_dim();
        if wv.shape().len() != 2 || wv.shape()[0] != k {
            return Err(Error::shape("matmul", format!("[{k}, n]"), wv.shape()));
        }
        let n = wv.shape()[1];
        let rows = xv.outer();
        let mut out = vec![0.0; rows * n];
        gemm(rows, k, n, 1.0, xv.data(), (k, 1), wv.data(), (n, 1), 0.0, &mut out, (n, 1));
        let mut shape = xv.shape().to_vec();
        *shape.last_mut().expect("matmul on scalar") = n;
        self.push(Tensor::new(shape, out)?, Op::MatMul { x, w }, "matmul")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::shape("add", av.shape(), bv.shape()));
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x + y).collect();
        let t = Tensor::new(av.shape().to_vec(), data)?;
        self.push(t, Op::Add(a, b), "add")
    }

    /// Adds a `[n]` vector along the last axis.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(b));
        let n = xv.last_dim();
        if bv.numel() != n {
            return Err(Error::shape("add_bias", n, bv.numel()));
        }
        let mut data = xv.data().to_vec();
        for row in data.chunks_mut(n) {
            add_into(row, bv.data());
        }
        let t = Tensor::new(xv.shape().to_vec(), data)?;
        self.push(t, Op::AddBias { x, b }, "add_bias")
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Result<Var> {
        let xv = self.value(x);
        let t = Tensor::new(xv.shape().to_vec(), xv.data().iter().map(|v| v * s).collect())?;
        self.push(t, Op::Scale(x, s), "scale")
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op, name: &'static str) -> Result<Var> {
        let xv = self.value(x);
        let t = Tensor::new(xv.shape().to_vec(), xv.data().iter().map(|&v| f(v)).collect())?;
        self.push(t, op, name)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.unary(x, |v| v.max(0.0), Op::Relu(x), "relu")
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.unary(x, f64::tanh, Op::Tanh(x), "tanh")
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.unary(x, sigmoid, Op::Sigmoid(x), "sigmoid")
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let n = xv.last_dim();
        let mut data = xv.data().to_vec();
        for row in data.chunks_mut(n.max(1)) {
            softmax_in_place(row);
        }
        let t = Tensor::new(xv.shape().to_vec(), data)?;
        self.push(t, Op::Softmax(x), "softmax")
    }

    /// Concatenates along the last axis; leading axes must match.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let (sa, sb) = (av.shape(), bv.shape());
        if sa.len() != sb.len() || sa.is_empty() || sa[..sa.len() - 1] != sb[..sb.len() - 1] {
            return Err(Error::shape("concat", sa, sb));
        }
        let (na, nb) = (av.last_dim(), bv.last_dim());
        let mut data = Vec::with_capacity(av.numel() + bv.numel());
        for r in 0..av.outer() {
            data.extend_from_slice(&av.data()[r * na..(r + 1) * na]);
            data.extend_from_slice(&bv.data()[r * nb..(r + 1) * nb]);
        }
        let mut shape = sa.to_vec();
        *shape.last_mut().unwrap() = na + nb;
        self.push(Tensor::new(shape, data)?, Op::Concat { a, b }, "concat")
    }

    /// `x[.., start..start + len]` along the last axis.
    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = self.value(x);
        let n = xv.last_dim();
        if start + len > n {
            return Err(Error::shape("slice", format!("start+len <= {n}"), start + len));
        }
        let mut data = Vec::with_capacity(xv.outer() * len);
        for r in 0..xv.outer() {
            data.extend_from_slice(&xv.data()[r * n + start..r * n + start + len]);
        }
        let mut shape = xv.shape().to_vec();
        *shape.last_mut().unwrap() = len;
        self.push(Tensor::new(shape, data)?, Op::Slice { x, start }, "slice")
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let t = Tensor::new(shape, self.value(x).data().to_vec())?;
        self.push(t, Op::Reshape(x), "reshape")
    }

    /// Stacks `times` copies of `x` along a new leading axis.
    pub fn tile(&mut self, x: Var, times: usize) -> Result<Var> {
        let xv = self.value(x);
        let mut shape = vec![times];
        shape.extend_from_slice(xv.shape());
        let data = xv.data().repeat(times);
        self.push(Tensor::new(shape, data)?, Op::Tile { x, times }, "tile")
    }

    /// Multi-head scaled dot-product attention over `[B, T, D]` operands,
    /// `heads` equal slices of `D`, scale `1/√(D/heads)`. Output `[B, T, D]`.
    pub fn scaled_dot_attention(&mut self, q: Var, k: Var, v: Var, heads: usize) -> Result<Var> {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        if qv.shape().len() != 3 || qv.shape() != kv.shape() || kv.shape() != vv.shape() {
            return Err(Error::shape("scaled_dot_attention", qv.shape(), (kv.shape(), vv.shape())));
        }
        let (b, t, d) = (qv.shape()[0], qv.shape()[1], qv.shape()[2]);
        if heads == 0 || d % heads != 0 {
            return Err(Error::shape("scaled_dot_attention heads", format!("divisor of {d}"), heads));
        }
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut probs = vec![0.0; b * heads * t * t];
        let mut out = vec![0.0; b * t * d];
        for bi in 0..b {
            for h in 0..heads {
                let off = bi * t * d + h * dh;
                let a = &mut probs[(bi * heads + h) * t * t..(bi * heads + h + 1) * t * t];
                gemm(t, dh, t, scale, &qv.data()[off..], (d, 1), &kv.data()[off..], (1, d), 0.0, a, (t, 1));
                for row in a.chunks_mut(t) {
                    softmax_in_place(row);
                }
                gemm(t, t, dh, 1.0, a, (t, 1), &vv.data()[off..], (d, 1), 0.0, &mut out[off..], (d, 1));
            }
        }
        let shape = qv.shape().to_vec();
        self.push(Tensor::new(shape, out)?, Op::Attention { q, k, v, heads, probs }, "scaled_dot_attention")
    }

    /// Layer normalisation over the last axis with affine `gamma`, `beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let (xv, gv, bv) = (self.value(x), self.value(gamma), self.value(beta));
        let n = xv.last_dim();
        if gv.numel() != n || bv.numel() != n {
            return Err(Error::shape("layer_norm", n, (gv.numel(), bv.numel())));
        }
        let rows = xv.outer();
        let mut xhat = vec![0.0; xv.numel()];
        let mut inv_std = vec![0.0; rows];
        let mut out = vec![0.0; xv.numel()];
        for r in 0..rows {
            let row = &xv.data()[r * n..(r + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            inv_std[r] = inv;
            for j in 0..n {
                let h = (row[j] - mean) * inv;
                xhat[r * n + j] = h;
                out[r * n + j] = gv.data()[j] * h + bv.data()[j];
            }
        }
        let t = Tensor::new(xv.shape().to_vec(), out)?;
        self.push(t, Op::LayerNorm { x, gamma, beta, xhat, inv_std }, "layer_norm")
    }

    /// Sum of ε-clamped cross-entropy terms, each term weighted by `weights`.
    /// Pass all-ones weights for the unweighted loss.
    pub fn weighted_ce(&mut self, probs: Var, target: &[f64], weights: &[f64], eps: f64) -> Result<Var> {
        let pv = self.value(probs);
        if target.len() != pv.numel() || weights.len() != pv.numel() {
            return Err(Error::shape("weighted_ce", pv.numel(), (target.len(), weights.len())));
        }
        let (value, local_grad) = ce_value_and_grad(pv.data(), target, weights, eps);
        self.push(Tensor::scalar(value), Op::Loss { input: probs, local_grad }, "weighted_ce")
    }

    /// Weighted cross-entropy with weights derived from `(target, noisy)`.
    pub fn weighted_ce_loss(&mut self, probs: Var, target: &[f64], noisy: &[f64], spec: &LossSpec) -> Result<Var> {
        if noisy.len() != target.len() {
            return Err(Error::shape("weighted_ce_loss", target.len(), noisy.len()));
        }
        let w = spec.weights(target, noisy);
        self.weighted_ce(probs, target, &w, spec.epsilon)
    }

    /// `Σ (pred - target)²`.
    pub fn sse(&mut self, pred: Var, target: &[f64]) -> Result<Var> {
        let pv = self.value(pred);
        if target.len() != pv.numel() {
            return Err(Error::shape("sse", pv.numel(), target.len()));
        }
        let mut value = 0.0;
        let local_grad = pv
            .data()
            .iter()
            .zip(target)
            .map(|(p, t)| {
                value += (p - t) * (p - t);
                2.0 * (p - t)
            })
            .collect();
        self.push(Tensor::scalar(value), Op::Loss { input: pred, local_grad }, "sse")
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x), "sum")
    }

    /// Reverse sweep from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Grads> {
        if self.value(loss).numel() != 1 {
            return Err(Error::shape("backward: loss", 1, self.value(loss).numel()));
        }
        let nodes = &self.nodes;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &nodes[i];
            match &node.op {
                Op::Input | Op::Param(_) => {}
                Op::MatMul { x, w } => {
                    let (xv, wv) = (&nodes[x.0].value, &nodes[w.0].value);
                    let (k, n, rows) = (xv.last_dim(), wv.shape()[1], xv.outer());
                    let dx = acc(&mut grads, nodes, *x);
                    gemm(rows, n, k, 1.0, &g, (n, 1), wv.data(), (1, n), 1.0, dx, (k, 1));
                    let dw = acc(&mut grads, nodes, *w);
                    gemm(k, rows, n, 1.0, xv.data(), (1, k), &g, (n, 1), 1.0, dw, (n, 1));
                }
                Op::Add(a, b) => {
                    add_into(acc(&mut grads, nodes, *a), &g);
                    add_into(acc(&mut grads, nodes, *b), &g);
                }
                Op::AddBias { x, b } => {
                    add_into(acc(&mut grads, nodes, *x), &g);
                    let n = node.value.last_dim();
                    let db = acc(&mut grads, nodes, *b);
                    for row in g.chunks(n) {
                        add_into(db, row);
                    }
                }
                Op::Scale(x, s) => {
                    let dx = acc(&mut grads, nodes, *x);
                    dx.iter_mut().zip(&g).for_each(|(d, gi)| *d += s * gi);
                }
                Op::Relu(x) => {
                    let y = node.value.data();
                    let dx = acc(&mut grads, nodes, *x);
                    for ((d, gi), yi) in dx.iter_mut().zip(&g).zip(y) {
                        if *yi > 0.0 {
                            *d += gi;
                        }
                    }
                }
                Op::Tanh(x) => {
                    let y = node.value.data();
                    let dx = acc(&mut grads, nodes, *x);
                    for ((d, gi), yi) in dx.iter_mut().zip(&g).zip(y) {
                        *d += gi * (1.0 - yi * yi);
                    }
                }
                Op::Sigmoid(x) => {
                    let y = node.value.data();
                    let dx = acc(&mut grads, nodes, *x);
                    for ((d, gi), yi) in dx.iter_mut().zip(&g).zip(y) {
                        *d += gi * yi * (1.0 - yi);
                    }
                }
                Op::Softmax(x) => {
                    let n = node.value.last_dim();
                    let y = node.value.data();
                    let dx = acc(&mut grads, nodes, *x);
                    for ((dr, gr), yr) in dx.chunks_mut(n).zip(g.chunks(n)).zip(y.chunks(n)) {
                        let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                        for j in 0..n {
                            dr[j] += yr[j] * (gr[j] - dot);
                        }
                    }
                }
                Op::Concat { a, b } => {
                    let na = nodes[a.0].value.last_dim();
                    let nb = nodes[b.0].value.last_dim();
                    let rows = nodes[a.0].value.outer();
                    {
                        let da = acc(&mut grads, nodes, *a);
                        for r in 0..rows {
                            add_into(&mut da[r * na..(r + 1) * na], &g[r * (na + nb)..r * (na + nb) + na]);
                        }
                    }
                    let db = acc(&mut grads, nodes, *b);
                    for r in 0..rows {
                        add_into(&mut db[r * nb..(r + 1) * nb], &g[r * (na + nb) + na..(r + 1) * (na + nb)]);
                    }
                }
                Op::Slice { x, start } => {
                    let n = nodes[x.0].value.last_dim();
                    let len = node.value.last_dim();
                    let dx = acc(&mut grads, nodes, *x);
                    for (r, gr) in g.chunks(len.max(1)).enumerate() {
                        add_into(&mut dx[r * n + start..r * n + start + len], gr);
                    }
                }
                Op::Reshape(x) => add_into(acc(&mut grads, nodes, *x), &g),
                Op::Tile { x, times } => {
                    let n = nodes[x.0].value.numel();
                    let dx = acc(&mut grads, nodes, *x);
                    for c in 0..*times {
                        add_into(dx, &g[c * n..(c + 1) * n]);
                    }
                }
                Op::Attention { q, k, v, heads, probs } => {
                    let (dq, dk, dv) = attention_backward(
                        &nodes[q.0].value,
                        &nodes[k.0].value,
                        &nodes[v.0].value,
                        *heads,
                        probs,
                        &g,
                    );
                    add_into(acc(&mut grads, nodes, *q), &dq);
                    add_into(acc(&mut grads, nodes, *k), &dk);
                    add_into(acc(&mut grads, nodes, *v), &dv);
                }
                Op::LayerNorm { x, gamma, beta, xhat, inv_std } => {
                    let n = node.value.last_dim();
                    let gam = nodes[gamma.0].value.data().to_vec();
                    {
                        let dg = acc(&mut grads, nodes, *gamma);
                        for (gr, hr) in g.chunks(n).zip(xhat.chunks(n)) {
                            for j in 0..n {
                                dg[j] += gr[j] * hr[j];
                            }
                        }
                    }
                    {
                        let db = acc(&mut grads, nodes, *beta);
                        for gr in g.chunks(n) {
                            add_into(db, gr);
                        }
                    }
                    let dx = acc(&mut grads, nodes, *x);
                    let mut dh = vec![0.0; n];
                    for (r, (gr, hr)) in g.chunks(n).zip(xhat.chunks(n)).enumerate() {
                        for j in 0..n {
                            dh[j] = gr[j] * gam[j];
                        }
                        let mean_dh = dh.iter().sum::<f64>() / n as f64;
                        let mean_dhh = dh.iter().zip(hr).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                        for j in 0..n {
                            dx[r * n + j] += inv_std[r] * (dh[j] - mean_dh - hr[j] * mean_dhh);
                        }
                    }
                }
                Op::Loss { input, local_grad } => {
                    let dx = acc(&mut grads, nodes, *input);
                    dx.iter_mut().zip(local_grad).for_each(|(d, l)| *d += g[0] * l);
                }
                Op::Sum(x) => {
                    let dx = acc(&mut grads, nodes, *x);
                    dx.iter_mut().for_each(|d| *d += g[0]);
                }
            }
            grads[i] = Some(g);
        }
        Ok(Grads { grads })
    }

    /// Collects per-parameter gradients (summed over every use). Unused
    /// parameters get zeros.
    pub fn param_grads(&self, grads: &Grads, params: &Params) -> Vec<Tensor> {
        let mut out: Vec<Tensor> = params.ids().map(|id| Tensor::zeros(params.get(id).shape().to_vec())).collect();
        for (i, node) in self.nodes.iter().enumerate() {
            if let (Op::Param(id), Some(g)) = (&node.op, &grads.grads[i]) {
                add_into(out[id.0].data_mut(), g);
            }
        }
        out
    }
}

fn attention_backward(
    qv: &Tensor,
    kv: &Tensor,
    vv: &Tensor,
    heads: usize,
    probs: &[f64],
    g: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (b, t, d) = (qv.shape()[0], qv.shape()[1], qv.shape()[2]);
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut dq = vec![0.0; qv.numel()];
    let mut dk = vec![0.0; kv.numel()];
    let mut dv = vec![0.0; vv.numel()];
    let mut da = vec![0.0; t * t];
    for bi in 0..b {
        for h in 0..heads {
            let off = bi * t * d + h * dh;
            let a = &probs[(bi * heads + h) * t * t..(bi * heads + h + 1) * t * t];
            // dA = dO · Vᵀ
            gemm(t, dh, t, 1.0, &g[off..], (d, 1), &vv.data()[off..], (1, d), 0.0, &mut da, (t, 1));
            // dV = Aᵀ · dO
            gemm(t, t, dh, 1.0, a, (1, t), &g[off..], (d, 1), 1.0, &mut dv[off..], (d, 1));
            // dS = A ⊙ (dA - rowsum(dA ⊙ A))
            for (dr, ar) in da.chunks_mut(t).zip(a.chunks(t)) {
                let dot: f64 = dr.iter().zip(ar).map(|(x, y)| x * y).sum();
                for j in 0..t {
                    dr[j] = ar[j] * (dr[j] - dot);
                }
            }
            gemm(t, t, dh, scale, &da, (t, 1), &kv.data()[off..], (d, 1), 1.0, &mut dq[off..], (d, 1));
            gemm(t, t, dh, scale, &da, (1, t), &qv.data()[off..], (d, 1), 1.0, &mut dk[off..], (d, 1));
        }
    }
    (dq, dk, dv)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}
