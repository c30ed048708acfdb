use std::fmt;
use std::str::FromStr;

use crate::data::{BinaryMatrix, ProbMatrix};
use crate::error::{Error, Result};
use crate::nn::{init, Graph, LayerNorm, Linear, LossSpec, ParamId, Params, Tensor, Var};
use crate::rng::{self, Domain};
use crate::{par, Imputer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arch {
    Mlp,
    Dae,
    SetAttention,
}

impl Arch {
    pub fn default_batch_size(self) -> usize {
        match self {
            Arch::Mlp | Arch::Dae => 128,
            Arch::SetAttention => 48,
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arch::Mlp => "mlp",
            Arch::Dae => "dae",
            Arch::SetAttention => "set-attention",
        })
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(Arch::Mlp),
            "dae" => Ok(Arch::Dae),
            "set-attention" | "set" | "sab" => Ok(Arch::SetAttention),
            other => Err(Error::InvalidArgument(format!("unknown architecture `{other}`"))),
        }
    }
}

/// Architecture hyperparameters. Fields unused by an architecture are kept
/// at their defaults and still round-trip through checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hyper {
    pub n_cols: usize,
    /// Width of fully connected hidden layers.
    pub hidden: usize,
    /// Hidden layers (MLP, DAE encoder) or attention blocks (set attention).
    pub depth: usize,
    /// DAE bottleneck width.
    pub latent: usize,
    /// Per-dimension embedding width for set attention.
    pub embed_dim: usize,
    pub heads: usize,
}

impl Hyper {
    pub fn defaults(arch: Arch, n_cols: usize) -> Self {
        let _ = arch;
        Self { n_cols, hidden: 512, depth: 4, latent: 512, embed_dim: 200, heads: 10 }
    }

    fn validate(&self, arch: Arch) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("{arch}: {m}")));
        if self.n_cols == 0 {
            return bad("n_cols must be positive");
        }
        match arch {
            Arch::Mlp | Arch::Dae if self.hidden == 0 || self.depth == 0 => bad("hidden and depth must be positive"),
            Arch::Dae if self.latent == 0 => bad("latent must be positive"),
            Arch::SetAttention if self.depth == 0 || self.embed_dim == 0 => bad("depth and embed_dim must be positive"),
            Arch::SetAttention if self.heads == 0 || self.embed_dim % self.heads != 0 => {
                bad("heads must divide embed_dim")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct SabBlock {
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
    ln0: LayerNorm,
    ln1: LayerNorm,
}

#[derive(Debug, Clone)]
enum Layout {
    /// Dense stack; layers whose input and output widths agree get an
    /// identity skip.
    Dense { layers: Vec<Linear>, head: Linear },
    Set { embed: ParamId, blocks: Vec<SabBlock>, head: Linear },
}

/// A denoiser `g_θ` with its parameters.
#[derive(Debug, Clone)]
pub struct DenoiserModel {
    arch: Arch,
    hyper: Hyper,
    params: Params,
    layout: Layout,
}

impl DenoiserModel {
    /// Builds and initialises a model; initialisation is seeded.
    pub fn new(arch: Arch, hyper: Hyper, seed: u64) -> Result<Self> {
        hyper.validate(arch)?;
        let mut rng = rng::stream(seed, Domain::Init, 0);
        let mut params = Params::new();
        let t = hyper.n_cols;
        let layout = match arch {
            Arch::Mlp => {
                let mut layers = Vec::with_capacity(hyper.depth);
                let mut width = t;
                for l in 0..hyper.depth {
                    layers.push(Linear::new(&mut params, &format!("mlp.{l}"), width, hyper.hidden, &mut rng));
                    width = hyper.hidden;
                }
                let head = Linear::new(&mut params, "head", width, t, &mut rng);
                Layout::Dense { layers, head }
            }
            Arch::Dae => {
                let mut widths = vec![t];
                widths.extend(std::iter::repeat_n(hyper.hidden, hyper.depth - 1));
                widths.push(hyper.latent);
                widths.extend(std::iter::repeat_n(hyper.hidden, hyper.depth - 1));
                let mut layers = Vec::with_capacity(widths.len() - 1);
                for (l, pair) in widths.windows(2).enumerate() {
                    let name = if l < hyper.depth { format!("enc.{l}") } else { format!("dec.{}", l - hyper.depth) };
                    layers.push(Linear::new(&mut params, &name, pair[0], pair[1], &mut rng));
                }
                let head = Linear::new(&mut params, "head", *widths.last().unwrap(), t, &mut rng);
                Layout::Dense { layers, head }
            }
            Arch::SetAttention => {
                let d = hyper.embed_dim;
                let embed = params.add("embed", init::normal(vec![t, d], 0.02, &mut rng));
                let mut blocks = Vec::with_capacity(hyper.depth);
                for l in 0..hyper.depth {
                    let din = if l == 0 { d + 1 } else { d };
                    let p = format!("sab.{l}");
                    blocks.push(SabBlock {
                        q: Linear::new(&mut params, &format!("{p}.q"), din, d, &mut rng),
                        // A key bias shifts every score in a row equally and
                        // cancels in the softmax.
                        k: Linear::without_bias(&mut params, &format!("{p}.k"), din, d, &mut rng),
                        v: Linear::new(&mut params, &format!("{p}.v"), din, d, &mut rng),
                        o: Linear::new(&mut params, &format!("{p}.o"), d, d, &mut rng),
                        ln0: LayerNorm::new(&mut params, &format!("{p}.ln0"), d),
                        ln1: LayerNorm::new(&mut params, &format!("{p}.ln1"), d),
                    });
                }
                let head = Linear::new(&mut params, "head", d, 1, &mut rng);
                Layout::Set { embed, blocks, head }
            }
        };
        Ok(Self { arch, hyper, params, layout })
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn hyper(&self) -> &Hyper {
        &self.hyper
    }

    pub fn n_cols(&self) -> usize {
        self.hyper.n_cols
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    /// Sets the output layer to zero so every output is exactly 0.5.
    pub fn zero_head(&mut self) {
        let head = match &self.layout {
            Layout::Dense { head, .. } | Layout::Set { head, .. } => *head,
        };
        head.zero(&mut self.params);
    }

    /// Per-dimension embedding table of a set-attention model.
    pub fn embedding_id(&self) -> Option<ParamId> {
        match &self.layout {
            Layout::Set { embed, .. } => Some(*embed),
            Layout::Dense { .. } => None,
        }
    }

    /// Records the forward pass of `rows` inputs (row-major `[rows, T]`) on
    /// `g` using `params` in place of the model's own parameters.
    pub fn forward_graph(&self, g: &mut Graph, params: &Params, x: &[f64], rows: usize) -> Result<Var> {
        let t = self.hyper.n_cols;
        if x.len() != rows * t {
            return Err(Error::shape("forward", rows * t, x.len()));
        }
        let input = g.input(Tensor::new(vec![rows, t], x.to_vec())?)?;
        let logits = match &self.layout {
            Layout::Dense { layers, head } => {
                let mut h = input;
                for layer in layers {
                    let z = layer.forward(g, params, h)?;
                    let a = g.relu(z)?;
                    h = if layer.fan_in == layer.fan_out { g.add(h, a)? } else { a };
                }
                head.forward(g, params, h)?
            }
            Layout::Set { embed, blocks, head } => {
                let e = g.param(params, *embed)?;
                let e = g.tile(e, rows)?;
                let xs = g.reshape(input, vec![rows, t, 1])?;
                let mut h = g.concat(e, xs)?;
                for b in blocks {
                    h = sab_forward(g, params, b, h, self.hyper.heads)?;
                }
                let out = head.forward(g, params, h)?;
                g.reshape(out, vec![rows, t])?
            }
        };
        g.sigmoid(logits)
    }

    /// Records forward plus weighted cross-entropy; returns the loss node.
    pub fn loss_graph(
        &self,
        g: &mut Graph,
        params: &Params,
        input: &[f64],
        target: &[f64],
        rows: usize,
        spec: &LossSpec,
    ) -> Result<Var> {
        let probs = self.forward_graph(g, params, input, rows)?;
        g.weighted_ce_loss(probs, target, input, spec)
    }

    /// Weighted cross-entropy and its parameter gradients on one batch.
    pub fn loss_and_grad(
        &self,
        params: &Params,
        input: &[f64],
        target: &[f64],
        rows: usize,
        spec: &LossSpec,
    ) -> Result<(f64, Vec<Tensor>)> {
        let mut g = Graph::new();
        let loss = self.loss_graph(&mut g, params, input, target, rows, spec)?;
        let grads = g.backward(loss)?;
        Ok((g.value(loss).item(), g.param_grads(&grads, params)))
    }

    fn check_cols(&self, x: &BinaryMatrix) -> Result<()> {
        if x.n_cols() != self.hyper.n_cols {
            return Err(Error::shape("denoiser input columns", self.hyper.n_cols, x.n_cols()));
        }
        Ok(())
    }

    /// Raw outputs `g_θ(x̃)` for every row.
    pub fn forward(&self, x: &BinaryMatrix) -> Result<ProbMatrix> {
        self.check_cols(x)?;
        let (n, t) = x.shape();
        const CHUNK: usize = 256;
        let chunks = n.div_ceil(CHUNK);
        let parts = par::try_map_range(chunks, |c| -> Result<Vec<f64>> {
            let rows: Vec<usize> = (c * CHUNK..((c + 1) * CHUNK).min(n)).collect();
            let input = x.gather_f64(&rows);
            let mut g = Graph::new();
            let out = self.forward_graph(&mut g, &self.params, &input, rows.len())?;
            Ok(g.value(out).data().to_vec())
        })?;
        ProbMatrix::new(n, t, parts.concat())
    }

    /// Outputs with observed positives forced to 1.
    pub fn denoise(&self, x: &BinaryMatrix) -> Result<ProbMatrix> {
        let mut out = self.forward(x)?;
        out.preserve_observed(x);
        Ok(out)
    }
}

fn sab_forward(g: &mut Graph, params: &Params, b: &SabBlock, x: Var, heads: usize) -> Result<Var> {
    let q = b.q.forward(g, params, x)?;
    let k = b.k.forward(g, params, x)?;
    let v = b.v.forward(g, params, x)?;
    let a = g.scaled_dot_attention(q, k, v, heads)?;
    let o = g.add(q, a)?;
    let h = b.ln0.forward(g, params, o)?;
    let f = b.o.forward(g, params, h)?;
    let f = g.relu(f)?;
    let r = g.add(h, f)?;
    b.ln1.forward(g, params, r)
}

impl Imputer for DenoiserModel {
    fn impute(&self, noisy: &BinaryMatrix) -> Result<ProbMatrix> {
        self.denoise(noisy)
    }
}
