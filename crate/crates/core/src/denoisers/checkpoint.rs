//! `ckpt v1` checkpoint format.
//!
//! ```text
//! ckpt v1 arch=mlp T=64 hidden=512 depth=4 latent=512 embed=200 heads=10
//! mlp.0.w 64,512 <values...>
//! ```

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Arch, DenoiserModel, Hyper};
use crate::data::io::header_field;
use crate::error::{Error, Result};
use crate::nn::Tensor;

pub fn write_checkpoint_to(model: &DenoiserModel, mut w: impl Write) -> std::io::Result<()> {
    let h = model.hyper();
    writeln!(
        w,
        "ckpt v1 arch={} T={} hidden={} depth={} latent={} embed={} heads={}",
        model.arch(),
        h.n_cols,
        h.hidden,
        h.depth,
        h.latent,
        h.embed_dim,
        h.heads
    )?;
    for (name, t) in model.params().iter() {
        let shape: Vec<String> = t.shape().iter().map(usize::to_string).collect();
        write!(w, "{name} {}", shape.join(","))?;
        for v in t.data() {
            write!(w, " {v:.16e}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn save_checkpoint(model: &DenoiserModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_checkpoint_to(model, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint_from(reader: impl BufRead, path: &Path) -> Result<DenoiserModel> {
    let parse_err = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line, message };
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?
        .map_err(|e| Error::io(path, e))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 9 || tokens[0] != "ckpt" || tokens[1] != "v1" {
        return Err(parse_err(1, format!("expected `ckpt v1 arch=... T=... ...`, got `{header}`")));
    }
    let arch: Arch = header_field::<String>(tokens.get(2).copied(), "arch", path)?.parse()?;
    let hyper = Hyper {
        n_cols: header_field(tokens.get(3).copied(), "T", path)?,
        hidden: header_field(tokens.get(4).copied(), "hidden", path)?,
        depth: header_field(tokens.get(5).copied(), "depth", path)?,
        latent: header_field(tokens.get(6).copied(), "latent", path)?,
        embed_dim: header_field(tokens.get(7).copied(), "embed", path)?,
        heads: header_field(tokens.get(8).copied(), "heads", path)?,
    };
    let mut model = DenoiserModel::new(arch, hyper, 0)?;
    let ids: Vec<_> = model.params().ids().collect();
    let mut seen = 0;
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let name = parts.next().unwrap_or_default();
        let shape_tok = parts.next().ok_or_else(|| parse_err(lineno, "missing shape".into()))?;
        let id = *ids.get(seen).ok_or_else(|| parse_err(lineno, format!("unexpected tensor `{name}`")))?;
        if model.params().name(id) != name {
            return Err(parse_err(lineno, format!("expected tensor `{}`, got `{name}`", model.params().name(id))));
        }
        let shape: Vec<usize> = shape_tok
            .split(',')
            .map(|s| s.parse().map_err(|_| parse_err(lineno, format!("bad shape `{shape_tok}`"))))
            .collect::<Result<_>>()?;
        if shape != model.params().get(id).shape() {
            return Err(parse_err(lineno, format!("shape {shape:?} does not match {:?}", model.params().get(id).shape())));
        }
        let values: Vec<f64> = parts
            .map(|s| s.parse().map_err(|_| parse_err(lineno, format!("bad value `{s}`"))))
            .collect::<Result<_>>()?;
        let t = Tensor::new(shape, values).map_err(|_| parse_err(lineno, "value count does not match shape".into()))?;
        *model.params_mut().get_mut(id) = t;
        seen += 1;
    }
    if seen != ids.len() {
        return Err(parse_err(seen + 2, format!("expected {} tensors, found {seen}", ids.len())));
    }
    Ok(model)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<DenoiserModel> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint_from(BufReader::new(f), path)
}
