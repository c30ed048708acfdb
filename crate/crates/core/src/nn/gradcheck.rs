use rand::seq::SliceRandom;

use super::{Params, Tensor};
use crate::error::{Error, Result};
use crate::rng::{self, Domain};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub probed: usize,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compares analytic gradients against central differences.
///
/// Each coordinate is probed with steps `h` and `h/10` and scored by the
/// closer of the two, so a ReLU kink lying within one step of the point
/// does not register as an error while a wrong gradient still does.
///
/// `loss` returns the scalar loss, `grad` the per-parameter gradients. When
/// the parameter count exceeds `max_coords`, a seeded subsample is probed,
/// spread across tensors in proportion to their size with at least one
/// coordinate from each.
pub fn grad_check<L, G>(params: &Params, loss: L, grad: G, h: f64, max_coords: usize, seed: u64) -> Result<GradCheckReport>
where
    L: Fn(&Params) -> Result<f64>,
    G: Fn(&Params) -> Result<Vec<Tensor>>,
{
    let analytic = grad(params)?;
    if analytic.len() != params.len() {
        return Err(Error::shape("grad_check", params.len(), analytic.len()));
    }
    let coords = choose_coords(params, max_coords, seed);
    let mut work = params.clone();
    let mut report = GradCheckReport { max_rel_error: 0.0, probed: 0, worst: None };
    for (t, i) in coords {
        let id = work.ids().nth(t).expect("tensor index in range");
        let orig = work.get(id).data()[i];
        let mut central = |step: f64| -> Result<f64> {
            work.get_mut(id).data_mut()[i] = orig + step;
            let up = loss(&work)?;
            work.get_mut(id).data_mut()[i] = orig - step;
            let down = loss(&work)?;
            work.get_mut(id).data_mut()[i] = orig;
            Ok((up - down) / (2.0 * step))
        };
        let a = analytic[t].data()[i];
        let err = relative_error(a, central(h)?).min(relative_error(a, central(h / 10.0)?));
        report.probed += 1;
        if err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst = Some((work.name(id).to_string(), i));
        }
    }
    Ok(report)
}

fn choose_coords(params: &Params, max_coords: usize, seed: u64) -> Vec<(usize, usize)> {
    let sizes: Vec<usize> = params.iter().map(|(_, t)| t.numel()).collect();
    let total: usize = sizes.iter().sum();
    if total <= max_coords {
        return sizes.iter().enumerate().flat_map(|(t, &n)| (0..n).map(move |i| (t, i))).collect();
    }
    let mut rng = rng::stream(seed, Domain::Misc, 0);
    let mut out = Vec::new();
    for (t, &n) in sizes.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let quota = ((max_coords as f64 * n as f64 / total as f64).ceil() as usize).clamp(1, n);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        out.extend(idx.into_iter().take(quota).map(|i| (t, i)));
    }
    out
}
