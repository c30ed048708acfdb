//! Dense row-major linear algebra: GEMM, thin SVD and symmetric eigenvalues.

use crate::error::{Error, Result};

/// `c = alpha · a · b + beta · c` for strided operands. Strides are in
/// elements; transposition is expressed by swapping row and column strides.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let span = |rows: usize, cols: usize, rs: usize, cs: usize| {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows - 1) * rs + (cols - 1) * cs + 1
        }
    };
    assert!(a.len() >= span(m, k, rsa, csa), "gemm: lhs too short");
    assert!(b.len() >= span(k, n, rsb, csb), "gemm: rhs too short");
    assert!(c.len() >= span(m, n, rsc, csc), "gemm: output too short");
    // SAFETY: the asserts above bound every index the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// `a (m×k) · b (k×n)`.
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    gemm(m, k, n, 1.0, a, (k, 1), b, (n, 1), 0.0, &mut c, (n, 1));
    c
}

/// Thin SVD `a = u · diag(s) · vᵀ` of a row-major `m × n` matrix, with
/// `r = min(m, n)` singular values in descending order. `u` is `m × r`,
/// `v` is `n × r`, both row-major.
#[derive(Debug, Clone)]
pub struct Svd {
    pub m: usize,
    pub n: usize,
    pub u: Vec<f64>,
    pub s: Vec<f64>,
    pub v: Vec<f64>,
}

impl Svd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `Σ_{j<r} s_j · u_j · v_jᵀ` using the leading `r` triplets.
    pub fn reconstruct(&self, r: usize) -> Vec<f64> {
        let r = r.min(self.rank());
        let k = self.rank();
        let mut us = vec![0.0; self.m * r];
        for i in 0..self.m {
            for j in 0..r {
                us[i * r + j] = self.u[i * k + j] * self.s[j];
            }
        }
        let mut out = vec![0.0; self.m * self.n];
        gemm(self.m, r, self.n, 1.0, &us, (r, 1), &self.v, (1, k), 0.0, &mut out, (self.n, 1));
        out
    }
}

const MAX_SWEEPS: usize = 80;

/// One-sided Jacobi on the columns of a square-or-tall column-major block.
/// Returns `(w, v)` with `w = a·v` having mutually orthogonal columns.
fn jacobi_columns(mut w: Vec<f64>, rows: usize, cols: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut v = vec![0.0; cols * cols];
    for j in 0..cols {
        v[j * cols + j] = 1.0;
    }
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (cp, cq) = (&w[p * rows..(p + 1) * rows], &w[q * rows..(q + 1) * rows]);
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for (a, b) in cp.iter().zip(cq) {
                    alpha += a * a;
                    beta += b * b;
                    gamma += a * b;
                }
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, rows, p, q, c, s);
                rotate(&mut v, cols, p, q, c, s);
            }
        }
        if !rotated {
            return Ok((w, v));
        }
    }
    Err(Error::SvdNoConvergence { iterations: MAX_SWEEPS })
}

fn rotate(buf: &mut [f64], len: usize, p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = buf.split_at_mut(q * len);
    let cp = &mut lo[p * len..(p + 1) * len];
    let cq = &mut hi[..len];
    for (a, b) in cp.iter_mut().zip(cq.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Householder QR of a tall column-major `rows × cols` block. Returns the
/// reflectors (column-major, `rows × cols`, unit-leading) with their taus,
/// and the upper-triangular `R` column-major `cols × cols`.
fn householder_qr(mut a: Vec<f64>, rows: usize, cols: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut taus = vec![0.0; cols];
    for j in 0..cols {
        let col = &mut a[j * rows..(j + 1) * rows];
        let norm = col[j..].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if col[j] > 0.0 { -norm } else { norm };
        let v0 = col[j] - alpha;
        for x in col[j + 1..].iter_mut() {
            *x /= v0;
        }
        col[j] = alpha;
        let tau = -v0 / alpha;
        taus[j] = tau;
        // apply H = I - tau·v·vᵀ (v = [1, col[j+1..]]) to the remaining columns
        let (head, tail) = a.split_at_mut((j + 1) * rows);
        let v = &head[j * rows..(j + 1) * rows];
        for k in 0..cols - j - 1 {
            let c = &mut tail[k * rows..(k + 1) * rows];
            let mut dot = c[j];
            for i in j + 1..rows {
                dot += v[i] * c[i];
            }
            let f = tau * dot;
            c[j] -= f;
            for i in j + 1..rows {
                c[i] -= f * v[i];
            }
        }
    }
    let mut r = vec![0.0; cols * cols];
    for j in 0..cols {
        for i in 0..=j {
            r[j * cols + i] = a[j * rows + i];
        }
    }
    (a, taus, r)
}

/// `Q · x` for a column-major `rows × cols` block whose top `cols` rows are
/// `x_top` and the rest zero.
fn apply_q(reflectors: &[f64], taus: &[f64], rows: usize, cols: usize, x_top: &[f64], width: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * width];
    for k in 0..width {
        out[k * rows..k * rows + cols].copy_from_slice(&x_top[k * cols..(k + 1) * cols]);
    }
    for j in (0..cols).rev() {
        let tau = taus[j];
        if tau == 0.0 {
            continue;
        }
        let v = &reflectors[j * rows..(j + 1) * rows];
        for k in 0..width {
            let c = &mut out[k * rows..(k + 1) * rows];
            let mut dot = c[j];
            for i in j + 1..rows {
                dot += v[i] * c[i];
            }
            let f = tau * dot;
            c[j] -= f;
            for i in j + 1..rows {
                c[i] -= f * v[i];
            }
        }
    }
    out
}

/// Thin SVD of a row-major `m × n` matrix.
pub fn svd(a: &[f64], m: usize, n: usize) -> Result<Svd> {
    if a.len() != m * n {
        return Err(Error::shape("svd", m * n, a.len()));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { op: "svd" });
    }
    if m < n {
        let mut at = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                at[j * m + i] = a[i * n + j];
            }
        }
        let t = svd(&at, n, m)?;
        return Ok(Svd { m, n, u: t.v, s: t.s, v: t.u });
    }
    // column-major copy
    let mut cm = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            cm[j * m + i] = a[i * n + j];
        }
    }
    let (reflectors, taus, r) = householder_qr(cm, m, n);
    let (w, v) = jacobi_columns(r, n, n)?;
    let mut s: Vec<f64> = (0..n)
        .map(|j| w[j * n..(j + 1) * n].iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    // left vectors of R, column-major n × n
    let mut ur = vec![0.0; n * n];
    for j in 0..n {
        if s[j] > 0.0 {
            for i in 0..n {
                ur[j * n + i] = w[j * n + i] / s[j];
            }
        }
    }
    let u_cm = apply_q(&reflectors, &taus, m, n, &ur, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| s[y].total_cmp(&s[x]).then(x.cmp(&y)));
    let mut u = vec![0.0; m * n];
    let mut vv = vec![0.0; n * n];
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..m {
            u[i * n + dst] = u_cm[src * m + i];
        }
        for i in 0..n {
            vv[i * n + dst] = v[src * n + i];
        }
    }
    s = order.iter().map(|&j| s[j]).collect();
    Ok(Svd { m, n, u, s, v: vv })
}

/// Eigenvalues of a symmetric row-major `n × n` matrix, descending
/// (cyclic Jacobi).
pub fn symmetric_eigenvalues(a: &[f64], n: usize) -> Result<Vec<f64>> {
    if a.len() != n * n {
        return Err(Error::shape("symmetric_eigenvalues", n * n, a.len()));
    }
    let mut m = a.to_vec();
    let off = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[i * n + j] * m[i * n + j];
                }
            }
        }
        s
    };
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>();
    let mut converged = scale == 0.0;
    for _ in 0..MAX_SWEEPS {
        if converged || off(&m) <= 1e-30 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
            }
        }
    }
    if !converged && off(&m) > 1e-20 * scale {
        return Err(Error::SvdNoConvergence { iterations: MAX_SWEEPS });
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    Ok(ev)
}
