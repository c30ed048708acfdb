//! Text formats for matrices and vectors.
//!
//! `ehrb v1`: header `ehrb v1 rows=<n> cols=<T>`, then `n` lines of exactly
//! `T` characters from {0,1}, each newline-terminated.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{BinaryMatrix, ProbMatrix};
use crate::error::{Error, Result};

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Parses `key=value` out of a header token.
pub(crate) fn header_field<T: std::str::FromStr>(
    token: Option<&str>,
    key: &str,
    path: &Path,
) -> Result<T> {
    token
        .and_then(|t| t.strip_prefix(key))
        .and_then(|t| t.strip_prefix('='))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| parse_err(path, 1, format!("malformed header: expected {key}=<value>")))
}

pub fn read_matrix_from(reader: impl BufRead, path: &Path) -> Result<BinaryMatrix> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?
        .map_err(|e| Error::io(path, e))?;
    let mut tok = header.split_whitespace();
    if tok.next() != Some("ehrb") || tok.next() != Some("v1") {
        return Err(parse_err(path, 1, "malformed header: expected `ehrb v1`"));
    }
    let rows: usize = header_field(tok.next(), "rows", path)?;
    let cols: usize = header_field(tok.next(), "cols", path)?;
    if tok.next().is_some() {
        return Err(parse_err(path, 1, "malformed header: trailing tokens"));
    }
    let mut m = BinaryMatrix::zeros(rows, cols);
    for i in 0..rows {
        let lineno = i + 2;
        let line = lines
            .next()
            .ok_or_else(|| parse_err(path, lineno, format!("expected {rows} rows, found {i}")))?
            .map_err(|e| Error::io(path, e))?;
        if line.len() != cols {
            return Err(parse_err(
                path,
                lineno,
                format!("row has {} characters, expected {cols}", line.len()),
            ));
        }
        for (j, b) in line.bytes().enumerate() {
            match b {
                b'0' => {}
                b'1' => m.set(i, j, true),
                other => {
                    return Err(parse_err(
                        path,
                        lineno,
                        format!("invalid character {:?} at column {j}", other as char),
                    ))
                }
            }
        }
    }
    if let Some(extra) = lines.next() {
        let extra = extra.map_err(|e| Error::io(path, e))?;
        if !extra.is_empty() {
            return Err(parse_err(path, rows + 2, "more rows than declared in header"));
        }
    }
    Ok(m)
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<BinaryMatrix> {
    let path = path.as_ref();
    read_matrix_from(open(path)?, path)
}

pub fn write_matrix_to(m: &BinaryMatrix, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "ehrb v1 rows={} cols={}", m.n_rows(), m.n_cols())?;
    let mut line = Vec::with_capacity(m.n_cols() + 1);
    for i in 0..m.n_rows() {
        line.clear();
        line.extend((0..m.n_cols()).map(|j| if m.get(i, j) { b'1' } else { b'0' }));
        line.push(b'\n');
        w.write_all(&line)?;
    }
    w.flush()
}

pub fn save_matrix(m: &BinaryMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_matrix_to(m, create(path)?).map_err(|e| Error::io(path, e))
}

/// One decimal per line.
pub fn load_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (k, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        out.push(
            s.parse()
                .map_err(|_| parse_err(path, k + 1, format!("not a number: {s:?}")))?,
        );
    }
    Ok(out)
}

pub fn save_vector(v: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    (|| {
        for x in v {
            writeln!(w, "{x}")?;
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

/// Comma-separated rows, 6-decimal fixed notation, no header.
pub fn save_prob_csv(m: &ProbMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    (|| {
        for i in 0..m.n_rows() {
            let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:.6}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

pub fn load_prob_csv(path: impl AsRef<Path>) -> Result<ProbMatrix> {
    let path = path.as_ref();
    let mut values = Vec::new();
    let mut n_cols = None;
    let mut n_rows = 0;
    for (k, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| parse_err(path, k + 1, "unparseable value"))?;
        match n_cols {
            None => n_cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(parse_err(path, k + 1, format!("row has {} values, expected {c}", row.len())))
            }
            _ => {}
        }
        values.extend(row);
        n_rows += 1;
    }
    ProbMatrix::new(n_rows, n_cols.unwrap_or(0), values)
}
