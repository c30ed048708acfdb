//! Binary record matrices, probability matrices and the corruption
//! procedures that turn clean records into noisy ones.

mod generate;
pub mod io;
mod noise;

pub use generate::{sample_clean, AndRule, GeneratorSpec};
pub use noise::{corrupt, or_merge, prevalence_match_mask, split_rows, NoiseSpec, Splits};

use crate::error::{Error, Result};

const WORD: usize = 64;

/// Row-major, bit-packed `n_rows × n_cols` matrix of {0,1} indicators.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMatrix {
    n_rows: usize,
    n_cols: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl std::fmt::Debug for BinaryMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "BinaryMatrix {}x{}", self.n_rows, self.n_cols)?;
        for i in 0..self.n_rows.min(16) {
            let row: String = (0..self.n_cols)
                .map(|j| if self.get(i, j) { '1' } else { '0' })
                .collect();
            writeln!(f, "  {row}")?;
        }
        Ok(())
    }
}

impl BinaryMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        let words_per_row = n_cols.div_ceil(WORD);
        Self {
            n_rows,
            n_cols,
            words_per_row,
            bits: vec![0; n_rows * words_per_row],
        }
    }

    pub fn ones(n_rows: usize, n_cols: usize) -> Self {
        let mut m = Self::zeros(n_rows, n_cols);
        for i in 0..n_rows {
            for j in 0..n_cols {
                m.set(i, j, true);
            }
        }
        m
    }

    /// Builds a matrix from rows of 0/1 bytes. Any other byte is rejected.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::zeros(rows.len(), n_cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n_cols {
                return Err(Error::shape("BinaryMatrix::from_rows", n_cols, row.len()));
            }
            for (j, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => m.set(i, j, true),
                    other => {
                        return Err(Error::InvalidArgument(format!(
                            "entry ({i},{j}) = {other} is not binary"
                        )))
                    }
                }
            }
        }
        Ok(m)
    }

    /// Parses rows written as strings of '0'/'1' (test convenience).
    pub fn from_strs(rows: &[&str]) -> Result<Self> {
        let bytes: Vec<Vec<u8>> = rows
            .iter()
            .map(|r| r.bytes().map(|b| b.wrapping_sub(b'0')).collect())
            .collect();
        Self::from_rows(&bytes)
    }

    /// Assembles a matrix from rows already packed into words.
    pub(crate) fn from_packed_rows(n_cols: usize, rows: Vec<Vec<u64>>) -> Self {
        let mut m = Self::zeros(rows.len(), n_cols);
        for (i, r) in rows.into_iter().enumerate() {
            m.row_words_mut(i).copy_from_slice(&r);
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        debug_assert!(i < self.n_rows && j < self.n_cols);
        let w = self.bits[i * self.words_per_row + j / WORD];
        (w >> (j % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        debug_assert!(i < self.n_rows && j < self.n_cols);
        let w = &mut self.bits[i * self.words_per_row + j / WORD];
        let mask = 1u64 << (j % WORD);
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    pub fn row_words(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words_per_row..(i + 1) * self.words_per_row]
    }

    pub(crate) fn row_words_mut(&mut self, i: usize) -> &mut [u64] {
        &mut self.bits[i * self.words_per_row..(i + 1) * self.words_per_row]
    }

    /// Row `i` as 0/1 bytes.
    pub fn row(&self, i: usize) -> Vec<u8> {
        (0..self.n_cols).map(|j| self.get(i, j) as u8).collect()
    }

    /// Writes row `i` as 0.0/1.0 into `out`.
    pub fn row_into_f64(&self, i: usize, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate().take(self.n_cols) {
            *o = if self.get(i, j) { 1.0 } else { 0.0 };
        }
    }

    /// Rows `rows` as a dense row-major 0/1 buffer.
    pub fn gather_f64(&self, rows: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; rows.len() * self.n_cols];
        for (k, &i) in rows.iter().enumerate() {
            self.row_into_f64(i, &mut out[k * self.n_cols..(k + 1) * self.n_cols]);
        }
        out
    }

    /// Number of ones in each column.
    pub fn column_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_cols];
        for i in 0..self.n_rows {
            for (wi, &w) in self.row_words(i).iter().enumerate() {
                let mut w = w;
                while w != 0 {
                    let b = w.trailing_zeros() as usize;
                    counts[wi * WORD + b] += 1;
                    w &= w - 1;
                }
            }
        }
        counts
    }

    /// Number of ones in each row.
    pub fn row_counts(&self) -> Vec<usize> {
        (0..self.n_rows)
            .map(|i| self.row_words(i).iter().map(|w| w.count_ones() as usize).sum())
            .collect()
    }

    /// Fraction of ones per column (count / n_rows). Zero for an empty matrix.
    pub fn column_prevalence(&self) -> Vec<f64> {
        let n = self.n_rows;
        self.column_counts()
            .into_iter()
            .map(|c| if n == 0 { 0.0 } else { c as f64 / n as f64 })
            .collect()
    }

    /// Fraction of ones per row (count / n_cols).
    pub fn row_prevalence(&self) -> Vec<f64> {
        let t = self.n_cols;
        self.row_counts()
            .into_iter()
            .map(|c| if t == 0 { 0.0 } else { c as f64 / t as f64 })
            .collect()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// `true` when every entry of `self` is ≤ the matching entry of `other`.
    pub fn is_subset_of(&self, other: &BinaryMatrix) -> bool {
        self.shape() == other.shape()
            && self.bits.iter().zip(&other.bits).all(|(a, b)| a & !b == 0)
    }

    /// Hamming distance between row `i` of `self` and row `j` of `other`.
    #[inline]
    pub fn hamming(&self, i: usize, other: &BinaryMatrix, j: usize) -> u32 {
        self.row_words(i)
            .iter()
            .zip(other.row_words(j))
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    pub fn select_rows(&self, rows: &[usize]) -> BinaryMatrix {
        let mut m = BinaryMatrix::zeros(rows.len(), self.n_cols);
        for (k, &i) in rows.iter().enumerate() {
            m.row_words_mut(k).copy_from_slice(self.row_words(i));
        }
        m
    }

    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> BinaryMatrix {
        let rows: Vec<usize> = range.collect();
        self.select_rows(&rows)
    }

    /// Copy with column `j` set to zero in every row.
    pub fn with_column_cleared(&self, j: usize) -> BinaryMatrix {
        let mut m = self.clone();
        for i in 0..m.n_rows {
            m.set(i, j, false);
        }
        m
    }

    /// Dense 0.0/1.0 copy.
    pub fn to_prob(&self) -> ProbMatrix {
        let rows: Vec<usize> = (0..self.n_rows).collect();
        ProbMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            values: self.gather_f64(&rows),
        }
    }
}

/// Row-major `n_rows × n_cols` matrix of scores in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl ProbMatrix {
    pub fn new(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_rows * n_cols {
            return Err(Error::shape("ProbMatrix::new", n_rows * n_cols, values.len()));
        }
        Ok(Self {
            n_rows,
            n_cols,
            values,
        })
    }

    pub fn filled(n_rows: usize, n_cols: usize, value: f64) -> Self {
        Self {
            n_rows,
            n_cols,
            values: vec![value; n_rows * n_cols],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n_cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    /// Sets every position where `x` is 1 to exactly 1.0.
    pub fn preserve_observed(&mut self, x: &BinaryMatrix) {
        debug_assert_eq!(self.shape(), x.shape());
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                if x.get(i, j) {
                    self.values[i * self.n_cols + j] = 1.0;
                }
            }
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> ProbMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.n_cols);
        for &i in rows {
            values.extend_from_slice(self.row(i));
        }
        ProbMatrix {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            values,
        }
    }
}
