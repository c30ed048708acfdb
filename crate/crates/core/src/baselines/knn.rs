use crate::data::BinaryMatrix;
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone)]
pub struct KnnConfig {
    /// Neighbours consulted by the majority-vote variant.
    pub k: usize,
    /// Neighbours at Hamming distance `>= tau` are ignored.
    pub tau: u32,
    /// Reference rows.
    pub buffer: BinaryMatrix,
    /// Fill each zero by majority vote over the `k` nearest in-tolerance
    /// neighbours instead of copying the single nearest one.
    pub majority: bool,
}

impl KnnConfig {
    pub fn new(buffer: BinaryMatrix, tau: u32) -> Self {
        Self { k: 5, tau, buffer, majority: false }
    }
}

/// Index and distance of the closest buffer row; ties go to the lowest index.
pub fn nearest_neighbor(x: &BinaryMatrix, i: usize, buffer: &BinaryMatrix) -> Option<(usize, u32)> {
    let mut best: Option<(usize, u32)> = None;
    for j in 0..buffer.n_rows() {
        let d = x.hamming(i, buffer, j);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((j, d));
        }
    }
    best
}

fn k_nearest(x: &BinaryMatrix, i: usize, buffer: &BinaryMatrix, k: usize) -> Vec<(u32, usize)> {
    let mut all: Vec<(u32, usize)> = (0..buffer.n_rows()).map(|j| (x.hamming(i, buffer, j), j)).collect();
    let k = k.min(all.len());
    if k == 0 {
        return Vec::new();
    }
    all.select_nth_unstable(k - 1);
    all.truncate(k);
    all.sort_unstable();
    all
}

/// Hamming nearest-neighbour imputation: zeros are replaced by the
/// neighbour's values when the neighbour lies within distance `< tau`.
pub fn knn_impute(x_noisy: &BinaryMatrix, cfg: &KnnConfig) -> Result<BinaryMatrix> {
    let buffer = &cfg.buffer;
    if buffer.n_rows() == 0 {
        return Err(Error::InvalidArgument("knn buffer is empty".into()));
    }
    if buffer.n_cols() != x_noisy.n_cols() {
        return Err(Error::shape("knn_impute buffer columns", x_noisy.n_cols(), buffer.n_cols()));
    }
    if cfg.majority && cfg.k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let t = x_noisy.n_cols();
    let rows = par::map_range(x_noisy.n_rows(), |i| {
        let mut row = x_noisy.row_words(i).to_vec();
        if cfg.majority {
            let near: Vec<usize> =
                k_nearest(x_noisy, i, buffer, cfg.k).into_iter().filter(|&(d, _)| d < cfg.tau).map(|(_, j)| j).collect();
            if !near.is_empty() {
                for d in 0..t {
                    let votes = near.iter().filter(|&&j| buffer.get(j, d)).count();
                    if 2 * votes > near.len() {
                        row[d / 64] |= 1 << (d % 64);
                    }
                }
            }
        } else if let Some((j, dist)) = nearest_neighbor(x_noisy, i, buffer) {
            if dist < cfg.tau {
                for (w, b) in row.iter_mut().zip(buffer.row_words(j)) {
                    *w |= b;
                }
            }
        }
        row
    });
    Ok(BinaryMatrix::from_packed_rows(t, rows))
}

impl crate::Imputer for KnnConfig {
    fn impute(&self, noisy: &BinaryMatrix) -> Result<crate::ProbMatrix> {
        Ok(knn_impute(noisy, self)?.to_prob())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bm(rows: &[&str]) -> BinaryMatrix {
        BinaryMatrix::from_strs(rows).unwrap()
    }

    #[test]
    fn hand_enumerated_neighbour() {
        let buffer = bm(&["1100", "0011"]);
        let x = bm(&["1000"]);
        assert_eq!(nearest_neighbor(&x, 0, &buffer), Some((0, 1)));
        let out = knn_impute(&x, &KnnConfig::new(buffer, 2)).unwrap();
        assert_eq!(out, bm(&["1100"]));
    }

    #[test]
    fn zero_tolerance_changes_nothing() {
        let buffer = bm(&["1111", "0000"]);
        let x = bm(&["1000", "0110", "0000"]);
        assert_eq!(knn_impute(&x, &KnnConfig::new(buffer, 0)).unwrap(), x);
    }

    #[test]
    fn self_match_is_unchanged() {
        let buffer = bm(&["1010", "0110"]);
        let x = bm(&["0110"]);
        assert_eq!(knn_impute(&x, &KnnConfig::new(buffer, 1)).unwrap(), x);
    }

    #[test]
    fn ties_break_to_lowest_index() {
        let buffer = bm(&["1100", "1010"]);
        let x = bm(&["1000"]);
        assert_eq!(nearest_neighbor(&x, 0, &buffer), Some((0, 1)));
    }

    #[test]
    fn majority_vote_variant() {
        let buffer = bm(&["1100", "1110", "1011", "0001"]);
        let x = bm(&["1000"]);
        let mut cfg = KnnConfig::new(buffer, 3);
        cfg.majority = true;
        cfg.k = 3;
        // Nearest three are rows 0, 1, 2; columns 1 and 2 get two votes each.
        assert_eq!(knn_impute(&x, &cfg).unwrap(), bm(&["1110"]));
    }

    #[test]
    fn errors() {
        let x = bm(&["10"]);
        assert!(knn_impute(&x, &KnnConfig::new(BinaryMatrix::zeros(0, 2), 1)).is_err());
        assert!(knn_impute(&x, &KnnConfig::new(BinaryMatrix::zeros(1, 3), 1)).is_err());
    }

    fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = BinaryMatrix> {
        proptest::collection::vec(proptest::collection::vec(0u8..=1, cols), rows)
            .prop_map(|r| BinaryMatrix::from_rows(&r).unwrap())
    }

    proptest! {
        #[test]
        fn output_dominates_input(x in matrix(8, 70), buf in matrix(5, 70), tau in 0u32..80, majority: bool) {
            let mut cfg = KnnConfig::new(buf, tau);
            cfg.majority = majority;
            let out = knn_impute(&x, &cfg).unwrap();
            prop_assert!(x.is_subset_of(&out));
        }

        #[test]
        fn hamming_is_a_metric(m in matrix(3, 70)) {
            prop_assert_eq!(m.hamming(0, &m, 0), 0);
            prop_assert_eq!(m.hamming(0, &m, 1), m.hamming(1, &m, 0));
            prop_assert!(m.hamming(0, &m, 2) <= m.hamming(0, &m, 1) + m.hamming(1, &m, 2));
        }
    }
}
