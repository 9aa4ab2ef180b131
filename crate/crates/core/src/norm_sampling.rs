//! One-sided row-norm estimation for distance matrices.
//!
//! From a single anchor row `i*` and anchor column `j*` (`n + m` reads), each
//! row gets the weight
//!
//! ```text
//! raw[i] = A[i][j*]^2 + A[i*][j*]^2 + (1/m) * sum_j A[i*][j]^2
//! ```
//!
//! By the squared triangle inequality `d(x,y)^2 <= 2 (d(x,z)^2 + d(z,y)^2)`
//! applied twice, `||A_i||^2 <= 4 m raw[i]` for every row and every choice of
//! anchors, while `E[sum raw] = (3/m) ||A||_F^2`. Normalizing `raw` therefore
//! gives a distribution that never under-samples a heavy row by more than a
//! constant factor (with constant probability over the anchors).
//!
//! For symmetric matrices only `i*` is needed:
//! `raw[i] = A[i*][i]^2 + (1/n) sum_j A[i*][j]^2`, with `n` reads, the bound
//! `||A_i||^2 <= 2 n raw[i]`, and `E[sum raw] = (2/n) ||A||_F^2`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::Stage;
use crate::oracle::DistanceOracle;

/// Unnormalized and normalized row sampling weights plus the anchors used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowWeights {
    pub anchor_row: Option<usize>,
    /// `None` for the symmetric estimator, which needs no column anchor.
    pub anchor_col: Option<usize>,
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub reads_used: u64,
}

impl RowWeights {
    /// Normalizes `raw`; an all-zero vector falls back to uniform.
    fn from_raw(anchor_row: Option<usize>, anchor_col: Option<usize>, raw: Vec<f64>, reads_used: u64) -> Self {
        let total: f64 = raw.iter().sum();
        let normalized = if total > 0.0 {
            raw.iter().map(|r| r / total).collect()
        } else {
            vec![1.0 / raw.len() as f64; raw.len()]
        };
        Self { anchor_row, anchor_col, raw, normalized, reads_used }
    }

    /// Uniform weights over `n` rows, no reads.
    pub fn uniform(n: usize) -> Self {
        Self::from_raw(None, None, vec![1.0; n], 0)
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }
}

/// Draws `i*` then `j*` uniformly and estimates the row weights.
pub fn estimate_row_weights<R: Rng + ?Sized>(oracle: &DistanceOracle, rng: &mut R) -> Result<RowWeights> {
    let anchor_row = rng.random_range(0..oracle.n());
    let anchor_col = rng.random_range(0..oracle.m());
    estimate_row_weights_at(oracle, anchor_row, anchor_col)
}

/// Row weights from fixed anchors. Reads row `i*` and column `j*`: `n + m` entries.
pub fn estimate_row_weights_at(oracle: &DistanceOracle, anchor_row: usize, anchor_col: usize) -> Result<RowWeights> {
    let (n, m) = (oracle.n(), oracle.m());
    if anchor_row >= n || anchor_col >= m {
        return Err(Error::invalid(format!("anchor ({anchor_row}, {anchor_col}) outside {n}x{m}")));
    }
    let anchor = oracle.row(Stage::Weights, anchor_row);
    let col = oracle.column(Stage::Weights, anchor_col);
    let shared = anchor[anchor_col] * anchor[anchor_col];
    let mean_sq = anchor.iter().map(|v| v * v).sum::<f64>() / m as f64;
    let raw = col.iter().map(|v| v * v + shared + mean_sq).collect();
    Ok(RowWeights::from_raw(Some(anchor_row), Some(anchor_col), raw, (n + m) as u64))
}

/// Symmetric estimator: draws `i*` uniformly.
pub fn estimate_row_weights_symmetric<R: Rng + ?Sized>(oracle: &DistanceOracle, rng: &mut R) -> Result<RowWeights> {
    if !oracle.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let anchor = rng.random_range(0..oracle.n());
    estimate_row_weights_symmetric_at(oracle, anchor)
}

/// Symmetric estimator from a fixed anchor. Reads row `i*` only: `n` entries.
pub fn estimate_row_weights_symmetric_at(oracle: &DistanceOracle, anchor_row: usize) -> Result<RowWeights> {
    if !oracle.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let n = oracle.n();
    if anchor_row >= n {
        return Err(Error::invalid(format!("anchor {anchor_row} outside {n} rows")));
    }
    let anchor = oracle.row(Stage::Weights, anchor_row);
    let mean_sq = anchor.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let raw = anchor.iter().map(|v| v * v + mean_sq).collect();
    Ok(RowWeights::from_raw(Some(anchor_row), None, raw, n as u64))
}

/// `s` i.i.d. row indices drawn from `weights.normalized`.
pub fn sample_rows<R: Rng + ?Sized>(weights: &RowWeights, s: usize, rng: &mut R) -> Result<Vec<usize>> {
    if s == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    let dist = WeightedIndex::new(&weights.normalized).map_err(|e| Error::invalid(format!("row weights: {e}")))?;
    Ok((0..s).map(|_| dist.sample(rng)).collect())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::metric::{MetricKind, PointSet};

    fn line(xs: &[f64]) -> DistanceOracle {
        let ps = PointSet::new(xs.iter().map(|&x| vec![x]).collect()).unwrap();
        DistanceOracle::symmetric_points(Arc::new(ps), MetricKind::Manhattan)
    }

    fn close(a: &[f64], b: &[f64]) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-12, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn line_example_bipartite_formula() {
        let o = line(&[0.0, 1.0, 3.0]);
        let w = estimate_row_weights_at(&o, 0, 0).unwrap();
        let mean = 10.0 / 3.0;
        close(&w.raw, &[mean, 1.0 + mean, 9.0 + mean]);
        // row 2: ||A_2||^2 = 9 + 4 = 13 <= 4 * 3 * raw[2]
        assert!(13.0 <= 4.0 * 3.0 * w.raw[2]);
        assert_eq!(w.reads_used, 6);
        assert_eq!(o.ledger().get(Stage::Weights), 6);
    }

    #[test]
    fn line_example_symmetric_formula() {
        let o = line(&[0.0, 1.0, 3.0]);
        let w = estimate_row_weights_symmetric_at(&o, 0).unwrap();
        let mean = 10.0 / 3.0;
        close(&w.raw, &[mean, 1.0 + mean, 9.0 + mean]);
        assert_eq!(w.reads_used, 3);
        assert_eq!(o.ledger().get(Stage::Weights), 3);

        let two = line(&[0.0, 1.0]);
        let w = estimate_row_weights_symmetric_at(&two, 0).unwrap();
        close(&w.raw, &[0.5, 1.5]);
        close(&w.normalized, &[0.25, 0.75]);
    }

    #[test]
    fn constant_matrix_gives_uniform() {
        let o = DistanceOracle::from_matrix(DMatrix::from_element(5, 4, 2.0)).unwrap();
        let w = estimate_row_weights_at(&o, 3, 1).unwrap();
        close(&w.raw, &[12.0; 5]);
        close(&w.normalized, &[0.2; 5]);
    }

    #[test]
    fn single_row() {
        let o = DistanceOracle::from_matrix(DMatrix::from_element(1, 3, 1.0)).unwrap();
        let w = estimate_row_weights(&o, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(w.normalized, vec![1.0]);
    }

    #[test]
    fn zero_matrix_falls_back_to_uniform() {
        let o = line(&[4.0; 4]);
        let w = estimate_row_weights_symmetric_at(&o, 2).unwrap();
        assert_eq!(w.raw, vec![0.0; 4]);
        assert_eq!(w.normalized, vec![0.25; 4]);
    }

    #[test]
    fn symmetric_estimator_rejects_bipartite() {
        let o = DistanceOracle::from_matrix(DMatrix::from_element(2, 2, 1.0)).unwrap();
        assert!(matches!(
            estimate_row_weights_symmetric(&o, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::NotSymmetric)
        ));
    }

    #[test]
    fn point_mass_sampling() {
        let mut w = RowWeights::uniform(5);
        w.normalized = vec![1.0, 0.0, 0.0, 0.0, 0.0];
        let s = sample_rows(&w, 200, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(s.iter().all(|&i| i == 0));
        assert!(sample_rows(&w, 0, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }

    #[test]
    fn uniform_sampling_frequencies() {
        let w = RowWeights::uniform(4);
        let draws = sample_rows(&w, 100_000, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let mut counts = [0usize; 4];
        for d in draws {
            counts[d] += 1;
        }
        // multinomial sd of each frequency is sqrt(0.25*0.75/1e5) ~ 0.0014; 1.5% is > 10 sd
        for c in counts {
            assert!((c as f64 / 1e5 - 0.25).abs() < 0.015);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let w = RowWeights::from_raw(None, None, vec![1.0, 2.0, 3.0, 4.0], 0);
        let a = sample_rows(&w, 50, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = sample_rows(&w, 50, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }
}
