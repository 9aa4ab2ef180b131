//! Row-sampled sketch producing the right factor `U` (`k x m`, orthonormal rows).
//!
//! Classic Frieze-Kannan-Vempala: sample `s` rows by the estimated weights and
//! rescale them into `W`, sample `t` columns of `W` by squared norm into `W'`,
//! take the top-`k` left singular vectors `u_i` of `W'` and lift them back
//! through `W` as `u_i^T W`. Only the `s` sampled rows are read from the oracle.

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::Stage;
use crate::linalg::{orthonormal_rows, small_svd};
use crate::norm_sampling::{sample_rows, RowWeights};
use crate::oracle::DistanceOracle;

pub const DEFAULT_ROW_OVERSAMPLE: f64 = 4.0;
pub const DEFAULT_COL_OVERSAMPLE: f64 = 4.0;

/// Target rank, accuracy and sample-size constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SketchConfig {
    pub k: usize,
    pub eps: f64,
    /// `c_r`: rows sampled are `ceil(c_r * k / eps)`.
    pub row_oversample: f64,
    /// `c_c`: columns sampled (in the sketch and in the regression) are `ceil(c_c * k / eps)`.
    pub col_oversample: f64,
    /// Forces the row sample size, bypassing `c_r`. Used to study starved budgets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_samples: Option<usize>,
}

impl SketchConfig {
    pub fn new(k: usize, eps: f64) -> Self {
        Self {
            k,
            eps,
            row_oversample: DEFAULT_ROW_OVERSAMPLE,
            col_oversample: DEFAULT_COL_OVERSAMPLE,
            row_samples: None,
        }
    }

    pub fn with_oversample(mut self, rows: f64, cols: f64) -> Self {
        self.row_oversample = rows;
        self.col_oversample = cols;
        self
    }

    pub fn with_row_samples(mut self, s: usize) -> Self {
        self.row_samples = Some(s);
        self
    }

    /// Row sample size `s`.
    pub fn rows(&self) -> usize {
        self.row_samples
            .unwrap_or_else(|| (self.row_oversample * self.k as f64 / self.eps).ceil() as usize)
    }

    /// Column sample size `t`.
    pub fn cols(&self) -> usize {
        (self.col_oversample * self.k as f64 / self.eps).ceil() as usize
    }

    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if self.k > n.min(m) {
            return Err(Error::invalid(format!("k = {} exceeds min(n, m) = {}", self.k, n.min(m))));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::invalid(format!("eps = {} outside (0, 1]", self.eps)));
        }
        if !(self.row_oversample >= 1.0 && self.col_oversample >= 1.0) {
            return Err(Error::invalid("oversampling constants must be at least 1"));
        }
        if self.row_samples == Some(0) {
            return Err(Error::invalid("row sample size must be at least 1"));
        }
        Ok(())
    }
}

/// `k x m` matrix with orthonormal rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RightFactor {
    pub u: DMatrix<f64>,
}

impl RightFactor {
    pub fn k(&self) -> usize {
        self.u.nrows()
    }

    pub fn m(&self) -> usize {
        self.u.ncols()
    }
}

/// Draws row indices, then column indices, from `rng`, and reads exactly `s * m` entries.
pub fn build_right_factor<R: Rng + ?Sized>(
    oracle: &DistanceOracle,
    weights: &RowWeights,
    cfg: &SketchConfig,
    rng: &mut R,
) -> Result<RightFactor> {
    let (n, m) = (oracle.n(), oracle.m());
    cfg.validate(n, m)?;
    if weights.len() != n {
        return Err(Error::Shape(format!("{} weights for {n} rows", weights.len())));
    }
    let (s, t) = (cfg.rows(), cfg.cols());
    let picks = sample_rows(weights, s, rng)?;

    let mut w = DMatrix::zeros(s, m);
    for (r, &i) in picks.iter().enumerate() {
        let p = weights.normalized[i];
        let scale = 1.0 / (s as f64 * p).sqrt();
        for (j, v) in oracle.row(Stage::Sketch, i).into_iter().enumerate() {
            w[(r, j)] = v * scale;
        }
    }

    let col_sq: Vec<f64> = (0..m).map(|j| w.column(j).norm_squared()).collect();
    let total: f64 = col_sq.iter().sum();
    if total == 0.0 {
        return Ok(RightFactor { u: orthonormal_rows(&[], cfg.k, m) });
    }
    let dist = WeightedIndex::new(&col_sq).map_err(|e| Error::invalid(format!("column weights: {e}")))?;
    let mut w_cols = DMatrix::zeros(s, t);
    for c in 0..t {
        let j = dist.sample(rng);
        let scale = 1.0 / (t as f64 * col_sq[j] / total).sqrt();
        w_cols.set_column(c, &(w.column(j) * scale));
    }

    let svd = small_svd(&w_cols)?;
    let top = svd.values.first().copied().unwrap_or(0.0);
    let candidates: Vec<Vec<f64>> = svd
        .values
        .iter()
        .enumerate()
        .take(cfg.k)
        .filter(|(_, &sv)| sv > top * 1e-12)
        .map(|(i, _)| (svd.left.column(i).transpose() * &w).iter().copied().collect())
        .collect();
    Ok(RightFactor { u: orthonormal_rows(&candidates, cfg.k, m) })
}
