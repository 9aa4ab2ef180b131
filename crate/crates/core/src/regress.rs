//! Left factor `V` by column-sampled least squares against a fixed `U`.
//!
//! For row-orthonormal `U` the column leverage scores are exactly
//! `q_j = ||U[:, j]||^2 / k`. One set of `t` columns is drawn from `q` and
//! shared by every row; each row of `V` solves the rescaled `k x t` system
//! `min_x ||A_S[i, :] D - x U_S D||` with the pseudo-inverse.

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::ledger::{LedgerSnapshot, Stage};
use crate::linalg::pseudo_inverse;
use crate::oracle::{DistanceOracle, DEFAULT_MATERIALIZE_CAP};
use crate::sketch::{RightFactor, SketchConfig};

/// `n x k` left factor.
#[derive(Debug, Clone, PartialEq)]
pub struct LeftFactor {
    pub v: DMatrix<f64>,
}

/// Output of the pipeline: `A ~ V U`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factors {
    pub left: LeftFactor,
    pub right: RightFactor,
    pub config: SketchConfig,
    pub seed: u64,
    pub ledger: LedgerSnapshot,
}

impl Factors {
    pub fn new(left: LeftFactor, right: RightFactor, config: SketchConfig, seed: u64, ledger: LedgerSnapshot) -> Result<Self> {
        if left.v.ncols() != right.u.nrows() {
            return Err(Error::Shape(format!(
                "V is {}x{} but U is {}x{}",
                left.v.nrows(),
                left.v.ncols(),
                right.u.nrows(),
                right.u.ncols()
            )));
        }
        Ok(Self { left, right, config, seed, ledger })
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.left.v
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.right.u
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.left.v.nrows(), self.right.u.ncols())
    }

    /// Dense `V U`, subject to the default materialization cap.
    pub fn compose(&self) -> Result<DMatrix<f64>> {
        compose(&self.left, &self.right, DEFAULT_MATERIALIZE_CAP)
    }
}

pub const PINV_RCOND: f64 = 1e-12;

/// Draws `t` columns from `rng` and reads exactly `n * t` entries.
pub fn fit_left_factor<R: Rng + ?Sized>(
    oracle: &DistanceOracle,
    right: &RightFactor,
    cfg: &SketchConfig,
    rng: &mut R,
) -> Result<LeftFactor> {
    let (n, m) = (oracle.n(), oracle.m());
    let u = &right.u;
    if u.ncols() != m {
        return Err(Error::Shape(format!("U has {} columns, oracle has {m}", u.ncols())));
    }
    let k = u.nrows();
    let t = cfg.cols();
    if t == 0 {
        return Err(Error::invalid("column sample size must be at least 1"));
    }
    let lev: Vec<f64> = (0..m).map(|j| u.column(j).norm_squared() / k as f64).collect();
    let dist = WeightedIndex::new(&lev).map_err(|e| Error::invalid(format!("leverage scores: {e}")))?;
    let picks: Vec<usize> = (0..t).map(|_| dist.sample(rng)).collect();
    let total: f64 = lev.iter().sum();
    let scales: Vec<f64> = picks.iter().map(|&j| 1.0 / (t as f64 * lev[j] / total).sqrt()).collect();

    let mut us = DMatrix::zeros(k, t);
    let mut a_s = DMatrix::zeros(n, t);
    for (c, (&j, &d)) in picks.iter().zip(&scales).enumerate() {
        us.set_column(c, &(u.column(j) * d));
        for (i, v) in oracle.column(Stage::Regression, j).into_iter().enumerate() {
            a_s[(i, c)] = v * d;
        }
    }
    let pinv = pseudo_inverse(&us, PINV_RCOND)?;
    Ok(LeftFactor { v: a_s * pinv })
}

/// Dense `V U`; errors if `n * m` exceeds `cap`.
pub fn compose(left: &LeftFactor, right: &RightFactor, cap: usize) -> Result<DMatrix<f64>> {
    let (n, m) = (left.v.nrows(), right.u.ncols());
    if left.v.ncols() != right.u.nrows() {
        return Err(Error::Shape(format!("V has {} columns, U has {} rows", left.v.ncols(), right.u.nrows())));
    }
    if n.saturating_mul(m) > cap {
        return Err(Error::CapExceeded { rows: n, cols: m, cap });
    }
    Ok(&left.v * &right.u)
}
