//! End-to-end rank-`k` approximation and exact evaluation at desk scale.

use std::collections::HashMap;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ledger::LedgerSnapshot;
use crate::linalg::{frobenius_sq, residual_sq, truncated_svd};
use crate::norm_sampling::{estimate_row_weights, estimate_row_weights_symmetric, RowWeights};
use crate::oracle::DistanceOracle;
use crate::regress::{fit_left_factor, Factors, LeftFactor};
use crate::sketch::{build_right_factor, RightFactor, SketchConfig};

/// How rows are weighted before the sketch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSampling {
    /// Anchor-based estimate (symmetric variant on symmetric oracles).
    Estimated,
    /// Uniform weights; no weight reads. Ablation baseline.
    Uniform,
}

/// Wall-clock seconds per stage, from a monotonic clock.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub weights: f64,
    pub sketch: f64,
    pub regress: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct Run {
    pub factors: Factors,
    pub times: StageTimes,
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Weights, sketch, regression. RNG consumption order: anchors, row samples,
/// sketch column samples, regression column samples.
pub fn run(oracle: &DistanceOracle, cfg: &SketchConfig, seed: u64, sampling: RowSampling) -> Result<Run> {
    cfg.validate(oracle.n(), oracle.m())?;
    let mut rng = rng_from_seed(seed);
    let before = oracle.ledger().snapshot();
    let t0 = Instant::now();

    let weights = match sampling {
        RowSampling::Estimated if oracle.is_symmetric() => estimate_row_weights_symmetric(oracle, &mut rng)?,
        RowSampling::Estimated => estimate_row_weights(oracle, &mut rng)?,
        RowSampling::Uniform => RowWeights::uniform(oracle.n()),
    };
    let t1 = Instant::now();
    let right = build_right_factor(oracle, &weights, cfg, &mut rng)?;
    let t2 = Instant::now();
    let left = fit_left_factor(oracle, &right, cfg, &mut rng)?;
    let t3 = Instant::now();

    let ledger = oracle.ledger().snapshot().since(&before);
    let times = StageTimes {
        weights: (t1 - t0).as_secs_f64(),
        sketch: (t2 - t1).as_secs_f64(),
        regress: (t3 - t2).as_secs_f64(),
        total: (t3 - t0).as_secs_f64(),
    };
    Ok(Run { factors: Factors::new(left, right, *cfg, seed, ledger)?, times })
}

pub fn low_rank_approx(oracle: &DistanceOracle, cfg: &SketchConfig, seed: u64) -> Result<Factors> {
    Ok(run(oracle, cfg, seed, RowSampling::Estimated)?.factors)
}

pub fn uniform_baseline(oracle: &DistanceOracle, cfg: &SketchConfig, seed: u64) -> Result<Factors> {
    Ok(run(oracle, cfg, seed, RowSampling::Uniform)?.factors)
}

/// Upper bound on algorithm reads: `(n + m)(1 + (c_r + c_c) k / eps)` with 5% slack for rounding.
pub fn read_budget(n: usize, m: usize, cfg: &SketchConfig) -> f64 {
    (n + m) as f64 * (1.0 + (cfg.row_oversample + cfg.col_oversample) * cfg.k as f64 / cfg.eps) * 1.05
}

/// Error figures of a run; the evaluation fields are `None` when the matrix was not materialized.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApproxReport {
    pub err_sq: Option<f64>,
    pub opt_sq: Option<f64>,
    pub fro_sq: Option<f64>,
    pub excess: Option<f64>,
    pub ledger: LedgerSnapshot,
    pub times: Option<StageTimes>,
    pub config: SketchConfig,
    pub seed: u64,
}

impl ApproxReport {
    /// Report without evaluation.
    pub fn unevaluated(factors: &Factors, times: Option<StageTimes>) -> Self {
        Self {
            err_sq: None,
            opt_sq: None,
            fro_sq: None,
            excess: None,
            ledger: factors.ledger,
            times,
            config: factors.config,
            seed: factors.seed,
        }
    }
}

/// Holds a materialized matrix and caches the optimal rank-`k` error per `k`.
#[derive(Debug)]
pub struct Evaluator {
    a: DMatrix<f64>,
    fro_sq: f64,
    opt: HashMap<usize, f64>,
}

impl Evaluator {
    /// Materializes the oracle; the reads land in `eval_reads`.
    pub fn new(oracle: &DistanceOracle) -> Result<Self> {
        Ok(Self::from_matrix(oracle.materialize()?))
    }

    pub fn from_matrix(a: DMatrix<f64>) -> Self {
        let fro_sq = frobenius_sq(&a);
        Self { a, fro_sq, opt: HashMap::new() }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn fro_sq(&self) -> f64 {
        self.fro_sq
    }

    /// Best rank-`k` factors by dense SVD.
    pub fn svd_factors(&self, k: usize) -> Result<(LeftFactor, RightFactor)> {
        let (v, u) = truncated_svd(&self.a, k)?;
        Ok((LeftFactor { v }, RightFactor { u }))
    }

    /// `||A - A_k||_F^2`, computed by the same residual routine as [`err_sq`](Self::err_sq).
    pub fn opt_sq(&mut self, k: usize) -> Result<f64> {
        if let Some(v) = self.opt.get(&k) {
            return Ok(*v);
        }
        let (v, u) = self.svd_factors(k)?;
        let opt = residual_sq(&self.a, &v.v, &u.u);
        self.opt.insert(k, opt);
        Ok(opt)
    }

    pub fn err_sq(&self, factors: &Factors) -> f64 {
        residual_sq(&self.a, factors.v(), factors.u())
    }

    /// `||A - A U^T U||_F^2`, the best error achievable with the given `U`.
    pub fn projection_err_sq(&self, u: &DMatrix<f64>) -> f64 {
        let proj = &self.a * u.transpose();
        residual_sq(&self.a, &proj, u)
    }

    pub fn report(&mut self, factors: &Factors, times: Option<StageTimes>) -> Result<ApproxReport> {
        let err = self.err_sq(factors);
        let opt = self.opt_sq(factors.config.k)?;
        let excess = if self.fro_sq > 0.0 { (err - opt) / self.fro_sq } else { 0.0 };
        Ok(ApproxReport {
            err_sq: Some(err),
            opt_sq: Some(opt),
            fro_sq: Some(self.fro_sq),
            excess: Some(excess),
            ..ApproxReport::unevaluated(factors, times)
        })
    }
}

/// Materializes the oracle and reports exact errors for `factors`.
pub fn evaluate(oracle: &DistanceOracle, factors: &Factors) -> Result<ApproxReport> {
    Evaluator::new(oracle)?.report(factors, None)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::ledger::Stage;
    use crate::metric::{MetricKind, PointSet};

    fn line(xs: &[f64]) -> DistanceOracle {
        let ps = PointSet::new(xs.iter().map(|&x| vec![x]).collect()).unwrap();
        DistanceOracle::symmetric_points(Arc::new(ps), MetricKind::Manhattan)
    }

    #[test]
    fn identical_points_zero_error() {
        let o = line(&[1.0; 6]);
        let f = low_rank_approx(&o, &SketchConfig::new(1, 0.5), 3).unwrap();
        assert_eq!(f.compose().unwrap(), DMatrix::zeros(6, 6));
        let r = evaluate(&o, &f).unwrap();
        assert_eq!(r.err_sq, Some(0.0));
        assert_eq!(r.excess, Some(0.0));
    }

    #[test]
    fn constant_matrix_exact_rank_one() {
        let o = DistanceOracle::from_matrix(DMatrix::from_element(7, 5, 1.5)).unwrap();
        let f = low_rank_approx(&o, &SketchConfig::new(1, 0.5), 0).unwrap();
        let r = evaluate(&o, &f).unwrap();
        assert!(r.err_sq.unwrap() <= 1e-9 * r.fro_sq.unwrap());
    }

    #[test]
    fn evaluate_edge_factors() {
        let o = line(&[0.0, 1.0, 3.0]);
        let mut ev = Evaluator::new(&o).unwrap();
        let (v, u) = ev.svd_factors(3).unwrap();
        let cfg = SketchConfig::new(3, 1.0);
        let exact = Factors::new(v, u.clone(), cfg, 0, LedgerSnapshot::default()).unwrap();
        let r = ev.report(&exact, None).unwrap();
        assert!(r.err_sq.unwrap() <= 1e-18, "{:?}", r.err_sq);
        assert!(r.excess.unwrap() <= 0.0);

        let zero = Factors::new(LeftFactor { v: DMatrix::zeros(3, 3) }, u, cfg, 0, LedgerSnapshot::default()).unwrap();
        let r = ev.report(&zero, None).unwrap();
        assert_eq!(r.err_sq, r.fro_sq);
        assert_eq!(ev.fro_sq(), 2.0 * (1.0 + 9.0 + 4.0));
    }

    #[test]
    fn ledger_accounting() {
        let o = line(&[0.0, 1.0, 3.0, 7.0, 8.0, 20.0, 21.0, 22.0]);
        let cfg = SketchConfig::new(2, 0.5);
        let f = low_rank_approx(&o, &cfg, 5).unwrap();
        let n = 8u64;
        assert_eq!(f.ledger.weights_reads, n);
        assert_eq!(f.ledger.sketch_reads, cfg.rows() as u64 * n);
        assert_eq!(f.ledger.regression_reads, cfg.cols() as u64 * n);
        assert_eq!(f.ledger.eval_reads, 0);

        let g = uniform_baseline(&o, &cfg, 5).unwrap();
        assert_eq!(g.ledger.weights_reads, 0);
        assert_eq!(g.ledger.algorithm(), f.ledger.algorithm() - n);
        assert_eq!(o.ledger().get(Stage::Eval), 0);
    }

    #[test]
    fn deterministic_per_seed() {
        let o = line(&[0.0, 2.0, 3.0, 7.0, 11.0, 12.0]);
        let cfg = SketchConfig::new(2, 0.5);
        let a = low_rank_approx(&o, &cfg, 42).unwrap();
        let b = low_rank_approx(&o, &cfg, 42).unwrap();
        assert_eq!(a.v(), b.v());
        assert_eq!(a.u(), b.u());
    }

    #[test]
    fn report_json_field_names() {
        let o = line(&[0.0, 1.0, 3.0]);
        let f = low_rank_approx(&o, &SketchConfig::new(1, 1.0), 0).unwrap();
        let r = evaluate(&o, &f).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        for key in ["err_sq", "opt_sq", "fro_sq", "excess", "ledger", "times", "config", "seed"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}
