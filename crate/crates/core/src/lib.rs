//! Low-rank approximation of distance matrices from a sublinear number of entries.
//!
//! The pipeline reads `O((n + m) k / eps)` entries of an `n x m` distance
//! matrix and returns factors `V` (`n x k`) and `U` (`k x m`, orthonormal
//! rows) with, with constant probability,
//!
//! ```text
//! ||A - V U||_F^2 <= ||A - A_k||_F^2 + eps ||A||_F^2
//! ```
//!
//! ```
//! use std::sync::Arc;
//! use distmat_core::{low_rank_approx, evaluate, DistanceOracle, MetricKind, PointSet, SketchConfig};
//!
//! let pts = PointSet::new((0..40).map(|i| vec![(i % 7) as f64, (i / 7) as f64]).collect()).unwrap();
//! let oracle = DistanceOracle::symmetric_points(Arc::new(pts), MetricKind::Euclidean);
//! let factors = low_rank_approx(&oracle, &SketchConfig::new(3, 0.5), 7).unwrap();
//! assert_eq!(factors.u().shape(), (3, 40));
//! let report = evaluate(&oracle, &factors).unwrap();
//! assert!(report.err_sq.unwrap() <= report.fro_sq.unwrap());
//! ```

pub mod bench;
pub mod error;
pub mod hardgen;
pub mod io;
pub mod ledger;
pub mod linalg;
pub mod metric;
pub mod norm_sampling;
pub mod oracle;
pub mod pipeline;
pub mod regress;
pub mod sketch;

pub use error::{Error, Result};
pub use hardgen::{HardInstance, HardKind, Majority};
pub use ledger::{LedgerSnapshot, QueryLedger, Stage};
pub use metric::{MetricKind, PointSet};
pub use norm_sampling::RowWeights;
pub use oracle::DistanceOracle;
pub use pipeline::{evaluate, low_rank_approx, read_budget, uniform_baseline, ApproxReport, Evaluator, StageTimes};
pub use regress::{Factors, LeftFactor};
pub use sketch::{RightFactor, SketchConfig};
