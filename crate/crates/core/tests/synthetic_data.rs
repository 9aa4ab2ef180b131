use std::sync::Arc;

use distmat_core::bench::synth_clusters;
use distmat_core::{DistanceOracle, MetricKind};
use nalgebra::SymmetricEigen;

/// Clustered data has a good rank-20 approximation. For a symmetric matrix the
/// singular values are the absolute eigenvalues.
#[test]
fn clusters_have_rank_twenty_structure() {
    let pts = synth_clusters(2000, 64, 20, 2024, 1.0).unwrap();
    let a = DistanceOracle::symmetric_points(Arc::new(pts), MetricKind::Euclidean).materialize().unwrap();
    let mut sq: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().map(|l| l * l).collect();
    sq.sort_by(|x, y| y.total_cmp(x));
    let total: f64 = sq.iter().sum();
    let tail: f64 = sq[20..].iter().sum();
    assert!(tail / total <= 0.2, "{}", tail / total);
}
