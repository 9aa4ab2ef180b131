//! Metered, lazily evaluated view of a distance matrix.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ledger::{QueryLedger, Stage};
use crate::metric::{MetricKind, PointSet};

pub const DEFAULT_MATERIALIZE_CAP: usize = 100_000_000;

#[derive(Debug, Clone)]
enum Backend {
    Points { left: Arc<PointSet>, right: Arc<PointSet>, metric: MetricKind },
    Dense(Arc<DMatrix<f64>>),
}

/// Distance matrix `A[i][j] = d(x_i, y_j)` behind a read counter.
///
/// Every entry read is charged to the [`QueryLedger`] exactly once, whichever
/// backend serves it.
#[derive(Debug)]
pub struct DistanceOracle {
    backend: Backend,
    symmetric: bool,
    ledger: QueryLedger,
    cap: usize,
}

impl DistanceOracle {
    /// Oracle over two point sets. Symmetric when both sides are the same set.
    pub fn from_points(left: Arc<PointSet>, right: Arc<PointSet>, metric: MetricKind) -> Result<Self> {
        if left.dim() != right.dim() {
            return Err(Error::DimensionMismatch { expected: left.dim(), got: right.dim() });
        }
        let symmetric = Arc::ptr_eq(&left, &right) || left == right;
        Ok(Self::with_backend(Backend::Points { left, right, metric }, symmetric))
    }

    pub fn symmetric_points(points: Arc<PointSet>, metric: MetricKind) -> Self {
        Self::with_backend(Backend::Points { left: points.clone(), right: points, metric }, true)
    }

    /// Bipartite oracle over an explicit matrix of nonnegative finite entries.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        validate_entries(&matrix)?;
        Ok(Self::with_backend(Backend::Dense(Arc::new(matrix)), false))
    }

    /// Symmetric oracle over an explicit matrix; must be square, symmetric, zero on the diagonal.
    pub fn from_symmetric_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        validate_entries(&matrix)?;
        if !matrix.is_square() {
            return Err(Error::Shape(format!("{}x{} matrix is not square", matrix.nrows(), matrix.ncols())));
        }
        for i in 0..matrix.nrows() {
            if matrix[(i, i)] != 0.0 {
                return Err(Error::invalid(format!("diagonal entry {i} is nonzero")));
            }
            for j in 0..i {
                if matrix[(i, j)] != matrix[(j, i)] {
                    return Err(Error::invalid(format!("entries ({i},{j}) and ({j},{i}) differ")));
                }
            }
        }
        Ok(Self::with_backend(Backend::Dense(Arc::new(matrix)), true))
    }

    fn with_backend(backend: Backend, symmetric: bool) -> Self {
        Self { backend, symmetric, ledger: QueryLedger::new(), cap: DEFAULT_MATERIALIZE_CAP }
    }

    /// Sets the largest `n * m` that [`materialize`](Self::materialize) accepts.
    pub fn with_materialize_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn materialize_cap(&self) -> usize {
        self.cap
    }

    pub fn n(&self) -> usize {
        match &self.backend {
            Backend::Points { left, .. } => left.count(),
            Backend::Dense(m) => m.nrows(),
        }
    }

    pub fn m(&self) -> usize {
        match &self.backend {
            Backend::Points { right, .. } => right.count(),
            Backend::Dense(m) => m.ncols(),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Metric for point-backed oracles; `None` for matrix-backed ones.
    pub fn metric(&self) -> Option<MetricKind> {
        match &self.backend {
            Backend::Points { metric, .. } => Some(*metric),
            Backend::Dense(_) => None,
        }
    }

    pub fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    #[inline]
    fn raw(&self, i: usize, j: usize) -> f64 {
        match &self.backend {
            Backend::Points { left, right, metric } => metric.eval(left.point(i), right.point(j)),
            Backend::Dense(m) => m[(i, j)],
        }
    }

    /// Reads `A[i][j]`, charging one read to `stage`.
    #[inline]
    pub fn entry(&self, stage: Stage, i: usize, j: usize) -> f64 {
        assert!(i < self.n() && j < self.m(), "entry ({i},{j}) out of bounds");
        self.ledger.charge(stage, 1);
        self.raw(i, j)
    }

    /// Reads row `i` in full (`m` reads).
    pub fn row(&self, stage: Stage, i: usize) -> Vec<f64> {
        assert!(i < self.n(), "row {i} out of bounds");
        self.ledger.charge(stage, self.m() as u64);
        (0..self.m()).map(|j| self.raw(i, j)).collect()
    }

    /// Reads column `j` in full (`n` reads).
    pub fn column(&self, stage: Stage, j: usize) -> Vec<f64> {
        assert!(j < self.m(), "column {j} out of bounds");
        self.ledger.charge(stage, self.n() as u64);
        (0..self.n()).map(|i| self.raw(i, j)).collect()
    }

    /// Dense copy of the whole matrix, charged to [`Stage::Eval`].
    pub fn materialize(&self) -> Result<DMatrix<f64>> {
        let (n, m) = (self.n(), self.m());
        if n.saturating_mul(m) > self.cap {
            return Err(Error::CapExceeded { rows: n, cols: m, cap: self.cap });
        }
        self.ledger.charge(Stage::Eval, (n * m) as u64);
        if let Backend::Dense(mat) = &self.backend {
            return Ok(mat.as_ref().clone());
        }
        let mut out = DMatrix::zeros(n, m);
        out.as_mut_slice()
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(j, col)| {
                for (i, v) in col.iter_mut().enumerate() {
                    *v = self.raw(i, j);
                }
            });
        Ok(out)
    }
}

fn validate_entries(m: &DMatrix<f64>) -> Result<()> {
    if m.is_empty() {
        return Err(Error::Empty("distance matrix"));
    }
    for (idx, v) in m.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { context: format!("entry ({}, {})", idx % m.nrows(), idx / m.nrows()) });
        }
        if *v < 0.0 {
            return Err(Error::invalid(format!(
                "negative distance at ({}, {})",
                idx % m.nrows(),
                idx / m.nrows()
            )));
        }
    }
    Ok(())
}
