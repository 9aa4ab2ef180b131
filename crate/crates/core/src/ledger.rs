//! Exact accounting of matrix entries read, split by pipeline stage.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

/// Pipeline stage an oracle read is charged to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Weights,
    Sketch,
    Regression,
    /// Reads made for evaluation only; excluded from the algorithm's budget.
    Eval,
}

/// Atomic per-stage counters. Shared by reference between concurrent readers.
#[derive(Debug, Default)]
pub struct QueryLedger {
    weights: AtomicU64,
    sketch: AtomicU64,
    regression: AtomicU64,
    eval: AtomicU64,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    fn counter(&self, stage: Stage) -> &AtomicU64 {
        match stage {
            Stage::Weights => &self.weights,
            Stage::Sketch => &self.sketch,
            Stage::Regression => &self.regression,
            Stage::Eval => &self.eval,
        }
    }

    #[inline]
    pub fn charge(&self, stage: Stage, count: u64) {
        self.counter(stage).fetch_add(count, Ordering::Relaxed);
    }

    pub fn get(&self, stage: Stage) -> u64 {
        self.counter(stage).load(Ordering::Relaxed)
    }

    pub fn total(&self) -> u64 {
        self.snapshot().total()
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            weights_reads: self.get(Stage::Weights),
            sketch_reads: self.get(Stage::Sketch),
            regression_reads: self.get(Stage::Regression),
            eval_reads: self.get(Stage::Eval),
        }
    }
}

/// Point-in-time copy of a [`QueryLedger`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub weights_reads: u64,
    pub sketch_reads: u64,
    pub regression_reads: u64,
    pub eval_reads: u64,
}

impl LedgerSnapshot {
    pub fn total(&self) -> u64 {
        self.weights_reads + self.sketch_reads + self.regression_reads + self.eval_reads
    }

    /// Reads made by the approximation algorithm itself.
    pub fn algorithm(&self) -> u64 {
        self.weights_reads + self.sketch_reads + self.regression_reads
    }

    /// Reads accumulated since `earlier`.
    pub fn since(&self, earlier: &LedgerSnapshot) -> LedgerSnapshot {
        LedgerSnapshot {
            weights_reads: self.weights_reads - earlier.weights_reads,
            sketch_reads: self.sketch_reads - earlier.sketch_reads,
            regression_reads: self.regression_reads - earlier.regression_reads,
            eval_reads: self.eval_reads - earlier.eval_reads,
        }
    }
}
