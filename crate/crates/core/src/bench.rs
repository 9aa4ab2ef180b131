//! Desk-scale experiment harness: clustered data synthesis and method sweeps.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hardgen::{self, HardKind};
use crate::ledger::LedgerSnapshot;
use crate::metric::{MetricKind, PointSet};
use crate::oracle::DistanceOracle;
use crate::pipeline::{rng_from_seed, run, Evaluator, RowSampling};
use crate::regress::Factors;
use crate::sketch::SketchConfig;

/// Box side for cluster centers.
pub const CENTER_BOX: f64 = 10.0;

fn default_noise() -> f64 {
    1.0
}

fn default_c() -> f64 {
    1.0
}

fn default_one() -> usize {
    1
}

/// Input data of a bench run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Dataset {
    SyntheticClusters {
        n_points: usize,
        n_features: usize,
        n_clusters: usize,
        seed: u64,
        #[serde(default = "default_noise")]
        noise: f64,
    },
    CsvPoints {
        path: PathBuf,
    },
    Hard {
        kind: HardKind,
        n: usize,
        eps: f64,
        beta: f64,
        #[serde(rename = "C", default = "default_c")]
        c: f64,
        #[serde(default = "default_one")]
        k: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Thiswork,
    Uniform,
    Svd,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Thiswork => "thiswork",
            Method::Uniform => "uniform",
            Method::Svd => "svd",
        }
    }
}

/// A sweep over metrics, ranks, seeds and methods on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub dataset: Dataset,
    /// Ignored for `hard` datasets, which are matrices already.
    #[serde(default)]
    pub metrics: Vec<MetricKind>,
    pub ks: Vec<usize>,
    pub eps: f64,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub cr: Option<f64>,
    #[serde(default)]
    pub cc: Option<f64>,
    /// Record wall-clock stage times. Off keeps output files byte-stable.
    #[serde(default)]
    pub timings: bool,
}

impl BenchSpec {
    pub fn validate(&self) -> Result<()> {
        let point_data = !matches!(self.dataset, Dataset::Hard { .. });
        if point_data && self.metrics.is_empty() {
            return Err(Error::invalid("bench spec needs at least one metric"));
        }
        if self.ks.is_empty() || self.seeds.is_empty() || self.methods.is_empty() {
            return Err(Error::invalid("bench spec needs nonempty ks, seeds and methods"));
        }
        Ok(())
    }

    fn config(&self, k: usize) -> SketchConfig {
        let base = SketchConfig::new(k, self.eps);
        base.with_oversample(self.cr.unwrap_or(base.row_oversample), self.cc.unwrap_or(base.col_oversample))
    }
}

/// One result row. Evaluation columns are empty when the cell failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: Method,
    pub metric: String,
    pub k: usize,
    pub seed: u64,
    pub err_sq: Option<f64>,
    pub opt_sq: Option<f64>,
    pub fro_sq: Option<f64>,
    pub excess: Option<f64>,
    /// Algorithm reads plus the `n * m` reads of exact evaluation.
    pub reads_total: Option<u64>,
    pub reads_algo: Option<u64>,
    pub t_weights: Option<f64>,
    pub t_sketch: Option<f64>,
    pub t_regress: Option<f64>,
    pub t_total: Option<f64>,
    pub error: Option<String>,
}

pub const CSV_HEADER: [&str; 15] = [
    "method",
    "metric",
    "k",
    "seed",
    "err_sq",
    "opt_sq",
    "fro_sq",
    "excess",
    "reads_total",
    "reads_algo",
    "t_weights",
    "t_sketch",
    "t_regress",
    "t_total",
    "error",
];

/// Points around `n_clusters` centers drawn uniformly in `[0, 10]^d`, with
/// isotropic Gaussian noise of standard deviation `noise`. Point `p` belongs
/// to cluster `p % n_clusters`. All coordinates are shifted so the minimum is 0.
pub fn synth_clusters(n_points: usize, n_features: usize, n_clusters: usize, seed: u64, noise: f64) -> Result<PointSet> {
    if n_points == 0 || n_features == 0 || n_clusters == 0 {
        return Err(Error::invalid("n_points, n_features and n_clusters must be positive"));
    }
    if n_clusters > n_points {
        return Err(Error::invalid(format!("{n_clusters} clusters for {n_points} points")));
    }
    let normal = Normal::new(0.0, noise).map_err(|e| Error::invalid(format!("noise: {e}")))?;
    let mut rng = rng_from_seed(seed);
    let centers: Vec<f64> = (0..n_clusters * n_features).map(|_| rng.random_range(0.0..CENTER_BOX)).collect();
    let mut coords = Vec::with_capacity(n_points * n_features);
    for p in 0..n_points {
        let c = p % n_clusters;
        for f in 0..n_features {
            coords.push(centers[c * n_features + f] + normal.sample(&mut rng));
        }
    }
    let min = coords.iter().copied().fold(f64::INFINITY, f64::min);
    for x in &mut coords {
        *x -= min;
    }
    PointSet::from_flat(coords, n_features)
}

enum Source {
    Points(Arc<PointSet>),
    Matrix { a: Arc<DMatrix<f64>>, symmetric: bool },
}

impl Source {
    fn load(dataset: &Dataset) -> Result<Self> {
        Ok(match dataset {
            Dataset::SyntheticClusters { n_points, n_features, n_clusters, seed, noise } => {
                Source::Points(Arc::new(synth_clusters(*n_points, *n_features, *n_clusters, *seed, *noise)?))
            }
            Dataset::CsvPoints { path } => Source::Points(Arc::new(crate::io::load_points_csv(path)?)),
            Dataset::Hard { kind, n, eps, beta, c, k, seed } => {
                let mut rng = rng_from_seed(*seed);
                let inst = match kind {
                    HardKind::BipartiteK1 => hardgen::gen_bipartite_k1(*n, *eps, *beta, *c, &mut rng)?,
                    HardKind::SymmetricK1 => hardgen::gen_symmetric_k1(*n, *eps, *beta, &mut rng)?,
                    HardKind::BipartiteKBlock => hardgen::gen_kblock(*n, *k, *eps, *beta, *c, &mut rng)?,
                    HardKind::SymmetricKBlock => hardgen::gen_symmetric_kblock(*n, *k, *eps, *beta, *c, &mut rng)?,
                };
                Source::Matrix { symmetric: inst.is_symmetric(), a: Arc::new(inst.matrix) }
            }
        })
    }

    fn oracle(&self, metric: Option<MetricKind>) -> Result<DistanceOracle> {
        match self {
            Source::Points(p) => Ok(DistanceOracle::symmetric_points(
                Arc::clone(p),
                metric.ok_or_else(|| Error::invalid("point data needs a metric"))?,
            )),
            Source::Matrix { a, symmetric: true } => DistanceOracle::from_symmetric_matrix((**a).clone()),
            Source::Matrix { a, symmetric: false } => DistanceOracle::from_matrix((**a).clone()),
        }
    }
}

struct Cell {
    method: Method,
    k: usize,
    seed: u64,
}

/// Runs every `(metric, k, seed, method)` cell. Rows come out in that nesting
/// order regardless of scheduling. A failing cell yields a row with `error` set.
pub fn run_bench(spec: &BenchSpec) -> Result<Vec<BenchRow>> {
    spec.validate()?;
    let source = Source::load(&spec.dataset)?;
    let metrics: Vec<Option<MetricKind>> = match source {
        Source::Points(_) => spec.metrics.iter().copied().map(Some).collect(),
        Source::Matrix { .. } => vec![None],
    };
    let mut rows = Vec::new();
    for metric in metrics {
        let label = metric.map_or("matrix", MetricKind::name).to_string();
        let mut eval = Evaluator::new(&source.oracle(metric)?)?;
        // warm the optimum cache so cells can share the evaluator immutably
        let opts: BTreeMap<usize, std::result::Result<f64, String>> =
            spec.ks.iter().map(|&k| (k, eval.opt_sq(k).map_err(|e| e.to_string()))).collect();
        let cells: Vec<Cell> = spec
            .ks
            .iter()
            .flat_map(|&k| spec.seeds.iter().flat_map(move |&seed| spec.methods.iter().map(move |&method| Cell { method, k, seed })))
            .collect();
        let eval = &eval;
        let batch: Vec<BenchRow> = cells
            .par_iter()
            .map(|cell| {
                let mut row = BenchRow {
                    method: cell.method,
                    metric: label.clone(),
                    k: cell.k,
                    seed: cell.seed,
                    err_sq: None,
                    opt_sq: None,
                    fro_sq: None,
                    excess: None,
                    reads_total: None,
                    reads_algo: None,
                    t_weights: None,
                    t_sketch: None,
                    t_regress: None,
                    t_total: None,
                    error: None,
                };
                if let Err(e) = run_cell(spec, &source, metric, eval, &opts, cell, &mut row) {
                    row.error = Some(e);
                }
                row
            })
            .collect();
        rows.extend(batch);
    }
    Ok(rows)
}

fn run_cell(
    spec: &BenchSpec,
    source: &Source,
    metric: Option<MetricKind>,
    eval: &Evaluator,
    opts: &BTreeMap<usize, std::result::Result<f64, String>>,
    cell: &Cell,
    row: &mut BenchRow,
) -> std::result::Result<(), String> {
    let opt = opts[&cell.k].clone()?;
    let cfg = spec.config(cell.k);
    let (n, m) = eval.matrix().shape();
    let dense = (n * m) as u64;
    let (err, reads) = match cell.method {
        Method::Svd => (opt, dense),
        Method::Thiswork | Method::Uniform => {
            let oracle = source.oracle(metric).map_err(|e| e.to_string())?;
            let sampling = if cell.method == Method::Thiswork { RowSampling::Estimated } else { RowSampling::Uniform };
            let out = run(&oracle, &cfg, cell.seed, sampling).map_err(|e| e.to_string())?;
            if spec.timings {
                row.t_weights = Some(out.times.weights);
                row.t_sketch = Some(out.times.sketch);
                row.t_regress = Some(out.times.regress);
                row.t_total = Some(out.times.total);
            }
            (eval.err_sq(&out.factors), out.factors.ledger.algorithm())
        }
    };
    let fro = eval.fro_sq();
    row.err_sq = Some(err);
    row.opt_sq = Some(opt);
    row.fro_sq = Some(fro);
    row.excess = Some(if fro > 0.0 { (err - opt) / fro } else { 0.0 });
    row.reads_algo = Some(reads);
    row.reads_total = Some(reads + dense);
    Ok(())
}

/// Reruns one cell of a finished bench and returns its factors.
pub fn rerun_cell(spec: &BenchSpec, metric: Option<MetricKind>, method: Method, k: usize, seed: u64) -> Result<Factors> {
    let source = Source::load(&spec.dataset)?;
    let oracle = source.oracle(metric)?;
    let sampling = match method {
        Method::Thiswork => RowSampling::Estimated,
        Method::Uniform => RowSampling::Uniform,
        Method::Svd => {
            let (v, u) = Evaluator::new(&oracle)?.svd_factors(k)?;
            return Factors::new(v, u, spec.config(k), seed, LedgerSnapshot::default());
        }
    };
    Ok(run(&oracle, &spec.config(k), seed, sampling)?.factors)
}

fn cell_f64(x: Option<f64>) -> String {
    x.map(crate::io::format_f64).unwrap_or_default()
}

fn cell_u64(x: Option<u64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_csv<W: Write>(w: W, rows: &[BenchRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in rows {
        out.write_record([
            r.method.name().to_string(),
            r.metric.clone(),
            r.k.to_string(),
            r.seed.to_string(),
            cell_f64(r.err_sq),
            cell_f64(r.opt_sq),
            cell_f64(r.fro_sq),
            cell_f64(r.excess),
            cell_u64(r.reads_total),
            cell_u64(r.reads_algo),
            cell_f64(r.t_weights),
            cell_f64(r.t_sketch),
            cell_f64(r.t_regress),
            cell_f64(r.t_total),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Median relative error `err_sq / fro_sq` and median excess per `(metric, method, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub metric: String,
    pub method: Method,
    pub k: usize,
    pub median_rel_err: f64,
    pub median_excess: f64,
    pub cells: usize,
}

pub fn plot_points(rows: &[BenchRow]) -> Vec<PlotPoint> {
    type Key = (String, Method, usize);
    let mut groups: BTreeMap<Key, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        if let (Some(err), Some(fro), Some(ex)) = (r.err_sq, r.fro_sq, r.excess) {
            let g = groups.entry((r.metric.clone(), r.method, r.k)).or_default();
            g.0.push(if fro > 0.0 { err / fro } else { 0.0 });
            g.1.push(ex);
        }
    }
    groups
        .into_iter()
        .map(|((metric, method, k), (mut rel, mut ex))| PlotPoint {
            metric,
            method,
            k,
            cells: rel.len(),
            median_rel_err: median(&mut rel),
            median_excess: median(&mut ex),
        })
        .collect()
}

pub fn median(xs: &mut [f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Writes `results.csv`, `results.json`, and with `plot_data` one `plot_<metric>.csv`
/// (rank against median relative error) per metric. Returns the paths written.
pub fn write_outputs(dir: impl AsRef<Path>, rows: &[BenchRow], plot_data: bool) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let csv_path = dir.join("results.csv");
    write_csv(std::io::BufWriter::new(std::fs::File::create(&csv_path)?), rows)?;
    written.push(csv_path);
    let json_path = dir.join("results.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(rows)?)?;
    written.push(json_path);
    if plot_data {
        let points = plot_points(rows);
        let mut by_metric: BTreeMap<&str, Vec<&PlotPoint>> = BTreeMap::new();
        for p in &points {
            by_metric.entry(p.metric.as_str()).or_default().push(p);
        }
        for (metric, pts) in by_metric {
            let path = dir.join(format!("plot_{metric}.csv"));
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["k", "method", "median_rel_err", "median_excess", "cells"])?;
            for p in pts {
                w.write_record([
                    p.k.to_string(),
                    p.method.name().to_string(),
                    crate::io::format_f64(p.median_rel_err),
                    crate::io::format_f64(p.median_excess),
                    p.cells.to_string(),
                ])?;
            }
            w.flush()?;
            written.push(path);
        }
    }
    Ok(written)
}
