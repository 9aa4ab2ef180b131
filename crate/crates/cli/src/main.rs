use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use distmat_core::bench::{self, BenchSpec};
use distmat_core::hardgen::{self, HardSidecar};
use distmat_core::io::{load_dmat, load_matrix_csv, load_points_csv, save_dmat, save_matrix_csv};
use distmat_core::norm_sampling::{
    estimate_row_weights, estimate_row_weights_at, estimate_row_weights_symmetric, estimate_row_weights_symmetric_at,
};
use distmat_core::pipeline::{rng_from_seed, run, Evaluator, RowSampling};
use distmat_core::{read_budget, ApproxReport, DistanceOracle, Error, MetricKind, RowWeights, SketchConfig};
use nalgebra::DMatrix;
use serde::Serialize;

const EXIT_USAGE: u8 = 2;
const EXIT_CAP: u8 = 3;
const EXIT_CHECK: u8 = 4;

#[derive(Parser)]
#[command(name = "distmat", version, about = "Low-rank approximation of distance matrices from few entries")]
struct Cli {
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute rank-k factors V (n x k) and U (k x m).
    Approx(ApproxArgs),
    /// Print the estimated row sampling weights.
    Probe(ProbeArgs),
    /// Generate a lower-bound instance.
    GenHard(GenHardArgs),
    /// Run a benchmark sweep from a JSON spec.
    Bench(BenchArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Point set CSV with header x0,...,x{d-1} (rows of the matrix).
    #[arg(long, conflicts_with = "matrix")]
    points: Option<PathBuf>,
    /// Second point set for a bipartite matrix (columns).
    #[arg(long, requires = "points")]
    points_right: Option<PathBuf>,
    /// Dense matrix, DMAT binary or headerless CSV (by extension).
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Treat --matrix as symmetric with zero diagonal (validated).
    #[arg(long, requires = "matrix")]
    symmetric: bool,
    /// Metric for point input.
    #[arg(long, value_enum)]
    metric: Option<MetricArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    L1,
    L2,
    Linf,
    Canberra,
}

impl From<MetricArg> for MetricKind {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::L1 => MetricKind::Manhattan,
            MetricArg::L2 => MetricKind::Euclidean,
            MetricArg::Linf => MetricKind::Chebyshev,
            MetricArg::Canberra => MetricKind::Canberra,
        }
    }
}

#[derive(Args)]
struct ApproxArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Target rank.
    #[arg(long)]
    k: usize,
    /// Additive accuracy in (0, 1].
    #[arg(long)]
    eps: f64,
    /// Row oversampling constant.
    #[arg(long, default_value_t = distmat_core::sketch::DEFAULT_ROW_OVERSAMPLE)]
    cr: f64,
    /// Column oversampling constant.
    #[arg(long, default_value_t = distmat_core::sketch::DEFAULT_COL_OVERSAMPLE)]
    cc: f64,
    /// Force the row sample size.
    #[arg(long)]
    row_samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Materialize the matrix and report exact errors.
    #[arg(long)]
    evaluate: bool,
    /// Run seeds seed..seed+R and keep the lowest error.
    #[arg(long, default_value_t = 1, requires = "evaluate")]
    repeats: u64,
    /// Also write V.csv and U.csv.
    #[arg(long)]
    csv: bool,
    /// Record wall-clock stage times (output is then not byte-stable).
    #[arg(long)]
    timings: bool,
    /// Largest number of entries --evaluate may materialize.
    #[arg(long, default_value_t = distmat_core::oracle::DEFAULT_MATERIALIZE_CAP)]
    max_entries: usize,
}

#[derive(Args)]
struct ProbeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Materialize and verify the dominance bound for the drawn anchors and for every anchor.
    #[arg(long)]
    check: bool,
    #[arg(long, hide = true)]
    anchor_row: Option<usize>,
    #[arg(long, hide = true)]
    anchor_col: Option<usize>,
    /// Write JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = distmat_core::oracle::DEFAULT_MATERIALIZE_CAP)]
    max_entries: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    BipartiteK1,
    SymmetricK1,
    KBlock,
    SymmetricKBlock,
}

#[derive(Args)]
struct GenHardArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Instances per block.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Far-row / padding constant.
    #[arg(long = "C", default_value_t = 1.0)]
    c: f64,
    /// Blocks (k-block kinds).
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write per-metric plot CSVs.
    #[arg(long)]
    plot_data: bool,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Cap(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::CapExceeded { .. } => Failure::Cap(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let result = match cli.command {
        Command::Approx(a) => cmd_approx(a),
        Command::Probe(a) => cmd_probe(a),
        Command::GenHard(a) => cmd_gen_hard(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Cap(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CAP)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(EXIT_CHECK)
        }
    }
}

fn load_matrix(path: &Path) -> Result<DMatrix<f64>, Failure> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    Ok(if is_csv { load_matrix_csv(path)? } else { load_dmat(path)? })
}

/// Input description echoed into reports.
#[derive(Serialize)]
struct InputInfo {
    n: usize,
    m: usize,
    symmetric: bool,
    metric: Option<MetricKind>,
}

fn build_oracle(input: &InputArgs, cap: usize) -> Result<DistanceOracle, Failure> {
    let oracle = match (&input.points, &input.matrix) {
        (Some(left), None) => {
            let metric: MetricKind =
                input.metric.ok_or_else(|| Failure::Usage("--metric is required with --points".into()))?.into();
            let left = Arc::new(load_points_csv(left)?);
            match &input.points_right {
                Some(right) => DistanceOracle::from_points(left, Arc::new(load_points_csv(right)?), metric)?,
                None => DistanceOracle::symmetric_points(left, metric),
            }
        }
        (None, Some(path)) => {
            let m = load_matrix(path)?;
            if input.symmetric {
                DistanceOracle::from_symmetric_matrix(m)?
            } else {
                DistanceOracle::from_matrix(m)?
            }
        }
        _ => return Err(Failure::Usage("exactly one of --points or --matrix is required".into())),
    };
    Ok(oracle.with_materialize_cap(cap))
}

fn info(oracle: &DistanceOracle) -> InputInfo {
    InputInfo { n: oracle.n(), m: oracle.m(), symmetric: oracle.is_symmetric(), metric: oracle.metric() }
}

fn write_json(path: &Path, value: &impl Serialize) -> CmdResult {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Serialize)]
struct ApproxOutput {
    input: InputInfo,
    #[serde(flatten)]
    report: ApproxReport,
    read_budget: f64,
    /// Seed of the kept run when `repeats > 1`.
    selected_seed: u64,
    repeats: u64,
}

fn cmd_approx(a: ApproxArgs) -> CmdResult {
    let oracle = build_oracle(&a.input, a.max_entries)?;
    let mut cfg = SketchConfig::new(a.k, a.eps).with_oversample(a.cr, a.cc);
    if let Some(s) = a.row_samples {
        cfg = cfg.with_row_samples(s);
    }
    cfg.validate(oracle.n(), oracle.m())?;
    if a.repeats == 0 {
        return Err(Failure::Usage("--repeats must be at least 1".into()));
    }
    let mut evaluator = if a.evaluate { Some(Evaluator::new(&oracle)?) } else { None };

    let mut best: Option<(distmat_core::Factors, ApproxReport)> = None;
    for r in 0..a.repeats {
        let seed = a.seed.wrapping_add(r);
        let out = run(&oracle, &cfg, seed, RowSampling::Estimated)?;
        let times = a.timings.then_some(out.times);
        let report = match evaluator.as_mut() {
            Some(ev) => ev.report(&out.factors, times)?,
            None => ApproxReport::unevaluated(&out.factors, times),
        };
        let better = match &best {
            None => true,
            Some((_, b)) => report.err_sq < b.err_sq,
        };
        if better {
            best = Some((out.factors, report));
        }
    }
    let (factors, mut report) = best.expect("at least one repeat");
    let selected_seed = report.seed;
    report.seed = a.seed;

    std::fs::create_dir_all(&a.out)?;
    save_dmat(a.out.join("V.dmat"), factors.v())?;
    save_dmat(a.out.join("U.dmat"), factors.u())?;
    if a.csv {
        save_matrix_csv(a.out.join("V.csv"), factors.v())?;
        save_matrix_csv(a.out.join("U.csv"), factors.u())?;
    }
    let output = ApproxOutput {
        input: info(&oracle),
        report,
        read_budget: read_budget(oracle.n(), oracle.m(), &cfg),
        selected_seed,
        repeats: a.repeats,
    };
    write_json(&a.out.join("report.json"), &output)
}

#[derive(Serialize)]
struct DominanceCheck {
    /// `max_i ||A_i||^2 / (4 m raw[i])` for the anchors used. `null` when unbounded.
    max_ratio: Option<f64>,
    /// Same maximum over every anchor choice.
    worst_case_max_ratio: Option<f64>,
    passed: bool,
}

#[derive(Serialize)]
struct ProbeOutput {
    input: InputInfo,
    seed: u64,
    weights: RowWeights,
    #[serde(skip_serializing_if = "Option::is_none")]
    check: Option<DominanceCheck>,
}

const DOMINANCE_SLACK: f64 = 1e-9;

fn cmd_probe(a: ProbeArgs) -> CmdResult {
    let oracle = build_oracle(&a.input, a.max_entries)?;
    let weights = match (a.anchor_row, a.anchor_col) {
        (None, None) => {
            // same draws as the first stage of `approx` with this seed
            let mut rng = rng_from_seed(a.seed);
            if oracle.is_symmetric() {
                estimate_row_weights_symmetric(&oracle, &mut rng)?
            } else {
                estimate_row_weights(&oracle, &mut rng)?
            }
        }
        (Some(i), j) => probe_weights(&oracle, i, j)?,
        (None, Some(_)) => return Err(Failure::Usage("--anchor-col needs --anchor-row".into())),
    };

    let check = if a.check {
        let dense = oracle.materialize()?;
        let row_sq: Vec<f64> = dense.row_iter().map(|r| r.norm_squared()).collect();
        let m = oracle.m() as f64;
        let ratio_of = |w: &RowWeights| -> f64 {
            row_sq
                .iter()
                .zip(&w.raw)
                .map(|(&norm, &raw)| {
                    if norm == 0.0 {
                        0.0
                    } else if raw == 0.0 {
                        f64::INFINITY
                    } else {
                        norm / (4.0 * m * raw)
                    }
                })
                .fold(0.0, f64::max)
        };
        let drawn = ratio_of(&weights);
        let mut worst = drawn;
        let dense_oracle = if oracle.is_symmetric() {
            DistanceOracle::from_symmetric_matrix(dense)?
        } else {
            DistanceOracle::from_matrix(dense)?
        };
        for i in 0..oracle.n() {
            let cols = if oracle.is_symmetric() { 1 } else { oracle.m() };
            for j in 0..cols {
                worst = worst.max(ratio_of(&probe_weights(&dense_oracle, i, Some(j))?));
            }
        }
        let finite = |x: f64| x.is_finite().then_some(x);
        Some(DominanceCheck {
            max_ratio: finite(drawn),
            worst_case_max_ratio: finite(worst),
            passed: worst <= 1.0 + DOMINANCE_SLACK,
        })
    } else {
        None
    };
    let passed = check.as_ref().is_none_or(|c| c.passed);
    let output = ProbeOutput { input: info(&oracle), seed: a.seed, weights, check };
    match &a.out {
        Some(path) => write_json(path, &output)?,
        None => println!("{}", serde_json::to_string_pretty(&output)?),
    }
    if passed {
        Ok(())
    } else {
        Err(Failure::Check("row norm exceeds 4m times its weight; the input is not a metric".into()))
    }
}

/// Symmetric oracles use the single-anchor estimator and ignore `j_star`.
fn probe_weights(oracle: &DistanceOracle, i_star: usize, j_star: Option<usize>) -> Result<RowWeights, Failure> {
    Ok(match j_star {
        Some(j) if !oracle.is_symmetric() => estimate_row_weights_at(oracle, i_star, j)?,
        _ if oracle.is_symmetric() => estimate_row_weights_symmetric_at(oracle, i_star)?,
        _ => return Err(Failure::Usage("bipartite probe needs a column anchor".into())),
    })
}

#[derive(Serialize)]
struct GenHardOutput {
    seed: u64,
    #[serde(flatten)]
    sidecar: HardSidecar,
}

fn cmd_gen_hard(a: GenHardArgs) -> CmdResult {
    let mut rng = rng_from_seed(a.seed);
    let inst = match a.kind {
        KindArg::BipartiteK1 => hardgen::gen_bipartite_k1(a.n, a.eps, a.beta, a.c, &mut rng)?,
        KindArg::SymmetricK1 => hardgen::gen_symmetric_k1(a.n, a.eps, a.beta, &mut rng)?,
        KindArg::KBlock => hardgen::gen_kblock(a.n, a.k, a.eps, a.beta, a.c, &mut rng)?,
        KindArg::SymmetricKBlock => hardgen::gen_symmetric_kblock(a.n, a.k, a.eps, a.beta, a.c, &mut rng)?,
    };
    std::fs::create_dir_all(&a.out)?;
    save_dmat(a.out.join("matrix.dmat"), &inst.matrix)?;
    write_json(&a.out.join("instance.json"), &GenHardOutput { seed: a.seed, sidecar: inst.sidecar() })
}

fn cmd_bench(a: BenchArgs) -> CmdResult {
    let text = std::fs::read_to_string(&a.spec)?;
    let spec: BenchSpec = serde_json::from_str(&text)?;
    let rows = bench::run_bench(&spec)?;
    bench::write_outputs(&a.out, &rows, a.plot_data)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} of {} cells failed; see the error column", rows.len());
    }
    Ok(())
}
