//! Lower-bound instances: stacked random majority problems embedded in distance matrices.
//!
//! Each generator hides `n` (or `k * n`) random majority instances of length
//! `r = round(beta / eps)` inside a distance matrix, together with the
//! ground-truth majority of every instance and the row permutations used.
//! [`decode_majorities`] reads the instances back out of a rank-`k`
//! approximation by thresholding row means, which is how an approximation
//! that meets the additive guarantee would reveal the majorities.
//!
//! | kind                | shape            | values (before any rescaling)          |
//! |---------------------|------------------|----------------------------------------|
//! | `BipartiteK1`       | `(n+1) x r`      | `{1, 2}`, last row `M = sqrt(C n)`     |
//! | `BipartiteKBlock`   | `N x k r`        | `2 + v_b + s`, `{1, 1.5, 2, 2.5, 3}`   |
//! | `SymmetricK1`       | `2n x 2n`        | `{0, 1, 2, 2.25}` mapped into `[1, 2]` |
//! | `SymmetricKBlock`   | `2n x 2n`        | `{0, 1}` plus halved k-block values    |

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regress::Factors;

/// Largest Hadamard order the k-block generator will build.
pub const MAX_HADAMARD_ORDER: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HardKind {
    BipartiteK1,
    SymmetricK1,
    #[serde(rename = "k-block")]
    BipartiteKBlock,
    #[serde(rename = "symmetric-k-block")]
    SymmetricKBlock,
}

impl std::str::FromStr for HardKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bipartite-k1" => Ok(HardKind::BipartiteK1),
            "symmetric-k1" => Ok(HardKind::SymmetricK1),
            "k-block" => Ok(HardKind::BipartiteKBlock),
            "symmetric-k-block" => Ok(HardKind::SymmetricKBlock),
            other => Err(Error::invalid(format!("unknown hard instance kind `{other}`"))),
        }
    }
}

/// Which symbol of a two-letter instance is in the majority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Majority {
    Low,
    High,
    /// Even length with equal counts.
    Tie,
}

impl Majority {
    fn from_counts(low: usize, high: usize) -> Self {
        match low.cmp(&high) {
            std::cmp::Ordering::Greater => Majority::Low,
            std::cmp::Ordering::Less => Majority::High,
            std::cmp::Ordering::Equal => Majority::Tie,
        }
    }
}

/// Generation parameters, including derived values needed to decode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardParams {
    /// Majority instances per block.
    pub n: usize,
    /// Instance length.
    pub r: usize,
    /// Number of blocks.
    pub k: usize,
    pub eps: f64,
    pub beta: f64,
    #[serde(rename = "C")]
    pub c: f64,
    /// Value of the far-point row (`BipartiteK1` only).
    #[serde(rename = "M", skip_serializing_if = "Option::is_none", default)]
    pub far: Option<f64>,
    /// Row count of the k-block matrix after padding to a Hadamard order.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hadamard_order: Option<usize>,
    /// Off-diagonal entries were mapped `x -> scale * x + offset`.
    pub scale: f64,
    pub offset: f64,
}

/// A generated matrix plus its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct HardInstance {
    pub matrix: DMatrix<f64>,
    pub kind: HardKind,
    /// Indexed `block * n + instance`.
    pub majorities: Vec<Majority>,
    /// `perm[b][i]` is the row of block `b` holding instance `i`.
    pub perm: Vec<Vec<usize>>,
    pub params: HardParams,
}

/// JSON sidecar written next to the matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardSidecar {
    pub kind: HardKind,
    pub params: HardParams,
    pub perm: Vec<Vec<usize>>,
    pub majorities: Vec<Majority>,
}

/// Where one instance lives: a matrix row and the columns holding its symbols
/// (possibly several copies), plus the two symbol values.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSite {
    pub row: usize,
    pub cols: Vec<usize>,
    pub low: f64,
    pub high: f64,
}

impl InstanceSite {
    pub fn threshold(&self) -> f64 {
        0.5 * (self.low + self.high)
    }
}

pub fn instance_length(eps: f64, beta: f64) -> Result<usize> {
    if !(eps > 0.0 && beta > 0.0 && eps.is_finite() && beta.is_finite()) {
        return Err(Error::invalid("eps and beta must be positive"));
    }
    let r = (beta / eps).round();
    if r < 1.0 {
        return Err(Error::invalid(format!("instance length round(beta/eps) = {r} is below 1")));
    }
    Ok(r as usize)
}

/// `n` random instances (`true` = high symbol) and the permutation placing instance `i` at row `perm[i]`.
fn majority_block<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> (Vec<Vec<bool>>, Vec<usize>) {
    let instances: Vec<Vec<bool>> = (0..n).map(|_| (0..r).map(|_| rng.random_bool(0.5)).collect()).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    (instances, perm)
}

fn majority_of(bits: &[bool]) -> Majority {
    let high = bits.iter().filter(|b| **b).count();
    Majority::from_counts(bits.len() - high, high)
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    Ok(())
}

/// `(n+1) x r` bipartite instance: permuted `{1,2}` rows plus a far row of value `sqrt(C n)`.
pub fn gen_bipartite_k1<R: Rng + ?Sized>(n: usize, eps: f64, beta: f64, c: f64, rng: &mut R) -> Result<HardInstance> {
    check_n(n)?;
    let r = instance_length(eps, beta)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid("C must be positive"));
    }
    let far = (c * n as f64).sqrt();
    // the metric completion needs the far point at distance >= 1 from everything
    if far < 1.0 {
        return Err(Error::invalid(format!("M = sqrt(C n) = {far} is below 1")));
    }
    let (instances, perm) = majority_block(n, r, rng);
    let mut matrix = DMatrix::from_element(n + 1, r, far);
    for (i, s) in instances.iter().enumerate() {
        for (l, &hi) in s.iter().enumerate() {
            matrix[(perm[i], l)] = if hi { 2.0 } else { 1.0 };
        }
    }
    Ok(HardInstance {
        matrix,
        kind: HardKind::BipartiteK1,
        majorities: instances.iter().map(|s| majority_of(s)).collect(),
        perm: vec![perm],
        params: HardParams {
            n,
            r,
            k: 1,
            eps,
            beta,
            c,
            far: Some(far),
            hadamard_order: None,
            scale: 1.0,
            offset: 0.0,
        },
    })
}

/// Off-diagonal values `{1, 2, 2.25}` map to `{1, 1.8, 2}`.
const SYM_K1_SCALE: f64 = 0.8;
const SYM_K1_OFFSET: f64 = 0.2;

/// `2n x 2n` symmetric instance: `n/r` copies of a permuted `{1,2}` block in the
/// off-diagonal quadrants, `2.25` inside the diagonal quadrants, zero diagonal,
/// then every off-diagonal value mapped affinely into `[1, 2]`.
pub fn gen_symmetric_k1<R: Rng + ?Sized>(n: usize, eps: f64, beta: f64, rng: &mut R) -> Result<HardInstance> {
    check_n(n)?;
    let r = instance_length(eps, beta)?;
    if !n.is_multiple_of(r) {
        return Err(Error::invalid(format!("instance length r = {r} does not divide n = {n}")));
    }
    let (instances, perm) = majority_block(n, r, rng);
    let mut block = DMatrix::zeros(n, r);
    for (i, s) in instances.iter().enumerate() {
        for (l, &hi) in s.iter().enumerate() {
            block[(perm[i], l)] = if hi { 2.0 } else { 1.0 };
        }
    }
    let matrix = embed_symmetric(&block, 2.25, |x| SYM_K1_SCALE * x + SYM_K1_OFFSET);
    Ok(HardInstance {
        matrix,
        kind: HardKind::SymmetricK1,
        majorities: instances.iter().map(|s| majority_of(s)).collect(),
        perm: vec![perm],
        params: HardParams {
            n,
            r,
            k: 1,
            eps,
            beta,
            c: 0.0,
            far: None,
            hadamard_order: None,
            scale: SYM_K1_SCALE,
            offset: SYM_K1_OFFSET,
        },
    })
}

/// Symmetric `2n x 2n` matrix with `diag_block` off the diagonal of both diagonal
/// quadrants and horizontal copies of `block` (`n x w`, `w | n`) below the diagonal.
/// `map` is applied to every off-diagonal value.
fn embed_symmetric(block: &DMatrix<f64>, diag_block: f64, map: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let (n, w) = block.shape();
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..2 * n {
        for j in 0..2 * n {
            if i == j {
                continue;
            }
            let same_half = (i < n) == (j < n);
            a[(i, j)] = if same_half {
                map(diag_block)
            } else {
                let (lo, hi) = if i >= n { (i - n, j) } else { (j - n, i) };
                map(block[(lo, hi % w)])
            };
        }
    }
    a
}

/// Sylvester Hadamard entry `H[row][col]` of any power-of-two order.
pub fn hadamard_sign(row: usize, col: usize) -> f64 {
    if (row & col).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `N x k r` bipartite instance `2J + V^b + S^b` per block, `N` the padded Hadamard order.
///
/// Block `b` uses Hadamard row `b + 1` (never the all-ones row) scaled to `±1/2`.
/// The top `n` rows hold permuted `±1/2` majority instances; the remaining rows
/// carry no instance and are constant `2 ± 1/2` within each block.
pub fn gen_kblock<R: Rng + ?Sized>(n: usize, k: usize, eps: f64, beta: f64, c: f64, rng: &mut R) -> Result<HardInstance> {
    check_n(n)?;
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let r = instance_length(eps, beta)?;
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::invalid("C must be nonnegative"));
    }
    let target = n + (c * n as f64).round() as usize;
    let order = target.max(k + 1).next_power_of_two();
    if order > MAX_HADAMARD_ORDER {
        return Err(Error::invalid(format!("Hadamard order {order} exceeds {MAX_HADAMARD_ORDER}")));
    }
    let mut matrix = DMatrix::zeros(order, k * r);
    let mut majorities = Vec::with_capacity(k * n);
    let mut perms = Vec::with_capacity(k);
    for b in 0..k {
        let (instances, perm) = majority_block(n, r, rng);
        for row in 0..order {
            let base = 2.0 + 0.5 * hadamard_sign(b + 1, row);
            for l in 0..r {
                matrix[(row, b * r + l)] = base;
            }
        }
        for (i, s) in instances.iter().enumerate() {
            for (l, &hi) in s.iter().enumerate() {
                matrix[(perm[i], b * r + l)] += if hi { 0.5 } else { -0.5 };
            }
        }
        majorities.extend(instances.iter().map(|s| majority_of(s)));
        perms.push(perm);
    }
    Ok(HardInstance {
        matrix,
        kind: HardKind::BipartiteKBlock,
        majorities,
        perm: perms,
        params: HardParams {
            n,
            r,
            k,
            eps,
            beta,
            c,
            far: None,
            hadamard_order: Some(order),
            scale: 1.0,
            offset: 0.0,
        },
    })
}

/// `{1, 2, 3}` instance rows of the k-block construction map to `{1, 1.5, 2}`.
const SYM_KBLOCK_SCALE: f64 = 0.5;
const SYM_KBLOCK_OFFSET: f64 = 0.5;

/// `2n x 2n` symmetric embedding of the top `n` rows of a k-block instance.
/// Requires `k r | n`. Diagonal quadrants are 1 off the diagonal.
pub fn gen_symmetric_kblock<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    eps: f64,
    beta: f64,
    c: f64,
    rng: &mut R,
) -> Result<HardInstance> {
    let inner = gen_kblock(n, k, eps, beta, c, rng)?;
    let w = inner.matrix.ncols();
    if !n.is_multiple_of(w) {
        return Err(Error::invalid(format!("k r = {w} does not divide n = {n}")));
    }
    let block = inner.matrix.rows(0, n).into_owned().map(|x| SYM_KBLOCK_SCALE * x + SYM_KBLOCK_OFFSET);
    let matrix = embed_symmetric(&block, 1.0, |x| x);
    Ok(HardInstance {
        matrix,
        kind: HardKind::SymmetricKBlock,
        majorities: inner.majorities,
        perm: inner.perm,
        params: HardParams { scale: SYM_KBLOCK_SCALE, offset: SYM_KBLOCK_OFFSET, ..inner.params },
    })
}

impl HardInstance {
    pub fn instance_count(&self) -> usize {
        self.majorities.len()
    }

    /// Location and symbol values of instance `idx` (`block * n + i`).
    pub fn site(&self, idx: usize) -> InstanceSite {
        let HardParams { n, r, k, scale, offset, .. } = self.params;
        let (b, i) = (idx / n, idx % n);
        let row = self.perm[b][i];
        let affine = |x: f64| scale * x + offset;
        match self.kind {
            HardKind::BipartiteK1 => InstanceSite { row, cols: (0..r).collect(), low: 1.0, high: 2.0 },
            HardKind::SymmetricK1 => InstanceSite { row: n + row, cols: (0..n).collect(), low: affine(1.0), high: affine(2.0) },
            HardKind::BipartiteKBlock => {
                let base = 2.0 + 0.5 * hadamard_sign(b + 1, row);
                InstanceSite { row, cols: (b * r..(b + 1) * r).collect(), low: base - 0.5, high: base + 0.5 }
            }
            HardKind::SymmetricKBlock => {
                let base = 2.0 + 0.5 * hadamard_sign(b + 1, row);
                let w = k * r;
                let cols = (0..n / w).flat_map(|copy| (0..r).map(move |l| copy * w + b * r + l)).collect();
                InstanceSite { row: n + row, cols, low: affine(base - 0.5), high: affine(base + 0.5) }
            }
        }
    }

    /// `(low, high)` symbol counts of instance `idx`, read back from the matrix (first copy).
    pub fn counts(&self, idx: usize) -> (usize, usize) {
        let site = self.site(idx);
        let thr = site.threshold();
        let high = site.cols[..self.params.r].iter().filter(|&&j| self.matrix[(site.row, j)] > thr).count();
        (self.params.r - high, high)
    }

    /// Majorities recomputed from the matrix; equals `majorities` for an untampered instance.
    pub fn recompute_majorities(&self) -> Vec<Majority> {
        (0..self.instance_count())
            .map(|idx| {
                let (lo, hi) = self.counts(idx);
                Majority::from_counts(lo, hi)
            })
            .collect()
    }

    pub fn sidecar(&self) -> HardSidecar {
        HardSidecar {
            kind: self.kind,
            params: self.params.clone(),
            perm: self.perm.clone(),
            majorities: self.majorities.clone(),
        }
    }

    pub fn from_parts(matrix: DMatrix<f64>, sidecar: HardSidecar) -> Self {
        Self {
            matrix,
            kind: sidecar.kind,
            majorities: sidecar.majorities,
            perm: sidecar.perm,
            params: sidecar.params,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        matches!(self.kind, HardKind::SymmetricK1 | HardKind::SymmetricKBlock)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypicalityReport {
    pub gamma: f64,
    pub typical_count: usize,
    pub total: usize,
}

impl TypicalityReport {
    pub fn fraction(&self) -> f64 {
        self.typical_count as f64 / self.total as f64
    }
}

/// Counts instances whose majority symbol appears at least `r/2 + gamma sqrt(r)` times.
pub fn typicality(instance: &HardInstance, gamma: f64) -> Result<TypicalityReport> {
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(Error::invalid("gamma must be positive"));
    }
    let r = instance.params.r as f64;
    let need = 0.5 * r + gamma * r.sqrt();
    let typical_count = (0..instance.instance_count())
        .filter(|&idx| {
            let (lo, hi) = instance.counts(idx);
            lo.max(hi) as f64 >= need - 1e-9
        })
        .count();
    Ok(TypicalityReport { gamma, typical_count, total: instance.instance_count() })
}

/// Margin choice for a target failure probability, from exact binomial tails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaChoice {
    pub gamma: f64,
    /// Smallest majority count that counts as typical.
    pub min_count: usize,
    /// Exact `P(majority count >= min_count)` for a uniform instance.
    pub coverage: f64,
    /// Whether `coverage >= 1 - delta`.
    pub attains: bool,
}

/// Largest `gamma > 0` with `P(typical) >= 1 - delta` for length-`r` instances.
///
/// The majority count of a uniform instance is `max(X, r - X)`, `X ~ Bin(r, 1/2)`.
/// When even the smallest positive margin (count `floor(r/2) + 1`) misses
/// `1 - delta`, which happens when the tie mass `P(X = r/2)` exceeds `delta`,
/// that margin is returned with `attains = false`.
pub fn gamma_for_delta(r: usize, delta: f64) -> Result<GammaChoice> {
    if r == 0 {
        return Err(Error::invalid("r must be at least 1"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta must lie in (0, 1)"));
    }
    let pmf = binomial_half_pmf(r);
    // tail[c] = P(max(X, r-X) >= c) for c > r/2
    let coverage = |c: usize| -> f64 { 2.0 * pmf[c..].iter().sum::<f64>() };
    let smallest = r / 2 + 1;
    let mut best = smallest;
    for c in smallest..=r {
        if coverage(c) >= 1.0 - delta {
            best = c;
        } else {
            break;
        }
    }
    let cov = coverage(best);
    let gamma = (best as f64 - 0.5 * r as f64) / (r as f64).sqrt();
    Ok(GammaChoice { gamma, min_count: best, coverage: cov, attains: cov >= 1.0 - delta })
}

fn binomial_half_pmf(r: usize) -> Vec<f64> {
    // log-space to stay finite for large r
    let mut log_choose = 0.0f64;
    let base = -(r as f64) * std::f64::consts::LN_2;
    let mut out = Vec::with_capacity(r + 1);
    for i in 0..=r {
        if i > 0 {
            log_choose += ((r - i + 1) as f64).ln() - (i as f64).ln();
        }
        out.push((log_choose + base).exp());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    /// Predicted majority per instance (`Low` or `High`).
    pub bits: Vec<Majority>,
    /// Fraction of non-tie instances predicted correctly.
    pub success_rate: f64,
}

/// Predicts each majority from the composed approximation `V U`.
pub fn decode_majorities(instance: &HardInstance, factors: &Factors) -> Result<Decoding> {
    if factors.shape() != instance.matrix.shape() {
        return Err(Error::Shape(format!(
            "factors are {:?} but the instance is {:?}",
            factors.shape(),
            instance.matrix.shape()
        )));
    }
    let (v, u) = (factors.v(), factors.u());
    Ok(decode_with(instance, |i, j| v.row(i).dot(&u.column(j).transpose())))
}

/// Predicts each majority from an arbitrary approximation given entrywise:
/// mean of the instance's cells at or below the threshold means `Low`.
pub fn decode_with(instance: &HardInstance, approx: impl Fn(usize, usize) -> f64) -> Decoding {
    let mut bits = Vec::with_capacity(instance.instance_count());
    let (mut hits, mut counted) = (0usize, 0usize);
    for idx in 0..instance.instance_count() {
        let site = instance.site(idx);
        let mean = site.cols.iter().map(|&j| approx(site.row, j)).sum::<f64>() / site.cols.len() as f64;
        let guess = if mean <= site.threshold() { Majority::Low } else { Majority::High };
        let truth = instance.majorities[idx];
        if truth != Majority::Tie {
            counted += 1;
            hits += usize::from(guess == truth);
        }
        bits.push(guess);
    }
    let success_rate = if counted == 0 { 0.0 } else { hits as f64 / counted as f64 };
    Decoding { bits, success_rate }
}

/// Full `(n+1+r)`-point metric realizing a `BipartiteK1` matrix: rows and
/// columns become points, same-side distances are 1, the far point is at `M`
/// from every other row point.
pub fn bipartite_completion(instance: &HardInstance) -> Result<DMatrix<f64>> {
    if instance.kind != HardKind::BipartiteK1 {
        return Err(Error::invalid("completion is defined for bipartite-k1 instances"));
    }
    let (rows, r) = instance.matrix.shape();
    let far = instance.params.far.unwrap_or(instance.matrix[(rows - 1, 0)]);
    let total = rows + r;
    let mut d = DMatrix::zeros(total, total);
    for x in 0..total {
        for y in 0..total {
            if x == y {
                continue;
            }
            d[(x, y)] = match (x < rows, y < rows) {
                (true, true) if x == rows - 1 || y == rows - 1 => far,
                (true, true) | (false, false) => 1.0,
                (true, false) => instance.matrix[(x, y - rows)],
                (false, true) => instance.matrix[(y, x - rows)],
            };
        }
    }
    Ok(d)
}

/// Number of ordered triples `(x, y, z)` with `d(x,y) > d(x,z) + d(z,y)` beyond a relative tolerance.
pub fn triangle_violations(d: &DMatrix<f64>, rel_tol: f64) -> usize {
    let n = d.nrows();
    let mut bad = 0;
    for x in 0..n {
        for y in 0..n {
            let dxy = d[(x, y)];
            for z in 0..n {
                let bound = d[(x, z)] + d[(z, y)];
                if dxy > bound + rel_tol * bound.max(dxy) {
                    bad += 1;
                }
            }
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn bipartite_k1_construction() {
        // r = round(0.3 / 0.1) = 3
        let inst = gen_bipartite_k1(4, 0.1, 0.3, 2.0, &mut rng(1)).unwrap();
        assert_eq!(inst.matrix.shape(), (5, 3));
        assert_eq!(inst.params.r, 3);
        for i in 0..4 {
            for j in 0..3 {
                assert!(matches!(inst.matrix[(i, j)], 1.0 | 2.0));
            }
        }
        let far = (4.0f64 * 2.0).sqrt();
        assert!(inst.matrix.row(4).iter().all(|v| *v == far));
        assert_eq!(inst.majorities.len(), 4);
        assert!(inst.majorities.iter().all(|m| *m != Majority::Tie));
        assert_eq!(inst.recompute_majorities(), inst.majorities);
        let mut p = inst.perm[0].clone();
        p.sort();
        assert_eq!(p, vec![0, 1, 2, 3]);
    }

    #[test]
    fn length_one_majority_is_the_symbol() {
        let inst = gen_bipartite_k1(50, 1.0, 1.0, 1.0, &mut rng(2)).unwrap();
        for i in 0..50 {
            let v = inst.matrix[(inst.perm[0][i], 0)];
            let want = if v == 2.0 { Majority::High } else { Majority::Low };
            assert_eq!(inst.majorities[i], want);
        }
    }

    #[test]
    fn bipartite_k1_symbol_mean() {
        let inst = gen_bipartite_k1(20_000, 1.0 / 16.0, 1.0, 1.0, &mut rng(3)).unwrap();
        let (n, r) = (20_000, 16);
        let mean = inst.matrix.rows(0, n).sum() / (n * r) as f64;
        // sd of the mean is 0.5/sqrt(320000) ~ 9e-4
        assert!((mean - 1.5).abs() < 0.01, "{mean}");
    }

    #[test]
    fn bad_parameters() {
        assert!(gen_bipartite_k1(4, 1.0, 0.2, 1.0, &mut rng(0)).is_err());
        assert!(gen_bipartite_k1(4, 0.1, 0.3, 0.0, &mut rng(0)).is_err());
        assert!(gen_bipartite_k1(0, 0.1, 0.3, 1.0, &mut rng(0)).is_err());
        assert!(gen_symmetric_k1(10, 0.25, 1.0, &mut rng(0)).is_err());
        assert!(gen_kblock(8, 0, 0.5, 1.0, 1.0, &mut rng(0)).is_err());
        assert!(gen_symmetric_kblock(6, 2, 0.5, 1.0, 1.0, &mut rng(0)).is_err());
    }

    #[test]
    fn symmetric_k1_structure() {
        let inst = gen_symmetric_k1(12, 0.25, 1.0, &mut rng(4)).unwrap();
        let a = &inst.matrix;
        assert_eq!(a.shape(), (24, 24));
        for i in 0..24 {
            assert_eq!(a[(i, i)], 0.0);
            for j in 0..24 {
                assert_eq!(a[(i, j)], a[(j, i)]);
                if i != j {
                    assert!((1.0..=2.0).contains(&a[(i, j)]));
                }
            }
        }
        assert_eq!(a[(0, 1)], 2.0);
        assert_eq!(inst.recompute_majorities(), inst.majorities);
        assert_eq!(triangle_violations(a, 1e-12), 0);
    }

    #[test]
    fn kblock_structure() {
        let inst = gen_kblock(12, 3, 0.25, 1.0, 1.5, &mut rng(5)).unwrap();
        let order = inst.params.hadamard_order.unwrap();
        assert_eq!(order, 32);
        assert_eq!(inst.matrix.shape(), (32, 12));
        for v in inst.matrix.iter() {
            assert!([1.0, 1.5, 2.0, 2.5, 3.0].contains(v), "{v}");
        }
        for b in 0..3 {
            for row in 12..order {
                let want = 2.0 + 0.5 * hadamard_sign(b + 1, row);
                assert!((0..4).all(|l| inst.matrix[(row, b * 4 + l)] == want));
            }
        }
        assert_eq!(inst.recompute_majorities(), inst.majorities);
    }

    #[test]
    fn hadamard_rows_orthogonal() {
        let order = 64;
        for a in 1..8 {
            for b in 1..8 {
                let dot: f64 = (0..order).map(|x| hadamard_sign(a, x) * hadamard_sign(b, x)).sum();
                assert_eq!(dot, if a == b { order as f64 } else { 0.0 });
            }
        }
    }

    #[test]
    fn symmetric_kblock_structure() {
        let inst = gen_symmetric_kblock(16, 2, 0.5, 1.0, 1.0, &mut rng(6)).unwrap();
        let a = &inst.matrix;
        assert_eq!(a.shape(), (32, 32));
        assert_eq!(a.transpose(), *a);
        assert_eq!(inst.recompute_majorities(), inst.majorities);
        assert_eq!(triangle_violations(a, 1e-12), 0);
    }

    #[test]
    fn typicality_boundaries() {
        let inst = gen_bipartite_k1(30, 1.0, 1.0, 1.0, &mut rng(7)).unwrap();
        assert_eq!(typicality(&inst, 0.5).unwrap().typical_count, 30);
        assert!(typicality(&inst, 0.0).is_err());

        // all-ones instance of length 9: typical iff gamma <= sqrt(9)/2
        let mut ones = gen_bipartite_k1(1, 1.0 / 9.0, 1.0, 1.0, &mut rng(8)).unwrap();
        ones.matrix.row_mut(0).fill(1.0);
        ones.majorities = ones.recompute_majorities();
        assert_eq!(typicality(&ones, 1.5).unwrap().typical_count, 1);
        assert_eq!(typicality(&ones, 1.51).unwrap().typical_count, 0);
    }

    #[test]
    fn gamma_from_exact_tails() {
        // r = 64: P(X = 32) ~ 0.0993 < 0.1, so count 33 covers ~0.9007
        let g = gamma_for_delta(64, 0.1).unwrap();
        assert_eq!(g.min_count, 33);
        assert!(g.attains && (g.coverage - 0.90067).abs() < 1e-4);
        // r = 16: the tie alone has mass 0.196
        let g = gamma_for_delta(16, 0.1).unwrap();
        assert!(!g.attains);
        assert_eq!(g.min_count, 9);
        // odd r: every instance has a strict majority, and count 9 covers only 0.607
        let g = gamma_for_delta(15, 0.1).unwrap();
        assert!(g.attains && g.min_count == 8 && (g.coverage - 1.0).abs() < 1e-12);
        let pmf = binomial_half_pmf(256);
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decode_exact_and_null() {
        let inst = gen_bipartite_k1(2000, 1.0 / 15.0, 1.0, 1.0, &mut rng(9)).unwrap();
        let exact = decode_with(&inst, |i, j| inst.matrix[(i, j)]);
        assert_eq!(exact.success_rate, 1.0);
        assert_eq!(exact.bits.len(), 2000);
        let null = decode_with(&inst, |_, _| 1.5);
        assert!((0.4..=0.6).contains(&null.success_rate), "{}", null.success_rate);
    }

    #[test]
    fn completion_is_a_metric() {
        let inst = gen_bipartite_k1(20, 0.1, 1.0, 1.0, &mut rng(10)).unwrap();
        let d = bipartite_completion(&inst).unwrap();
        assert_eq!(d.nrows(), 31);
        assert_eq!(triangle_violations(&d, 1e-12), 0);
    }

    #[test]
    fn detects_violation() {
        let d = DMatrix::from_row_slice(3, 3, &[0.0, 5.0, 1.0, 5.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
        assert_eq!(triangle_violations(&d, 1e-12), 2);
    }

    #[test]
    fn sidecar_json() {
        let inst = gen_bipartite_k1(4, 1.0 / 3.0, 1.0, 1.0, &mut rng(11)).unwrap();
        let s = serde_json::to_value(inst.sidecar()).unwrap();
        assert_eq!(s["kind"], "bipartite-k1");
        assert_eq!(s["params"]["M"], 2.0);
        assert_eq!(s["majorities"].as_array().unwrap().len(), 4);
        let back: HardSidecar = serde_json::from_value(s).unwrap();
        assert_eq!(HardInstance::from_parts(inst.matrix.clone(), back), inst);
    }
}
