//! Monte Carlo estimators: rectangle distance between two samples, its
//! Gaussian-smoothed version, pseudo-moments, and a lower bound on the ζ3
//! ideal metric from sine test functions.
//!
//! Rectangle estimates take the maximum of the empirical CDF difference over
//! a finite corner family, so they bound the true supremum from below up to
//! the family's coverage. Uncertainty comes from a bootstrap of the
//! simultaneous deviation `sup_r |D*(r) − D̂(r)|`, which gives a band valid
//! for every corner at once.

use std::cmp::Ordering;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{multinomial, sample, DistError, DistributionSpec, SampleBatch};
use crate::grid;
use crate::normal;
use crate::oracle::{self, OracleError};
use crate::rng::{block_rng, child_stream};

pub const MIN_ROWS: usize = 1000;
pub const DEFAULT_RESAMPLES: usize = 200;
/// Largest tensor grid built by `quantile_grid`.
pub const CORNER_CAP: usize = 1_000_000;
/// Largest tensor grid built by `pooled_corners` before it falls back to a
/// list of pooled points.
pub const POOLED_GRID_CAP: usize = 4_000_000;
pub const MAX_GRID_AXES: usize = 6;
/// Atom values kept per axis by `quantile_grid`.
pub const ATOM_CAP: usize = 256;
/// Pooled points kept when `pooled_corners` cannot use a grid.
pub const LIST_CORNER_CAP: usize = 4096;
/// Corners evaluated by [`smoothed_mu_hat`].
pub const SMOOTH_CORNER_CAP: usize = 512;
/// Work limit (corner × point × resample) for bootstrapping list families.
const LIST_BOOTSTRAP_WORK: usize = 2_000_000_000;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("need at least {min} rows, got {rows}")]
    TooFewRows { rows: usize, min: usize },
    #[error("rectangle family has no corners")]
    EmptyFamily,
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("frequency vector {0} is zero")]
    ZeroFrequency(usize),
    #[error("order must be 1 or 3, got {0}")]
    InvalidOrder(u32),
    #[error("rate fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("point {index} has nonpositive value {value}")]
    NonPositiveValue { index: usize, value: f64 },
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    EmpiricalSup,
    PluginMoment,
    TestFunctionSup,
    /// Computed exactly; the interval is degenerate.
    Exact,
    /// Sum of the two absolute moments of mutually singular laws.
    SingularMoment,
}

/// A point estimate with standard error and confidence interval.
///
/// Serialized as `{value, se, ci: [low, high], method, replications}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "EstimateWire", from = "EstimateWire")]
pub struct EstimateWithCI {
    pub value: f64,
    pub std_error: f64,
    pub replications: u64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub method: Method,
}

#[derive(Serialize, Deserialize)]
struct EstimateWire {
    value: f64,
    se: f64,
    ci: [f64; 2],
    method: Method,
    replications: u64,
}

impl From<EstimateWithCI> for EstimateWire {
    fn from(e: EstimateWithCI) -> Self {
        Self {
            value: e.value,
            se: e.std_error,
            ci: [e.ci_low, e.ci_high],
            method: e.method,
            replications: e.replications,
        }
    }
}

impl From<EstimateWire> for EstimateWithCI {
    fn from(w: EstimateWire) -> Self {
        Self {
            value: w.value,
            std_error: w.se,
            replications: w.replications,
            ci_low: w.ci[0],
            ci_high: w.ci[1],
            method: w.method,
        }
    }
}

impl EstimateWithCI {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
            replications: 0,
            ci_low: value,
            ci_high: value,
            method: Method::Exact,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Uncertainty {
    Bootstrap { resamples: usize },
    /// Hoeffding bound per corner with a union adjustment over corners.
    DkwUnion,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorOptions {
    pub uncertainty: Uncertainty,
    pub level: f64,
    pub seed: u64,
    pub stream_id: u64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            uncertainty: Uncertainty::Bootstrap {
                resamples: DEFAULT_RESAMPLES,
            },
            level: 0.95,
            seed: 0,
            stream_id: 0,
        }
    }
}

impl EstimatorOptions {
    /// Default options with bootstrap randomness derived from the batches.
    pub fn for_batches(u: &SampleBatch, v: &SampleBatch) -> Self {
        Self {
            seed: u.seed ^ v.seed.rotate_left(17),
            stream_id: child_stream(u.stream_id, v.stream_id),
            ..Self::default()
        }
    }
}

fn two_sided_z(level: f64) -> f64 {
    normal::quantile(1.0 - (1.0 - level) / 2.0)
}

/// Critical value making `k` simultaneous two-sided intervals hold jointly.
fn union_z(level: f64, k: usize) -> f64 {
    normal::quantile(1.0 - (1.0 - level) / (2.0 * k.max(1) as f64))
}

fn cmp_rows(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y).expect("finite samples") {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// Distinct rows of a batch with their multiplicities.
struct Compressed {
    dim: usize,
    points: Vec<f64>,
    counts: Vec<u64>,
    /// Distinct index of every original row.
    row_map: Vec<u32>,
    total: u64,
}

impl Compressed {
    fn new(batch: &SampleBatch) -> Self {
        let dim = batch.dim();
        let mut order: Vec<u32> = (0..batch.rows() as u32).collect();
        order.par_sort_unstable_by(|&a, &b| {
            cmp_rows(batch.row(a as usize), batch.row(b as usize)).then(a.cmp(&b))
        });
        let mut points = Vec::new();
        let mut counts: Vec<u64> = Vec::new();
        let mut row_map = vec![0u32; batch.rows()];
        let mut last: Option<&[f64]> = None;
        for &i in &order {
            let row = batch.row(i as usize);
            if last.is_some_and(|l| cmp_rows(l, row) == Ordering::Equal) {
                *counts.last_mut().expect("nonempty") += 1;
            } else {
                points.extend_from_slice(row);
                counts.push(1);
                last = Some(row);
            }
            row_map[i as usize] = (counts.len() - 1) as u32;
        }
        Self {
            dim,
            points,
            counts,
            row_map,
            total: batch.rows() as u64,
        }
    }

    fn len(&self) -> usize {
        self.counts.len()
    }

    fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }

    /// Bootstrap multiplicities of the distinct points.
    fn resample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u64> {
        if (self.len() as u64) * 8 < self.total {
            let masses: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
            multinomial(self.total, &masses, rng)
        } else {
            let mut w = vec![0u64; self.len()];
            for _ in 0..self.total {
                w[self.row_map[rng.random_range(0..self.row_map.len())] as usize] += 1;
            }
            w
        }
    }
}

/// How candidate corners `r` are chosen for the supremum over rectangles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum RectangleFamily {
    /// Tensor grid of pooled coordinate values, exact for finitely supported
    /// samples; a strided list of pooled points when the grid is too large.
    PooledCorners,
    /// Per axis: `k` pooled quantiles, every repeated value (atom) and its
    /// predecessor. Grids beyond [`CORNER_CAP`] keep the axes of largest
    /// marginal discrepancy and pin the others at the pooled maximum.
    QuantileGrid { k: usize },
    Fixed { corners: Vec<Vec<f64>> },
}

/// Materialized corners.
#[derive(Debug, Clone, PartialEq)]
pub enum Corners {
    /// Every combination of per-axis cuts (sorted ascending).
    Grid { axes: Vec<Vec<f64>> },
    /// Canonically sorted list.
    List(Vec<Vec<f64>>),
}

impl Corners {
    pub fn count(&self) -> usize {
        match self {
            Self::Grid { axes } => axes.iter().map(Vec::len).product(),
            Self::List(l) => l.len(),
        }
    }

    fn corner(&self, flat: usize) -> Vec<f64> {
        match self {
            Self::Grid { axes } => {
                let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
                let strides = grid::strides(&shape);
                axes.iter()
                    .zip(&strides)
                    .zip(&shape)
                    .map(|((a, s), n)| a[(flat / s) % n])
                    .collect()
            }
            Self::List(l) => l[flat].clone(),
        }
    }

    /// At most `cap` corners, evenly strided in canonical order.
    fn thinned(&self, cap: usize) -> Vec<Vec<f64>> {
        let k = self.count();
        let step = k.div_ceil(cap).max(1);
        (0..k).step_by(step).map(|i| self.corner(i)).collect()
    }
}

fn sorted_column(u: &SampleBatch, v: &SampleBatch, j: usize) -> Vec<f64> {
    let mut col: Vec<f64> = u.iter_rows().chain(v.iter_rows()).map(|r| r[j]).collect();
    col.par_sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    col
}

fn dedup_sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    v.dedup();
    v
}

fn quantile_axis(col: &[f64], k: usize) -> Vec<f64> {
    let n = col.len();
    let mut cuts: Vec<f64> = (1..=k).map(|i| col[(i * n).div_ceil(k).max(1) - 1]).collect();
    // Runs of equal values are atoms; keep the heaviest ones.
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=n {
        if i == n || col[i] != col[start] {
            if i - start >= 2 {
                runs.push((i - start, start));
            }
            start = i;
        }
    }
    runs.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, s) in runs.iter().take(ATOM_CAP) {
        cuts.push(col[s]);
        if s > 0 {
            cuts.push(col[s - 1]);
        }
    }
    dedup_sorted(cuts)
}

/// Largest difference of the two marginal empirical CDFs at the cuts.
fn marginal_discrepancy(u: &SampleBatch, v: &SampleBatch, j: usize, cuts: &[f64]) -> f64 {
    let sorted = |b: &SampleBatch| {
        let mut c = b.column(j);
        c.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        c
    };
    let (cu, cv) = (sorted(u), sorted(v));
    cuts.iter()
        .map(|&c| {
            let fu = cu.partition_point(|&x| x <= c) as f64 / cu.len() as f64;
            let fv = cv.partition_point(|&x| x <= c) as f64 / cv.len() as f64;
            (fu - fv).abs()
        })
        .fold(0.0, f64::max)
}

impl RectangleFamily {
    pub fn materialize(&self, u: &SampleBatch, v: &SampleBatch) -> Result<Corners, EstimatorError> {
        check_pair(u, v)?;
        let p = u.dim();
        let corners = match self {
            Self::Fixed { corners } => {
                if corners.iter().any(|c| c.len() != p) {
                    return Err(EstimatorError::DimMismatch {
                        left: p,
                        right: corners.iter().map(Vec::len).find(|&l| l != p).unwrap_or(p),
                    });
                }
                let mut list = corners.clone();
                list.sort_by(|a, b| cmp_rows(a, b));
                list.dedup();
                Corners::List(list)
            }
            Self::PooledCorners => {
                let axes: Vec<Vec<f64>> = (0..p).map(|j| dedup_sorted(sorted_column(u, v, j))).collect();
                let size = axes
                    .iter()
                    .try_fold(1usize, |acc, a| acc.checked_mul(a.len()))
                    .unwrap_or(usize::MAX);
                if size <= POOLED_GRID_CAP {
                    Corners::Grid { axes }
                } else {
                    let mut pooled: Vec<Vec<f64>> =
                        u.iter_rows().chain(v.iter_rows()).map(<[f64]>::to_vec).collect();
                    pooled.par_sort_unstable_by(|a, b| cmp_rows(a, b));
                    pooled.dedup();
                    Corners::List(Corners::List(pooled).thinned(LIST_CORNER_CAP))
                }
            }
            Self::QuantileGrid { k } => {
                let k = (*k).max(1);
                let mut axes: Vec<Vec<f64>> = (0..p).map(|j| quantile_axis(&sorted_column(u, v, j), k)).collect();
                let full = axes
                    .iter()
                    .try_fold(1usize, |acc, a| acc.checked_mul(a.len()))
                    .unwrap_or(usize::MAX);
                if full > CORNER_CAP || p > MAX_GRID_AXES {
                    let mut ranked: Vec<(f64, usize)> = (0..p)
                        .map(|j| (marginal_discrepancy(u, v, j, &axes[j]), j))
                        .collect();
                    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite").then(a.1.cmp(&b.1)));
                    let mut keep = vec![false; p];
                    let mut size = 1usize;
                    let mut chosen = 0;
                    for &(_, j) in &ranked {
                        if chosen < MAX_GRID_AXES && size.saturating_mul(axes[j].len()) <= CORNER_CAP {
                            size *= axes[j].len();
                            keep[j] = true;
                            chosen += 1;
                        }
                    }
                    for (j, axis) in axes.iter_mut().enumerate() {
                        if !keep[j] {
                            *axis = vec![*axis.last().expect("nonempty axis")];
                        }
                    }
                }
                Corners::Grid { axes }
            }
        };
        if corners.count() == 0 {
            return Err(EstimatorError::EmptyFamily);
        }
        Ok(corners)
    }
}

fn check_pair(u: &SampleBatch, v: &SampleBatch) -> Result<(), EstimatorError> {
    if u.dim() != v.dim() {
        return Err(EstimatorError::DimMismatch {
            left: u.dim(),
            right: v.dim(),
        });
    }
    Ok(())
}

fn check_rows(b: &SampleBatch) -> Result<(), EstimatorError> {
    if b.rows() < MIN_ROWS {
        return Err(EstimatorError::TooFewRows {
            rows: b.rows(),
            min: MIN_ROWS,
        });
    }
    Ok(())
}

/// Evaluates empirical CDFs of weighted distinct points at all corners.
enum CdfEngine<'a> {
    Grid {
        shape: Vec<usize>,
        bins_u: Vec<usize>,
        bins_v: Vec<usize>,
    },
    List {
        corners: &'a [Vec<f64>],
    },
}

const OUTSIDE: usize = usize::MAX;

fn grid_bins(axes: &[Vec<f64>], c: &Compressed) -> Vec<usize> {
    let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
    let strides = grid::strides(&shape);
    (0..c.len())
        .map(|k| {
            let mut flat = 0;
            for (j, &x) in c.point(k).iter().enumerate() {
                let b = axes[j].partition_point(|&cut| cut < x);
                if b == axes[j].len() {
                    return OUTSIDE;
                }
                flat += b * strides[j];
            }
            flat
        })
        .collect()
}

impl CdfEngine<'_> {
    fn cdf(&self, which_u: bool, c: &Compressed, weights: &[u64], total: u64) -> Vec<f64> {
        let t = total as f64;
        match self {
            Self::Grid { shape, bins_u, bins_v } => {
                let bins = if which_u { bins_u } else { bins_v };
                let mut hist = vec![0u64; shape.iter().product()];
                for (&b, &w) in bins.iter().zip(weights) {
                    if b != OUTSIDE {
                        hist[b] += w;
                    }
                }
                grid::cumulate(shape, &mut hist);
                hist.into_iter().map(|h| h as f64 / t).collect()
            }
            Self::List { corners } => corners
                .iter()
                .map(|r| {
                    let mut acc = 0u64;
                    for (k, &w) in weights.iter().enumerate() {
                        if w > 0 && c.point(k).iter().zip(r).all(|(x, y)| x <= y) {
                            acc += w;
                        }
                    }
                    acc as f64 / t
                })
                .collect(),
        }
    }
}

/// First index of the largest `|d|`.
fn argmax_abs(d: &[f64]) -> (usize, f64) {
    let mut best = (0, 0.0);
    for (i, x) in d.iter().enumerate() {
        if x.abs() > best.1 {
            best = (i, x.abs());
        }
    }
    best
}

/// Upper quantile by nearest rank.
fn upper_quantile(mut xs: Vec<f64>, level: f64) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let rank = ((level * xs.len() as f64).ceil() as usize).clamp(1, xs.len());
    xs[rank - 1]
}

/// Detailed rectangle estimate, including the maximizing corner.
#[derive(Debug, Clone, PartialEq)]
pub struct RectangleEstimate {
    pub estimate: EstimateWithCI,
    pub argmax: Vec<f64>,
    pub corners: usize,
}

/// `sup_r |P̂(U ⪯ r) − P̂(V ⪯ r)|` over the corner family, with a bootstrap
/// interval seeded from the batches.
pub fn mu_hat(u: &SampleBatch, v: &SampleBatch, rects: &RectangleFamily) -> Result<EstimateWithCI, EstimatorError> {
    mu_hat_with(u, v, rects, &EstimatorOptions::for_batches(u, v)).map(|r| r.estimate)
}

pub fn mu_hat_with(
    u: &SampleBatch,
    v: &SampleBatch,
    rects: &RectangleFamily,
    opts: &EstimatorOptions,
) -> Result<RectangleEstimate, EstimatorError> {
    check_pair(u, v)?;
    check_rows(u)?;
    check_rows(v)?;
    let corners = rects.materialize(u, v)?;
    let (cu, cv) = (Compressed::new(u), Compressed::new(v));
    let list;
    let engine = match &corners {
        Corners::Grid { axes } => CdfEngine::Grid {
            shape: axes.iter().map(Vec::len).collect(),
            bins_u: grid_bins(axes, &cu),
            bins_v: grid_bins(axes, &cv),
        },
        Corners::List(l) => {
            list = l;
            CdfEngine::List { corners: list }
        }
    };
    let fu = engine.cdf(true, &cu, &cu.counts, cu.total);
    let fv = engine.cdf(false, &cv, &cv.counts, cv.total);
    let diff: Vec<f64> = fu.iter().zip(&fv).map(|(a, b)| a - b).collect();
    let (arg, value) = argmax_abs(&diff);
    let k = corners.count();

    let mut uncertainty = opts.uncertainty;
    if let (Corners::List(_), Uncertainty::Bootstrap { resamples }) = (&corners, uncertainty) {
        if k.saturating_mul(cu.len() + cv.len()).saturating_mul(resamples) > LIST_BOOTSTRAP_WORK {
            uncertainty = Uncertainty::DkwUnion;
        }
    }
    let (half, replications) = match uncertainty {
        Uncertainty::Bootstrap { resamples } => {
            let stats: Vec<f64> = (0..resamples as u64)
                .into_par_iter()
                .map(|b| {
                    let mut rng = block_rng(opts.seed, child_stream(opts.stream_id, b), 0);
                    let wu = cu.resample(&mut rng);
                    let wv = cv.resample(&mut rng);
                    let bu = engine.cdf(true, &cu, &wu, cu.total);
                    let bv = engine.cdf(false, &cv, &wv, cv.total);
                    bu.iter()
                        .zip(&bv)
                        .zip(&diff)
                        .map(|((a, b), d)| (a - b - d).abs())
                        .fold(0.0, f64::max)
                })
                .collect();
            (upper_quantile(stats, opts.level), resamples as u64)
        }
        Uncertainty::DkwUnion => {
            let alpha = 1.0 - opts.level;
            let t = |rows: u64| ((4.0 * k as f64 / alpha).ln() / (2.0 * rows as f64)).sqrt();
            (t(cu.total) + t(cv.total), 0)
        }
    };
    Ok(RectangleEstimate {
        estimate: EstimateWithCI {
            value,
            std_error: half / two_sided_z(opts.level),
            replications,
            ci_low: (value - half).max(0.0),
            ci_high: (value + half).min(1.0),
            method: Method::EmpiricalSup,
        },
        argmax: corners.corner(arg),
        corners: k,
    })
}

/// `φ_ε(x, r) = Π_j Φ((r_j − x_j)/ε)`.
fn phi(x: &[f64], r: &[f64], eps: f64) -> f64 {
    x.iter().zip(r).map(|(a, b)| normal::cdf((b - a) / eps)).product()
}

/// Weighted mean and variance of `f` over distinct points.
fn weighted_moments(c: &Compressed, f: impl Fn(&[f64]) -> f64) -> (f64, f64) {
    let t = c.total as f64;
    let ys: Vec<f64> = (0..c.len()).map(|k| f(c.point(k))).collect();
    let m = ys.iter().zip(&c.counts).map(|(y, &w)| w as f64 * y).sum::<f64>() / t;
    let var = ys.iter().zip(&c.counts).map(|(y, &w)| w as f64 * (y - m).powi(2)).sum::<f64>() / t;
    (m, var)
}

/// Simultaneous-interval estimate of `max_i |mean_u f_i − mean_v f_i|`.
fn sup_of_means(
    cu: &Compressed,
    cv: &Compressed,
    count: usize,
    level: f64,
    f: impl Fn(usize, &[f64]) -> f64 + Sync,
    method: Method,
) -> EstimateWithCI {
    let per: Vec<(f64, f64)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let (mu, vu) = weighted_moments(cu, |x| f(i, x));
            let (mv, vv) = weighted_moments(cv, |x| f(i, x));
            (mu - mv, (vu / cu.total as f64 + vv / cv.total as f64).sqrt())
        })
        .collect();
    let diffs: Vec<f64> = per.iter().map(|d| d.0).collect();
    let (arg, value) = argmax_abs(&diffs);
    let se_max = per.iter().map(|d| d.1).fold(0.0, f64::max);
    let half = union_z(level, count) * se_max;
    EstimateWithCI {
        value,
        std_error: per[arg].1,
        replications: cu.total.min(cv.total),
        ci_low: (value - half).max(0.0),
        ci_high: value + half,
        method,
    }
}

/// `sup_r |E φ_ε(U, r) − E φ_ε(V, r)|`, i.e. the rectangle distance between
/// `U + εZ` and `V + εZ`, evaluated with the analytic `φ_ε` on at most
/// [`SMOOTH_CORNER_CAP`] corners of the family.
pub fn smoothed_mu_hat(
    u: &SampleBatch,
    v: &SampleBatch,
    eps: f64,
    rects: &RectangleFamily,
) -> Result<EstimateWithCI, EstimatorError> {
    if !(eps > 0.0) {
        return Err(EstimatorError::NonPositiveEpsilon(eps));
    }
    check_pair(u, v)?;
    let corners = rects.materialize(u, v)?.thinned(SMOOTH_CORNER_CAP);
    let (cu, cv) = (Compressed::new(u), Compressed::new(v));
    Ok(sup_of_means(
        &cu,
        &cv,
        corners.len(),
        0.95,
        |i, x| phi(x, &corners[i], eps),
        Method::EmpiricalSup,
    ))
}

/// `max |mean f(u) − mean f(v)|` over `f(x) = sin(⟨t, x⟩ + θ)/‖t‖_1³`,
/// `θ ∈ {0, π/2}`. Each `f` has `‖∇³f‖_1 ≤ 1`, so the value bounds ζ3 from
/// below up to Monte Carlo error.
pub fn zeta3_lower_hat(
    u: &SampleBatch,
    v: &SampleBatch,
    frequencies: &[Vec<f64>],
) -> Result<EstimateWithCI, EstimatorError> {
    check_pair(u, v)?;
    if frequencies.is_empty() {
        return Err(EstimatorError::EmptyFamily);
    }
    for (i, t) in frequencies.iter().enumerate() {
        if t.len() != u.dim() {
            return Err(EstimatorError::DimMismatch {
                left: u.dim(),
                right: t.len(),
            });
        }
        if t.iter().all(|&x| x == 0.0) {
            return Err(EstimatorError::ZeroFrequency(i));
        }
    }
    let norms: Vec<f64> = frequencies.iter().map(|t| t.iter().map(|x| x.abs()).sum::<f64>().powi(3)).collect();
    let (cu, cv) = (Compressed::new(u), Compressed::new(v));
    Ok(sup_of_means(
        &cu,
        &cv,
        2 * frequencies.len(),
        0.95,
        |i, x| {
            let t = &frequencies[i / 2];
            let dot: f64 = t.iter().zip(x).map(|(a, b)| a * b).sum();
            let f = if i % 2 == 0 { dot.sin() } else { dot.cos() };
            f / norms[i / 2]
        },
        Method::TestFunctionSup,
    ))
}

/// 32 seeded directions on the unit ℓ1 sphere times magnitudes ½, 1, 2, 4.
pub fn default_frequency_grid(p: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = block_rng(seed, 0x7a65_7461, 0);
    let mut out = Vec::with_capacity(128);
    for _ in 0..32 {
        let dir: Vec<f64> = (0..p).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
        let l1: f64 = dir.iter().map(|x: &f64| x.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
        for m in [0.5, 1.0, 2.0, 4.0] {
            out.push(dir.iter().map(|x| m * x / l1).collect());
        }
    }
    out
}

fn mc_sup_norm_moment(batch: &SampleBatch, order: u32) -> (f64, f64) {
    let ys: Vec<f64> = batch.iter_rows().map(|r| oracle::sup_norm(r).powi(order as i32)).collect();
    let n = ys.len() as f64;
    let m = ys.iter().sum::<f64>() / n;
    let var = ys.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

/// `ν_order(X, Y)` with `Y` the Gaussian matching the second moments of `X`.
///
/// Returns 0 when the two laws coincide, the exact or Monte Carlo sum of
/// absolute moments when they are mutually singular, and otherwise that same
/// sum as an upper bound (method `plugin_moment`).
pub fn pseudo_moment_hat(
    spec: &DistributionSpec,
    order: u32,
    replications: usize,
    seed: u64,
    stream_id: u64,
) -> Result<EstimateWithCI, EstimatorError> {
    if order != 1 && order != 3 {
        return Err(EstimatorError::InvalidOrder(order));
    }
    spec.validate()?;
    if spec.is_gaussian() {
        return Ok(EstimateWithCI::exact(0.0));
    }
    let cov = spec.exact_covariance()?;
    if cov.diag().iter().all(|&d| d == 0.0) {
        // E[XXᵀ] = 0 forces X = 0, which is also the matched Gaussian.
        return Ok(EstimateWithCI::exact(0.0));
    }
    let reps = replications.max(2);
    let (x_part, x_se) = match spec {
        DistributionSpec::Spike13 { .. } | DistributionSpec::Spike12 { .. } => {
            let exponent = if spec.tag() == "spike13" { 1.0 / 3.0 } else { 0.5 };
            let gamma = match spec {
                DistributionSpec::Spike13 { gamma, .. } | DistributionSpec::Spike12 { gamma, .. } => *gamma,
                _ => unreachable!(),
            };
            (oracle::spike_sup_norm_moment(spec.dim(), gamma, exponent, order), 0.0)
        }
        _ => match spec.atomic_law() {
            Some(law) => (law?.abs_moment(order), 0.0),
            None => mc_sup_norm_moment(&sample(spec, reps, seed, child_stream(stream_id, 0))?, order),
        },
    };
    let (y_part, y_se) = if cov.is_diagonal() {
        let sds: Vec<f64> = cov.diag().iter().map(|d| d.sqrt()).collect();
        (oracle::gaussian_sup_norm_moment(&sds, order), 0.0)
    } else {
        let g = spec.gaussian_match()?;
        mc_sup_norm_moment(&sample(&g, reps, seed, child_stream(stream_id, 1))?, order)
    };
    let value = x_part + y_part;
    let se = (x_se * x_se + y_se * y_se).sqrt();
    let method = if !spec.is_singular() {
        Method::PluginMoment
    } else if se == 0.0 {
        Method::Exact
    } else {
        Method::SingularMoment
    };
    let half = two_sided_z(0.95) * se;
    Ok(EstimateWithCI {
        value,
        std_error: se,
        replications: if se == 0.0 { 0 } else { reps as u64 },
        ci_low: value - half,
        ci_high: value + half,
        method,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least squares of `ln error` on `ln n`.
pub fn rate_fit(points: &[(f64, f64)]) -> Result<RateFit, EstimatorError> {
    if points.len() < 3 {
        return Err(EstimatorError::TooFewPoints(points.len()));
    }
    for (index, &(n, e)) in points.iter().enumerate() {
        if !(e > 0.0) {
            return Err(EstimatorError::NonPositiveValue { index, value: e });
        }
        if !(n > 0.0) {
            return Err(EstimatorError::NonPositiveValue { index, value: n });
        }
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let slope_se = (sse / (k - 2.0) / sxx).sqrt();
    Ok(RateFit {
        slope,
        slope_se,
        intercept,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{normalized_sum, UnivariateLaw};
    use crate::matrix::CovarianceSpec;
    use crate::oracle::AtomicLaw;

    fn atomic(points: &[Vec<f64>], masses: &[f64]) -> DistributionSpec {
        DistributionSpec::Atomic {
            atoms: AtomicLaw::from_pairs(points, masses).unwrap(),
        }
    }

    #[test]
    fn identical_laws_ci_contains_zero() {
        let spec = DistributionSpec::sub_gaussian_product(2);
        let u = sample(&spec, 5000, 1, 0).unwrap();
        let v = sample(&spec, 5000, 1, 1).unwrap();
        let e = mu_hat(&u, &v, &RectangleFamily::QuantileGrid { k: 16 }).unwrap();
        assert_eq!(e.ci_low, 0.0);
        assert!(e.ci_low <= e.value && e.value <= e.ci_high);
    }

    #[test]
    fn rademacher_vs_gaussian_matches_oracle() {
        let r = DistributionSpec::Product {
            coordinates: vec![UnivariateLaw::Rademacher],
        };
        let u = sample(&r, 200_000, 2, 0).unwrap();
        let v = sample(&r.gaussian_match().unwrap(), 200_000, 2, 1).unwrap();
        let e = mu_hat(&u, &v, &RectangleFamily::PooledCorners).unwrap();
        let exact = oracle::exact_mu_atomic_vs_gaussian(&AtomicLaw::rademacher(), &CovarianceSpec::identity(1))
            .unwrap();
        assert!((exact.value - 0.341344746).abs() < 1e-8);
        assert!((e.value - exact.value).abs() <= exact.gap_bound + 3.0 * e.std_error, "{e:?}");
    }

    #[test]
    fn atomic_pair_matches_oracle() {
        let a = atomic(
            &[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 2.0]],
            &[0.3, 0.2, 0.25, 0.25],
        );
        let b = atomic(&[vec![0.0, 1.0], vec![1.0, 1.0], vec![2.0, 0.0]], &[0.4, 0.35, 0.25]);
        let exact = match (&a, &b) {
            (DistributionSpec::Atomic { atoms: x }, DistributionSpec::Atomic { atoms: y }) => {
                oracle::exact_mu_atomic(x, y).unwrap()
            }
            _ => unreachable!(),
        };
        let u = sample(&a, 50_000, 3, 0).unwrap();
        let v = sample(&b, 50_000, 3, 1).unwrap();
        let e = mu_hat(&u, &v, &RectangleFamily::PooledCorners).unwrap();
        assert!((e.value - exact).abs() <= 3.0 * e.std_error, "{} vs {exact}", e.value);
    }

    #[test]
    fn homogeneity_and_antisymmetry_are_bit_exact() {
        let spec = DistributionSpec::multiplier_default(2);
        let u = sample(&spec, 3000, 4, 0).unwrap();
        let v = sample(&spec.gaussian_match().unwrap(), 3000, 4, 1).unwrap();
        for rects in [RectangleFamily::PooledCorners, RectangleFamily::QuantileGrid { k: 8 }] {
            let base = mu_hat(&u, &v, &rects).unwrap().value;
            assert_eq!(mu_hat(&v, &u, &rects).unwrap().value, base);
            assert_eq!(mu_hat(&u.scaled(3.0), &v.scaled(3.0), &rects).unwrap().value, base);
        }
        let fixed = vec![vec![0.0, 0.0], vec![1.0, -0.5]];
        let scaled: Vec<Vec<f64>> = fixed.iter().map(|c| c.iter().map(|x| 3.0 * x).collect()).collect();
        let a = mu_hat(&u, &v, &RectangleFamily::Fixed { corners: fixed }).unwrap().value;
        let b = mu_hat(&u.scaled(3.0), &v.scaled(3.0), &RectangleFamily::Fixed { corners: scaled })
            .unwrap()
            .value;
        assert_eq!(a, b);
    }

    #[test]
    fn errors() {
        let g1 = DistributionSpec::gaussian(CovarianceSpec::identity(1));
        let g2 = DistributionSpec::gaussian(CovarianceSpec::identity(2));
        let a = sample(&g1, 2000, 0, 0).unwrap();
        let b = sample(&g2, 2000, 0, 0).unwrap();
        assert!(matches!(
            mu_hat(&a, &b, &RectangleFamily::PooledCorners),
            Err(EstimatorError::DimMismatch { .. })
        ));
        assert!(matches!(
            mu_hat(&a, &a, &RectangleFamily::Fixed { corners: vec![] }),
            Err(EstimatorError::EmptyFamily)
        ));
        let small = sample(&g1, 10, 0, 0).unwrap();
        assert!(matches!(
            mu_hat(&small, &a, &RectangleFamily::PooledCorners),
            Err(EstimatorError::TooFewRows { .. })
        ));
        assert!(smoothed_mu_hat(&a, &a, 0.0, &RectangleFamily::PooledCorners).is_err());
        assert!(matches!(
            zeta3_lower_hat(&a, &a, &[vec![0.0]]),
            Err(EstimatorError::ZeroFrequency(0))
        ));
    }

    #[test]
    fn quantile_grid_keeps_atoms_and_predecessors() {
        let spec = DistributionSpec::spike(4, 8.0, crate::distributions::SpikeExponent::OneThird);
        let u = normalized_sum(&spec, 8, 20_000, 5, 0).unwrap();
        let v = sample(&spec.gaussian_match().unwrap(), 20_000, 5, 1).unwrap();
        let corners = RectangleFamily::QuantileGrid { k: 8 }.materialize(&u, &v).unwrap();
        match &corners {
            Corners::Grid { axes } => {
                assert!(axes[3].contains(&0.0));
                let below = axes[3].iter().filter(|&&x| x < 0.0).fold(f64::MIN, |m, &x| m.max(x));
                assert!(below > -1e-2);
                assert!(corners.count() <= CORNER_CAP);
            }
            _ => panic!("expected grid"),
        }
        let e = mu_hat(&u, &v, &RectangleFamily::QuantileGrid { k: 8 }).unwrap();
        let bound = 0.5 * oracle::spike_zero_probability(8, 8.0);
        assert!(e.value + 3.0 * e.std_error >= bound, "{e:?} vs {bound}");
    }

    #[test]
    fn axis_subsetting_respects_cap() {
        let spec = DistributionSpec::gaussian(CovarianceSpec::identity(8));
        let u = sample(&spec, 2000, 6, 0).unwrap();
        let v = sample(&spec, 2000, 6, 1).unwrap();
        let c = RectangleFamily::QuantileGrid { k: 16 }.materialize(&u, &v).unwrap();
        match &c {
            Corners::Grid { axes } => {
                assert!(axes.iter().filter(|a| a.len() > 1).count() <= MAX_GRID_AXES);
                assert!(c.count() <= CORNER_CAP);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn standard_error_shrinks_with_rows() {
        let spec = DistributionSpec::sub_gaussian_product(1);
        let g = spec.gaussian_match().unwrap();
        let se = |rows, s| {
            let u = sample(&spec, rows, s, 0).unwrap();
            let v = sample(&g, rows, s, 1).unwrap();
            mu_hat(&u, &v, &RectangleFamily::QuantileGrid { k: 32 }).unwrap().std_error
        };
        let mut ratios = Vec::new();
        for s in 0..5 {
            ratios.push(se(16_000, s) / se(4000, s));
        }
        ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(ratios[2] > 0.35 && ratios[2] < 0.7, "{ratios:?}");
    }

    #[test]
    fn smoothing_examples() {
        let spec = DistributionSpec::Product {
            coordinates: vec![UnivariateLaw::Rademacher],
        };
        let u = sample(&spec, 5000, 7, 0).unwrap();
        let v = sample(&spec.gaussian_match().unwrap(), 5000, 7, 1).unwrap();
        let rects = RectangleFamily::QuantileGrid { k: 32 };
        let big = smoothed_mu_hat(&u, &v, 1e3 * 4.0, &rects).unwrap();
        assert!(big.value <= 0.01);
        let same = smoothed_mu_hat(&u, &u.scaled(1.0), 0.1, &rects).unwrap();
        assert_eq!(same.value, 0.0);
        // More smoothing, smaller distance.
        let ladder: Vec<EstimateWithCI> = [0.05, 0.1, 0.2, 0.4, 0.8]
            .iter()
            .map(|&e| smoothed_mu_hat(&u, &v, e, &rects).unwrap())
            .collect();
        for w in ladder.windows(2) {
            assert!(w[1].value <= w[0].value + 3.0 * (w[0].std_error + w[1].std_error));
        }
        let exact = oracle::exact_mu_atomic_vs_gaussian(&AtomicLaw::rademacher(), &CovarianceSpec::identity(1))
            .unwrap()
            .value;
        assert!(ladder[0].value <= exact + 3.0 * ladder[0].std_error);
    }

    #[test]
    fn zeta3_scaling_is_exact_for_powers_of_two() {
        let spec = DistributionSpec::sub_gaussian_product(2);
        let u = sample(&spec, 2000, 8, 0).unwrap();
        let v = sample(&spec.gaussian_match().unwrap(), 2000, 8, 1).unwrap();
        let grid = default_frequency_grid(2, 1);
        let halved: Vec<Vec<f64>> = grid.iter().map(|t| t.iter().map(|x| x / 2.0).collect()).collect();
        let a = zeta3_lower_hat(&u, &v, &grid).unwrap();
        let b = zeta3_lower_hat(&u.scaled(2.0), &v.scaled(2.0), &halved).unwrap();
        assert_eq!(b.value, 8.0 * a.value);
        let same = zeta3_lower_hat(&u, &u.scaled(1.0), &grid).unwrap();
        assert!(same.contains(0.0));
    }

    #[test]
    fn frequency_grid_shape() {
        let g = default_frequency_grid(3, 9);
        assert_eq!(g.len(), 128);
        let l1: f64 = g[1].iter().map(|x| x.abs()).sum();
        assert!((l1 - 1.0).abs() < 1e-12);
        assert_eq!(g, default_frequency_grid(3, 9));
    }

    #[test]
    fn pseudo_moment_examples() {
        let r = DistributionSpec::Product {
            coordinates: vec![UnivariateLaw::Rademacher],
        };
        let e = pseudo_moment_hat(&r, 3, 1000, 0, 0).unwrap();
        let expect = 1.0 + 2.0 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((e.value - expect).abs() < 1e-12 && (e.value - 2.5958).abs() < 1e-4);
        assert_eq!(e.method, Method::Exact);
        let zero = atomic(&[vec![0.0, 0.0]], &[1.0]);
        assert_eq!(pseudo_moment_hat(&zero, 1, 1000, 0, 0).unwrap().value, 0.0);
        let g = DistributionSpec::gaussian(CovarianceSpec::identity(3));
        assert_eq!(pseudo_moment_hat(&g, 3, 1000, 0, 0).unwrap().value, 0.0);
        let spike = DistributionSpec::spike(1, 100.0, crate::distributions::SpikeExponent::OneHalf);
        let s = pseudo_moment_hat(&spike, 3, 1000, 0, 0).unwrap();
        assert!((s.value - (10.0 + expect - 1.0)).abs() < 1e-9);
        let m = pseudo_moment_hat(&DistributionSpec::multiplier_default(3), 1, 20_000, 0, 0).unwrap();
        assert_eq!(m.method, Method::SingularMoment);
        assert!(m.std_error > 0.0 && m.contains(m.value));
        assert!(pseudo_moment_hat(&r, 2, 10, 0, 0).is_err());
    }

    #[test]
    fn rate_fit_examples() {
        let f = rate_fit(&[(4.0, 0.5), (16.0, 0.25), (64.0, 0.125)]).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
        let f = rate_fit(&[(2.0, 1.5), (5.0, 0.6), (9.0, 1.5 * 2.0 / 9.0)]).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12);
        assert!(rate_fit(&[(1.0, 1.0), (2.0, 0.5)]).is_err());
        assert!(rate_fit(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
    }

    #[test]
    fn workers_do_not_change_estimates() {
        let spec = DistributionSpec::sub_gaussian_product(2);
        let u = sample(&spec, 3000, 10, 0).unwrap();
        let v = sample(&spec.gaussian_match().unwrap(), 3000, 10, 1).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| mu_hat(&u, &v, &RectangleFamily::QuantileGrid { k: 16 }).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
