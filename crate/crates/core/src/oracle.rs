//! Exact computations on finitely supported laws.
//!
//! These are the ground truth for the Monte-Carlo estimators: the rectangle
//! metric between two atomic laws, the rectangle metric between an atomic law
//! and a product Gaussian, exact convolutions, and pseudo-moments.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::distributions::DistributionSpec;
use crate::grid;
use crate::matrix::CovarianceSpec;
use crate::normal;

/// Coordinates closer than this are the same atom.
pub const MERGE_TOL: f64 = 1e-12;
/// Largest atom count an [`AtomicLaw`] may hold.
pub const ATOM_GUARD: usize = 1_000_000;
/// Largest pairwise product a single convolution may enumerate.
pub const PAIR_GUARD: usize = 100_000_000;
/// Largest candidate-corner grid scanned by the exact metric.
pub const GRID_GUARD: usize = 100_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("invalid atomic law: {0}")]
    InvalidLaw(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("{what} count {count} exceeds guard {limit}")]
    TooLarge {
        what: &'static str,
        count: usize,
        limit: usize,
    },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: Vec<f64>,
    pub mass: f64,
}

/// A probability law with finitely many atoms, kept in lexicographic order of
/// the atom points.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicLaw {
    dim: usize,
    atoms: Vec<Atom>,
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// Snaps every coordinate to the smallest member of its 1e-12 cluster on that
/// axis, then merges identical points. Zero-mass entries are dropped; signed
/// masses are allowed so the same routine serves signed differences.
fn canonicalize(dim: usize, mut atoms: Vec<Atom>) -> Vec<Atom> {
    for axis in 0..dim {
        // -0.0 + 0.0 == +0.0, so signed zeros share one representative.
        for atom in &mut atoms {
            atom.point[axis] += 0.0;
        }
        let mut values: Vec<f64> = atoms.iter().map(|a| a.point[axis]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let mut reps = Vec::with_capacity(values.len());
        let mut current = values.first().copied().unwrap_or(0.0);
        let mut prev = current;
        for &v in &values {
            if v - prev > MERGE_TOL {
                current = v;
            }
            reps.push(current);
            prev = v;
        }
        for atom in &mut atoms {
            let k = values
                .binary_search_by(|v| v.total_cmp(&atom.point[axis]))
                .expect("value present");
            atom.point[axis] = reps[k];
        }
    }
    atoms.sort_by(|a, b| lex_cmp(&a.point, &b.point));
    let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
    for atom in atoms {
        match merged.last_mut() {
            Some(last) if last.point == atom.point => last.mass += atom.mass,
            _ => merged.push(atom),
        }
    }
    merged.retain(|a| a.mass != 0.0);
    merged
}

impl AtomicLaw {
    /// Validates a list of atoms: positive masses summing to one, finite
    /// pairwise-distinct points of a common dimension.
    pub fn new(atoms: Vec<Atom>) -> Result<Self, OracleError> {
        let dim = atoms
            .first()
            .map(|a| a.point.len())
            .ok_or_else(|| OracleError::InvalidLaw("no atoms".into()))?;
        if dim == 0 {
            return Err(OracleError::InvalidLaw("zero-dimensional points".into()));
        }
        if atoms.len() > ATOM_GUARD {
            return Err(OracleError::TooLarge {
                what: "atom",
                count: atoms.len(),
                limit: ATOM_GUARD,
            });
        }
        let mut total = 0.0;
        for a in &atoms {
            if a.point.len() != dim {
                return Err(OracleError::DimMismatch(dim, a.point.len()));
            }
            if !(a.mass > 0.0 && a.mass.is_finite()) {
                return Err(OracleError::InvalidLaw(format!("mass {} is not positive", a.mass)));
            }
            if a.point.iter().any(|x| !x.is_finite()) {
                return Err(OracleError::InvalidLaw("non-finite atom".into()));
            }
            total += a.mass;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(OracleError::InvalidLaw(format!("masses sum to {total}")));
        }
        let mut atoms = atoms;
        atoms.sort_by(|a, b| lex_cmp(&a.point, &b.point));
        if atoms.windows(2).any(|w| w[0].point == w[1].point) {
            return Err(OracleError::InvalidLaw("repeated atom point".into()));
        }
        Ok(Self { dim, atoms })
    }

    /// Like [`AtomicLaw::new`] but first merges coincident points.
    pub fn merged(atoms: Vec<Atom>) -> Result<Self, OracleError> {
        let dim = atoms.first().map(|a| a.point.len()).unwrap_or(0);
        if atoms.iter().any(|a| a.point.len() != dim) {
            return Err(OracleError::InvalidLaw("mixed dimensions".into()));
        }
        Self::new(canonicalize(dim, atoms))
    }

    pub fn from_pairs(points: &[Vec<f64>], masses: &[f64]) -> Result<Self, OracleError> {
        if points.len() != masses.len() {
            return Err(OracleError::InvalidLaw("points and masses differ in length".into()));
        }
        Self::merged(
            points
                .iter()
                .zip(masses)
                .map(|(p, &m)| Atom { point: p.clone(), mass: m })
                .collect(),
        )
    }

    pub fn dirac(point: Vec<f64>) -> Self {
        Self::new(vec![Atom { point, mass: 1.0 }]).expect("valid dirac")
    }

    /// Fair ±1 coin in one dimension.
    pub fn rademacher() -> Self {
        Self::from_pairs(&[vec![-1.0], vec![1.0]], &[0.5, 0.5]).expect("valid")
    }

    /// One-dimensional three-point law: 0 with probability `1 − 1/γ`,
    /// `±γ^exponent` with probability `1/(2γ)` each.
    pub fn spike(gamma: f64, exponent: f64) -> Result<Self, OracleError> {
        if !(gamma >= 1.0) || !gamma.is_finite() {
            return Err(OracleError::InvalidLaw(format!("gamma {gamma} must be >= 1")));
        }
        let h = gamma.powf(exponent);
        let tail = 1.0 / (2.0 * gamma);
        let atoms: Vec<Atom> = [(-h, tail), (0.0, 1.0 - 1.0 / gamma), (h, tail)]
            .into_iter()
            .filter(|&(_, m)| m > 0.0)
            .map(|(x, m)| Atom { point: vec![x], mass: m })
            .collect();
        Self::merged(atoms)
    }

    /// Law of independent coordinates with the given one-dimensional laws.
    pub fn product(coords: &[AtomicLaw]) -> Result<Self, OracleError> {
        let total: usize = coords
            .iter()
            .try_fold(1usize, |acc, c| acc.checked_mul(c.len()))
            .unwrap_or(usize::MAX);
        if total > ATOM_GUARD {
            return Err(OracleError::TooLarge {
                what: "atom",
                count: total,
                limit: ATOM_GUARD,
            });
        }
        let mut atoms = vec![Atom { point: Vec::new(), mass: 1.0 }];
        for c in coords {
            let mut next = Vec::with_capacity(atoms.len() * c.len());
            for a in &atoms {
                for b in &c.atoms {
                    let mut point = a.point.clone();
                    point.extend_from_slice(&b.point);
                    next.push(Atom { point, mass: a.mass * b.mass });
                }
            }
            atoms = next;
        }
        Self::merged(atoms)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for a in &self.atoms {
            for (mj, xj) in m.iter_mut().zip(&a.point) {
                *mj += a.mass * xj;
            }
        }
        m
    }

    /// `E[X Xᵀ]`, row-major.
    pub fn second_moment(&self) -> Vec<f64> {
        let p = self.dim;
        let mut s = vec![0.0; p * p];
        for a in &self.atoms {
            for i in 0..p {
                for j in 0..p {
                    s[i * p + j] += a.mass * a.point[i] * a.point[j];
                }
            }
        }
        s
    }

    /// `E‖X‖_∞^order`.
    pub fn abs_moment(&self, order: u32) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.mass * sup_norm(&a.point).powi(order as i32))
            .sum()
    }

    /// Image under `x ↦ t·x`.
    pub fn scale(&self, t: f64) -> Self {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                point: a.point.iter().map(|x| x * t).collect(),
                mass: a.mass,
            })
            .collect();
        if t > 0.0 {
            // Order is preserved and no new coincidences can appear.
            Self { dim: self.dim, atoms }
        } else {
            Self::merged(atoms).expect("scaling keeps a valid law")
        }
    }

    /// `P(X ⪯ r)`, or `P(X ≺ r)` coordinate-wise strict when `strict`.
    pub fn cdf(&self, r: &[f64], strict: bool) -> f64 {
        self.atoms
            .iter()
            .filter(|a| {
                a.point
                    .iter()
                    .zip(r)
                    .all(|(x, y)| if strict { x < y } else { x <= y })
            })
            .map(|a| a.mass)
            .sum()
    }

    /// Draws an atom index by inversion.
    pub fn draw_index<R: Rng + ?Sized>(&self, cumulative: &[f64], rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
        cumulative.partition_point(|&c| c <= u).min(self.atoms.len() - 1)
    }

    pub fn cumulative_masses(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.atoms
            .iter()
            .map(|a| {
                acc += a.mass;
                acc
            })
            .collect()
    }
}

impl Serialize for AtomicLaw {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.atoms.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for AtomicLaw {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let atoms = Vec::<Atom>::deserialize(deserializer)?;
        AtomicLaw::new(atoms).map_err(serde::de::Error::custom)
    }
}

#[inline]
pub fn sup_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Law of `X + Y` for independent `X ~ a`, `Y ~ b`.
pub fn convolve(a: &AtomicLaw, b: &AtomicLaw) -> Result<AtomicLaw, OracleError> {
    if a.dim != b.dim {
        return Err(OracleError::DimMismatch(a.dim, b.dim));
    }
    let pairs = a.len().saturating_mul(b.len());
    if pairs > PAIR_GUARD {
        return Err(OracleError::TooLarge {
            what: "convolution pair",
            count: pairs,
            limit: PAIR_GUARD,
        });
    }
    let mut atoms = Vec::with_capacity(pairs);
    for x in &a.atoms {
        for y in &b.atoms {
            atoms.push(Atom {
                point: x.point.iter().zip(&y.point).map(|(u, v)| u + v).collect(),
                mass: x.mass * y.mass,
            });
        }
    }
    let merged = canonicalize(a.dim, atoms);
    if merged.len() > ATOM_GUARD {
        return Err(OracleError::TooLarge {
            what: "atom",
            count: merged.len(),
            limit: ATOM_GUARD,
        });
    }
    // Renormalize away rounding drift in the product masses.
    let total: f64 = merged.iter().map(|a| a.mass).sum();
    let atoms = merged
        .into_iter()
        .map(|a| Atom { point: a.point, mass: a.mass / total })
        .collect();
    Ok(AtomicLaw { dim: a.dim, atoms })
}

/// `n`-fold convolution power by repeated squaring.
pub fn convolve_power(a: &AtomicLaw, n: u64) -> Result<AtomicLaw, OracleError> {
    if n == 0 {
        return Ok(AtomicLaw::dirac(vec![0.0; a.dim]));
    }
    let mut result: Option<AtomicLaw> = None;
    let mut base = a.clone();
    let mut k = n;
    loop {
        if k & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => convolve(&r, &base)?,
            });
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        base = convolve(&base, &base)?;
    }
    Ok(result.expect("n >= 1"))
}

/// Exact law of `n^{-1/2}(X_1 + … + X_n)` for i.i.d. `X_i ~ a`.
pub fn normalized_sum_law(a: &AtomicLaw, n: u64) -> Result<AtomicLaw, OracleError> {
    Ok(convolve_power(a, n)?.scale(1.0 / (n as f64).sqrt()))
}

/// Sorted distinct values of coordinate `axis` across the given laws.
fn axis_values(laws: &[&AtomicLaw], axis: usize) -> Vec<f64> {
    let mut v: Vec<f64> = laws
        .iter()
        .flat_map(|l| l.atoms.iter().map(move |a| a.point[axis]))
        .collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn axis_position(values: &[f64], x: f64) -> usize {
    values
        .binary_search_by(|v| v.total_cmp(&x))
        .expect("value on axis grid")
}

/// Exact rectangle metric `sup_r |P_a(X ⪯ r) − P_b(X ⪯ r)|` between two
/// atomic laws.
///
/// Both distribution functions are constant on every cell
/// `[v_{i_1}, v_{i_1+1}) × … ` of the pooled coordinate grid and vanish below
/// it, so the supremum is a maximum over the grid corners themselves; the
/// strict ("r minus an infinitesimal") evaluations coincide with the
/// neighbouring corner and add nothing.
pub fn exact_mu_atomic(a: &AtomicLaw, b: &AtomicLaw) -> Result<f64, OracleError> {
    if a.dim != b.dim {
        return Err(OracleError::DimMismatch(a.dim, b.dim));
    }
    let axes: Vec<Vec<f64>> = (0..a.dim).map(|j| axis_values(&[a, b], j)).collect();
    let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
    let cells = grid::cell_count(&shape).filter(|&c| c <= GRID_GUARD).ok_or(OracleError::TooLarge {
        what: "candidate corner",
        count: grid::cell_count(&shape).unwrap_or(usize::MAX),
        limit: GRID_GUARD,
    })?;
    let strides = grid::strides(&shape);
    let mut fa = vec![0.0; cells];
    let mut fb = vec![0.0; cells];
    let mut idx = vec![0usize; a.dim];
    for (law, target) in [(a, &mut fa), (b, &mut fb)] {
        for atom in &law.atoms {
            for (j, x) in atom.point.iter().enumerate() {
                idx[j] = axis_position(&axes[j], *x);
            }
            target[grid::flat_index(&strides, &idx)] += atom.mass;
        }
    }
    grid::cumulate(&shape, &mut fa);
    grid::cumulate(&shape, &mut fb);
    Ok(fa
        .iter()
        .zip(&fb)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs())))
}

/// Result of the atomic-versus-Gaussian metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedSup {
    pub value: f64,
    /// Upper bound on `true sup − value` from grid discretization. The
    /// cell-corner scan is exact, so this is zero up to rounding.
    pub gap_bound: f64,
}

/// Exact rectangle metric between an atomic law and `N(0, Σ)` with diagonal Σ.
///
/// On each cell of the atom grid the atomic distribution function is constant
/// while the Gaussian one is nondecreasing in every coordinate, so the signed
/// difference is extremal at the cell's lowest corner (closed) or at the left
/// limit of its highest corner. Scanning those two values over all cells,
/// including the unbounded ones, gives the supremum exactly.
pub fn exact_mu_atomic_vs_gaussian(
    a: &AtomicLaw,
    cov: &CovarianceSpec<f64>,
) -> Result<MixedSup, OracleError> {
    if cov.dim() != a.dim {
        return Err(OracleError::DimMismatch(a.dim, cov.dim()));
    }
    if !cov.is_diagonal() {
        return Err(OracleError::Unsupported(
            "non-diagonal covariance; use the Monte-Carlo estimator".into(),
        ));
    }
    let sds: Vec<f64> = cov.diag().iter().map(|v| v.sqrt()).collect();
    let axes: Vec<Vec<f64>> = (0..a.dim).map(|j| axis_values(&[a], j)).collect();

    // Per axis, index 0 is the cell below every atom value.
    let shape: Vec<usize> = axes.iter().map(|v| v.len() + 1).collect();
    let cells = grid::cell_count(&shape).filter(|&c| c <= GRID_GUARD).ok_or(OracleError::TooLarge {
        what: "candidate corner",
        count: grid::cell_count(&shape).unwrap_or(usize::MAX),
        limit: GRID_GUARD,
    })?;
    let strides = grid::strides(&shape);
    let mut fa = vec![0.0; cells];
    let mut idx = vec![0usize; a.dim];
    for atom in &a.atoms {
        for (j, x) in atom.point.iter().enumerate() {
            idx[j] = axis_position(&axes[j], *x) + 1;
        }
        fa[grid::flat_index(&strides, &idx)] += atom.mass;
    }
    grid::cumulate(&shape, &mut fa);

    // Gaussian marginal CDF at the lower corner (closed) and at the upper
    // corner (left limit) of every cell.
    let closed = |sd: f64, x: f64| {
        if sd > 0.0 {
            normal::cdf(x / sd)
        } else if x >= 0.0 {
            1.0
        } else {
            0.0
        }
    };
    let open = |sd: f64, x: f64| {
        if sd > 0.0 {
            normal::cdf(x / sd)
        } else if x > 0.0 {
            1.0
        } else {
            0.0
        }
    };
    let lower: Vec<Vec<f64>> = axes
        .iter()
        .zip(&sds)
        .map(|(vals, &sd)| {
            std::iter::once(0.0)
                .chain(vals.iter().map(|&x| closed(sd, x)))
                .collect()
        })
        .collect();
    let upper: Vec<Vec<f64>> = axes
        .iter()
        .zip(&sds)
        .map(|(vals, &sd)| {
            vals.iter()
                .map(|&x| open(sd, x))
                .chain(std::iter::once(1.0))
                .collect()
        })
        .collect();

    let mut best = 0.0f64;
    grid::for_each_index(&shape, |i| {
        let f = fa[grid::flat_index(&strides, i)];
        let lo: f64 = i.iter().enumerate().map(|(j, &k)| lower[j][k]).product();
        let hi: f64 = i.iter().enumerate().map(|(j, &k)| upper[j][k]).product();
        best = best.max(f - lo).max(hi - f);
    });
    Ok(MixedSup {
        value: best,
        gap_bound: 0.0,
    })
}

/// Pseudo-moment `∫ ‖x‖_∞^order |P_a − P_b|(dx)` between two atomic laws.
pub fn exact_pseudo_moment(a: &AtomicLaw, b: &AtomicLaw, order: u32) -> Result<f64, OracleError> {
    if a.dim != b.dim {
        return Err(OracleError::DimMismatch(a.dim, b.dim));
    }
    let signed: Vec<Atom> = a
        .atoms
        .iter()
        .cloned()
        .chain(b.atoms.iter().map(|x| Atom {
            point: x.point.clone(),
            mass: -x.mass,
        }))
        .collect();
    Ok(canonicalize(a.dim, signed)
        .iter()
        .fold(0.0, |acc, x| acc + x.mass.abs() * sup_norm(&x.point).powi(order as i32)))
}

/// `E‖Y‖_∞^order` for `Y ~ N(0, diag(sds²))`.
///
/// Closed form in one dimension; otherwise composite Simpson quadrature of
/// `order·t^{order−1} P(‖Y‖_∞ > t)` on `[0, T]` with `T` far in the tail.
pub fn gaussian_sup_norm_moment(sds: &[f64], order: u32) -> f64 {
    let active: Vec<f64> = sds.iter().copied().filter(|&s| s > 0.0).collect();
    if active.is_empty() {
        return 0.0;
    }
    if active.len() == 1 {
        let s = active[0];
        let c = (2.0 / std::f64::consts::PI).sqrt();
        return match order {
            1 => s * c,
            2 => s * s,
            3 => 2.0 * c * s * s * s,
            k => {
                // E|Z|^k = 2^{k/2} Γ((k+1)/2) / √π
                let kf = k as f64;
                s.powi(k as i32) * 2f64.powf(kf / 2.0) * libm::tgamma((kf + 1.0) / 2.0)
                    / std::f64::consts::PI.sqrt()
            }
        };
    }
    let s_max = active.iter().fold(0.0f64, |m, &s| m.max(s));
    let upper = s_max * ((2.0 * (active.len() as f64).ln()).sqrt() + 40f64.sqrt());
    let tail = |t: f64| -> f64 {
        // P(max |Y_j| > t) = 1 − Π (1 − 2 sf(t/s_j)), computed via log1p.
        let log_inside: f64 = active
            .iter()
            .map(|&s| libm::log1p(-2.0 * normal::sf(t / s)))
            .sum();
        -libm::expm1(log_inside)
    };
    simpson(|t| order as f64 * t.powi(order as i32 - 1) * tail(t), 0.0, upper, 20_000)
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let h = (b - a) / intervals as f64;
    let mut acc = f(a) + f(b);
    for k in 1..intervals {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// `E‖X‖_∞^order` for the spike law in dimension `p`: `p − 1` standard
/// normal coordinates and one coordinate equal to `±γ^exponent` with
/// probability `1/(2γ)` each, else 0.
pub fn spike_sup_norm_moment(p: usize, gamma: f64, exponent: f64, order: u32) -> f64 {
    assert!(p >= 1 && gamma >= 1.0);
    let height = gamma.powf(exponent);
    let q = 1.0 / gamma;
    let normals = p - 1;
    let without_spike = gaussian_sup_norm_moment(&vec![1.0; normals], order);
    // E max(M, h)^k = h^k + ∫_h^∞ k t^{k−1} P(M > t) dt, M the normal block.
    let upper = (2.0 * (normals as f64 + 1.0).ln()).sqrt() + 40f64.sqrt();
    let above = if normals == 0 || height >= upper {
        0.0
    } else {
        let tail = |t: f64| -libm::expm1(normals as f64 * libm::log1p(-2.0 * normal::sf(t)));
        simpson(
            |t| order as f64 * t.powi(order as i32 - 1) * tail(t),
            height,
            upper,
            20_000,
        )
    };
    (1.0 - q) * without_spike + q * (height.powi(order as i32) + above)
}

/// `ν_order(X, Y)` for an atomic `X` and its moment-matched Gaussian `Y`.
///
/// The two laws are mutually singular, so the pseudo-moment is the sum of
/// the two absolute moments; the Gaussian part is exact when the matched
/// covariance is diagonal (always the case for product laws).
pub fn pseudo_moment_vs_gaussian(spec: &DistributionSpec, order: u32) -> Result<f64, OracleError> {
    if let DistributionSpec::Spike13 { p, gamma } | DistributionSpec::Spike12 { p, gamma } = spec {
        let exponent = if spec.tag() == "spike13" { 1.0 / 3.0 } else { 0.5 };
        let mut sds = vec![1.0; *p];
        sds[p - 1] = gamma.powf(exponent - 0.5);
        return Ok(spike_sup_norm_moment(*p, *gamma, exponent, order) + gaussian_sup_norm_moment(&sds, order));
    }
    let law = spec
        .atomic_law()
        .ok_or_else(|| OracleError::Unsupported(format!("{} is not atomic", spec.tag())))?
        .map_err(|e| OracleError::InvalidLaw(e.to_string()))?;
    let cov = spec
        .exact_covariance()
        .map_err(|e| OracleError::InvalidLaw(e.to_string()))?;
    if !cov.is_diagonal() {
        return Err(OracleError::Unsupported(
            "matched Gaussian is not a product law; use the Monte-Carlo estimator".into(),
        ));
    }
    let sds: Vec<f64> = cov.diag().iter().map(|v| v.sqrt()).collect();
    Ok(law.abs_moment(order) + gaussian_sup_norm_moment(&sds, order))
}

/// `P(Σ_{i≤n} X_i = 0)` for i.i.d. three-point spikes with `P(X ≠ 0) = 1/γ`:
/// an even number `k` of nonzero draws, half of each sign.
pub fn spike_zero_probability(n: u64, gamma: f64) -> f64 {
    assert!(n >= 1 && gamma >= 1.0);
    let q = 1.0 / gamma;
    let ln_binom = |n: u64, k: u64| {
        libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
    };
    let mut total = 0.0;
    for k in (0..=n).step_by(2) {
        let mut log_term = ln_binom(n, k) + ln_binom(k, k / 2) - k as f64 * std::f64::consts::LN_2;
        if k > 0 {
            log_term += k as f64 * q.ln();
        }
        if n > k {
            if q >= 1.0 {
                continue;
            }
            log_term += (n - k) as f64 * libm::log1p(-q);
        }
        total += log_term.exp();
    }
    total.min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law1(points: &[f64], masses: &[f64]) -> AtomicLaw {
        AtomicLaw::from_pairs(&points.iter().map(|&x| vec![x]).collect::<Vec<_>>(), masses).unwrap()
    }

    #[test]
    fn validation_rejects_bad_laws() {
        assert!(AtomicLaw::new(vec![]).is_err());
        assert!(AtomicLaw::new(vec![Atom { point: vec![0.0], mass: 0.5 }]).is_err());
        assert!(AtomicLaw::new(vec![
            Atom { point: vec![0.0], mass: 0.5 },
            Atom { point: vec![0.0], mass: 0.5 }
        ])
        .is_err());
        assert!(AtomicLaw::new(vec![
            Atom { point: vec![0.0], mass: 1.5 },
            Atom { point: vec![1.0], mass: -0.5 }
        ])
        .is_err());
    }

    #[test]
    fn convolution_examples() {
        let r = AtomicLaw::rademacher();
        let delta = AtomicLaw::dirac(vec![0.0]);
        assert_eq!(convolve(&delta, &r).unwrap(), r);
        let rr = convolve(&r, &r).unwrap();
        assert_eq!(rr, law1(&[-2.0, 0.0, 2.0], &[0.25, 0.5, 0.25]));

        let a = AtomicLaw::from_pairs(&[vec![0.0, 0.0], vec![1.0, 0.0]], &[0.5, 0.5]).unwrap();
        let b = AtomicLaw::from_pairs(&[vec![0.0, 0.0], vec![0.0, 3.0]], &[0.5, 0.5]).unwrap();
        assert_eq!(convolve(&a, &b).unwrap().len(), 4);
    }

    #[test]
    fn near_coincident_points_merge() {
        let a = law1(&[0.1, 0.2], &[0.5, 0.5]);
        let b = law1(&[0.2, 0.1], &[0.5, 0.5]);
        // 0.1 + 0.2 and 0.2 + 0.1 agree only up to rounding.
        assert_eq!(convolve(&a, &b).unwrap().len(), 3);
    }

    #[test]
    fn convolution_guard() {
        let big = AtomicLaw::from_pairs(
            &(0..20_000).map(|i| vec![i as f64]).collect::<Vec<_>>(),
            &vec![1.0 / 20_000.0; 20_000],
        );
        let big = big.unwrap();
        assert!(matches!(convolve(&big, &big), Err(OracleError::TooLarge { .. })));
    }

    #[test]
    fn scale_examples() {
        let r = AtomicLaw::rademacher();
        assert_eq!(r.scale(1.0), r);
        assert_eq!(r.scale(2.0), law1(&[-2.0, 2.0], &[0.5, 0.5]));
        let skew = law1(&[-1.0, 2.0], &[0.25, 0.75]);
        assert_eq!(skew.scale(-1.0), law1(&[-2.0, 1.0], &[0.75, 0.25]));
    }

    #[test]
    fn mu_examples() {
        let r = AtomicLaw::rademacher();
        assert_eq!(exact_mu_atomic(&r, &r).unwrap(), 0.0);
        let delta = AtomicLaw::dirac(vec![0.0]);
        assert_eq!(exact_mu_atomic(&r, &delta).unwrap(), 0.5);
        let r2 = AtomicLaw::product(&[r.clone(), r.clone()]).unwrap();
        let d2 = AtomicLaw::dirac(vec![0.0, 0.0]);
        assert_eq!(exact_mu_atomic(&r2, &d2).unwrap(), 0.75);
    }

    #[test]
    fn mixed_examples() {
        let delta = AtomicLaw::dirac(vec![0.0]);
        let id = CovarianceSpec::identity(1);
        assert!((exact_mu_atomic_vs_gaussian(&delta, &id).unwrap().value - 0.5).abs() < 1e-15);
        let r = AtomicLaw::rademacher();
        let expect = 0.5 - normal::cdf(-1.0);
        assert!((exact_mu_atomic_vs_gaussian(&r, &id).unwrap().value - expect).abs() < 1e-15);
        let full = CovarianceSpec::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let r2 = AtomicLaw::product(&[r.clone(), r]).unwrap();
        assert!(matches!(
            exact_mu_atomic_vs_gaussian(&r2, &full),
            Err(OracleError::Unsupported(_))
        ));
    }

    /// Dense scan of `|F_a(r) − Φ(r)|` over a fine 1-d grid.
    #[test]
    fn mixed_agrees_with_dense_scan() {
        let a = law1(&[-1.3, 0.2, 0.9], &[0.2, 0.5, 0.3]);
        let sd = 0.8;
        let exact = exact_mu_atomic_vs_gaussian(&a, &CovarianceSpec::diagonal(&[sd * sd]).unwrap())
            .unwrap()
            .value;
        let mut dense = 0.0f64;
        for k in 0..=200_000 {
            let r = -5.0 + k as f64 * 1e-4 / 2.0;
            dense = dense.max((a.cdf(&[r], false) - normal::cdf(r / sd)).abs());
        }
        assert!(dense <= exact + 1e-12);
        assert!(exact - dense < 1e-4);
    }

    #[test]
    fn spike_lattice_lower_bound() {
        let two = AtomicLaw::spike(2.0, 1.0 / 3.0).unwrap();
        let sum = normalized_sum_law(&two, 2).unwrap();
        let var = 2f64.powf(-1.0 / 3.0);
        let v = exact_mu_atomic_vs_gaussian(&sum, &CovarianceSpec::diagonal(&[var]).unwrap())
            .unwrap()
            .value;
        assert!(v >= 0.1875);
    }

    #[test]
    fn pseudo_moment_examples() {
        let r = AtomicLaw::rademacher();
        assert_eq!(exact_pseudo_moment(&r, &r, 3).unwrap(), 0.0);
        let d1 = AtomicLaw::dirac(vec![1.0]);
        let d2 = AtomicLaw::dirac(vec![2.0]);
        assert_eq!(exact_pseudo_moment(&d1, &d2, 3).unwrap(), 9.0);
        let a = law1(&[1.0, 3.0], &[0.5, 0.5]);
        let b = law1(&[-2.0], &[1.0]);
        let disjoint = a.abs_moment(1) + b.abs_moment(1);
        assert_eq!(exact_pseudo_moment(&a, &b, 1).unwrap(), disjoint);
    }

    #[test]
    fn gaussian_moment_quadrature_matches_closed_form() {
        // Two coordinates, one of them degenerate, reduce to the 1-d formula.
        let c = gaussian_sup_norm_moment(&[1.3], 3);
        assert!((gaussian_sup_norm_moment(&[1.3, 0.0], 3) - c).abs() < 1e-15);
        // Independent oracle for E max(|Z1|,|Z2|): ∫ 1 − (2Φ(t)−1)² dt via a
        // Riemann sum.
        let mut riemann = 0.0;
        let h = 1e-5;
        let mut t = h / 2.0;
        while t < 12.0 {
            let inside = 2.0 * normal::cdf(t) - 1.0;
            riemann += (1.0 - inside * inside) * h;
            t += h;
        }
        assert!((gaussian_sup_norm_moment(&[1.0, 1.0], 1) - riemann).abs() < 1e-9);
    }

    #[test]
    fn spike_sup_norm_moment_examples() {
        // One coordinate: γ^{3/2}/γ = γ^{1/2}.
        assert!((spike_sup_norm_moment(1, 100.0, 0.5, 3) - 10.0).abs() < 1e-12);
        // Two coordinates against a direct Riemann sum over the normal density.
        let (gamma, h) = (4.0, 4f64.powf(1.0 / 3.0));
        let mut with_spike = 0.0;
        let step = 1e-5;
        let mut z = step / 2.0;
        while z < 12.0 {
            with_spike += 2.0 * normal::pdf(z) * z.max(h).powi(3) * step;
            z += step;
        }
        let expect = (1.0 - 1.0 / gamma) * gaussian_sup_norm_moment(&[1.0], 3) + with_spike / gamma;
        let got = spike_sup_norm_moment(2, gamma, 1.0 / 3.0, 3);
        assert!((got - expect).abs() < 1e-8, "{got} vs {expect}");
    }

    #[test]
    fn spike_zero_probability_examples() {
        assert!((spike_zero_probability(2, 2.0) - 0.375).abs() < 1e-15);
        assert!((spike_zero_probability(1, 10.0) - 0.9).abs() < 1e-15);
        assert!(spike_zero_probability(10, 10.0) >= 0.9f64.powi(10));
        assert_eq!(spike_zero_probability(3, 1.0), 0.0);
        assert!((spike_zero_probability(4, 1.0) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn signed_zeros_merge() {
        let law = AtomicLaw::from_pairs(&[vec![0.0, 1.0], vec![-0.0, -1.0]], &[0.5, 0.5]).unwrap();
        let flipped = law.scale(-1.0);
        assert_eq!(exact_pseudo_moment(&law, &flipped, 3).unwrap(), 0.0);
    }
}
