//! Random-vector families with seeded sampling and exact second moments.
//!
//! Config files name a family with the `family` key:
//!
//! | tag          | fields                                   |
//! |--------------|------------------------------------------|
//! | `gaussian`   | `covariance` (array of rows)             |
//! | `spike13`    | `p`, `gamma` (spike height `γ^{1/3}`)    |
//! | `spike12`    | `p`, `gamma` (spike height `γ^{1/2}`)    |
//! | `product`    | `coordinates` (list of univariate laws)  |
//! | `multiplier` | `error`, `base` (univariate laws)        |
//! | `atomic`     | `atoms` (list of `{point, mass}`)        |
//!
//! Univariate laws carry a `kind` key: `standard_normal`, `normal {sd}`,
//! `rademacher`, `student_t {dof}` (rescaled to unit variance), `spike
//! {gamma, exponent}` and `atoms {values, masses}`.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{factor_for_sampling, CovarianceSpec, MatrixError, SamplingFactor};
use crate::oracle::{AtomicLaw, OracleError};
use crate::rng::{block_rng, StreamRng, BLOCK_ROWS};

#[derive(Debug, Error)]
pub enum DistError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("non-finite draw: {0}")]
    NonFinite(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UnivariateLaw {
    StandardNormal,
    Normal { sd: f64 },
    Rademacher,
    /// Student-t with `dof` degrees of freedom, rescaled to unit variance.
    StudentT { dof: f64 },
    Spike { gamma: f64, exponent: f64 },
    Atoms { values: Vec<f64>, masses: Vec<f64> },
}

impl UnivariateLaw {
    fn validate(&self) -> Result<(), DistError> {
        match self {
            Self::Normal { sd } if !(*sd >= 0.0 && sd.is_finite()) => {
                Err(DistError::InvalidParameter(format!("normal sd {sd}")))
            }
            Self::StudentT { dof } if !(*dof > 2.0) => Err(DistError::InvalidParameter(format!(
                "student_t needs dof > 2 for unit variance, got {dof}"
            ))),
            Self::Spike { .. } | Self::Atoms { .. } => self.atomic().transpose().map(|_| ()),
            _ => Ok(()),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Self::StandardNormal | Self::Rademacher | Self::StudentT { .. } => 1.0,
            Self::Normal { sd } => sd * sd,
            Self::Spike { gamma, exponent } => gamma.powf(2.0 * exponent - 1.0),
            Self::Atoms { values, masses } => {
                values.iter().zip(masses).map(|(x, m)| m * x * x).sum()
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Atoms { values, masses } => values.iter().zip(masses).map(|(x, m)| m * x).sum(),
            _ => 0.0,
        }
    }

    /// One-dimensional atomic law, if the law is discrete.
    pub fn atomic(&self) -> Option<Result<AtomicLaw, DistError>> {
        match self {
            Self::Rademacher => Some(Ok(AtomicLaw::rademacher())),
            Self::Spike { gamma, exponent } => {
                Some(AtomicLaw::spike(*gamma, *exponent).map_err(DistError::from))
            }
            Self::Atoms { values, masses } => Some(
                AtomicLaw::from_pairs(&values.iter().map(|&x| vec![x]).collect::<Vec<_>>(), masses)
                    .map_err(DistError::from),
            ),
            Self::Normal { sd } if *sd == 0.0 => Some(Ok(AtomicLaw::dirac(vec![0.0]))),
            _ => None,
        }
    }

    fn is_gaussian(&self) -> bool {
        matches!(self, Self::StandardNormal | Self::Normal { .. })
    }

    /// Point mass at zero.
    fn is_zero(&self) -> bool {
        self.variance() + self.mean() * self.mean() == 0.0
    }
}

/// Exponent of the spike coordinate height `γ^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpikeExponent {
    OneThird,
    OneHalf,
}

impl SpikeExponent {
    pub fn value(self) -> f64 {
        match self {
            Self::OneThird => 1.0 / 3.0,
            Self::OneHalf => 0.5,
        }
    }
}

/// A random-vector law in ℝ^p.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionSpec {
    Gaussian {
        covariance: CovarianceSpec<f64>,
    },
    /// Standard normal coordinates `1..p-1`; coordinate `p` is 0 with
    /// probability `1 − 1/γ` and `±γ^{1/3}` with probability `1/(2γ)` each.
    #[serde(rename = "spike13")]
    Spike13 { p: usize, gamma: f64 },
    /// As `spike13` with spike height `γ^{1/2}`.
    #[serde(rename = "spike12")]
    Spike12 { p: usize, gamma: f64 },
    /// Independent coordinates.
    Product { coordinates: Vec<UnivariateLaw> },
    /// `ξ · X` with a scalar error `ξ` independent of the vector `X`, whose
    /// coordinates are independent.
    Multiplier {
        error: UnivariateLaw,
        base: Vec<UnivariateLaw>,
    },
    /// Arbitrary finitely supported law (not necessarily centered).
    Atomic { atoms: AtomicLaw },
}

impl DistributionSpec {
    pub fn gaussian(covariance: CovarianceSpec<f64>) -> Self {
        Self::Gaussian { covariance }
    }

    pub fn spike(p: usize, gamma: f64, exponent: SpikeExponent) -> Self {
        match exponent {
            SpikeExponent::OneThird => Self::Spike13 { p, gamma },
            SpikeExponent::OneHalf => Self::Spike12 { p, gamma },
        }
    }

    /// Default heavy-tailed multiplier law: unit-variance Student-t(4) error
    /// times Rademacher coordinates. Finite third moment, not sub-Gaussian.
    pub fn multiplier_default(p: usize) -> Self {
        Self::Multiplier {
            error: UnivariateLaw::StudentT { dof: 4.0 },
            base: vec![UnivariateLaw::Rademacher; p],
        }
    }

    /// Default sub-Gaussian product law: alternating Rademacher and standard
    /// normal coordinates.
    pub fn sub_gaussian_product(p: usize) -> Self {
        Self::Product {
            coordinates: (0..p)
                .map(|j| {
                    if j % 2 == 0 {
                        UnivariateLaw::Rademacher
                    } else {
                        UnivariateLaw::StandardNormal
                    }
                })
                .collect(),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Self::Gaussian { .. } => "gaussian",
            Self::Spike13 { .. } => "spike13",
            Self::Spike12 { .. } => "spike12",
            Self::Product { .. } => "product",
            Self::Multiplier { .. } => "multiplier",
            Self::Atomic { .. } => "atomic",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian { covariance } => covariance.dim(),
            Self::Spike13 { p, .. } | Self::Spike12 { p, .. } => *p,
            Self::Product { coordinates } => coordinates.len(),
            Self::Multiplier { base, .. } => base.len(),
            Self::Atomic { atoms } => atoms.dim(),
        }
    }

    fn spike_params(&self) -> Option<(usize, f64, f64)> {
        match self {
            Self::Spike13 { p, gamma } => Some((*p, *gamma, 1.0 / 3.0)),
            Self::Spike12 { p, gamma } => Some((*p, *gamma, 0.5)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), DistError> {
        if self.dim() == 0 {
            return Err(DistError::InvalidParameter("dimension must be >= 1".into()));
        }
        match self {
            Self::Spike13 { gamma, .. } | Self::Spike12 { gamma, .. } => {
                if !(*gamma >= 1.0 && gamma.is_finite()) {
                    return Err(DistError::InvalidParameter(format!("gamma {gamma} must be >= 1")));
                }
            }
            Self::Product { coordinates } => {
                for c in coordinates {
                    c.validate()?;
                }
            }
            Self::Multiplier { error, base } => {
                error.validate()?;
                if error.mean().abs() > 1e-12 {
                    return Err(DistError::InvalidParameter("multiplier error must be centered".into()));
                }
                for c in base {
                    c.validate()?;
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Whether the law is itself Gaussian (so it coincides with its match).
    pub fn is_gaussian(&self) -> bool {
        match self {
            Self::Gaussian { .. } => true,
            Self::Product { coordinates } => coordinates.iter().all(UnivariateLaw::is_gaussian),
            _ => false,
        }
    }

    /// Whether the law is singular with respect to every nondegenerate
    /// Gaussian, which makes pseudo-moments additive.
    pub fn is_singular(&self) -> bool {
        match self {
            Self::Gaussian { .. } => false,
            Self::Spike13 { .. } | Self::Spike12 { .. } | Self::Atomic { .. } => true,
            Self::Product { coordinates } => coordinates.iter().any(|c| c.atomic().is_some() && !c.is_zero()),
            Self::Multiplier { error, base } => {
                let nonzero: Vec<&UnivariateLaw> = base.iter().filter(|c| !c.is_zero()).collect();
                !nonzero.is_empty()
                    && (error.atomic().is_some()
                        || (nonzero.len() >= 2 && nonzero.iter().all(|c| c.atomic().is_some())))
            }
        }
    }

    /// The atomic law, for families that are finitely supported.
    pub fn atomic_law(&self) -> Option<Result<AtomicLaw, DistError>> {
        match self {
            Self::Atomic { atoms } => Some(Ok(atoms.clone())),
            Self::Spike13 { p: 1, gamma } => Some(AtomicLaw::spike(*gamma, 1.0 / 3.0).map_err(Into::into)),
            Self::Spike12 { p: 1, gamma } => Some(AtomicLaw::spike(*gamma, 0.5).map_err(Into::into)),
            Self::Product { coordinates } => {
                let laws: Option<Result<Vec<AtomicLaw>, DistError>> =
                    coordinates.iter().map(UnivariateLaw::atomic).collect();
                laws.map(|r| r.and_then(|l| AtomicLaw::product(&l).map_err(Into::into)))
            }
            _ => None,
        }
    }

    /// `E[X Xᵀ]` in closed form.
    pub fn exact_covariance(&self) -> Result<CovarianceSpec<f64>, DistError> {
        self.validate()?;
        Ok(match self {
            Self::Gaussian { covariance } => covariance.clone(),
            Self::Spike13 { p, gamma } | Self::Spike12 { p, gamma } => {
                let exponent = self.spike_params().expect("spike").2;
                let mut diag = vec![1.0; *p];
                diag[p - 1] = gamma.powf(2.0 * exponent - 1.0);
                CovarianceSpec::diagonal(&diag)?
            }
            Self::Product { coordinates } => {
                let diag: Vec<f64> = coordinates
                    .iter()
                    .map(|c| c.variance() + c.mean() * c.mean())
                    .collect();
                let mut cov = diag_matrix(&diag);
                let means: Vec<f64> = coordinates.iter().map(UnivariateLaw::mean).collect();
                add_outer_offdiag(&mut cov, &means);
                CovarianceSpec::from_row_major(coordinates.len(), cov)?
            }
            Self::Multiplier { error, base } => {
                let e2 = error.variance();
                let diag: Vec<f64> = base
                    .iter()
                    .map(|c| e2 * (c.variance() + c.mean() * c.mean()))
                    .collect();
                let mut cov = diag_matrix(&diag);
                let means: Vec<f64> = base.iter().map(UnivariateLaw::mean).collect();
                let scaled: Vec<f64> = means.iter().map(|m| m * e2.sqrt()).collect();
                add_outer_offdiag(&mut cov, &scaled);
                CovarianceSpec::from_row_major(base.len(), cov)?
            }
            Self::Atomic { atoms } => CovarianceSpec::from_row_major(atoms.dim(), atoms.second_moment())?,
        })
    }

    /// The Gaussian law with the same second moments.
    pub fn gaussian_match(&self) -> Result<DistributionSpec, DistError> {
        Ok(Self::Gaussian {
            covariance: self.exact_covariance()?,
        })
    }
}

fn diag_matrix(diag: &[f64]) -> Vec<f64> {
    let p = diag.len();
    let mut m = vec![0.0; p * p];
    for (i, &d) in diag.iter().enumerate() {
        m[i * p + i] = d;
    }
    m
}

fn add_outer_offdiag(m: &mut [f64], v: &[f64]) {
    let p = v.len();
    for i in 0..p {
        for j in 0..p {
            if i != j {
                m[i * p + j] += v[i] * v[j];
            }
        }
    }
}

/// Row-major draws from a [`DistributionSpec`] with generation metadata.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    data: Vec<f64>,
    rows: usize,
    dim: usize,
    pub seed: u64,
    pub stream_id: u64,
    /// Number of summands behind each row (1 for plain draws).
    pub summands: u64,
    pub spec: Arc<DistributionSpec>,
}

impl SampleBatch {
    pub fn from_rows_unchecked(
        data: Vec<f64>,
        dim: usize,
        seed: u64,
        stream_id: u64,
        summands: u64,
        spec: Arc<DistributionSpec>,
    ) -> Self {
        assert_eq!(data.len() % dim, 0);
        Self {
            rows: data.len() / dim,
            data,
            dim,
            seed,
            stream_id,
            summands,
            spec,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.iter_rows().map(|r| r[j]).collect()
    }

    /// The batch with every entry multiplied by `t`.
    pub fn scaled(&self, t: f64) -> Self {
        Self {
            data: self.data.iter().map(|x| x * t).collect(),
            ..self.clone()
        }
    }
}

/// A prepared per-row sampler.
enum Sampler {
    Gaussian(SamplingFactor<f64>),
    Spike { p: usize, height: f64, prob: f64 },
    Product(Vec<CoordSampler>),
    Multiplier { error: CoordSampler, base: Vec<CoordSampler> },
    Atomic { law: AtomicLaw, cumulative: Vec<f64> },
}

enum CoordSampler {
    Normal(f64),
    Rademacher,
    StudentT { dist: StudentT<f64>, scale: f64 },
    Atoms { values: Vec<f64>, cumulative: Vec<f64>, masses: Vec<f64> },
}

impl CoordSampler {
    fn new(law: &UnivariateLaw) -> Result<Self, DistError> {
        law.validate()?;
        Ok(match law {
            UnivariateLaw::StandardNormal => Self::Normal(1.0),
            UnivariateLaw::Normal { sd } => Self::Normal(*sd),
            UnivariateLaw::Rademacher => Self::Rademacher,
            UnivariateLaw::StudentT { dof } => Self::StudentT {
                dist: StudentT::new(*dof)
                    .map_err(|e| DistError::InvalidParameter(format!("student_t: {e}")))?,
                scale: ((dof - 2.0) / dof).sqrt(),
            },
            UnivariateLaw::Spike { .. } | UnivariateLaw::Atoms { .. } => {
                let law = law.atomic().expect("atomic")?;
                let values: Vec<f64> = law.atoms().iter().map(|a| a.point[0]).collect();
                let masses: Vec<f64> = law.atoms().iter().map(|a| a.mass).collect();
                Self::Atoms {
                    values,
                    cumulative: law.cumulative_masses(),
                    masses,
                }
            }
        })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Normal(sd) => sd * rng.sample::<f64, _>(StandardNormal),
            Self::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Self::StudentT { dist, scale } => scale * dist.sample(rng),
            Self::Atoms { values, cumulative, .. } => {
                let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
                values[cumulative.partition_point(|&c| c <= u).min(values.len() - 1)]
            }
        }
    }

    /// Sum of `n` independent draws, using an exact shortcut where the law of
    /// the sum is available.
    fn draw_sum<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> f64 {
        match self {
            Self::Normal(sd) => sd * (n as f64).sqrt() * rng.sample::<f64, _>(StandardNormal),
            Self::Rademacher => {
                let heads = binomial(n, 0.5, rng);
                2.0 * heads as f64 - n as f64
            }
            Self::Atoms { values, masses, .. } => {
                let counts = multinomial(n, masses, rng);
                counts.iter().zip(values).map(|(&c, &v)| c as f64 * v).sum()
            }
            Self::StudentT { .. } => (0..n).map(|_| self.draw(rng)).sum(),
        }
    }
}

fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("valid binomial").sample(rng)
}

/// Multinomial counts by the conditional-binomial chain.
pub(crate) fn multinomial<R: Rng + ?Sized>(n: u64, masses: &[f64], rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; masses.len()];
    let mut remaining = n;
    let mut mass_left: f64 = masses.iter().sum();
    for (k, &m) in masses.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k + 1 == masses.len() {
            counts[k] = remaining;
            break;
        }
        let c = binomial(remaining, (m / mass_left).clamp(0.0, 1.0), rng);
        counts[k] = c;
        remaining -= c;
        mass_left -= m;
    }
    counts
}

impl Sampler {
    fn new(spec: &DistributionSpec) -> Result<Self, DistError> {
        spec.validate()?;
        Ok(match spec {
            DistributionSpec::Gaussian { covariance } => Self::Gaussian(factor_for_sampling(covariance)?),
            DistributionSpec::Spike13 { .. } | DistributionSpec::Spike12 { .. } => {
                let (p, gamma, exponent) = spec.spike_params().expect("spike");
                Self::Spike {
                    p,
                    height: gamma.powf(exponent),
                    prob: 1.0 / gamma,
                }
            }
            DistributionSpec::Product { coordinates } => Self::Product(
                coordinates
                    .iter()
                    .map(CoordSampler::new)
                    .collect::<Result<_, _>>()?,
            ),
            DistributionSpec::Multiplier { error, base } => Self::Multiplier {
                error: CoordSampler::new(error)?,
                base: base.iter().map(CoordSampler::new).collect::<Result<_, _>>()?,
            },
            DistributionSpec::Atomic { atoms } => Self::Atomic {
                law: atoms.clone(),
                cumulative: atoms.cumulative_masses(),
            },
        })
    }

    /// One draw of `X` into `out`.
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64], scratch: &mut [f64]) {
        match self {
            Self::Gaussian(factor) => {
                for z in scratch.iter_mut() {
                    *z = rng.sample(StandardNormal);
                }
                factor.apply(scratch, out);
            }
            Self::Spike { p, height, prob } => {
                for x in out.iter_mut().take(p - 1) {
                    *x = rng.sample(StandardNormal);
                }
                let u: f64 = rng.random();
                out[p - 1] = if u < prob / 2.0 {
                    -height
                } else if u < *prob {
                    *height
                } else {
                    0.0
                };
            }
            Self::Product(coords) => {
                for (x, c) in out.iter_mut().zip(coords) {
                    *x = c.draw(rng);
                }
            }
            Self::Multiplier { error, base } => {
                let xi = error.draw(rng);
                for (x, c) in out.iter_mut().zip(base) {
                    *x = xi * c.draw(rng);
                }
            }
            Self::Atomic { law, cumulative } => {
                let k = law.draw_index(cumulative, rng);
                out.copy_from_slice(&law.atoms()[k].point);
            }
        }
    }

    /// `n^{-1/2} (X_1 + … + X_n)` into `out`.
    fn draw_normalized_sum<R: Rng + ?Sized>(
        &self,
        n: u64,
        rng: &mut R,
        out: &mut [f64],
        scratch: &mut [f64],
    ) {
        let root = (n as f64).sqrt();
        match self {
            // Gaussian stability: the normalized sum has the law of one draw.
            Self::Gaussian(_) => self.draw(rng, out, scratch),
            Self::Spike { p, height, prob } => {
                for x in out.iter_mut().take(p - 1) {
                    *x = rng.sample(StandardNormal);
                }
                let nonzero = binomial(n, *prob, rng);
                let up = binomial(nonzero, 0.5, rng);
                out[p - 1] = (2.0 * up as f64 - nonzero as f64) * height / root;
            }
            Self::Product(coords) => {
                for (x, c) in out.iter_mut().zip(coords) {
                    *x = c.draw_sum(n, rng) / root;
                }
            }
            Self::Multiplier { .. } => {
                out.fill(0.0);
                let dim = out.len();
                let one = &mut scratch[..dim];
                let mut tmp = vec![0.0; dim];
                for _ in 0..n {
                    self.draw(rng, one, &mut tmp);
                    for (o, x) in out.iter_mut().zip(one.iter()) {
                        *o += x;
                    }
                }
                for o in out.iter_mut() {
                    *o /= root;
                }
            }
            Self::Atomic { law, .. } => {
                let masses: Vec<f64> = law.atoms().iter().map(|a| a.mass).collect();
                let counts = multinomial(n, &masses, rng);
                out.fill(0.0);
                for (c, atom) in counts.iter().zip(law.atoms()) {
                    if *c > 0 {
                        for (o, x) in out.iter_mut().zip(&atom.point) {
                            *o += *c as f64 * x;
                        }
                    }
                }
                for o in out.iter_mut() {
                    *o /= root;
                }
            }
        }
    }
}

fn generate(
    spec: &DistributionSpec,
    count: usize,
    seed: u64,
    stream_id: u64,
    summands: u64,
) -> Result<SampleBatch, DistError> {
    if count == 0 {
        return Err(DistError::InvalidParameter("count must be >= 1".into()));
    }
    if summands == 0 {
        return Err(DistError::InvalidParameter("n must be >= 1".into()));
    }
    let sampler = Sampler::new(spec)?;
    let dim = spec.dim();
    let mut data = vec![0.0; count * dim];
    data.par_chunks_mut(BLOCK_ROWS * dim)
        .enumerate()
        .for_each(|(block, chunk)| {
            let mut rng: StreamRng = block_rng(seed, stream_id, block as u64);
            let mut scratch = vec![0.0; dim];
            for row in chunk.chunks_exact_mut(dim) {
                if summands == 1 {
                    sampler.draw(&mut rng, row, &mut scratch);
                } else {
                    sampler.draw_normalized_sum(summands, &mut rng, row, &mut scratch);
                }
            }
        });
    if let Some(k) = data.iter().position(|x| !x.is_finite()) {
        return Err(DistError::NonFinite(format!("row {}", k / dim)));
    }
    Ok(SampleBatch::from_rows_unchecked(
        data,
        dim,
        seed,
        stream_id,
        summands,
        Arc::new(spec.clone()),
    ))
}

/// `count` i.i.d. draws; identical `(spec, count, seed, stream_id)` give
/// identical batches regardless of the thread pool size.
pub fn sample(
    spec: &DistributionSpec,
    count: usize,
    seed: u64,
    stream_id: u64,
) -> Result<SampleBatch, DistError> {
    generate(spec, count, seed, stream_id, 1)
}

/// `count` draws of `n^{-1/2} Σ_{i≤n} X_i`, using exact sum laws where they
/// exist (Gaussian coordinates, Rademacher, atomic coordinates via
/// multinomial counts) and explicit summation otherwise.
pub fn normalized_sum(
    spec: &DistributionSpec,
    n: u64,
    count: usize,
    seed: u64,
    stream_id: u64,
) -> Result<SampleBatch, DistError> {
    generate(spec, count, seed, stream_id, n)
}

/// Scalar draws needed by [`normalized_sum`] (the budget unit of the harness).
pub fn draw_cost(spec: &DistributionSpec, n: u64, count: usize) -> u128 {
    let p = spec.dim() as u128;
    let per_row = match spec {
        DistributionSpec::Gaussian { .. }
        | DistributionSpec::Spike13 { .. }
        | DistributionSpec::Spike12 { .. }
        | DistributionSpec::Atomic { .. } => p,
        DistributionSpec::Product { coordinates } => coordinates
            .iter()
            .map(|c| match c {
                UnivariateLaw::StudentT { .. } => n as u128,
                _ => 1,
            })
            .sum(),
        DistributionSpec::Multiplier { .. } => (p + 1) * n as u128,
    };
    per_row * count as u128
}
