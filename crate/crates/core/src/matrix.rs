//! Symmetric positive-semidefinite matrices: spectral data, sampling factors
//! and the isotropic/remainder covariance split.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::scalar::Real;

/// Relative symmetry tolerance on input entries.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalues below `-PSD_TOL * scale` make a matrix indefinite.
pub const PSD_TOL: f64 = 1e-8;
/// Remainder eigenvalues in `[-SPLIT_CLAMP * scale, 0]` are clamped to zero.
pub const SPLIT_CLAMP: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("matrix is empty")]
    Empty,
    #[error("row {row} has {len} entries, expected {dim}")]
    Ragged { row: usize, len: usize, dim: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not symmetric: max asymmetry {max_asymmetry:e} at ({row}, {col})")]
    NotSymmetric {
        max_asymmetry: f64,
        row: usize,
        col: usize,
    },
    #[error("not PSD: smallest eigenvalue {min_eigenvalue:e} below -{PSD_TOL:e} x scale {scale:e}")]
    NotPsd { min_eigenvalue: f64, scale: f64 },
    #[error("symmetric eigensolver did not converge")]
    NoConvergence,
}

/// Eigen-decomposition of a symmetric matrix: ascending eigenvalues and the
/// matching orthonormal eigenvectors stored column-wise (row-major `dim x dim`).
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: Vec<T>,
    dim: usize,
}

impl<T: Real> SymmetricEigen<T> {
    /// Householder tridiagonalization followed by implicit QL iterations.
    pub fn new(entries: &[T], dim: usize) -> Result<Self, MatrixError> {
        assert_eq!(entries.len(), dim * dim);
        let n = dim;
        let mut v: Vec<Vec<T>> = (0..n).map(|i| entries[i * n..(i + 1) * n].to_vec()).collect();
        let mut d = vec![T::zero(); n];
        let mut e = vec![T::zero(); n];
        tridiagonalize(&mut v, &mut d, &mut e);
        tql(&mut v, &mut d, &mut e)?;

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).expect("finite eigenvalues"));
        let values = order.iter().map(|&k| d[k]).collect();
        let mut vectors = vec![T::zero(); n * n];
        for (col, &k) in order.iter().enumerate() {
            for row in 0..n {
                vectors[row * n + col] = v[row][k];
            }
        }
        Ok(Self { values, vectors, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Component `row` of eigenvector `col`.
    pub fn vector(&self, row: usize, col: usize) -> T {
        self.vectors[row * self.dim + col]
    }
}

fn tridiagonalize<T: Real>(v: &mut [Vec<T>], d: &mut [T], e: &mut [T]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[n - 1][j];
    }
    for i in (1..n).rev() {
        let mut scale = T::zero();
        let mut h = T::zero();
        for dk in d.iter().take(i) {
            scale = scale + dk.abs();
        }
        if scale == T::zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = T::zero();
                v[j][i] = T::zero();
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk = *dk / scale;
                h = h + *dk * *dk;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > T::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h = h - f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = T::zero();
            }
            for j in 0..i {
                let f = d[j];
                v[j][i] = f;
                let mut g = e[j] + v[j][j] * f;
                for k in (j + 1)..i {
                    g = g + v[k][j] * d[k];
                    e[k] = e[k] + v[k][j] * f;
                }
                e[j] = g;
            }
            let mut f = T::zero();
            for j in 0..i {
                e[j] = e[j] / h;
                f = f + e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] = e[j] - hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                for k in j..i {
                    v[k][j] = v[k][j] - (f * e[k] + g * d[k]);
                }
                d[j] = v[i - 1][j];
                v[i][j] = T::zero();
            }
        }
        d[i] = h;
    }

    // Accumulate transformations.
    for i in 0..n.saturating_sub(1) {
        v[n - 1][i] = v[i][i];
        v[i][i] = T::one();
        let h = d[i + 1];
        if h != T::zero() {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let mut g = T::zero();
                for k in 0..=i {
                    g = g + v[k][i + 1] * v[k][j];
                }
                for k in 0..=i {
                    v[k][j] = v[k][j] - g * d[k];
                }
            }
        }
        for row in v.iter_mut().take(i + 1) {
            row[i + 1] = T::zero();
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = T::zero();
    }
    v[n - 1][n - 1] = T::one();
    e[0] = T::zero();
}

fn tql<T: Real>(v: &mut [Vec<T>], d: &mut [T], e: &mut [T]) -> Result<(), MatrixError> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();

    let two = T::lit(2.0);
    let eps = T::epsilon();
    let mut f = T::zero();
    let mut tst1 = T::zero();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 100 {
                    return Err(MatrixError::NoConvergence);
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di = *di - h;
                }
                f = f + h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in v.iter_mut() {
                        let hk = row[i + 1];
                        row[i + 1] = s * row[i] + c * hk;
                        row[i] = c * row[i] - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] = d[l] + f;
        e[l] = T::zero();
    }
    Ok(())
}

/// Symmetric PSD covariance matrix with cached spectral data.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSpec<T> {
    dim: usize,
    entries: Vec<T>,
    eigen: SymmetricEigen<T>,
    min_eig: T,
    min_diag_sqrt: T,
    scale: T,
}

impl<T: Real> CovarianceSpec<T> {
    /// Validates and decomposes a row-major matrix given as rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, MatrixError> {
        let dim = rows.len();
        if dim == 0 {
            return Err(MatrixError::Empty);
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for (row, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(MatrixError::Ragged {
                    row,
                    len: r.len(),
                    dim,
                });
            }
            entries.extend_from_slice(r);
        }
        Self::from_row_major(dim, entries)
    }

    pub fn from_row_major(dim: usize, mut entries: Vec<T>) -> Result<Self, MatrixError> {
        if dim == 0 {
            return Err(MatrixError::Empty);
        }
        assert_eq!(entries.len(), dim * dim, "entry count must be dim^2");
        for (k, x) in entries.iter().enumerate() {
            if !x.is_finite() {
                return Err(MatrixError::NonFinite {
                    row: k / dim,
                    col: k % dim,
                });
            }
        }
        let max_abs = entries.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        let mut worst = (T::zero(), 0, 0);
        for i in 0..dim {
            for j in (i + 1)..dim {
                let gap = (entries[i * dim + j] - entries[j * dim + i]).abs();
                if gap > worst.0 {
                    worst = (gap, i, j);
                }
            }
        }
        if worst.0 > T::lit(SYMMETRY_TOL) * max_abs {
            return Err(MatrixError::NotSymmetric {
                max_asymmetry: worst.0.as_f64(),
                row: worst.1,
                col: worst.2,
            });
        }
        // Symmetrize so the stored matrix is exactly symmetric.
        for i in 0..dim {
            for j in (i + 1)..dim {
                let avg = (entries[i * dim + j] + entries[j * dim + i]) / T::lit(2.0);
                entries[i * dim + j] = avg;
                entries[j * dim + i] = avg;
            }
        }
        let eigen = SymmetricEigen::new(&entries, dim)?;
        Self::from_parts(dim, entries, eigen, PSD_TOL)
    }

    fn from_parts(
        dim: usize,
        entries: Vec<T>,
        eigen: SymmetricEigen<T>,
        tol: f64,
    ) -> Result<Self, MatrixError> {
        let scale = eigen.values.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        let lowest = eigen.values[0];
        if lowest < -T::lit(tol) * scale {
            return Err(MatrixError::NotPsd {
                min_eigenvalue: lowest.as_f64(),
                scale: scale.as_f64(),
            });
        }
        let min_diag = (0..dim)
            .map(|i| entries[i * dim + i])
            .fold(T::infinity(), T::min);
        Ok(Self {
            dim,
            entries,
            eigen,
            min_eig: lowest.max(T::zero()),
            min_diag_sqrt: min_diag.max(T::zero()).sqrt(),
            scale,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![T::one(); dim]).expect("identity is PSD")
    }

    pub fn diagonal(diag: &[T]) -> Result<Self, MatrixError> {
        let dim = diag.len();
        let mut entries = vec![T::zero(); dim * dim];
        for (i, &x) in diag.iter().enumerate() {
            entries[i * dim + i] = x;
        }
        Self::from_row_major(dim, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.entries[row * self.dim + col]
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.entries.chunks(self.dim).map(<[T]>::to_vec).collect()
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    /// λ_min, clamped at zero.
    pub fn min_eig(&self) -> T {
        self.min_eig
    }

    /// σ_min = min_j Σ_jj^{1/2}.
    pub fn min_diag_sqrt(&self) -> T {
        self.min_diag_sqrt
    }

    /// Largest absolute eigenvalue; all scale-dependent tolerances use it.
    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn eigen(&self) -> &SymmetricEigen<T> {
        &self.eigen
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| i == j || self.get(i, j) == T::zero()))
    }

    /// `vᵀ Σ v`.
    pub fn quadratic_form(&self, v: &[T]) -> T {
        let mut acc = T::zero();
        for i in 0..self.dim {
            let mut row = T::zero();
            for j in 0..self.dim {
                row = row + self.get(i, j) * v[j];
            }
            acc = acc + v[i] * row;
        }
        acc
    }

    /// `c · Σ` for `c > 0`, reusing the eigenvectors.
    pub fn scaled(&self, c: T) -> Self {
        assert!(c > T::zero());
        let entries = self.entries.iter().map(|&x| x * c).collect();
        let eigen = SymmetricEigen {
            values: self.eigen.values.iter().map(|&x| x * c).collect(),
            vectors: self.eigen.vectors.clone(),
            dim: self.dim,
        };
        Self::from_parts(self.dim, entries, eigen, PSD_TOL).expect("positive scaling keeps PSD")
    }
}

/// Smallest eigenvalue of a covariance matrix (clamped at zero).
pub fn min_eigenvalue<T: Real>(cov: &CovarianceSpec<T>) -> T {
    cov.min_eig()
}

/// σ̲ over a family of covariances: the square root of the smallest λ_min.
pub fn sigma_under<T: Real>(covs: &[CovarianceSpec<T>]) -> T {
    covs.iter()
        .map(CovarianceSpec::min_eig)
        .fold(T::infinity(), T::min)
        .sqrt()
}

/// σ_min over a family of covariances: the smallest coordinate standard deviation.
pub fn sigma_min<T: Real>(covs: &[CovarianceSpec<T>]) -> T {
    covs.iter()
        .map(CovarianceSpec::min_diag_sqrt)
        .fold(T::infinity(), T::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    Cholesky,
    Spectral,
}

/// A square factor `F` with `F Fᵀ = Σ`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingFactor<T> {
    pub kind: FactorKind,
    dim: usize,
    entries: Vec<T>,
}

impl<T: Real> SamplingFactor<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.entries[row * self.dim + col]
    }

    /// `out = F z`.
    pub fn apply(&self, z: &[T], out: &mut [T]) {
        let n = self.dim;
        let lower = self.kind == FactorKind::Cholesky;
        for i in 0..n {
            let mut acc = T::zero();
            let last = if lower { i } else { n - 1 };
            for j in 0..=last {
                acc = acc + self.entries[i * n + j] * z[j];
            }
            out[i] = acc;
        }
    }

    /// `‖F Fᵀ − Σ‖_max`.
    pub fn reconstruction_error(&self, cov: &CovarianceSpec<T>) -> T {
        let n = self.dim;
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..n {
                let mut acc = T::zero();
                for k in 0..n {
                    acc = acc + self.get(i, k) * self.get(j, k);
                }
                worst = worst.max((acc - cov.get(i, j)).abs());
            }
        }
        worst
    }
}

/// A factor for sampling `N(0, Σ)`: Cholesky when Σ is comfortably positive
/// definite, otherwise `V diag(√max(λ,0))` from the cached eigenpairs.
pub fn factor_for_sampling<T: Real>(cov: &CovarianceSpec<T>) -> Result<SamplingFactor<T>, MatrixError> {
    let n = cov.dim();
    let scale = cov.scale();
    let lowest = cov.eigen().values[0];
    if lowest < -T::lit(PSD_TOL) * scale {
        return Err(MatrixError::NotPsd {
            min_eigenvalue: lowest.as_f64(),
            scale: scale.as_f64(),
        });
    }
    if lowest > T::lit(1e-6) * scale {
        if let Some(l) = cholesky(cov) {
            return Ok(SamplingFactor {
                kind: FactorKind::Cholesky,
                dim: n,
                entries: l,
            });
        }
    }
    let eig = cov.eigen();
    let mut entries = vec![T::zero(); n * n];
    for col in 0..n {
        let root = eig.values[col].max(T::zero()).sqrt();
        for row in 0..n {
            entries[row * n + col] = eig.vector(row, col) * root;
        }
    }
    Ok(SamplingFactor {
        kind: FactorKind::Spectral,
        dim: n,
        entries,
    })
}

fn cholesky<T: Real>(cov: &CovarianceSpec<T>) -> Option<Vec<T>> {
    let n = cov.dim();
    let mut l = vec![T::zero(); n * n];
    for j in 0..n {
        let mut diag = cov.get(j, j);
        for k in 0..j {
            diag = diag - l[j * n + k] * l[j * n + k];
        }
        if diag <= T::zero() {
            return None;
        }
        let root = diag.sqrt();
        l[j * n + j] = root;
        for i in (j + 1)..n {
            let mut acc = cov.get(i, j);
            for k in 0..j {
                acc = acc - l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = acc / root;
        }
    }
    Some(l)
}

/// Splits `N(0, Σ)` into `N(0, λ_min I) + N(0, Σ − λ_min I)`.
///
/// The remainder shares Σ's eigenvectors; its eigenvalues are `λ_i − λ_min`
/// with the near-zero ones clamped so it stays sampleable.
pub fn gaussian_split<T: Real>(
    cov: &CovarianceSpec<T>,
) -> Result<(T, CovarianceSpec<T>), MatrixError> {
    let lambda = cov.min_eig();
    let n = cov.dim();
    let mut entries = cov.entries().to_vec();
    for i in 0..n {
        entries[i * n + i] = entries[i * n + i] - lambda;
    }
    let clamp = T::lit(SPLIT_CLAMP) * cov.scale();
    let values = cov
        .eigen()
        .values
        .iter()
        .map(|&x| {
            let shifted = x - lambda;
            if shifted < T::zero() && shifted >= -clamp {
                T::zero()
            } else {
                shifted
            }
        })
        .collect();
    let eigen = SymmetricEigen {
        values,
        vectors: cov.eigen().vectors.clone(),
        dim: n,
    };
    let remainder = CovarianceSpec::from_parts(n, entries, eigen, SPLIT_CLAMP)?;
    Ok((lambda, remainder))
}

impl<T: Real + Serialize> Serialize for CovarianceSpec<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.rows().serialize(serializer)
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for CovarianceSpec<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<T>>::deserialize(deserializer)?;
        Self::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cov(rows: &[&[f64]]) -> CovarianceSpec<f64> {
        CovarianceSpec::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    /// Closed-form eigenvalues of [[a, b], [b, c]].
    fn eig2(a: f64, b: f64, c: f64) -> (f64, f64) {
        let disc = ((a - c).powi(2) + 4.0 * b * b).sqrt();
        ((a + c - disc) / 2.0, (a + c + disc) / 2.0)
    }

    #[test]
    fn min_eigenvalue_examples() {
        assert!((min_eigenvalue(&CovarianceSpec::<f64>::identity(3)) - 1.0).abs() < 1e-12);
        assert!((min_eigenvalue(&cov(&[&[4.0, 0.0], &[0.0, 1.0]])) - 1.0).abs() < 1e-12);
        let (lo, _) = eig2(2.0, 1.0, 2.0);
        assert!((lo - 1.0).abs() < 1e-15);
        assert!((min_eigenvalue(&cov(&[&[2.0, 1.0], &[1.0, 2.0]])) - lo).abs() < 1e-9 * lo);
    }

    #[test]
    fn eigenvalues_match_closed_form_2x2() {
        for &(a, b, c) in &[(3.0, 0.5, 1.0), (1.0, -0.9, 1.0), (10.0, 0.9, 0.1)] {
            let m = cov(&[&[a, b], &[b, c]]);
            let (lo, hi) = eig2(a, b, c);
            assert!((m.eigen().values[0] - lo).abs() < 1e-12 * hi);
            assert!((m.eigen().values[1] - hi).abs() < 1e-12 * hi);
        }
    }

    #[test]
    fn rejects_asymmetric_and_non_finite() {
        let err = CovarianceSpec::from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]]).unwrap_err();
        match err {
            MatrixError::NotSymmetric { max_asymmetry, .. } => {
                assert!((max_asymmetry - 0.1).abs() < 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            CovarianceSpec::from_rows(&[vec![f64::NAN]]),
            Err(MatrixError::NonFinite { .. })
        ));
        assert!(matches!(
            CovarianceSpec::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]),
            Err(MatrixError::NotPsd { .. })
        ));
    }

    #[test]
    fn min_diag_sqrt_is_exact() {
        let m = cov(&[&[4.0, 1.0], &[1.0, 2.25]]);
        assert_eq!(m.min_diag_sqrt() * m.min_diag_sqrt(), 2.25);
    }

    #[test]
    fn factor_examples() {
        let id = CovarianceSpec::<f64>::identity(3);
        let f = factor_for_sampling(&id).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(f.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
        let d = cov(&[&[4.0, 0.0], &[0.0, 9.0]]);
        let f = factor_for_sampling(&d).unwrap();
        assert_eq!((f.get(0, 0), f.get(1, 1), f.get(1, 0)), (2.0, 3.0, 0.0));

        let m = cov(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let f = factor_for_sampling(&m).unwrap();
        assert!(f.reconstruction_error(&m) <= 1e-9 * 2.0);
    }

    #[test]
    fn singular_matrix_uses_spectral_factor() {
        let m = cov(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let f = factor_for_sampling(&m).unwrap();
        assert_eq!(f.kind, FactorKind::Spectral);
        assert!(f.reconstruction_error(&m) <= 1e-9);
    }

    #[test]
    fn split_examples() {
        let (l, rem) = gaussian_split(&CovarianceSpec::<f64>::identity(2)).unwrap();
        assert_eq!(l, 1.0);
        assert!(rem.entries().iter().all(|&x| x == 0.0));

        let (l, rem) = gaussian_split(&cov(&[&[2.0, 1.0], &[1.0, 2.0]])).unwrap();
        assert!((l - 1.0).abs() < 1e-12);
        for &x in rem.entries() {
            assert!((x - 1.0).abs() < 1e-12);
        }
        assert!(rem.eigen().values[0].abs() < 1e-12);
        assert!((rem.eigen().values[1] - 2.0).abs() < 1e-12);

        let (l, rem) = gaussian_split(&cov(&[&[3.0, 0.0], &[0.0, 5.0]])).unwrap();
        assert_eq!(l, 3.0);
        assert_eq!(rem.diag(), vec![0.0, 2.0]);
    }

    #[test]
    fn json_round_trip_is_array_of_arrays() {
        let m = cov(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(text, "[[2.0,1.0],[1.0,2.0]]");
        let back: CovarianceSpec<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<CovarianceSpec<f64>>("[[1.0,0.3],[0.0,1.0]]").is_err());
    }

    #[test]
    fn f32_instantiation() {
        let m = CovarianceSpec::<f32>::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert!((m.min_eig() - 1.0).abs() < 1e-5);
    }
}
