//! Closed-form bound evaluators: the main Berry-Esseen bound over
//! rectangles, the sub-Gaussian comparison bound, Gaussian
//! anti-concentration, the smoothing function `φ_ε` and its derivative
//! norms, and the smoothing-level ladder used by the induction.
//!
//! Universal constants are explicit inputs (default 1). `L = log(ep) = 1 +
//! ln p` throughout, so every logarithmic factor stays positive at `p = 1`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normal::{cdf_generic, pdf_generic};
use crate::rng::block_rng;
use crate::scalar::{log_e_times, Real};

#[derive(Debug, Error, PartialEq)]
pub enum BoundError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("finite-difference step underflows at eps = {eps}; use a larger eps")]
    StepUnderflow { eps: f64 },
}

/// Inputs of the main bound: sample size, dimension, maximal pseudo-moments,
/// smallest coordinate standard deviation `σ_min`, square root of the
/// smallest covariance eigenvalue `σ̲`, and the universal constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs<T> {
    pub n: u64,
    pub p: u64,
    pub nu1: T,
    pub nu3: T,
    pub sigma_min: T,
    pub sigma_under: T,
    pub c_universal: T,
}

impl<T: Real> BoundInputs<T> {
    pub fn validate(&self) -> Result<(), BoundError> {
        let bad = |what: &str| Err(BoundError::Invalid(what.to_string()));
        if self.n == 0 || self.p == 0 {
            return bad("n and p must be at least 1");
        }
        if !(self.nu1 >= T::zero() && self.nu3 >= T::zero()) || !self.nu1.is_finite() || !self.nu3.is_finite() {
            return bad("pseudo-moments must be finite and nonnegative");
        }
        if !(self.sigma_min > T::zero() && self.sigma_under > T::zero()) {
            return bad("sigma_min and sigma_under must be positive");
        }
        if !(self.c_universal > T::zero()) {
            return bad("the universal constant must be positive");
        }
        Ok(())
    }

    fn log_ep(&self) -> T {
        log_e_times(T::lit(self.p as f64))
    }

    fn log_pn(&self) -> T {
        T::lit(self.p as f64 * self.n as f64).ln()
    }
}

/// The main bound on `μ(S_n(X), S_n(Y))`:
///
/// `3/√n + 𝔠 ν1 L √ln(pn) / (√n σ_min)
///  + 𝔠 ν3 L² √ln(pn) / (√n σ_min σ̲²) · {(σ_min/σ̲)/L + ln(1 + σ̲³ √(n/L³) / (2𝔠 ν3))}`.
///
/// With `ν3 = 0` the last term is its limit, 0.
pub fn theorem1_rhs<T: Real>(b: &BoundInputs<T>) -> Result<T, BoundError> {
    b.validate()?;
    let n = T::lit(b.n as f64);
    let root_n = n.sqrt();
    let l = b.log_ep();
    let sqrt_log_pn = b.log_pn().sqrt();
    let c = b.c_universal;
    let first = T::lit(3.0) / root_n;
    let second = c * b.nu1 / (root_n * b.sigma_min) * l * sqrt_log_pn;
    let third = if b.nu3 == T::zero() {
        T::zero()
    } else {
        let prefactor = c * b.nu3 * l * l * sqrt_log_pn / (root_n * b.sigma_min * b.sigma_under.powi(2));
        let inner = b.sigma_under.powi(3) * (n / l.powi(3)).sqrt() / (T::lit(2.0) * c * b.nu3);
        prefactor * ((b.sigma_min / b.sigma_under) / l + inner.ln_1p())
    };
    Ok(first + second + third)
}

/// `C ν^{5/2} / ρ^{3/2} · ln⁴(pn) · ln(en) / √n`.
pub fn lopes_rhs<T: Real>(nu: T, rho: T, n: u64, p: u64, c: T) -> Result<T, BoundError> {
    if !(nu > T::zero() && rho > T::zero() && rho <= T::one() && c > T::zero()) || n == 0 || p == 0 {
        return Err(BoundError::Invalid("lopes needs nu, C > 0, rho in (0, 1], n, p >= 1".into()));
    }
    let nf = T::lit(n as f64);
    let log_pn = T::lit(p as f64 * n as f64).ln();
    Ok(c * nu.powf(T::lit(2.5)) / rho.powf(T::lit(1.5)) * log_pn.powi(4) * log_e_times(nf) / nf.sqrt())
}

/// Gaussian anti-concentration: `C √L δ / σ_min`.
pub fn nazarov_rhs<T: Real>(sigma_min: T, p: u64, delta: T, c: T) -> Result<T, BoundError> {
    if !(sigma_min > T::zero() && delta >= T::zero() && c > T::zero()) || p == 0 {
        return Err(BoundError::Invalid("nazarov needs sigma_min, C > 0, delta >= 0, p >= 1".into()));
    }
    Ok(c * log_e_times(T::lit(p as f64)).sqrt() * delta / sigma_min)
}

/// Smallest constant `C` with `observed_i ≤ C · unit_i` for every `i`, for
/// bounds linear in their constant.
pub fn fit_linear_constant<T: Real>(observed: &[T], unit: &[T]) -> T {
    observed
        .iter()
        .zip(unit)
        .filter(|(_, u)| **u > T::zero())
        .map(|(o, u)| *o / *u)
        .fold(T::zero(), T::max)
}

fn check_eps<T: Real>(eps: T) -> Result<(), BoundError> {
    if !(eps > T::zero()) || !eps.is_finite() {
        return Err(BoundError::Invalid(format!("eps must be positive, got {eps}")));
    }
    Ok(())
}

fn check_pair<T>(s: &[T], r: &[T]) -> Result<(), BoundError> {
    if s.len() != r.len() || s.is_empty() {
        return Err(BoundError::Invalid("s and r must be nonempty and of equal length".into()));
    }
    Ok(())
}

/// `φ_ε(s, r) = P(s + εZ ⪯ r) = Π_j Φ((r_j − s_j)/ε)`.
pub fn phi_eps<T: Real>(s: &[T], r: &[T], eps: T) -> Result<T, BoundError> {
    check_eps(eps)?;
    check_pair(s, r)?;
    Ok(s.iter()
        .zip(r)
        .map(|(&a, &b)| cdf_generic((b - a) / eps))
        .fold(T::one(), |acc, x| acc * x))
}

/// `‖∇_s φ_ε(s, r)‖_1`: each partial is a normal density times the other
/// coordinates' CDFs, divided by ε.
pub fn grad_l1_norm<T: Real>(s: &[T], r: &[T], eps: T) -> Result<T, BoundError> {
    check_eps(eps)?;
    check_pair(s, r)?;
    let z: Vec<T> = s.iter().zip(r).map(|(&a, &b)| (b - a) / eps).collect();
    let cdfs: Vec<T> = z.iter().map(|&x| cdf_generic(x)).collect();
    let mut total = T::zero();
    for j in 0..z.len() {
        let others = cdfs
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != j)
            .fold(T::one(), |acc, (_, &c)| acc * c);
        total = total + pdf_generic(z[j]) * others;
    }
    Ok(total / eps)
}

/// Finite-difference step for third derivatives, in units of ε.
pub const FD_STEP: f64 = 0.01;
/// Random sign directions probed per point for third derivatives.
pub const THIRD_ORDER_DIRECTIONS: usize = 64;

/// `|∂³_t φ_ε(s + t h, r)|` at `t = 0` by the five-point stencil
/// `[g(2τ) − 2g(τ) + 2g(−τ) − g(−2τ)] / (2τ³)` with `τ = FD_STEP · ε`.
pub fn third_directional<T: Real>(s: &[T], r: &[T], h: &[T], eps: T) -> Result<T, BoundError> {
    check_eps(eps)?;
    check_pair(s, r)?;
    let tau = T::lit(FD_STEP) * eps;
    let magnitude = s
        .iter()
        .chain(r)
        .fold(T::one(), |m, &x| m.max(x.abs()));
    if tau <= T::lit(1e4) * T::epsilon() * magnitude {
        return Err(BoundError::StepUnderflow { eps: eps.as_f64() });
    }
    // Work in z = (r − s)/ε so that the stencil sees the same numbers at
    // every ε: moving s by t·h moves z by −t·h/ε.
    let z: Vec<T> = s.iter().zip(r).map(|(&a, &b)| (b - a) / eps).collect();
    let step = T::lit(FD_STEP);
    let g = |k: T| {
        z.iter()
            .zip(h)
            .map(|(&zj, &hj)| cdf_generic(zj - k * step * hj))
            .fold(T::one(), |acc, x| acc * x)
    };
    let two = T::lit(2.0);
    let d3 = (g(two) - two * g(T::one()) + two * g(-T::one()) - g(-two)) / (two * step.powi(3));
    Ok(d3.abs() / eps.powi(3))
}

/// Empirical supremum of a derivative norm over probe points and the
/// constant it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradProbe<T> {
    pub empirical_sup: T,
    /// `sup · ε^order / L^{order/2}`.
    pub fitted_c: T,
}

/// Order 1: exact `‖∇φ_ε‖_1`. Order 3: largest finite-difference third
/// directional derivative over [`THIRD_ORDER_DIRECTIONS`] seeded random
/// sign vectors (`‖h‖_∞ = 1`).
pub fn grad_norm_probe<T: Real>(
    order: u32,
    eps: T,
    p: usize,
    probes: &[(Vec<T>, Vec<T>)],
) -> Result<GradProbe<T>, BoundError> {
    check_eps(eps)?;
    if probes.is_empty() {
        return Err(BoundError::Invalid("no probe points".into()));
    }
    if probes.iter().any(|(s, r)| s.len() != p || r.len() != p) {
        return Err(BoundError::Invalid(format!("probe points must have dimension {p}")));
    }
    if probes.iter().flat_map(|(s, r)| s.iter().chain(r)).any(|x| !x.is_finite()) {
        return Err(BoundError::Invalid("probe points must be finite".into()));
    }
    let sup = match order {
        1 => probes
            .iter()
            .map(|(s, r)| grad_l1_norm(s, r, eps))
            .try_fold(T::zero(), |m, g| g.map(|g| m.max(g)))?,
        3 => {
            let directions = sign_directions::<T>(p, THIRD_ORDER_DIRECTIONS, 0x6772_6164);
            let mut best = T::zero();
            for (s, r) in probes {
                for h in &directions {
                    best = best.max(third_directional(s, r, h, eps)?);
                }
            }
            best
        }
        _ => return Err(BoundError::Invalid(format!("order must be 1 or 3, got {order}"))),
    };
    let l = log_e_times(T::lit(p as f64));
    Ok(GradProbe {
        empirical_sup: sup,
        fitted_c: sup * eps.powi(order as i32) / l.powf(T::lit(order as f64 / 2.0)),
    })
}

/// Seeded vectors with independent ±1 entries.
pub fn sign_directions<T: Real>(p: usize, count: usize, seed: u64) -> Vec<Vec<T>> {
    let mut rng = block_rng(seed, 0, 0);
    (0..count)
        .map(|_| {
            (0..p)
                .map(|_| if rng.random::<bool>() { T::one() } else { -T::one() })
                .collect()
        })
        .collect()
}

/// `ε_j = √(ε² + σ̲² j / n)` for `j = 1..m`.
pub fn epsilon_ladder<T: Real>(n: u64, eps: T, sigma_under: T, m: u64) -> Result<Vec<T>, BoundError> {
    check_eps(eps)?;
    if m > n || n == 0 {
        return Err(BoundError::Invalid(format!("need 1 <= n and m <= n, got n = {n}, m = {m}")));
    }
    let nf = T::lit(n as f64);
    Ok((1..=m)
        .map(|j| (eps * eps + sigma_under * sigma_under * T::lit(j as f64) / nf).sqrt())
        .collect())
}

/// `(Σ 1/ε_j², Σ 1/ε_j³)` over a ladder.
pub fn ladder_sums<T: Real>(ladder: &[T]) -> (T, T) {
    ladder.iter().fold((T::zero(), T::zero()), |(a, b), &e| {
        (a + (e * e).recip(), b + e.powi(3).recip())
    })
}

/// Integral bounds `(2n/σ̲²) ln(1 + σ̲/ε)` and `2n/(ε σ̲²)` on the two sums.
pub fn ladder_sum_bounds<T: Real>(n: u64, eps: T, sigma_under: T) -> (T, T) {
    let two_n = T::lit(2.0 * n as f64);
    let s2 = sigma_under * sigma_under;
    (two_n / s2 * (sigma_under / eps).ln_1p(), two_n / (eps * s2))
}

/// Smoothing level of the induction:
/// `𝔎 {ν1 √L / √n + ν3 L^{3/2} / (σ̲² √n)}`.
pub fn proof_epsilon_choice<T: Real>(b: &BoundInputs<T>, k: T) -> Result<T, BoundError> {
    b.validate()?;
    if !(k > T::zero()) {
        return Err(BoundError::Invalid("K must be positive".into()));
    }
    let root_n = T::lit(b.n as f64).sqrt();
    let l = b.log_ep();
    Ok(k * (b.nu1 * l.sqrt() / root_n + b.nu3 * l.powf(T::lit(1.5)) / (b.sigma_under.powi(2) * root_n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit(n: u64, p: u64) -> BoundInputs<f64> {
        BoundInputs {
            n,
            p,
            nu1: 1.0,
            nu3: 1.0,
            sigma_min: 1.0,
            sigma_under: 1.0,
            c_universal: 1.0,
        }
    }

    #[test]
    fn theorem1_example() {
        let v = theorem1_rhs(&unit(100, 1)).unwrap();
        let t = 100f64.ln().sqrt() / 10.0;
        assert_relative_eq!(v, 0.3 + t + t * (1.0 + 6f64.ln()), max_relative = 1e-14);
        assert!((v - 1.1137).abs() < 5e-4);
    }

    #[test]
    fn theorem1_degenerate_and_ratio() {
        let mut b = unit(10_000, 1);
        b.nu1 = 0.0;
        b.nu3 = 0.0;
        assert_eq!(theorem1_rhs(&b).unwrap(), 0.03);
        let r = theorem1_rhs(&unit(40_000, 1)).unwrap() / theorem1_rhs(&unit(10_000, 1)).unwrap();
        assert!(r > 0.4 && r < 0.62, "{r}");
    }

    #[test]
    fn theorem1_monotonicity() {
        let ns: Vec<u64> = (1..=5).flat_map(|e| [10u64.pow(e), 3 * 10u64.pow(e)]).chain([1_000_000]).collect();
        for &nu in &[0.5, 1.0, 4.0] {
            for &sm in &[0.5, 1.0, 2.0] {
                for &su_frac in &[0.5, 0.8, 1.0] {
                    let base = BoundInputs {
                        n: 10,
                        p: 4,
                        nu1: nu,
                        nu3: nu,
                        sigma_min: sm,
                        sigma_under: sm * su_frac,
                        c_universal: 1.0,
                    };
                    let vals: Vec<f64> = ns
                        .iter()
                        .map(|&n| theorem1_rhs(&BoundInputs { n, ..base }).unwrap())
                        .collect();
                    assert!(vals.windows(2).all(|w| w[1] <= w[0]), "{base:?}: {vals:?}");
                    let at = |f: &dyn Fn(&mut BoundInputs<f64>)| {
                        let mut b = BoundInputs { n: 1000, ..base };
                        f(&mut b);
                        theorem1_rhs(&b).unwrap()
                    };
                    let v = at(&|_| {});
                    assert!(at(&|b| b.nu1 *= 2.0) >= v);
                    assert!(at(&|b| b.nu3 *= 2.0) >= v);
                    assert!(at(&|b| b.sigma_min *= 0.9) >= v);
                    assert!(at(&|b| b.sigma_under *= 0.9) >= v);
                }
            }
        }
    }

    #[test]
    fn theorem1_f32() {
        let b = BoundInputs::<f32> {
            n: 100,
            p: 1,
            nu1: 1.0,
            nu3: 1.0,
            sigma_min: 1.0,
            sigma_under: 1.0,
            c_universal: 1.0,
        };
        assert!((theorem1_rhs(&b).unwrap() - 1.1137).abs() < 1e-3);
    }

    #[test]
    fn invalid_inputs() {
        let mut b = unit(10, 1);
        b.sigma_min = 0.0;
        assert!(theorem1_rhs(&b).is_err());
        b = unit(0, 1);
        assert!(theorem1_rhs(&b).is_err());
        assert!(lopes_rhs(1.0, 1.5, 10, 1, 1.0).is_err());
        assert!(nazarov_rhs(1.0, 1, -0.1, 1.0).is_err());
        assert!(phi_eps(&[0.0], &[0.0], 0.0).is_err());
    }

    #[test]
    fn lopes_examples() {
        assert_eq!(lopes_rhs(1.0, 1.0, 1, 1, 1.0).unwrap(), 0.0);
        let l20 = 20f64.ln();
        let expect = l20.powi(4) * (1.0 + l20) / 20f64.sqrt();
        assert_relative_eq!(lopes_rhs(1.0, 1.0, 20, 1, 1.0).unwrap(), expect, max_relative = 1e-14);
        // ν ∝ γ^{1/2} gives γ^{5/4}.
        let r = lopes_rhs(4.0, 1.0, 100, 3, 1.0).unwrap() / lopes_rhs(1.0, 1.0, 100, 3, 1.0).unwrap();
        assert_relative_eq!(r, 16f64.powf(1.25), max_relative = 1e-12);
    }

    #[test]
    fn nazarov_examples() {
        assert_eq!(nazarov_rhs(1.0, 7, 0.0, 1.0).unwrap(), 0.0);
        assert_relative_eq!(nazarov_rhs(1.0, 1, 0.1, 1.0).unwrap(), 0.1, max_relative = 1e-15);
        let a = nazarov_rhs(0.7, 9, 0.013, 2.0).unwrap();
        assert_eq!(nazarov_rhs(0.7, 9, 0.026, 2.0).unwrap(), 2.0 * a);
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi_eps(&[0.3, -1.0, 2.0], &[0.3, -1.0, 2.0], 0.5).unwrap(), 0.125);
        assert!((phi_eps::<f64>(&[0.0], &[0.2], 0.2).unwrap() - 0.8413447460685429).abs() < 1e-12);
        let with_inf = phi_eps(&[0.0, 0.0], &[0.2, f64::INFINITY], 0.2).unwrap();
        assert_eq!(with_inf, phi_eps(&[0.0], &[0.2], 0.2).unwrap());
        for x in [-3.0, -0.4, 0.0, 1.7] {
            let a: f64 = phi_eps(&[0.0], &[x], 1.0).unwrap();
            let b = phi_eps(&[0.0], &[-x], 1.0).unwrap();
            assert!((a + b - 1.0).abs() < 1e-12);
        }
        let mut last = 0.0;
        for k in -20..20 {
            let v = phi_eps(&[0.1, 0.2], &[k as f64 * 0.1, 0.0], 0.3).unwrap();
            assert!((0.0..=1.0).contains(&v) && v >= last);
            last = v;
        }
    }

    /// Third directional derivative of `Π Φ(z_j − t h_j)` from the Taylor
    /// coefficients of each factor (`Φ' = φ`, `Φ'' = −zφ`, `Φ''' = (z²−1)φ`).
    fn third_analytic(z: &[f64], h: &[f64]) -> f64 {
        let mut poly = [1.0, 0.0, 0.0, 0.0];
        for (&zj, &hj) in z.iter().zip(h) {
            let d = crate::normal::pdf(zj);
            let c = [
                crate::normal::cdf(zj),
                -hj * d,
                hj * hj * (-zj * d) / 2.0,
                -hj.powi(3) * (zj * zj - 1.0) * d / 6.0,
            ];
            let mut next = [0.0; 4];
            for a in 0..4 {
                for b in 0..4 - a {
                    next[a + b] += poly[a] * c[b];
                }
            }
            poly = next;
        }
        6.0 * poly[3]
    }

    #[test]
    fn third_derivative_matches_analytic() {
        let dirs = sign_directions::<f64>(3, 8, 1);
        for eps in [0.5, 1.0, 2.0] {
            for h in &dirs {
                let s = [0.1, -0.2, 0.3];
                let r = [0.4, 0.0, 0.9];
                let z: Vec<f64> = s.iter().zip(&r).map(|(a, b)| (b - a) / eps).collect();
                let exact = third_analytic(&z, h).abs() / eps.powi(3);
                let fd = third_directional(&s, &r, h, eps).unwrap();
                assert!((fd - exact).abs() < 2e-3 * exact.max(1.0 / eps.powi(3)), "{fd} vs {exact}");
            }
        }
        assert!(matches!(
            third_directional(&[1e10], &[1e10], &[1.0], 1e-9),
            Err(BoundError::StepUnderflow { .. })
        ));
    }

    #[test]
    fn order_one_probe_p1() {
        let eps = 0.3;
        let probes: Vec<(Vec<f64>, Vec<f64>)> = (-50..=50)
            .map(|k| (vec![0.0], vec![k as f64 * 0.01]))
            .collect();
        let g = grad_norm_probe(1, eps, 1, &probes).unwrap();
        assert!((g.fitted_c - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ladder_examples_and_bounds() {
        let l = epsilon_ladder(1, 0.7, 0.7, 1).unwrap();
        assert_relative_eq!(l[0], 0.7 * 2f64.sqrt(), max_relative = 1e-15);
        assert!(epsilon_ladder(3, 1.0, 1.0, 4).is_err());
        for n in [1u64, 10, 100, 1000, 10_000] {
            for eps in [1e-3, 0.01, 0.1, 1.0, 10.0] {
                for su in [0.1, 0.5, 1.0, 2.0, 5.0] {
                    let (s2, s3) = ladder_sums(&epsilon_ladder(n, eps, su, n).unwrap());
                    let (b2, b3) = ladder_sum_bounds(n, eps, su);
                    assert!(s2 <= b2 * (1.0 + 1e-12) && s3 <= b3 * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn proof_epsilon_examples() {
        let mut b = unit(4, 1);
        b.nu3 = 0.0;
        assert_eq!(proof_epsilon_choice(&b, 1.0).unwrap(), 0.5);
        b.nu1 = 0.0;
        assert_eq!(proof_epsilon_choice(&b, 1.0).unwrap(), 0.0);
        let a = proof_epsilon_choice(&unit(100, 5), 2.0).unwrap();
        let c = proof_epsilon_choice(&unit(400, 5), 2.0).unwrap();
        assert_relative_eq!(c, a / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn fit_constant() {
        assert_eq!(fit_linear_constant(&[0.1, 0.4, 0.0], &[0.2, 0.5, 0.0]), 0.8);
    }
}
