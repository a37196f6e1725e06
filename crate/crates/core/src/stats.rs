//! Variance constants and bounds for the Kronecker maps, plus a Monte-Carlo
//! harness that resamples a map many times and checks bias and spread.

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featmap::{rbf_exact, DegreeDistribution, FeatureMapKind, FeatureMapModel, RbfParams};
use crate::rng::derive_seed;

/// Relative truncation tolerance used when a caller does not pick one.
pub const DEFAULT_SERIES_TOL: f64 = 1e-16;
const MAX_SERIES_TERMS: usize = 100_000;
const GROWTH_RUN: usize = 10;

/// The constant `Σₙ 1/(ρ(n) n!)` and the closed form printed next to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CRho {
    /// Truncated series; infinite when it overflows or diverges.
    pub series: f64,
    /// `((1−θ)/θ) exp((1−θ)/θ)`, reported alongside, never used for bounds.
    pub closed_form: f64,
    pub terms: usize,
    pub divergent: bool,
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Sums the series until a term falls below `tol` times the partial sum.
///
/// The series is flagged divergent when terms grow for ten consecutive `n`
/// while the ratio of consecutive terms is not shrinking; a convergent
/// series may still rise for a while before its factorial takes over.
pub fn c_rho(rho: &DegreeDistribution, tol: f64) -> Result<CRho> {
    let theta = rho.theta();
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Contract(format!("C_rho needs theta in (0, 1), got {theta}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Contract(format!("truncation tolerance must be positive, got {tol}")));
    }
    let q = (1.0 - theta) / theta;
    let closed_form = q * q.exp();

    let mut sum = 0.0;
    let mut prev_term = f64::NAN;
    let mut prev_ratio = f64::NAN;
    let mut growth = 0;
    for n in 0..MAX_SERIES_TERMS {
        let term = (-rho.ln_pmf(n as u32) - ln_factorial(n)).exp();
        sum += term;
        if !sum.is_finite() {
            log::warn!("C_rho series overflowed at n = {n} (theta = {theta})");
            return Ok(CRho {
                series: f64::INFINITY,
                closed_form,
                terms: n + 1,
                divergent: false,
            });
        }
        if n > 0 {
            let ratio = term / prev_term;
            let shrinking = prev_ratio.is_finite() && ratio < prev_ratio;
            growth = if ratio > 1.0 && !shrinking { growth + 1 } else { 0 };
            if growth >= GROWTH_RUN {
                return Ok(CRho {
                    series: f64::INFINITY,
                    closed_form,
                    terms: n + 1,
                    divergent: true,
                });
            }
            prev_ratio = ratio;
        }
        prev_term = term;
        if n > 0 && term < tol * sum {
            if (sum - closed_form).abs() > 1e-9 * sum {
                log::debug!("C_rho series {sum:.9e} differs from closed form {closed_form:.9e} (theta = {theta})");
            }
            return Ok(CRho {
                series: sum,
                closed_form,
                terms: n + 1,
                divergent: false,
            });
        }
    }
    Ok(CRho {
        series: f64::INFINITY,
        closed_form,
        terms: MAX_SERIES_TERMS,
        divergent: true,
    })
}

/// Fourth moment of `N(0, σ²)`.
pub fn m4_gaussian(sigma: f64) -> f64 {
    3.0 * sigma.powi(4)
}

/// Closed-form variance bound for `kron_pi` or `kron_e` at `nu` components.
pub fn variance_bound(kind: FeatureMapKind, nu: usize, rbf: RbfParams, rho: &DegreeDistribution) -> Result<f64> {
    if nu == 0 {
        return Err(Error::Contract("nu must be at least 1".into()));
    }
    let c = c_rho(rho, DEFAULT_SERIES_TOL)?.series;
    let s2 = rbf.sigma() * rbf.sigma();
    let s4 = s2 * s2;
    let exponent = match kind {
        FeatureMapKind::KronPi => (9.0 * m4_gaussian(rbf.sigma()) - 2.0 * s4) / (s4 * s4),
        FeatureMapKind::KronE => (3.0 - 2.0 * s2) / s4,
        other => {
            return Err(Error::Contract(format!("no closed-form variance bound for {other}")));
        }
    };
    Ok(c / (nu as f64).powi(3) * exponent.exp())
}

/// `min(1, variance_bound / eps²)`.
pub fn chebyshev_bound(
    kind: FeatureMapKind,
    nu: usize,
    rbf: RbfParams,
    rho: &DegreeDistribution,
    eps: f64,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Contract(format!("eps must be positive, got {eps}")));
    }
    let v = variance_bound(kind, nu, rbf, rho)?;
    Ok((v / (eps * eps)).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevRow {
    pub eps: f64,
    pub kron_pi: f64,
    pub kron_e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub sigma: f64,
    pub theta: f64,
    pub nu: usize,
    pub c_rho_series: f64,
    pub c_rho_closed_form: f64,
    pub c_rho_divergent: bool,
    pub variance_bound_pi: f64,
    pub variance_bound_e: f64,
    pub chebyshev: Vec<ChebyshevRow>,
}

pub fn bound_report(nu: usize, rbf: RbfParams, rho: &DegreeDistribution, eps: &[f64]) -> Result<BoundReport> {
    let c = c_rho(rho, DEFAULT_SERIES_TOL)?;
    let chebyshev = eps
        .iter()
        .map(|&e| {
            Ok(ChebyshevRow {
                eps: e,
                kron_pi: chebyshev_bound(FeatureMapKind::KronPi, nu, rbf, rho, e)?,
                kron_e: chebyshev_bound(FeatureMapKind::KronE, nu, rbf, rho, e)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(BoundReport {
        sigma: rbf.sigma(),
        theta: rho.theta(),
        nu,
        c_rho_series: c.series,
        c_rho_closed_form: c.closed_form,
        c_rho_divergent: c.divergent,
        variance_bound_pi: variance_bound(FeatureMapKind::KronPi, nu, rbf, rho)?,
        variance_bound_e: variance_bound(FeatureMapKind::KronE, nu, rbf, rho)?,
        chebyshev,
    })
}

/// Sum by recursive halving, so the result depends only on the input order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorStats {
    pub mean: f64,
    /// Unbiased sample variance (zero for a single sample).
    pub variance: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl EstimatorStats {
    pub fn from_samples(v: &[f64]) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::Contract("no samples".into()));
        }
        let n = v.len();
        // shifting by the first sample keeps constant inputs exactly constant
        let shift = v[0];
        let centred: Vec<f64> = v.iter().map(|x| x - shift).collect();
        let offset = pairwise_sum(&centred) / n as f64;
        let mean = shift + offset;
        let dev: Vec<f64> = centred.iter().map(|x| (x - offset) * (x - offset)).collect();
        let variance = if n > 1 { pairwise_sum(&dev) / (n - 1) as f64 } else { 0.0 };
        Ok(Self {
            mean,
            variance,
            stderr: (variance / n as f64).sqrt(),
            samples: n,
        })
    }
}

/// Anything that produces a kernel estimate for a pair of inputs.
pub trait KernelEstimator {
    fn estimate(&self, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<f64>;
}

impl KernelEstimator for FeatureMapModel {
    fn estimate(&self, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<f64> {
        self.kernel_estimate(x, y)
    }
}

/// The exact kernel, for checking the harness itself.
#[derive(Debug, Clone, Copy)]
pub struct ExactKernel(pub RbfParams);

impl KernelEstimator for ExactKernel {
    fn estimate(&self, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<f64> {
        rbf_exact(x, y, self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub stats: EstimatorStats,
    pub exact: f64,
    /// `(mean − exact) / stderr`; zero when both numerator and stderr vanish.
    pub z_score: f64,
    pub unbiased: bool,
    pub variance_bound: Option<f64>,
    /// `variance ≤ 2 · bound`, when a bound is given.
    pub within_bound: Option<bool>,
}

/// Builds a fresh estimator for each of `repetitions` sub-seeds of `seed`
/// and summarizes `⟨φ(x), φ(y)⟩` against the exact kernel.
pub fn mc_bias_variance<E, F>(
    factory: F,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    repetitions: usize,
    rbf: RbfParams,
    seed: u64,
    bound: Option<f64>,
) -> Result<McReport>
where
    E: KernelEstimator,
    F: Fn(u64) -> Result<E> + Sync,
{
    if repetitions == 0 {
        return Err(Error::Contract("need at least one repetition".into()));
    }
    let samples: Vec<f64> = (0..repetitions as u64)
        .into_par_iter()
        .map(|r| factory(derive_seed(seed, r))?.estimate(x, y))
        .collect::<Result<_>>()?;
    let stats = EstimatorStats::from_samples(&samples)?;
    let exact = rbf_exact(x, y, rbf)?;
    let diff = stats.mean - exact;
    let slack = 1e-12 * exact.abs().max(1.0);
    let z_score = if stats.stderr > 0.0 { diff / stats.stderr } else if diff.abs() <= slack { 0.0 } else { f64::INFINITY };
    Ok(McReport {
        stats,
        exact,
        z_score,
        unbiased: diff.abs() <= 3.0 * stats.stderr + slack,
        variance_bound: bound,
        within_bound: bound.map(|b| stats.variance <= 2.0 * b),
    })
}
