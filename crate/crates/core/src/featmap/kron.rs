//! Kronecker-product random maps.
//!
//! Both kinds evaluate `c(n) · Πₖ ⟨Wₖ, X⟩_F` with
//! `c(n) = σ^{-2n} √(exp(−1/σ²) / (ν ρ(n) n!))`. For `kron_e` the weight
//! operator is the Kronecker product `V = ⊗ₖ Vₖ`, so `tr(Vᵀ X^{⊗n})`
//! collapses to the same product of traces by the mixed-product rule.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{DegreeDistribution, FeatureMapKind, FeatureMapModel, MapHeader, MapParams, RbfParams};
use crate::error::{Error, Result};
use crate::linalg::kron_trace;
use crate::rng::stream_rng;

/// One random component: its degree, scale and `degree` weight matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct KronComponent {
    pub degree: u32,
    pub coef: f64,
    pub weights: Vec<Array2<f64>>,
}

#[derive(Debug, Clone, Copy)]
pub struct KronConfig {
    pub nu: usize,
    pub dim: usize,
    pub rbf: RbfParams,
    pub rho: DegreeDistribution,
    pub seed: u64,
    /// Replaces the sampled degree of every component (the scale still uses `ρ(n)`).
    pub forced_degree: Option<u32>,
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `ln c(n)`, computed in log space so that `ρ(n) n!` never under/overflows.
pub fn kron_coefficient_ln(n: u32, nu: usize, rbf: RbfParams, rho: &DegreeDistribution) -> f64 {
    let s2 = rbf.sigma() * rbf.sigma();
    -(n as f64) * s2.ln() + 0.5 * (-1.0 / s2 - rho.ln_pmf(n) - ln_factorial(n) - (nu as f64).ln())
}

pub(crate) fn sample_component(j: usize, cfg: &KronConfig) -> KronComponent {
    let mut rng = stream_rng(cfg.seed, j as u64);
    let sampled = cfg.rho.sample(&mut rng);
    let degree = cfg.forced_degree.unwrap_or(sampled);
    let sigma = cfg.rbf.sigma();
    let weights = (0..degree)
        .map(|_| Array2::from_shape_fn((cfg.dim, cfg.dim), |_| sigma * rng.sample::<f64, _>(StandardNormal)))
        .collect();
    KronComponent {
        degree,
        coef: kron_coefficient_ln(degree, cfg.nu, cfg.rbf, &cfg.rho).exp(),
        weights,
    }
}

/// Samples a `kron_pi` or `kron_e` map.
pub fn sample_kron(kind: FeatureMapKind, cfg: &KronConfig) -> Result<FeatureMapModel> {
    if !kind.takes_matrix() {
        return Err(Error::Contract(format!("{kind} is not a Kronecker map")));
    }
    if cfg.nu == 0 || cfg.dim == 0 {
        return Err(Error::Contract("nu and d must be at least 1".into()));
    }
    let components: Vec<KronComponent> = if cfg.nu >= 64 {
        (0..cfg.nu).into_par_iter().map(|j| sample_component(j, cfg)).collect()
    } else {
        (0..cfg.nu).map(|j| sample_component(j, cfg)).collect()
    };
    Ok(FeatureMapModel::from_parts(
        MapHeader {
            kind,
            nu: cfg.nu,
            input_dim: cfg.dim,
            sigma: cfg.rbf.sigma(),
            theta: Some(cfg.rho.theta()),
            seed: cfg.seed,
        },
        MapParams::Kron {
            components,
            forced_degree: cfg.forced_degree,
        },
    ))
}

pub fn sample_kron_pi(nu: usize, d: usize, rbf: RbfParams, rho: DegreeDistribution, seed: u64) -> Result<FeatureMapModel> {
    sample_kron(
        FeatureMapKind::KronPi,
        &KronConfig {
            nu,
            dim: d,
            rbf,
            rho,
            seed,
            forced_degree: None,
        },
    )
}

pub fn sample_kron_e(nu: usize, d: usize, rbf: RbfParams, rho: DegreeDistribution, seed: u64) -> Result<FeatureMapModel> {
    sample_kron(
        FeatureMapKind::KronE,
        &KronConfig {
            nu,
            dim: d,
            rbf,
            rho,
            seed,
            forced_degree: None,
        },
    )
}

pub(crate) fn apply(components: &[KronComponent], x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    components
        .iter()
        .map(|c| Ok(c.coef * kron_trace(&c.weights, x)?))
        .collect::<Result<Vec<f64>>>()
        .map(Array1::from)
}
