//! Baseline maps from the random-features literature, reimplemented on
//! the `d²`-vectorized input.
//!
//! * Fourier: Rahimi–Recht random Fourier features.
//! * Taylor: Kar–Karnick random Maclaurin features for the dot-product form
//!   `exp(−1/σ²) exp(⟨x, y⟩/σ²)` of the RBF kernel on the unit sphere.
//! * Fastfood: Le–Sarlós–Smola. Each block of `D′` rows is
//!   `S H G Π H B / (σ √D′)` with `H` the unnormalized Walsh–Hadamard
//!   matrix, `B` random signs, `Π` a permutation, `G` Gaussian, and
//!   `Sᵢᵢ = sᵢ / ‖g‖` with `sᵢ ~ χ(D′)` so that row norms follow the
//!   Gaussian-matrix law.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;

use super::{kron::kron_coefficient_ln, DegreeDistribution, FeatureMapKind, FeatureMapModel, MapHeader, MapParams, RbfParams};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

fn header(kind: FeatureMapKind, nu: usize, dim: usize, rbf: RbfParams, theta: Option<f64>, seed: u64) -> MapHeader {
    MapHeader {
        kind,
        nu,
        input_dim: dim,
        sigma: rbf.sigma(),
        theta,
        seed,
    }
}

fn check_sizes(nu: usize, dim: usize) -> Result<()> {
    if nu == 0 || dim == 0 {
        return Err(Error::Contract("nu and input dimension must be at least 1".into()));
    }
    Ok(())
}

pub fn sample_fourier(nu: usize, dim: usize, rbf: RbfParams, seed: u64) -> Result<FeatureMapModel> {
    check_sizes(nu, dim)?;
    let sigma = rbf.sigma();
    let rows: Vec<(Vec<f64>, f64)> = (0..nu)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(seed, j as u64);
            let w = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal) / sigma).collect();
            let b = rng.random_range(0.0..2.0 * PI);
            (w, b)
        })
        .collect();
    let mut freqs = Array2::zeros((nu, dim));
    let mut phases = Array1::zeros(nu);
    for (j, (w, b)) in rows.into_iter().enumerate() {
        freqs.row_mut(j).assign(&Array1::from(w));
        phases[j] = b;
    }
    Ok(FeatureMapModel::from_parts(
        header(FeatureMapKind::Fourier, nu, dim, rbf, None, seed),
        MapParams::Fourier { freqs, phases },
    ))
}

pub(crate) fn apply_fourier(freqs: &Array2<f64>, phases: &Array1<f64>, x: &Array1<f64>) -> Array1<f64> {
    let scale = (2.0 / phases.len() as f64).sqrt();
    let mut z = freqs.dot(x);
    z.zip_mut_with(phases, |v, b| *v = scale * (*v + b).cos());
    z
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct TaylorComponent {
    pub degree: u32,
    pub coef: f64,
    /// `degree × D` matrix of ±1 entries.
    pub signs: Array2<f64>,
}

pub fn sample_taylor(nu: usize, dim: usize, rbf: RbfParams, rho: DegreeDistribution, seed: u64) -> Result<FeatureMapModel> {
    check_sizes(nu, dim)?;
    let components = (0..nu)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(seed, j as u64);
            let degree = rho.sample(&mut rng);
            let signs = Array2::from_shape_fn((degree as usize, dim), |_| if rng.random::<bool>() { 1.0 } else { -1.0 });
            TaylorComponent {
                degree,
                coef: taylor_coefficient_ln(degree, nu, rbf, &rho).exp(),
                signs,
            }
        })
        .collect();
    Ok(FeatureMapModel::from_parts(
        header(FeatureMapKind::Taylor, nu, dim, rbf, Some(rho.theta()), seed),
        MapParams::Taylor { components },
    ))
}

/// `ln √(aₙ / (ν ρ(n)))` with `aₙ = exp(−1/σ²) / (σ^{2n} n!)`. Rademacher
/// projections carry unit variance, so this is the Kronecker scale times `σⁿ`.
fn taylor_coefficient_ln(n: u32, nu: usize, rbf: RbfParams, rho: &DegreeDistribution) -> f64 {
    kron_coefficient_ln(n, nu, rbf, rho) + n as f64 * rbf.sigma().ln()
}

pub(crate) fn apply_taylor(components: &[TaylorComponent], x: &Array1<f64>) -> Array1<f64> {
    Array1::from_iter(components.iter().map(|c| c.coef * c.signs.dot(x).product()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FastfoodBlock {
    pub signs: Vec<f64>,
    pub perm: Vec<usize>,
    pub gauss: Vec<f64>,
    pub scale: Vec<f64>,
    pub phases: Vec<f64>,
}

/// In-place unnormalized fast Walsh–Hadamard transform.
///
/// Panics if the length is not a power of two.
pub fn fwht(data: &mut [f64]) {
    let n = data.len();
    assert!(n.is_power_of_two(), "FWHT length {n} is not a power of two");
    let mut h = 1;
    while h < n {
        for start in (0..n).step_by(2 * h) {
            for i in start..start + h {
                let a = data[i];
                let b = data[i + h];
                data[i] = a + b;
                data[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// `nu` must be a multiple of the padded dimension `D′ = next_pow2(dim)`.
pub fn sample_fastfood(nu: usize, dim: usize, rbf: RbfParams, seed: u64) -> Result<FeatureMapModel> {
    check_sizes(nu, dim)?;
    let padded = dim.next_power_of_two();
    if !nu.is_multiple_of(padded) {
        return Err(Error::Contract(format!(
            "fastfood needs nu to be a multiple of the padded input dimension {padded} (minimum valid nu is {padded}), got {nu}"
        )));
    }
    let chi = ChiSquared::new(padded as f64).expect("positive degrees of freedom");
    let blocks = (0..nu / padded)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let signs = (0..padded).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            let mut perm: Vec<usize> = (0..padded).collect();
            perm.shuffle(&mut rng);
            let gauss: Vec<f64> = (0..padded).map(|_| rng.sample(StandardNormal)).collect();
            let gnorm = gauss.iter().map(|g| g * g).sum::<f64>().sqrt();
            let scale = (0..padded).map(|_| chi.sample(&mut rng).sqrt() / gnorm).collect();
            let phases = (0..padded).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
            FastfoodBlock {
                signs,
                perm,
                gauss,
                scale,
                phases,
            }
        })
        .collect();
    Ok(FeatureMapModel::from_parts(
        header(FeatureMapKind::Fastfood, nu, dim, rbf, None, seed),
        MapParams::Fastfood { padded_dim: padded, blocks },
    ))
}

pub(crate) fn apply_fastfood(blocks: &[FastfoodBlock], padded: usize, sigma: f64, nu: usize, x: &Array1<f64>) -> Array1<f64> {
    let norm = 1.0 / (sigma * (padded as f64).sqrt());
    let out_scale = (2.0 / nu as f64).sqrt();
    let mut out = Vec::with_capacity(nu);
    let mut v = vec![0.0; padded];
    let mut u = vec![0.0; padded];
    for b in blocks {
        v.iter_mut().for_each(|e| *e = 0.0);
        for (i, &xi) in x.iter().enumerate() {
            v[i] = b.signs[i] * xi;
        }
        fwht(&mut v);
        for i in 0..padded {
            u[i] = v[b.perm[i]] * b.gauss[i];
        }
        fwht(&mut u);
        for i in 0..padded {
            out.push(out_scale * (u[i] * b.scale[i] * norm + b.phases[i]).cos());
        }
    }
    Array1::from(out)
}
