//! Fixtures shared by the benchmarks.

use kronfeat::featmap::{DegreeDistribution, RbfParams};
use kronfeat::linalg::frob_norm;
use kronfeat::LogCovDescriptor;
use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn default_params() -> (RbfParams, DegreeDistribution) {
    (
        RbfParams::new(1.0).expect("valid sigma"),
        DegreeDistribution::geometric(0.9).expect("valid theta"),
    )
}

/// `n` random unit-norm upper-triangular `d×d` descriptors.
pub fn random_descriptors(n: usize, d: usize, seed: u64) -> Vec<LogCovDescriptor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let m = Array2::from_shape_fn((d, d), |(i, j)| if j >= i { rng.random_range(-1.0..1.0) } else { 0.0 });
            let m = &m / frob_norm(m.view());
            LogCovDescriptor::from_matrix(m).expect("non-degenerate")
        })
        .collect()
}

/// Random symmetric positive-definite matrix `A Aᵀ + I`.
pub fn random_spd(d: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Array2::from_shape_fn((d, d), |_| rng.random_range(-1.0..1.0));
    a.dot(&a.t()) + Array2::<f64>::eye(d)
}
