//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use kronfeat::linalg::frob_norm;
use kronfeat::rng::stream_rng;
use kronfeat::SkeletonSequence;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

/// Materialized Kronecker product `a ⊗ b`.
pub fn kron(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = a[[i, j]] * b[[k, l]];
                }
            }
        }
    }
    out
}

/// `tr(Vᵀ X^{⊗n})` with `V = W₁ ⊗ … ⊗ Wₙ`, both sides built explicitly.
pub fn materialized_kron_trace(ws: &[Array2<f64>], x: &Array2<f64>) -> f64 {
    let one = Array2::from_elem((1, 1), 1.0);
    let v = ws.iter().fold(one.clone(), |acc, w| kron(&acc, w));
    let xn = ws.iter().fold(one, |acc, _| kron(&acc, x));
    let vt_x = v.t().dot(&xn);
    (0..vt_x.nrows()).map(|i| vt_x[[i, i]]).sum()
}

pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64, stream: u64) -> Array2<f64> {
    let mut rng = stream_rng(seed, stream);
    Array2::from_shape_fn((rows, cols), |_| rng.sample::<f64, _>(StandardNormal))
}

/// A random `d×d` matrix scaled to unit Frobenius norm.
pub fn unit_matrix(d: usize, seed: u64, stream: u64) -> Array2<f64> {
    let m = gaussian_matrix(d, d, seed, stream);
    let n = frob_norm(m.view());
    m / n
}

/// Random skeleton sequence with smooth-ish motion plus noise.
pub fn random_sequence(frames: usize, joints: usize, seed: u64) -> SkeletonSequence {
    let mut rng = stream_rng(seed, 0);
    let data = (0..frames)
        .map(|_| {
            (0..joints)
                .map(|_| std::array::from_fn(|_| rng.sample::<f64, _>(StandardNormal)))
                .collect()
        })
        .collect();
    SkeletonSequence::new("random", data, 0).expect("valid sequence")
}
