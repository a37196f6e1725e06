use ndarray::{Array1, ArrayView2};

use super::RbfParams;
use crate::error::{Error, Result};

/// `exp(-‖x − y‖²_F / (2σ²))`.
pub fn rbf_exact(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, p: RbfParams) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::shape(format!("{:?}", x.dim()), format!("{:?}", y.dim())));
    }
    let dist2: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-dist2 / (2.0 * p.sigma() * p.sigma())).exp())
}

const MAX_EXACT_DIM: usize = 6;
const MAX_EXACT_DEGREE: u32 = 8;

/// Truncated exact Taylor feature map of `vec(x)`, all monomials up to
/// `max_degree`. Its size grows as `C(D + n, n)`, so the input is limited to
/// `D ≤ 6` entries and degree ≤ 8; it exists to check the random maps.
///
/// The monomial `xᵅ` with `|α| = n` carries weight
/// `√(exp(−1/σ²) / (σ^{2n} Πᵢ αᵢ!))`, so that for unit-norm inputs
/// `⟨f(x), f(y)⟩ = exp(−1/σ²) Σₙ≤N ⟨x, y⟩ⁿ / (σ^{2n} n!)`.
pub fn exact_taylor_map(x: ArrayView2<'_, f64>, max_degree: u32, p: RbfParams) -> Result<Array1<f64>> {
    let v: Vec<f64> = x.iter().copied().collect();
    if v.is_empty() || v.len() > MAX_EXACT_DIM || max_degree > MAX_EXACT_DEGREE {
        return Err(Error::Contract(format!(
            "exact Taylor map limited to 1..={MAX_EXACT_DIM} entries and degree <= {MAX_EXACT_DEGREE}, got {} entries, degree {max_degree}",
            v.len()
        )));
    }
    let s2 = p.sigma() * p.sigma();
    let base = (-1.0 / s2).exp();
    let mut out = Vec::new();
    let mut alpha = vec![0u32; v.len()];
    for n in 0..=max_degree {
        for_each_composition(n, &mut alpha, 0, &mut |a| {
            let mut mono = 1.0;
            let mut fact = 1.0;
            for (&xi, &ai) in v.iter().zip(a) {
                mono *= xi.powi(ai as i32);
                fact *= (1..=ai).map(f64::from).product::<f64>();
            }
            out.push((base / (s2.powi(n as i32) * fact)).sqrt() * mono);
        });
    }
    Ok(Array1::from(out))
}

/// Visits every `α` with `Σ αᵢ = remaining` over positions `pos..`.
fn for_each_composition(remaining: u32, alpha: &mut [u32], pos: usize, f: &mut impl FnMut(&[u32])) {
    if pos == alpha.len() - 1 {
        alpha[pos] = remaining;
        f(alpha);
        return;
    }
    for k in (0..=remaining).rev() {
        alpha[pos] = k;
        for_each_composition(remaining - k, alpha, pos + 1, f);
    }
    alpha[pos] = 0;
}
