//! Dense symmetric-matrix numerics.
//!
//! The eigensolver is a cyclic Jacobi method. It is slower than tridiagonal
//! QR for large matrices but unconditionally convergent and very accurate,
//! and the descriptors in this crate are at most a few dozen rows wide.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

/// Relative off-diagonal threshold at which the Jacobi sweeps stop.
pub const JACOBI_TOL: f64 = 1e-12;

/// Default additive eigenvalue regularizer relative to the largest eigenvalue.
pub const DEFAULT_LOG_EPS_RATIO: f64 = 1e-5;

/// A square matrix that is exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    data: Array2<f64>,
}

impl SymMatrix {
    /// Wraps `data` after checking it is square, non-empty and exactly symmetric.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (r, c) = data.dim();
        if r != c {
            return Err(Error::shape("square matrix", format!("{r}x{c}")));
        }
        if r == 0 {
            return Err(Error::Contract("matrix dimension must be at least 1".into()));
        }
        for i in 0..r {
            for j in (i + 1)..r {
                if data[[i, j]] != data[[j, i]] {
                    return Err(Error::Contract(format!(
                        "matrix is not symmetric at ({i}, {j}): {} vs {}",
                        data[[i, j]],
                        data[[j, i]]
                    )));
                }
            }
        }
        Ok(Self { data })
    }

    /// Returns `(a + aᵀ) / 2`.
    pub fn symmetrize(a: ArrayView2<'_, f64>) -> Result<Self> {
        let (r, c) = a.dim();
        if r != c {
            return Err(Error::shape("square matrix", format!("{r}x{c}")));
        }
        let mut out = Array2::zeros((r, r));
        for i in 0..r {
            out[[i, i]] = a[[i, i]];
            for j in (i + 1)..r {
                let v = 0.5 * (a[[i, j]] + a[[j, i]]);
                out[[i, j]] = v;
                out[[j, i]] = v;
            }
        }
        Self::new(out)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            data: Array2::eye(dim),
        }
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        Self {
            data: Array2::from_diag(&Array1::from(diag.to_vec())),
        }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }
}

/// Eigenvalues in ascending order with matching eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Array1<f64>,
    pub eigenvectors: Array2<f64>,
}

impl EigenDecomposition {
    /// Builds `U diag(f(λ)) Uᵀ`, exactly symmetric.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let d = self.eigenvalues.len();
        let u = &self.eigenvectors;
        let g: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut out = Array2::zeros((d, d));
        for i in 0..d {
            for j in i..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += u[[i, k]] * g[k] * u[[j, k]];
                }
                out[[i, j]] = s;
                out[[j, i]] = s;
            }
        }
        SymMatrix { data: out }
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn eigh(m: &SymMatrix) -> Result<EigenDecomposition> {
    let d = m.dim();
    let mut a: Vec<f64> = m.data.iter().copied().collect();
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }

    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let threshold = JACOBI_TOL * norm;
    let max_sweeps = 100 * d * d;

    let off_norm = |a: &[f64]| {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    s += a[i * d + j] * a[i * d + j];
                }
            }
        }
        s.sqrt()
    };

    let mut converged = false;
    for _ in 0..max_sweeps {
        if off_norm(&a) <= threshold {
            converged = true;
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                a[p * d + p] = app - t * apq;
                a[q * d + q] = aqq + t * apq;
                a[p * d + q] = 0.0;
                a[q * d + p] = 0.0;
                for r in 0..d {
                    if r == p || r == q {
                        continue;
                    }
                    let g = a[r * d + p];
                    let h = a[r * d + q];
                    let np = g - s * (h + g * tau);
                    let nq = h + s * (g - h * tau);
                    a[r * d + p] = np;
                    a[p * d + r] = np;
                    a[r * d + q] = nq;
                    a[q * d + r] = nq;
                }
                for r in 0..d {
                    let g = v[r * d + p];
                    let h = v[r * d + q];
                    v[r * d + p] = g - s * (h + g * tau);
                    v[r * d + q] = h + s * (g - h * tau);
                }
            }
        }
    }
    if !converged && off_norm(&a) > threshold {
        return Err(Error::NoConvergence {
            dim: d,
            sweeps: max_sweeps,
        });
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a[i * d + i].total_cmp(&a[j * d + j]));
    let eigenvalues = Array1::from_iter(order.iter().map(|&i| a[i * d + i]));
    let mut eigenvectors = Array2::zeros((d, d));
    for (col, &src) in order.iter().enumerate() {
        for r in 0..d {
            eigenvectors[[r, col]] = v[r * d + src];
        }
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// `eps` used when the caller does not pin one: a fixed fraction of the
/// largest eigenvalue, floored at one.
pub fn default_log_eps(max_eigenvalue: f64) -> f64 {
    DEFAULT_LOG_EPS_RATIO * max_eigenvalue.max(1.0)
}

/// Matrix logarithm of an already decomposed matrix, `U diag(log(λ + eps)) Uᵀ`.
pub fn log_from_eigen(eig: &EigenDecomposition, eps: f64) -> Result<SymMatrix> {
    if let Some(&bad) = eig.eigenvalues.iter().find(|&&l| !(l + eps > 0.0)) {
        return Err(Error::LogDomain {
            eigenvalue: bad,
            eps,
        });
    }
    Ok(eig.map_spectrum(|l| (l + eps).ln()))
}

/// Matrix logarithm with additive eigenvalue regularization.
pub fn sym_log(m: &SymMatrix, eps: f64) -> Result<SymMatrix> {
    log_from_eigen(&eigh(m)?, eps)
}

/// Frobenius inner product `Σ aᵢⱼ bᵢⱼ`.
pub fn frob_inner(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::shape(format!("{:?}", a.dim()), format!("{:?}", b.dim())));
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x * y).sum())
}

pub fn frob_norm(a: ArrayView2<'_, f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `tr(⊗ₖ Wₖᵀ X)`, evaluated through `tr(A ⊗ B) = tr(A) tr(B)` as
/// `Πₖ tr(Wₖᵀ X) = Πₖ ⟨Wₖ, X⟩_F`. The empty product is 1.
pub fn kron_trace(ws: &[Array2<f64>], x: ArrayView2<'_, f64>) -> Result<f64> {
    let mut acc = 1.0;
    for w in ws {
        acc *= frob_inner(w.view(), x)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_sym(d: usize, seed: u64) -> SymMatrix {
        let mut rng = crate::rng::stream_rng(seed, 0);
        let raw = Array2::from_shape_fn((d, d), |_| rng.sample::<f64, _>(StandardNormal));
        SymMatrix::symmetrize(raw.view()).unwrap()
    }

    fn reconstruct(e: &EigenDecomposition) -> Array2<f64> {
        let d = e.eigenvalues.len();
        let mut out = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    out[[i, j]] += e.eigenvectors[[i, k]] * e.eigenvalues[k] * e.eigenvectors[[j, k]];
                }
            }
        }
        out
    }

    #[test]
    fn rejects_asymmetric_and_non_square() {
        assert!(SymMatrix::new(array![[1.0, 2.0], [2.0000001, 1.0]]).is_err());
        assert!(SymMatrix::new(Array2::zeros((2, 3))).is_err());
        assert!(SymMatrix::new(Array2::zeros((0, 0))).is_err());
    }

    #[test]
    fn eigh_identity() {
        let e = eigh(&SymMatrix::identity(3)).unwrap();
        assert_eq!(e.eigenvalues.to_vec(), vec![1.0, 1.0, 1.0]);
        let utu = e.eigenvectors.t().dot(&e.eigenvectors);
        assert!((&utu - &Array2::<f64>::eye(3)).iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn eigh_diagonal_sorted() {
        let e = eigh(&SymMatrix::from_diag(&[5.0, 2.0])).unwrap();
        assert_eq!(e.eigenvalues.to_vec(), vec![2.0, 5.0]);
        // permutation of the identity, up to sign
        assert_eq!(e.eigenvectors[[1, 0]].abs(), 1.0);
        assert_eq!(e.eigenvectors[[0, 1]].abs(), 1.0);
    }

    #[test]
    fn eigh_random_reconstructs() {
        let m = random_sym(6, 11);
        let e = eigh(&m).unwrap();
        let max_abs = m.view().iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let err = frob_norm((&reconstruct(&e) - &m.view()).view());
        assert!(err < 1e-10 * 6.0 * max_abs, "reconstruction error {err}");
        let utu = e.eigenvectors.t().dot(&e.eigenvectors);
        assert!(frob_norm((&utu - &Array2::<f64>::eye(6)).view()) < 1e-10);
        assert!(e.eigenvalues.windows(2).into_iter().all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eigh_zero_matrix() {
        let e = eigh(&SymMatrix::new(Array2::zeros((3, 3))).unwrap()).unwrap();
        assert!(e.eigenvalues.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn eigh_large_dimension() {
        let m = random_sym(45, 3);
        let e = eigh(&m).unwrap();
        let max_abs = m.view().iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let err = frob_norm((&reconstruct(&e) - &m.view()).view());
        assert!(err < 1e-10 * 45.0 * max_abs);
    }

    #[test]
    fn log_identity_is_zero() {
        let l = sym_log(&SymMatrix::identity(4), 0.0).unwrap();
        assert!(l.view().iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn log_of_diag_exponentials() {
        let e1 = 1f64.exp();
        let l = sym_log(&SymMatrix::from_diag(&[e1, e1 * e1]), 0.0).unwrap();
        assert!((l.view()[[0, 0]] - 1.0).abs() < 1e-14);
        assert!((l.view()[[1, 1]] - 2.0).abs() < 1e-14);
        assert_eq!(l.view()[[0, 1]], 0.0);
    }

    #[test]
    fn log_rank_deficient_regularized() {
        // v vᵀ + w wᵀ in 3-D has one zero eigenvalue
        let v = array![1.0, 2.0, 0.5];
        let w = array![-1.0, 0.0, 3.0];
        let mut c = Array2::zeros((3, 3));
        for i in 0..3 {
            for j in 0..3 {
                c[[i, j]] = v[i] * v[j] + w[i] * w[j];
            }
        }
        let c = SymMatrix::symmetrize(c.view()).unwrap();
        let eig = eigh(&c).unwrap();
        let l = sym_log(&c, 1e-6).unwrap();
        let le = eigh(&l).unwrap();
        let expected: Vec<f64> = eig.eigenvalues.iter().map(|x| (x + 1e-6).ln()).collect();
        for (got, want) in le.eigenvalues.iter().zip(&expected) {
            assert!((got - want).abs() < 1e-6 * want.abs().max(1.0), "{got} vs {want}");
        }
        assert!((le.eigenvalues[0] - (1e-6f64).ln()).abs() < 1e-4);
    }

    #[test]
    fn log_domain_error_reports_eigenvalue() {
        let err = sym_log(&SymMatrix::from_diag(&[-2.0, 1.0]), 1.0).unwrap_err();
        match err {
            Error::LogDomain { eigenvalue, .. } => assert_eq!(eigenvalue, -2.0),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn frob_inner_examples() {
        let i3 = Array2::<f64>::eye(3);
        assert_eq!(frob_inner(i3.view(), i3.view()).unwrap(), 3.0);
        assert!(frob_inner(i3.view(), Array2::<f64>::eye(2).view()).is_err());

        let mut rng = crate::rng::stream_rng(5, 0);
        let a = Array2::from_shape_fn((4, 4), |_| rng.random::<f64>());
        let b = Array2::from_shape_fn((4, 4), |_| rng.random::<f64>());
        let mut naive = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                naive += a[[i, j]] * b[[i, j]];
            }
        }
        assert!((frob_inner(a.view(), b.view()).unwrap() - naive).abs() < 1e-14);
        let n = frob_norm(a.view());
        let unit = &a / n;
        assert!((frob_inner(unit.view(), unit.view()).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kron_trace_small_cases() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(kron_trace(&[], x.view()).unwrap(), 1.0);
        assert_eq!(kron_trace(&[Array2::eye(2)], x.view()).unwrap(), 5.0);
        assert!(kron_trace(&[Array2::eye(3)], x.view()).is_err());
    }
}
