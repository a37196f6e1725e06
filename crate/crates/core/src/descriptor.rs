//! Skeleton sequences and their log-covariance descriptors.
//!
//! The pipeline is: root-relative joint displacements, sample covariance,
//! matrix logarithm, strict-lower-triangle zeroing, Frobenius normalization.

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};

/// Frobenius norm below which a log-covariance is treated as the zero matrix.
pub const DEGENERATE_NORM: f64 = 1e-10;

/// A variable-length 3D joint trajectory, `T` frames of `J` joints.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    label: String,
    joints: Vec<Vec<[f64; 3]>>,
    root_index: usize,
}

impl SkeletonSequence {
    pub fn new(label: impl Into<String>, joints: Vec<Vec<[f64; 3]>>, root_index: usize) -> Result<Self> {
        let label = label.into();
        let invalid = |reason: String| Error::InvalidSequence {
            label: label.clone(),
            reason,
        };
        if joints.len() < 2 {
            return Err(invalid(format!("needs at least 2 frames, got {}", joints.len())));
        }
        let j = joints[0].len();
        if j < 2 {
            return Err(invalid(format!("needs at least 2 joints, got {j}")));
        }
        if root_index >= j {
            return Err(invalid(format!("root index {root_index} out of range for {j} joints")));
        }
        for (t, frame) in joints.iter().enumerate() {
            if frame.len() != j {
                return Err(invalid(format!("frame {t} has {} joints, expected {j}", frame.len())));
            }
            if frame.iter().flatten().any(|c| !c.is_finite()) {
                return Err(invalid(format!("frame {t} has a non-finite coordinate")));
            }
        }
        Ok(Self {
            label,
            joints,
            root_index,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn frames(&self) -> usize {
        self.joints.len()
    }

    pub fn joint_count(&self) -> usize {
        self.joints[0].len()
    }

    pub fn root_index(&self) -> usize {
        self.root_index
    }

    pub fn joints(&self) -> &[Vec<[f64; 3]>] {
        &self.joints
    }

    /// Descriptor side length `3 (J - 1)`.
    pub fn descriptor_dim(&self) -> usize {
        3 * (self.joint_count() - 1)
    }
}

/// A unit-Frobenius-norm, upper-triangular log-covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LogCovDescriptor {
    entries: Array2<f64>,
}

impl LogCovDescriptor {
    /// Zeroes the strict lower triangle of `m`, then scales it to unit norm.
    pub fn from_matrix(mut m: Array2<f64>) -> Result<Self> {
        let (r, c) = m.dim();
        if r != c || r == 0 {
            return Err(Error::shape("non-empty square matrix", format!("{r}x{c}")));
        }
        for i in 0..r {
            for j in 0..i {
                m[[i, j]] = 0.0;
            }
        }
        let norm = linalg::frob_norm(m.view());
        if !(norm > DEGENERATE_NORM) || !norm.is_finite() {
            return Err(Error::Contract(format!(
                "cannot normalize matrix with Frobenius norm {norm:e}"
            )));
        }
        m /= norm;
        Ok(Self { entries: m })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.entries.view()
    }

    /// Row-major `d²` vectorization, zeros of the lower triangle included.
    pub fn vectorized(&self) -> Array1<f64> {
        Array1::from_iter(self.entries.iter().copied())
    }
}

/// How the eigenvalue regularizer of the matrix logarithm is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LogEps {
    /// `1e-5 · max(λ_max, 1)`.
    #[default]
    Auto,
    Fixed(f64),
}

impl LogEps {
    pub fn resolve(self, max_eigenvalue: f64) -> f64 {
        match self {
            LogEps::Auto => linalg::default_log_eps(max_eigenvalue),
            LogEps::Fixed(e) => e,
        }
    }
}

/// Row `t` holds `joint_k(t) - root(t)` for every `k ≠ root`, in joint order.
pub fn relative_displacements(seq: &SkeletonSequence) -> Array2<f64> {
    let t_len = seq.frames();
    let d = seq.descriptor_dim();
    let root = seq.root_index;
    let mut out = Array2::zeros((t_len, d));
    for (t, frame) in seq.joints.iter().enumerate() {
        let r = frame[root];
        let mut col = 0;
        for (k, p) in frame.iter().enumerate() {
            if k == root {
                continue;
            }
            for axis in 0..3 {
                out[[t, col + axis]] = p[axis] - r[axis];
            }
            col += 3;
        }
    }
    out
}

/// Unbiased sample covariance of the rows of `x` (divisor `T - 1`).
pub fn covariance(x: ArrayView2<'_, f64>) -> Result<SymMatrix> {
    let (t_len, d) = x.dim();
    if t_len < 2 {
        return Err(Error::Contract(format!(
            "covariance needs at least 2 observations, got {t_len}"
        )));
    }
    if d == 0 {
        return Err(Error::Contract("covariance of zero-width data".into()));
    }
    let mean = x.sum_axis(ndarray::Axis(0)) / t_len as f64;
    let centered = &x - &mean;
    let mut c = Array2::zeros((d, d));
    for i in 0..d {
        let ci = centered.column(i);
        for j in i..d {
            let v = ci.dot(&centered.column(j)) / (t_len - 1) as f64;
            c[[i, j]] = v;
            c[[j, i]] = v;
        }
    }
    SymMatrix::new(c)
}

/// Full descriptor pipeline for one sequence.
pub fn make_descriptor(seq: &SkeletonSequence, eps: LogEps) -> Result<LogCovDescriptor> {
    let degenerate = |reason: String| Error::DegenerateDescriptor {
        label: seq.label.clone(),
        reason,
    };
    let cov = covariance(relative_displacements(seq).view())?;
    let eig = linalg::eigh(&cov)?;
    let eps = eps.resolve(eig.max_eigenvalue());
    let log = linalg::log_from_eigen(&eig, eps).map_err(|e| degenerate(e.to_string()))?;
    LogCovDescriptor::from_matrix(log.into_inner()).map_err(|e| degenerate(e.to_string()))
}
