//! Compact random feature maps for the RBF kernel on log-covariance
//! descriptors of skeletal action sequences.
//!
//! The crate covers the whole path from raw joint trajectories to a trained
//! classifier:
//!
//! * [`linalg`]: Jacobi eigensolver, matrix logarithm, Kronecker traces.
//! * [`descriptor`]: skeleton sequences to unit-norm log-covariance matrices.
//! * [`featmap`]: the Kronecker random maps plus Fourier, Taylor and
//!   Fastfood baselines and the exact kernel.
//! * [`perceptron`]: a one-hidden-layer network whose hidden weights give a
//!   learned linear feature map.
//! * [`learn`]: one-vs-rest linear SVM (dual coordinate descent) and an
//!   exact-Gram kernel SVM.
//! * [`stats`]: variance-bound arithmetic and Monte-Carlo estimator checks.
//! * [`experiment`]: dataset files, synthetic data and the accuracy-vs-ν sweep.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod descriptor;
pub mod error;
pub mod experiment;
pub mod featmap;
pub mod learn;
pub mod linalg;
pub mod perceptron;
pub mod rng;
pub mod stats;

pub use descriptor::{make_descriptor, LogCovDescriptor, LogEps, SkeletonSequence};
pub use error::{Error, ErrorClass, Result};
pub use featmap::{rbf_exact, DegreeDistribution, FeatureMapKind, FeatureMapModel, RbfParams};
pub use learn::{KernelSvmModel, LinearSvmModel, SvmParams};
pub use linalg::{EigenDecomposition, SymMatrix};
