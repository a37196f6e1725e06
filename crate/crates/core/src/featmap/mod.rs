//! Explicit feature maps whose inner products approximate the RBF kernel
//! `K(X, Y) = exp(-‖X − Y‖²_F / (2σ²))` on unit-norm matrices.
//!
//! Every random map is a pure function of its header `(kind, ν, input_dim,
//! σ, θ, seed)`: component `j` draws from its own stream derived from
//! `(seed, j)`, so models can be regenerated from a few bytes and sampled
//! in parallel without changing a single bit of the result.
//!
//! | kind       | input          | component                                   |
//! |------------|----------------|---------------------------------------------|
//! | `kron_pi`  | `d×d` matrix   | `c(n) Πₖ ⟨Wₖ, X⟩_F`, `n ~ ρ`, `W ~ N(0,σ²)` |
//! | `kron_e`   | `d×d` matrix   | `c(n) tr(Vᵀ X^{⊗n})`, `V = ⊗ₖ Vₖ`           |
//! | `fourier`  | `vec(X)`, `d²` | `√(2/ν) cos(w·x + b)`                       |
//! | `taylor`   | `vec(X)`, `d²` | `√(aₙ/(νρ(n))) Πᵢ sᵢ·x`, Rademacher `sᵢ`    |
//! | `fastfood` | `vec(X)`, `d²` | cosine features over `S H G Π H B` blocks   |
//! | `perceptron` | `vec(X)`, `d²` | `𝕎 vec(X)`, weights learned elsewhere     |

mod baselines;
mod exact;
mod kron;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptor::LogCovDescriptor;
use crate::error::{Error, Result};

pub use baselines::{fwht, sample_fastfood, sample_fourier, sample_taylor, FastfoodBlock};
pub use exact::{exact_taylor_map, rbf_exact};
pub use kron::{kron_coefficient_ln, sample_kron, sample_kron_e, sample_kron_pi, KronComponent, KronConfig};

/// Degrees above this are rejected and resampled.
pub const MAX_DEGREE: u32 = 20;

/// Serialization format version of [`MapDocument`].
pub const MAP_FORMAT_VERSION: u32 = 1;

/// RBF kernel bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbfParams {
    sigma: f64,
}

impl RbfParams {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Contract(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Law of the sampled feature degree `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DegreeDistribution {
    /// `ρ(n) = (1 − θ)ⁿ θ` on `n = 0, 1, 2, …`
    Geometric { theta: f64 },
}

impl DegreeDistribution {
    pub fn geometric(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::Contract(format!("theta must lie in (0, 1], got {theta}")));
        }
        Ok(Self::Geometric { theta })
    }

    pub fn theta(&self) -> f64 {
        match *self {
            Self::Geometric { theta } => theta,
        }
    }

    pub fn pmf(&self, n: u32) -> f64 {
        self.ln_pmf(n).exp()
    }

    pub fn ln_pmf(&self, n: u32) -> f64 {
        let theta = self.theta();
        if n == 0 {
            theta.ln()
        } else {
            n as f64 * (1.0 - theta).ln() + theta.ln()
        }
    }

    /// Draws a degree, rejecting values above [`MAX_DEGREE`].
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let geo = Geometric::new(self.theta()).expect("theta validated at construction");
        loop {
            let n = geo.sample(rng);
            if n <= MAX_DEGREE as u64 {
                return n as u32;
            }
        }
    }
}

/// The six supported encoders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMapKind {
    KronPi,
    KronE,
    Fourier,
    Taylor,
    Fastfood,
    Perceptron,
}

impl FeatureMapKind {
    pub const ALL: [FeatureMapKind; 6] = [
        Self::KronPi,
        Self::KronE,
        Self::Fourier,
        Self::Taylor,
        Self::Fastfood,
        Self::Perceptron,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::KronPi => "kron_pi",
            Self::KronE => "kron_e",
            Self::Fourier => "fourier",
            Self::Taylor => "taylor",
            Self::Fastfood => "fastfood",
            Self::Perceptron => "perceptron",
        }
    }

    /// Kinds that act on the `d×d` matrix rather than its vectorization.
    pub fn takes_matrix(&self) -> bool {
        matches!(self, Self::KronPi | Self::KronE)
    }
}

impl fmt::Display for FeatureMapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureMapKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Contract(format!("unknown feature map kind {s:?}")))
    }
}

/// Identity of a sampled map; together with the kind-specific
/// hyperparameters this regenerates every random parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapHeader {
    pub kind: FeatureMapKind,
    pub nu: usize,
    /// Matrix side `d` for the Kronecker kinds, `d²` otherwise.
    pub input_dim: usize,
    pub sigma: f64,
    pub theta: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum MapParams {
    Kron {
        components: Vec<KronComponent>,
        forced_degree: Option<u32>,
    },
    Fourier {
        freqs: Array2<f64>,
        phases: Array1<f64>,
    },
    Taylor {
        components: Vec<baselines::TaylorComponent>,
    },
    Fastfood {
        padded_dim: usize,
        blocks: Vec<FastfoodBlock>,
    },
    Perceptron {
        weights: Array2<f64>,
        bias: Option<Array1<f64>>,
        apply_sigmoid: bool,
    },
}

/// A sampled or learned feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMapModel {
    header: MapHeader,
    params: MapParams,
}

impl FeatureMapModel {
    pub(crate) fn from_parts(header: MapHeader, params: MapParams) -> Self {
        Self { header, params }
    }

    /// Linear map `φ(X) = 𝕎 vec(X)`, optionally with a bias and a sigmoid.
    pub fn perceptron(weights: Array2<f64>, bias: Option<Array1<f64>>, apply_sigmoid: bool) -> Result<Self> {
        let (nu, dim) = weights.dim();
        if nu == 0 || dim == 0 {
            return Err(Error::Contract("perceptron weights must be non-empty".into()));
        }
        if let Some(b) = &bias {
            if b.len() != nu {
                return Err(Error::shape(nu, b.len()));
            }
        }
        Ok(Self {
            header: MapHeader {
                kind: FeatureMapKind::Perceptron,
                nu,
                input_dim: dim,
                sigma: 1.0,
                theta: None,
                seed: 0,
            },
            params: MapParams::Perceptron {
                weights,
                bias,
                apply_sigmoid,
            },
        })
    }

    pub fn header(&self) -> &MapHeader {
        &self.header
    }

    pub fn kind(&self) -> FeatureMapKind {
        self.header.kind
    }

    pub fn nu(&self) -> usize {
        self.header.nu
    }

    /// Sampled degrees of the polynomial kinds, `None` otherwise.
    pub fn degrees(&self) -> Option<Vec<u32>> {
        match &self.params {
            MapParams::Kron { components, .. } => Some(components.iter().map(|c| c.degree).collect()),
            MapParams::Taylor { components } => Some(components.iter().map(|c| c.degree).collect()),
            _ => None,
        }
    }

    pub fn kron_components(&self) -> Option<&[KronComponent]> {
        match &self.params {
            MapParams::Kron { components, .. } => Some(components),
            _ => None,
        }
    }

    fn check_input(&self, x: ArrayView2<'_, f64>) -> Result<()> {
        let dim = self.header.input_dim;
        if self.header.kind.takes_matrix() {
            if x.dim() != (dim, dim) {
                return Err(Error::shape(format!("{dim}x{dim}"), format!("{}x{}", x.nrows(), x.ncols())));
            }
        } else if x.len() != dim {
            return Err(Error::shape(format!("{dim} entries"), format!("{} entries", x.len())));
        }
        Ok(())
    }

    /// Feature vector of `x` (a `d×d` matrix; vectorized row-major where needed).
    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.check_input(x)?;
        match &self.params {
            MapParams::Kron { components, .. } => kron::apply(components, x),
            MapParams::Fourier { freqs, phases } => Ok(baselines::apply_fourier(freqs, phases, &vectorize(x))),
            MapParams::Taylor { components } => Ok(baselines::apply_taylor(components, &vectorize(x))),
            MapParams::Fastfood { padded_dim, blocks } => Ok(baselines::apply_fastfood(
                blocks,
                *padded_dim,
                self.header.sigma,
                self.header.nu,
                &vectorize(x),
            )),
            MapParams::Perceptron {
                weights,
                bias,
                apply_sigmoid,
            } => {
                let mut h = weights.dot(&vectorize(x));
                if let Some(b) = bias {
                    h += b;
                }
                if *apply_sigmoid {
                    h.mapv_inplace(|v| 1.0 / (1.0 + (-v).exp()));
                }
                Ok(h)
            }
        }
    }

    pub fn apply_descriptor(&self, x: &LogCovDescriptor) -> Result<Array1<f64>> {
        self.apply(x.view())
    }

    /// Features of every descriptor, one row each.
    pub fn transform(&self, xs: &[LogCovDescriptor]) -> Result<Array2<f64>> {
        let rows: Vec<Array1<f64>> = xs.par_iter().map(|x| self.apply(x.view())).collect::<Result<_>>()?;
        let mut out = Array2::zeros((xs.len(), self.header.nu));
        for (i, r) in rows.into_iter().enumerate() {
            out.row_mut(i).assign(&r);
        }
        Ok(out)
    }

    /// `⟨φ(X), φ(Y)⟩`, the induced kernel estimate.
    pub fn kernel_estimate(&self, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<f64> {
        Ok(self.apply(x)?.dot(&self.apply(y)?))
    }

    pub fn to_document(&self) -> MapDocument {
        let mut doc = MapDocument {
            version: MAP_FORMAT_VERSION,
            kind: self.header.kind,
            nu: self.header.nu,
            input_dim: self.header.input_dim,
            sigma: self.header.sigma,
            theta: self.header.theta,
            seed: self.header.seed,
            hyperparameters: Hyperparameters::default(),
            weights: None,
            bias: None,
        };
        match &self.params {
            MapParams::Kron { forced_degree, .. } => doc.hyperparameters.forced_degree = *forced_degree,
            MapParams::Perceptron {
                weights,
                bias,
                apply_sigmoid,
            } => {
                doc.hyperparameters.apply_sigmoid = Some(*apply_sigmoid);
                doc.weights = Some(DenseMatrix::from(weights));
                doc.bias = bias.as_ref().map(|b| b.to_vec());
            }
            _ => {}
        }
        doc
    }

    /// Rebuilds a model, re-sampling random parameters from the header.
    pub fn from_document(doc: &MapDocument) -> Result<Self> {
        if doc.version != MAP_FORMAT_VERSION {
            return Err(Error::Contract(format!(
                "unsupported feature map document version {} (expected {MAP_FORMAT_VERSION})",
                doc.version
            )));
        }
        let rbf = RbfParams::new(doc.sigma)?;
        let rho = || -> Result<DegreeDistribution> {
            DegreeDistribution::geometric(
                doc.theta
                    .ok_or_else(|| Error::Contract(format!("{} document lacks theta", doc.kind)))?,
            )
        };
        match doc.kind {
            FeatureMapKind::KronPi | FeatureMapKind::KronE => sample_kron(
                doc.kind,
                &KronConfig {
                    nu: doc.nu,
                    dim: doc.input_dim,
                    rbf,
                    rho: rho()?,
                    seed: doc.seed,
                    forced_degree: doc.hyperparameters.forced_degree,
                },
            ),
            FeatureMapKind::Fourier => sample_fourier(doc.nu, doc.input_dim, rbf, doc.seed),
            FeatureMapKind::Taylor => sample_taylor(doc.nu, doc.input_dim, rbf, rho()?, doc.seed),
            FeatureMapKind::Fastfood => sample_fastfood(doc.nu, doc.input_dim, rbf, doc.seed),
            FeatureMapKind::Perceptron => {
                let w = doc
                    .weights
                    .as_ref()
                    .ok_or_else(|| Error::Contract("perceptron document lacks weights".into()))?
                    .to_array()?;
                let bias = doc.bias.as_ref().map(|b| Array1::from(b.clone()));
                Self::perceptron(w, bias, doc.hyperparameters.apply_sigmoid.unwrap_or(false))
            }
        }
    }
}

fn vectorize(x: ArrayView2<'_, f64>) -> Array1<f64> {
    Array1::from_iter(x.iter().copied())
}

/// Row-major dense matrix in serialized form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&Array2<f64>> for DenseMatrix {
    fn from(a: &Array2<f64>) -> Self {
        Self {
            rows: a.nrows(),
            cols: a.ncols(),
            data: a.iter().copied().collect(),
        }
    }
}

impl DenseMatrix {
    pub fn to_array(&self) -> Result<Array2<f64>> {
        Array2::from_shape_vec((self.rows, self.cols), self.data.clone())
            .map_err(|e| Error::Contract(format!("bad dense matrix: {e}")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forced_degree: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub apply_sigmoid: Option<bool>,
}

/// On-disk form of a [`FeatureMapModel`]. Random kinds store only the
/// header; the perceptron kind stores its weight matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDocument {
    pub version: u32,
    pub kind: FeatureMapKind,
    pub nu: usize,
    pub input_dim: usize,
    pub sigma: f64,
    pub theta: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub hyperparameters: Hyperparameters,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<DenseMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<Vec<f64>>,
}

/// Samples a random map of `kind` for `d×d` inputs. The perceptron kind is
/// learned, not sampled, and is rejected here.
pub fn sample_map(
    kind: FeatureMapKind,
    nu: usize,
    d: usize,
    rbf: RbfParams,
    rho: DegreeDistribution,
    seed: u64,
) -> Result<FeatureMapModel> {
    match kind {
        FeatureMapKind::KronPi => sample_kron_pi(nu, d, rbf, rho, seed),
        FeatureMapKind::KronE => sample_kron_e(nu, d, rbf, rho, seed),
        FeatureMapKind::Fourier => sample_fourier(nu, d * d, rbf, seed),
        FeatureMapKind::Taylor => sample_taylor(nu, d * d, rbf, rho, seed),
        FeatureMapKind::Fastfood => sample_fastfood(nu, d * d, rbf, seed),
        FeatureMapKind::Perceptron => Err(Error::Contract(
            "perceptron maps are trained, not sampled".into(),
        )),
    }
}
