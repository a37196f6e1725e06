//! One-vs-rest L2-regularized hinge-loss SVMs trained by dual coordinate
//! descent, on explicit features ([`train_linear_svm`]) or on a precomputed
//! RBF Gram matrix ([`train_kernel_svm`]).
//!
//! The bias is folded into the weights by augmenting every input with a
//! constant feature `bias` (liblinear style), which on the kernel side adds
//! `bias²` to every Gram entry.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptor::LogCovDescriptor;
use crate::error::{Error, Result};
use crate::featmap::{rbf_exact, RbfParams};
use crate::rng::stream_rng;

/// Largest training set accepted by the exact-Gram kernel SVM.
pub const MAX_GRAM_SAMPLES: usize = 20_000;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    /// Stop once the projected-gradient spread drops below this.
    pub tol: f64,
    pub max_epochs: usize,
    /// Value of the constant feature appended to every input.
    pub bias: f64,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-4,
            max_epochs: 1000,
            bias: 1.0,
            seed: 0,
        }
    }
}

impl SvmParams {
    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::Contract(format!("C must be positive, got {}", self.c)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Contract(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Sorted distinct labels and, per sample, the index of its class.
fn encode_labels(labels: &[String]) -> Result<(Vec<String>, Vec<usize>)> {
    let mut classes: Vec<String> = labels.to_vec();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Contract(format!(
            "need at least 2 classes to train, got {}",
            classes.len()
        )));
    }
    let idx = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label present"))
        .collect();
    Ok((classes, idx))
}

/// Index of the largest score; ties go to the lowest index.
fn argmax(scores: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = k;
        }
    }
    best
}

/// Projected gradient of the box-constrained dual at `alpha`.
fn projected_gradient(g: f64, alpha: f64, c: f64) -> f64 {
    if alpha <= 0.0 {
        g.min(0.0)
    } else if alpha >= c {
        g.max(0.0)
    } else {
        g
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDual {
    pub alpha: Vec<f64>,
    pub epochs: usize,
}

/// Dual coordinate descent for one binary problem on explicit features.
/// Returns the augmented weight vector (last entry multiplies `bias`).
fn dcd_linear(x: ArrayView2<'_, f64>, y: &[f64], p: &SvmParams, stream: u64) -> (Array1<f64>, BinaryDual) {
    let (n, dim) = x.dim();
    let mut w = Array1::<f64>::zeros(dim + 1);
    let mut alpha = vec![0.0; n];
    let qd: Vec<f64> = x.rows().into_iter().map(|r| r.dot(&r) + p.bias * p.bias).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = stream_rng(p.seed, stream);
    let mut epochs = 0;
    while epochs < p.max_epochs {
        epochs += 1;
        order.shuffle(&mut rng);
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for &i in &order {
            if qd[i] <= 0.0 {
                continue;
            }
            let xi = x.row(i);
            let wx = w.slice(ndarray::s![..dim]).dot(&xi) + w[dim] * p.bias;
            let g = y[i] * wx - 1.0;
            let pg = projected_gradient(g, alpha[i], p.c);
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / qd[i]).clamp(0.0, p.c);
                let step = (alpha[i] - old) * y[i];
                w.slice_mut(ndarray::s![..dim]).scaled_add(step, &xi);
                w[dim] += step * p.bias;
            }
        }
        if pg_max - pg_min <= p.tol {
            break;
        }
    }
    (w, BinaryDual { alpha, epochs })
}

/// Dual coordinate descent on a precomputed (bias-augmented) Gram matrix.
fn dcd_gram(gram: &Array2<f64>, y: &[f64], p: &SvmParams, stream: u64) -> BinaryDual {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    // f[j] = Σᵢ αᵢ yᵢ K̃ᵢⱼ
    let mut f = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = stream_rng(p.seed, stream);
    let mut epochs = 0;
    while epochs < p.max_epochs {
        epochs += 1;
        order.shuffle(&mut rng);
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for &i in &order {
            let qii = gram[[i, i]];
            if qii <= 0.0 {
                continue;
            }
            let g = y[i] * f[i] - 1.0;
            let pg = projected_gradient(g, alpha[i], p.c);
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / qii).clamp(0.0, p.c);
                let step = (alpha[i] - old) * y[i];
                if step != 0.0 {
                    for (fj, kij) in f.iter_mut().zip(gram.row(i)) {
                        *fj += step * kij;
                    }
                }
            }
        }
        if pg_max - pg_min <= p.tol {
            break;
        }
    }
    BinaryDual { alpha, epochs }
}

fn signed_targets(class_idx: &[usize], k: usize) -> Vec<f64> {
    class_idx.iter().map(|&c| if c == k { 1.0 } else { -1.0 }).collect()
}

/// One-vs-rest linear SVM.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvmModel {
    pub classes: Vec<String>,
    /// `classes × ν`.
    pub weights: Array2<f64>,
    /// Per-class intercept, already multiplied by the bias feature value.
    pub bias: Array1<f64>,
    pub c: f64,
    /// Final dual variables per class, kept for diagnostics.
    pub duals: Vec<BinaryDual>,
}

pub fn train_linear_svm(features: ArrayView2<'_, f64>, labels: &[String], params: &SvmParams) -> Result<LinearSvmModel> {
    params.validate()?;
    let n = features.nrows();
    if labels.len() != n {
        return Err(Error::shape(format!("{n} labels"), format!("{} labels", labels.len())));
    }
    if n < 2 {
        return Err(Error::Contract(format!("need at least 2 samples, got {n}")));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("features contain non-finite values".into()));
    }
    let (classes, idx) = encode_labels(labels)?;
    let dim = features.ncols();
    let solved: Vec<(Array1<f64>, BinaryDual)> = (0..classes.len())
        .into_par_iter()
        .map(|k| dcd_linear(features, &signed_targets(&idx, k), params, k as u64))
        .collect();
    let mut weights = Array2::zeros((classes.len(), dim));
    let mut bias = Array1::zeros(classes.len());
    let mut duals = Vec::with_capacity(classes.len());
    for (k, (w, dual)) in solved.into_iter().enumerate() {
        weights.row_mut(k).assign(&w.slice(ndarray::s![..dim]));
        bias[k] = w[dim] * params.bias;
        duals.push(dual);
    }
    Ok(LinearSvmModel {
        classes,
        weights,
        bias,
        c: params.c,
        duals,
    })
}

impl LinearSvmModel {
    /// `samples × classes` decision values.
    pub fn decision_function(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.weights.ncols() {
            return Err(Error::shape(
                format!("{} features", self.weights.ncols()),
                format!("{} features", features.ncols()),
            ));
        }
        Ok(features.dot(&self.weights.t()) + &self.bias)
    }

    pub fn predict(&self, features: ArrayView2<'_, f64>) -> Result<Vec<String>> {
        let scores = self.decision_function(features)?;
        Ok(scores.rows().into_iter().map(|r| self.classes[argmax(r)].clone()).collect())
    }

    pub fn to_document(&self) -> LinearSvmDocument {
        LinearSvmDocument {
            version: MODEL_FORMAT_VERSION,
            classes: self.classes.clone(),
            weights: self.weights.rows().into_iter().map(|r| r.to_vec()).collect(),
            bias: self.bias.to_vec(),
            c: self.c,
        }
    }

    pub fn from_document(doc: &LinearSvmDocument) -> Result<Self> {
        if doc.version != MODEL_FORMAT_VERSION {
            return Err(Error::Contract(format!("unsupported SVM document version {}", doc.version)));
        }
        let k = doc.classes.len();
        let dim = doc.weights.first().map_or(0, Vec::len);
        if doc.weights.len() != k || doc.bias.len() != k || doc.weights.iter().any(|r| r.len() != dim) {
            return Err(Error::Contract("inconsistent SVM document shapes".into()));
        }
        let flat: Vec<f64> = doc.weights.iter().flatten().copied().collect();
        Ok(Self {
            classes: doc.classes.clone(),
            weights: Array2::from_shape_vec((k, dim), flat).expect("shape checked"),
            bias: Array1::from(doc.bias.clone()),
            c: doc.c,
            duals: Vec::new(),
        })
    }
}

/// Serialized linear SVM with explicit weight arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmDocument {
    pub version: u32,
    pub classes: Vec<String>,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub c: f64,
}

/// Convenience wrapper mirroring [`LinearSvmModel::predict`].
pub fn predict_linear(model: &LinearSvmModel, features: ArrayView2<'_, f64>) -> Result<Vec<String>> {
    model.predict(features)
}

/// One-vs-rest SVM on the exact RBF Gram matrix.
#[derive(Debug, Clone)]
pub struct KernelSvmModel {
    pub classes: Vec<String>,
    /// `classes × support` signed dual coefficients `αᵢ yᵢ`.
    pub dual_coefs: Array2<f64>,
    pub support_inputs: Vec<LogCovDescriptor>,
    pub sigma: f64,
    pub c: f64,
    pub bias: f64,
}

fn gram_matrix(xs: &[LogCovDescriptor], rbf: RbfParams, offset: f64) -> Result<Array2<f64>> {
    let n = xs.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            xs.iter()
                .map(|xj| Ok(rbf_exact(xs[i].view(), xj.view(), rbf)? + offset))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(Array2::from_shape_vec((n, n), rows.into_iter().flatten().collect()).expect("square"))
}

pub fn train_kernel_svm(
    descriptors: &[LogCovDescriptor],
    labels: &[String],
    rbf: RbfParams,
    params: &SvmParams,
) -> Result<KernelSvmModel> {
    params.validate()?;
    let n = descriptors.len();
    if n > MAX_GRAM_SAMPLES {
        return Err(Error::TooLarge {
            n,
            limit: MAX_GRAM_SAMPLES,
        });
    }
    if labels.len() != n {
        return Err(Error::shape(format!("{n} labels"), format!("{} labels", labels.len())));
    }
    if n < 2 {
        return Err(Error::Contract(format!("need at least 2 samples, got {n}")));
    }
    if let Some(bad) = descriptors.iter().find(|d| d.dim() != descriptors[0].dim()) {
        return Err(Error::shape(descriptors[0].dim(), bad.dim()));
    }
    let (classes, idx) = encode_labels(labels)?;
    let gram = gram_matrix(descriptors, rbf, params.bias * params.bias)?;
    let duals: Vec<BinaryDual> = (0..classes.len())
        .into_par_iter()
        .map(|k| dcd_gram(&gram, &signed_targets(&idx, k), params, k as u64))
        .collect();

    let support: Vec<usize> = (0..n).filter(|&i| duals.iter().any(|d| d.alpha[i] > 0.0)).collect();
    let mut dual_coefs = Array2::zeros((classes.len(), support.len()));
    for (k, d) in duals.iter().enumerate() {
        for (s, &i) in support.iter().enumerate() {
            let y = if idx[i] == k { 1.0 } else { -1.0 };
            dual_coefs[[k, s]] = d.alpha[i] * y;
        }
    }
    Ok(KernelSvmModel {
        classes,
        dual_coefs,
        support_inputs: support.iter().map(|&i| descriptors[i].clone()).collect(),
        sigma: rbf.sigma(),
        c: params.c,
        bias: params.bias,
    })
}

impl KernelSvmModel {
    pub fn decision_function(&self, descriptors: &[LogCovDescriptor]) -> Result<Array2<f64>> {
        let rbf = RbfParams::new(self.sigma)?;
        let offset = self.bias * self.bias;
        let k = self.classes.len();
        let rows: Vec<Vec<f64>> = descriptors
            .par_iter()
            .map(|x| {
                let kx = self
                    .support_inputs
                    .iter()
                    .map(|s| Ok(rbf_exact(s.view(), x.view(), rbf)? + offset))
                    .collect::<Result<Vec<f64>>>()?;
                let kx = Array1::from(kx);
                Ok((0..k).map(|c| self.dual_coefs.row(c).dot(&kx)).collect())
            })
            .collect::<Result<_>>()?;
        Ok(Array2::from_shape_vec((descriptors.len(), k), rows.into_iter().flatten().collect()).expect("shape"))
    }

    pub fn predict(&self, descriptors: &[LogCovDescriptor]) -> Result<Vec<String>> {
        let scores = self.decision_function(descriptors)?;
        Ok(scores.rows().into_iter().map(|r| self.classes[argmax(r)].clone()).collect())
    }
}

pub fn predict_kernel(model: &KernelSvmModel, descriptors: &[LogCovDescriptor]) -> Result<Vec<String>> {
    model.predict(descriptors)
}

/// Fraction of positions where `predicted` equals `truth`.
pub fn accuracy(predicted: &[String], truth: &[String]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}
