//! One-hidden-layer network whose hidden weights become a linear feature map.
//!
//! The network is `softmax(W_out · sigmoid(𝕎 vec(X) + b) + b_out)` trained on
//! mean cross-entropy plus `l2/2 (‖𝕎‖² + ‖W_out‖²)`. After training,
//! [`extract_phi_p`] keeps only `𝕎`, giving `φ(X) = 𝕎 vec(X)`.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::descriptor::LogCovDescriptor;
use crate::error::{Error, Result};
use crate::featmap::FeatureMapModel;
use crate::rng::stream_rng;

/// Above this many samples training switches to mini-batch Adam.
pub const FULL_BATCH_LIMIT: usize = 10_000;
pub const DEFAULT_MINI_BATCH: usize = 1024;
/// Hidden sizes tried by [`select_hidden_size`].
pub const HIDDEN_GRID: [usize; 6] = [32, 64, 128, 256, 512, 1024];

const PLATEAU_WINDOW: usize = 20;
const PLATEAU_TOL: f64 = 1e-7;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchSize {
    /// Full batch up to [`FULL_BATCH_LIMIT`] samples, mini-batches of 1024 above.
    Auto,
    Full,
    Mini(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden_size: usize,
    pub max_epochs: usize,
    /// Initial (and largest) step for full-batch descent; Adam step size otherwise.
    pub learn_rate: f64,
    pub batch_size: BatchSize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_size: 64,
            max_epochs: 2000,
            learn_rate: 1.0,
            batch_size: BatchSize::Auto,
            l2: 1e-4,
            seed: 0,
        }
    }
}

impl MlpConfig {
    fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 {
            return Err(Error::Contract("hidden_size must be at least 1".into()));
        }
        if !(self.learn_rate >= 0.0) || !self.learn_rate.is_finite() {
            return Err(Error::Contract(format!("learn_rate must be non-negative, got {}", self.learn_rate)));
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::Contract(format!("l2 must be non-negative, got {}", self.l2)));
        }
        if self.batch_size == BatchSize::Mini(0) {
            return Err(Error::Contract("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub classes: Vec<String>,
    /// `ν × D`, the matrix kept by [`extract_phi_p`].
    pub w_hidden: Array2<f64>,
    pub b_hidden: Array1<f64>,
    /// `classes × ν`.
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
    /// Objective after every epoch (full batch: accepted steps only).
    pub losses: Vec<f64>,
}

/// Gradient of the objective, shaped like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradient {
    pub w_hidden: Array2<f64>,
    pub b_hidden: Array1<f64>,
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
}

impl MlpGradient {
    fn norm_sq(&self) -> f64 {
        let sq = |a: f64, v: &f64| a + v * v;
        self.w_hidden.iter().fold(0.0, sq)
            + self.b_hidden.iter().fold(0.0, sq)
            + self.w_out.iter().fold(0.0, sq)
            + self.b_out.iter().fold(0.0, sq)
    }
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

impl MlpModel {
    /// Glorot-uniform weights and zero biases.
    pub fn init(input_dim: usize, hidden: usize, classes: Vec<String>, seed: u64) -> Self {
        let mut rng = stream_rng(seed, 0);
        let k = classes.len();
        let r1 = (6.0 / (input_dim + hidden) as f64).sqrt();
        let r2 = (6.0 / (hidden + k) as f64).sqrt();
        let w_hidden = Array2::from_shape_fn((hidden, input_dim), |_| rng.random_range(-r1..=r1));
        let w_out = Array2::from_shape_fn((k, hidden), |_| rng.random_range(-r2..=r2));
        Self {
            classes,
            w_hidden,
            b_hidden: Array1::zeros(hidden),
            w_out,
            b_out: Array1::zeros(k),
            losses: Vec::new(),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.w_hidden.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_hidden.ncols()
    }

    fn hidden(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut a = x.dot(&self.w_hidden.t()) + &self.b_hidden;
        a.mapv_inplace(sigmoid);
        a
    }

    /// `samples × classes` output scores (pre-softmax).
    pub fn scores(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::shape(self.input_dim(), x.ncols()));
        }
        Ok(self.hidden(x).dot(&self.w_out.t()) + &self.b_out)
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<String>> {
        let s = self.scores(x)?;
        Ok(s.rows()
            .into_iter()
            .map(|r| {
                let mut best = 0;
                for (k, &v) in r.iter().enumerate() {
                    if v > r[best] {
                        best = k;
                    }
                }
                self.classes[best].clone()
            })
            .collect())
    }

    fn step(&mut self, g: &MlpGradient, t: f64) {
        self.w_hidden.scaled_add(-t, &g.w_hidden);
        self.b_hidden.scaled_add(-t, &g.b_hidden);
        self.w_out.scaled_add(-t, &g.w_out);
        self.b_out.scaled_add(-t, &g.b_out);
    }

    fn all_finite(&self) -> bool {
        self.w_hidden.iter().chain(&self.b_hidden).chain(&self.w_out).chain(&self.b_out).all(|v| v.is_finite())
    }

    /// Number of scalar parameters, in the order used by [`Self::param`].
    pub fn param_count(&self) -> usize {
        self.w_hidden.len() + self.b_hidden.len() + self.w_out.len() + self.b_out.len()
    }

    /// Mutable access to the `i`-th scalar parameter (hidden weights, hidden
    /// bias, output weights, output bias; row-major within each).
    pub fn param(&mut self, mut i: usize) -> &mut f64 {
        for block in [
            self.w_hidden.as_slice_mut().expect("standard layout"),
            self.b_hidden.as_slice_mut().expect("standard layout"),
            self.w_out.as_slice_mut().expect("standard layout"),
            self.b_out.as_slice_mut().expect("standard layout"),
        ] {
            if i < block.len() {
                return &mut block[i];
            }
            i -= block.len();
        }
        panic!("parameter index out of range");
    }
}

impl MlpGradient {
    /// The `i`-th entry, in the same order as [`MlpModel::param`].
    pub fn get(&self, mut i: usize) -> f64 {
        for block in [
            self.w_hidden.as_slice().expect("standard layout"),
            self.b_hidden.as_slice().expect("standard layout"),
            self.w_out.as_slice().expect("standard layout"),
            self.b_out.as_slice().expect("standard layout"),
        ] {
            if i < block.len() {
                return block[i];
            }
            i -= block.len();
        }
        panic!("gradient index out of range");
    }
}

fn penalty(model: &MlpModel, l2: f64) -> f64 {
    if l2 == 0.0 {
        return 0.0;
    }
    let sq: f64 = model.w_hidden.iter().chain(&model.w_out).map(|v| v * v).sum();
    0.5 * l2 * sq
}

/// Mean cross-entropy, plus the l2 penalty; no gradient.
pub fn loss(model: &MlpModel, x: ArrayView2<'_, f64>, targets: &[usize], l2: f64) -> f64 {
    let h = model.hidden(x);
    let s = h.dot(&model.w_out.t()) + &model.b_out;
    let mut total = 0.0;
    for (row, &t) in s.rows().into_iter().zip(targets) {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += lse - row[t];
    }
    total / targets.len() as f64 + penalty(model, l2)
}

/// Objective and its analytic gradient on the batch `x` (one row per sample).
pub fn loss_and_grad(model: &MlpModel, x: ArrayView2<'_, f64>, targets: &[usize], l2: f64) -> (f64, MlpGradient) {
    let n = targets.len() as f64;
    let h = model.hidden(x);
    let s = h.dot(&model.w_out.t()) + &model.b_out;
    // d loss / d scores = (softmax − onehot) / n
    let mut ds = Array2::zeros(s.raw_dim());
    let mut total = 0.0;
    for ((row, mut drow), &t) in s.rows().into_iter().zip(ds.rows_mut()).zip(targets) {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let z: f64 = row.iter().map(|v| (v - m).exp()).sum();
        total += m + z.ln() - row[t];
        Zip::from(&mut drow).and(&row).for_each(|d, &v| *d = (v - m).exp() / z / n);
        drow[t] -= 1.0 / n;
    }
    let mut w_out = ds.t().dot(&h);
    w_out.scaled_add(l2, &model.w_out);
    let b_out = ds.sum_axis(Axis(0));
    let mut da = ds.dot(&model.w_out);
    Zip::from(&mut da).and(&h).for_each(|d, &hv| *d *= hv * (1.0 - hv));
    let mut w_hidden = da.t().dot(&x);
    w_hidden.scaled_add(l2, &model.w_hidden);
    let b_hidden = da.sum_axis(Axis(0));
    (
        total / n + penalty(model, l2),
        MlpGradient {
            w_hidden,
            b_hidden,
            w_out,
            b_out,
        },
    )
}

fn plateaued(losses: &[f64]) -> bool {
    losses.len() > PLATEAU_WINDOW && {
        let last = losses[losses.len() - 1];
        let past = losses[losses.len() - 1 - PLATEAU_WINDOW];
        (past - last).abs() < PLATEAU_TOL
    }
}

fn full_batch(model: &mut MlpModel, x: ArrayView2<'_, f64>, targets: &[usize], cfg: &MlpConfig) -> Result<()> {
    let (mut current, mut grad) = loss_and_grad(model, x, targets, cfg.l2);
    if !current.is_finite() {
        return Err(Error::Divergence { epoch: 0 });
    }
    let mut t = cfg.learn_rate;
    for epoch in 1..=cfg.max_epochs {
        let g2 = grad.norm_sq();
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let mut trial = model.clone();
            trial.step(&grad, t);
            let l = loss(&trial, x, targets, cfg.l2);
            if l.is_finite() && l <= current - ARMIJO * t * g2 {
                *model = trial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            log::debug!("line search stalled at epoch {epoch}, loss {current:.6e}");
            break;
        }
        let (l, g) = loss_and_grad(model, x, targets, cfg.l2);
        if !l.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        current = l;
        grad = g;
        model.losses.push(current);
        t = (2.0 * t).min(cfg.learn_rate);
        if plateaued(&model.losses) {
            break;
        }
    }
    Ok(())
}

fn adam(model: &mut MlpModel, x: ArrayView2<'_, f64>, targets: &[usize], cfg: &MlpConfig, batch: usize) -> Result<()> {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;
    let zeros = |m: &MlpModel| MlpGradient {
        w_hidden: Array2::zeros(m.w_hidden.raw_dim()),
        b_hidden: Array1::zeros(m.b_hidden.len()),
        w_out: Array2::zeros(m.w_out.raw_dim()),
        b_out: Array1::zeros(m.b_out.len()),
    };
    let mut m1 = zeros(model);
    let mut m2 = zeros(model);
    let mut order: Vec<usize> = (0..targets.len()).collect();
    let mut rng = stream_rng(cfg.seed, 1);
    let mut step = 0i32;
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let xb = x.select(Axis(0), chunk);
            let tb: Vec<usize> = chunk.iter().map(|&i| targets[i]).collect();
            let (l, g) = loss_and_grad(model, xb.view(), &tb, cfg.l2);
            if !l.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            step += 1;
            let c1 = 1.0 - B1.powi(step);
            let c2 = 1.0 - B2.powi(step);
            macro_rules! update {
                ($f:ident) => {
                    Zip::from(&mut model.$f)
                        .and(&mut m1.$f)
                        .and(&mut m2.$f)
                        .and(&g.$f)
                        .for_each(|p, a, b, &gv| {
                            *a = B1 * *a + (1.0 - B1) * gv;
                            *b = B2 * *b + (1.0 - B2) * gv * gv;
                            *p -= cfg.learn_rate * (*a / c1) / ((*b / c2).sqrt() + EPS);
                        });
                };
            }
            update!(w_hidden);
            update!(b_hidden);
            update!(w_out);
            update!(b_out);
        }
        let l = loss(model, x, targets, cfg.l2);
        if !l.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        model.losses.push(l);
        if plateaued(&model.losses) {
            break;
        }
    }
    Ok(())
}

/// Trains on a feature matrix (one vectorized descriptor per row).
pub fn train_mlp_matrix(x: ArrayView2<'_, f64>, labels: &[String], cfg: &MlpConfig) -> Result<MlpModel> {
    cfg.validate()?;
    let n = x.nrows();
    if labels.len() != n {
        return Err(Error::shape(format!("{n} labels"), format!("{} labels", labels.len())));
    }
    let mut classes = labels.to_vec();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Contract(format!("need at least 2 classes, got {}", classes.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("inputs contain non-finite values".into()));
    }
    let targets: Vec<usize> = labels.iter().map(|l| classes.binary_search(l).expect("present")).collect();
    let mut model = MlpModel::init(x.ncols(), cfg.hidden_size, classes, cfg.seed);
    let batch = match cfg.batch_size {
        BatchSize::Auto if n <= FULL_BATCH_LIMIT => None,
        BatchSize::Auto => Some(DEFAULT_MINI_BATCH),
        BatchSize::Full => None,
        BatchSize::Mini(b) => Some(b),
    };
    match batch {
        None => full_batch(&mut model, x, &targets, cfg)?,
        Some(b) => adam(&mut model, x, &targets, cfg, b)?,
    }
    if !model.all_finite() {
        return Err(Error::Divergence {
            epoch: model.losses.len(),
        });
    }
    Ok(model)
}

/// Stacks vectorized descriptors into rows.
pub fn descriptor_matrix(descriptors: &[LogCovDescriptor]) -> Result<Array2<f64>> {
    let first = descriptors
        .first()
        .ok_or_else(|| Error::Contract("no descriptors given".into()))?;
    let dim = first.dim() * first.dim();
    let mut out = Array2::zeros((descriptors.len(), dim));
    for (mut row, d) in out.rows_mut().into_iter().zip(descriptors) {
        if d.dim() != first.dim() {
            return Err(Error::shape(first.dim(), d.dim()));
        }
        row.assign(&d.vectorized());
    }
    Ok(out)
}

pub fn train_mlp(descriptors: &[LogCovDescriptor], labels: &[String], cfg: &MlpConfig) -> Result<MlpModel> {
    let x = descriptor_matrix(descriptors)?;
    train_mlp_matrix(x.view(), labels, cfg)
}

/// How the hidden layer is turned into a feature map.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractOptions {
    pub apply_sigmoid: bool,
    pub keep_bias: bool,
}

/// `φ(X) = 𝕎 vec(X)`, with the hidden bias and sigmoid only when requested.
pub fn extract_phi_p(model: &MlpModel, opts: ExtractOptions) -> Result<FeatureMapModel> {
    FeatureMapModel::perceptron(
        model.w_hidden.clone(),
        opts.keep_bias.then(|| model.b_hidden.clone()),
        opts.apply_sigmoid,
    )
}

/// Trains one network per hidden size in `grid` and returns the size with the
/// lowest final training objective (first one on ties).
pub fn select_hidden_size(
    descriptors: &[LogCovDescriptor],
    labels: &[String],
    grid: &[usize],
    cfg: &MlpConfig,
) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &h in grid {
        let model = train_mlp(
            descriptors,
            labels,
            &MlpConfig {
                hidden_size: h,
                ..*cfg
            },
        )?;
        let x = descriptor_matrix(descriptors)?;
        let targets: Vec<usize> = labels
            .iter()
            .map(|l| model.classes.binary_search(l).expect("present"))
            .collect();
        let obj = loss(&model, x.view(), &targets, cfg.l2);
        log::debug!("hidden size {h}: objective {obj:.6e}");
        if best.is_none_or(|(_, b)| obj < b) {
            best = Some((h, obj));
        }
    }
    best.map(|(h, _)| h)
        .ok_or_else(|| Error::Contract("empty hidden-size grid".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::{accuracy, train_linear_svm, SvmParams};
    use ndarray::array;
    use rand_distr::StandardNormal;

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    /// Unit-norm upper-triangular 3×3 descriptors around two distinct centres.
    fn separable(per_class: usize, seed: u64) -> (Vec<LogCovDescriptor>, Vec<String>) {
        let mut rng = stream_rng(seed, 0);
        let centres = [
            array![[1.0, 0.5, 0.0], [0.0, 0.2, 0.0], [0.0, 0.0, -0.3]],
            array![[-0.4, 0.0, 0.6], [0.0, 0.9, -0.2], [0.0, 0.0, 0.5]],
        ];
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..2 * per_class {
            let k = i % 2;
            let noise = Array2::from_shape_fn((3, 3), |_| 0.05 * rng.sample::<f64, _>(StandardNormal));
            xs.push(LogCovDescriptor::from_matrix(&centres[k] + &noise).unwrap());
            ys.push(format!("class{k}"));
        }
        (xs, ys)
    }

    /// Central differences with step `h` on every parameter.
    fn numeric_gradient(model: &MlpModel, x: ArrayView2<'_, f64>, t: &[usize], l2: f64, h: f64) -> Vec<f64> {
        (0..model.param_count())
            .map(|i| {
                let mut plus = model.clone();
                *plus.param(i) += h;
                let mut minus = model.clone();
                *minus.param(i) -= h;
                (loss(&plus, x, t, l2) - loss(&minus, x, t, l2)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = stream_rng(9, 0);
        let x = Array2::from_shape_fn((3, 5), |_| rng.random_range(-1.0..1.0));
        let t = [0, 2, 1];
        let mut model = MlpModel::init(5, 4, labels(&["a", "b", "c"]), 3);
        model.b_hidden.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        model.b_out.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        let (_, g) = loss_and_grad(&model, x.view(), &t, 0.01);
        let num = numeric_gradient(&model, x.view(), &t, 0.01, 1e-6);
        for (i, &n) in num.iter().enumerate() {
            let a = g.get(i);
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-4);
            assert!(rel < 1e-5, "parameter {i}: analytic {a} numeric {n}");
        }
    }

    #[test]
    fn zero_rate_keeps_initialization() {
        let (xs, ys) = separable(5, 1);
        let cfg = MlpConfig {
            hidden_size: 4,
            max_epochs: 1,
            learn_rate: 0.0,
            seed: 5,
            ..MlpConfig::default()
        };
        let m = train_mlp(&xs, &ys, &cfg).unwrap();
        let init = MlpModel::init(9, 4, labels(&["class0", "class1"]), 5);
        assert_eq!(m.w_hidden, init.w_hidden);
        assert_eq!(m.w_out, init.w_out);
    }

    #[test]
    fn fits_separable_data() {
        let (xs, ys) = separable(20, 2);
        let cfg = MlpConfig {
            hidden_size: 8,
            max_epochs: 200,
            ..MlpConfig::default()
        };
        let m = train_mlp(&xs, &ys, &cfg).unwrap();
        let x = descriptor_matrix(&xs).unwrap();
        assert_eq!(accuracy(&m.predict(x.view()).unwrap(), &ys), 1.0);
        assert!(m.losses.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn adam_path_fits_separable_data() {
        let (xs, ys) = separable(20, 3);
        let cfg = MlpConfig {
            hidden_size: 8,
            max_epochs: 300,
            learn_rate: 0.01,
            batch_size: BatchSize::Mini(16),
            ..MlpConfig::default()
        };
        let m = train_mlp(&xs, &ys, &cfg).unwrap();
        let x = descriptor_matrix(&xs).unwrap();
        assert_eq!(accuracy(&m.predict(x.view()).unwrap(), &ys), 1.0);
    }

    #[test]
    fn divergence_is_reported() {
        let (xs, ys) = separable(5, 4);
        let cfg = MlpConfig {
            hidden_size: 4,
            learn_rate: 1e308,
            batch_size: BatchSize::Mini(4),
            max_epochs: 5,
            ..MlpConfig::default()
        };
        let err = train_mlp(&xs, &ys, &cfg).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
    }

    #[test]
    fn training_is_deterministic() {
        let (xs, ys) = separable(6, 5);
        let cfg = MlpConfig {
            hidden_size: 6,
            max_epochs: 30,
            ..MlpConfig::default()
        };
        let a = extract_phi_p(&train_mlp(&xs, &ys, &cfg).unwrap(), ExtractOptions::default()).unwrap();
        let b = extract_phi_p(&train_mlp(&xs, &ys, &cfg).unwrap(), ExtractOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_class_rejected() {
        let (xs, _) = separable(2, 6);
        assert!(train_mlp(&xs, &vec!["a".to_string(); 4], &MlpConfig::default()).is_err());
    }

    #[test]
    fn extraction_drops_bias_and_sigmoid_by_default() {
        let mut m = MlpModel::init(4, 4, labels(&["a", "b"]), 0);
        m.w_hidden = Array2::eye(4);
        m.b_hidden = Array1::from_elem(4, 3.0);
        let x = array![[0.5, -1.0], [2.0, 0.25]];
        let phi = extract_phi_p(&m, ExtractOptions::default()).unwrap();
        assert_eq!(phi.apply(x.view()).unwrap(), array![0.5, -1.0, 2.0, 0.25]);
        let with_bias = extract_phi_p(
            &m,
            ExtractOptions {
                apply_sigmoid: false,
                keep_bias: true,
            },
        )
        .unwrap();
        assert_eq!(with_bias.apply(x.view()).unwrap(), array![3.5, 2.0, 5.0, 3.25]);
        let squashed = extract_phi_p(
            &m,
            ExtractOptions {
                apply_sigmoid: true,
                keep_bias: false,
            },
        )
        .unwrap();
        assert!((squashed.apply(x.view()).unwrap()[0] - sigmoid(0.5)).abs() < 1e-15);
    }

    #[test]
    fn extracted_features_compete_with_raw_vectors() {
        let (xs, ys) = separable(20, 7);
        let cfg = MlpConfig {
            hidden_size: 8,
            max_epochs: 200,
            ..MlpConfig::default()
        };
        let phi = extract_phi_p(&train_mlp(&xs, &ys, &cfg).unwrap(), ExtractOptions::default()).unwrap();
        let feats = phi.transform(&xs).unwrap();
        let raw = descriptor_matrix(&xs).unwrap();
        let p = SvmParams::default();
        let acc_phi = accuracy(&train_linear_svm(feats.view(), &ys, &p).unwrap().predict(feats.view()).unwrap(), &ys);
        let acc_raw = accuracy(&train_linear_svm(raw.view(), &ys, &p).unwrap().predict(raw.view()).unwrap(), &ys);
        assert!(acc_phi >= acc_raw, "{acc_phi} < {acc_raw}");
    }

    #[test]
    fn hidden_size_selection_picks_from_grid() {
        let (xs, ys) = separable(5, 8);
        let cfg = MlpConfig {
            max_epochs: 20,
            ..MlpConfig::default()
        };
        let h = select_hidden_size(&xs, &ys, &[2, 4], &cfg).unwrap();
        assert!([2, 4].contains(&h));
        assert!(select_hidden_size(&xs, &ys, &[], &cfg).is_err());
    }
}
