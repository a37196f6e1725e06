//! Accuracy-versus-ν sweeps over a skeleton dataset, and their reports.

mod dataset;
mod pipeline;
mod report;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use dataset::{
    alternate_split, load_dataset, radial_dataset, save_dataset, synth_dataset, DatasetManifest, RadialData, Split,
    SplitSpec, SynthConfig, DATASET_FORMAT_VERSION,
};
pub use pipeline::{train_pipeline, DescriptorCache, Pipeline, PipelineDocument, PIPELINE_FORMAT_VERSION};
pub use report::{emit_report, load_report, render_report, Aggregate, ExperimentReport, ReportFormat, ReportRow};

use crate::descriptor::{make_descriptor, LogCovDescriptor, LogEps};
use crate::error::{Error, Result};
use crate::featmap::{sample_map, DegreeDistribution, FeatureMapKind, FeatureMapModel, RbfParams};
use crate::learn::{accuracy, train_kernel_svm, train_linear_svm, SvmParams};
use crate::perceptron::{extract_phi_p, train_mlp, ExtractOptions, MlpConfig};
use crate::rng::derive_seed;

/// Feature dimensionalities of the default sweep.
pub const DEFAULT_NUS: [usize; 9] = [10, 20, 50, 100, 200, 500, 1000, 2000, 5000];
pub const DEFAULT_REPETITIONS: usize = 10;
/// A sweep aborts when more than this fraction of descriptors fail.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

/// What a sweep evaluates: one of the feature maps followed by a linear
/// SVM, or the exact-Gram kernel SVM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Map(FeatureMapKind),
    Exact,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Map(k) => k.as_str(),
            Method::Exact => "exact",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "exact" {
            Ok(Method::Exact)
        } else {
            s.parse().map(Method::Map)
        }
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub nus: Vec<usize>,
    pub repetitions: usize,
    pub sigma: f64,
    pub theta: f64,
    pub svm_c: f64,
    pub svm_tol: f64,
    pub seed: u64,
    pub eps: LogEps,
    /// Wall-clock training times make reports machine-dependent, so they are
    /// recorded only on request; otherwise `train_time_s` is 0.
    pub record_timing: bool,
    /// Network settings for the perceptron method (`hidden_size` is set to ν).
    pub mlp: MlpConfig,
    pub extract: ExtractOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            method: Method::Map(FeatureMapKind::KronPi),
            nus: DEFAULT_NUS.to_vec(),
            repetitions: DEFAULT_REPETITIONS,
            sigma: 1.0,
            theta: 0.9,
            svm_c: 1.0,
            svm_tol: 1e-4,
            seed: 0,
            eps: LogEps::Auto,
            record_timing: false,
            mlp: MlpConfig::default(),
            extract: ExtractOptions::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nus.is_empty() {
            return Err(Error::Contract("nus must not be empty".into()));
        }
        if self.nus.windows(2).any(|w| w[0] >= w[1]) || self.nus[0] == 0 {
            return Err(Error::Contract(format!("nus must be positive and strictly ascending, got {:?}", self.nus)));
        }
        if self.repetitions == 0 {
            return Err(Error::Contract("repetitions must be at least 1".into()));
        }
        RbfParams::new(self.sigma)?;
        DegreeDistribution::geometric(self.theta)?;
        Ok(())
    }

    fn rbf(&self) -> RbfParams {
        RbfParams::new(self.sigma).expect("validated")
    }

    fn rho(&self) -> DegreeDistribution {
        DegreeDistribution::geometric(self.theta).expect("validated")
    }

    fn svm(&self, seed: u64) -> SvmParams {
        SvmParams {
            c: self.svm_c,
            tol: self.svm_tol,
            seed,
            ..SvmParams::default()
        }
    }
}

/// Descriptors of every sample; failed samples are `None` and logged.
#[derive(Debug, Clone)]
pub struct DescriptorSet {
    pub descriptors: Vec<Option<LogCovDescriptor>>,
    pub failures: Vec<(usize, String)>,
}

pub fn compute_descriptors(ds: &DatasetManifest, eps: LogEps) -> Result<DescriptorSet> {
    let results: Vec<Result<LogCovDescriptor>> =
        ds.samples.par_iter().map(|s| make_descriptor(s, eps)).collect();
    let mut descriptors = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(d) => descriptors.push(Some(d)),
            Err(e) => {
                log::warn!("skipping sample {i}: {e}");
                failures.push((i, e.to_string()));
                descriptors.push(None);
            }
        }
    }
    let total = descriptors.len();
    if failures.len() as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(Error::SystematicFailure {
            failed: failures.len(),
            total,
        });
    }
    Ok(DescriptorSet { descriptors, failures })
}

/// Train and test descriptors with their labels, failed samples dropped.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Vec<LogCovDescriptor>,
    pub train_labels: Vec<String>,
    pub test: Vec<LogCovDescriptor>,
    pub test_labels: Vec<String>,
}

impl Prepared {
    pub fn from_parts(
        descriptors: &[Option<LogCovDescriptor>],
        labels: &[String],
        split: &Split,
    ) -> Result<Self> {
        let pick = |idx: &[usize]| -> (Vec<LogCovDescriptor>, Vec<String>) {
            idx.iter()
                .filter_map(|&i| descriptors[i].clone().map(|d| (d, labels[i].clone())))
                .unzip()
        };
        let (train, train_labels) = pick(&split.train);
        let (test, test_labels) = pick(&split.test);
        let mut classes: Vec<&String> = labels.iter().collect();
        classes.sort();
        classes.dedup();
        for c in classes {
            for (name, part) in [("train", &train_labels), ("test", &test_labels)] {
                if !part.contains(c) {
                    return Err(Error::Dataset(format!("class {c:?} has no usable sample in the {name} split")));
                }
            }
        }
        Ok(Self {
            train,
            train_labels,
            test,
            test_labels,
        })
    }

    pub fn from_radial(data: &RadialData) -> Result<Self> {
        let d: Vec<Option<LogCovDescriptor>> = data.descriptors.iter().cloned().map(Some).collect();
        Self::from_parts(&d, &data.labels, &data.split)
    }
}

/// Builds the feature map for one sweep cell. `None` means the method cannot
/// run at this ν (fastfood off its block multiple).
pub fn build_map(
    cfg: &ExperimentConfig,
    kind: FeatureMapKind,
    nu: usize,
    data: &Prepared,
    seed: u64,
) -> Result<Option<FeatureMapModel>> {
    let d = data.train[0].dim();
    match kind {
        FeatureMapKind::Perceptron => {
            let mlp = MlpConfig {
                hidden_size: nu,
                seed,
                ..cfg.mlp
            };
            let model = train_mlp(&data.train, &data.train_labels, &mlp)?;
            extract_phi_p(&model, cfg.extract).map(Some)
        }
        FeatureMapKind::Fastfood if !nu.is_multiple_of((d * d).next_power_of_two()) => Ok(None),
        _ => sample_map(kind, nu, d, cfg.rbf(), cfg.rho(), seed).map(Some),
    }
}

/// Test accuracy of `map` followed by a linear SVM.
pub fn evaluate_map(map: &FeatureMapModel, data: &Prepared, svm: &SvmParams) -> Result<f64> {
    let train = map.transform(&data.train)?;
    let test = map.transform(&data.test)?;
    let model = train_linear_svm(train.view(), &data.train_labels, svm)?;
    Ok(accuracy(&model.predict(test.view())?, &data.test_labels))
}

/// Test accuracy of the exact-Gram kernel SVM.
pub fn evaluate_exact(data: &Prepared, rbf: RbfParams, svm: &SvmParams) -> Result<f64> {
    let model = train_kernel_svm(&data.train, &data.train_labels, rbf, svm)?;
    Ok(accuracy(&model.predict(&data.test)?, &data.test_labels))
}

/// Seed of sweep cell (ν, repetition).
pub fn cell_seed(base: u64, nu: usize, repetition: usize) -> u64 {
    derive_seed(derive_seed(base, nu as u64), repetition as u64)
}

/// Runs the sweep on already-prepared descriptors.
pub fn run_sweep_prepared(data: &Prepared, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let method = cfg.method.as_str().to_string();
    let rows = match cfg.method {
        Method::Exact => {
            let start = Instant::now();
            let acc = evaluate_exact(data, cfg.rbf(), &cfg.svm(cfg.seed))?;
            vec![ReportRow {
                method,
                nu: 0,
                repetition: 0,
                seed: cfg.seed,
                train_time_s: if cfg.record_timing { start.elapsed().as_secs_f64() } else { 0.0 },
                test_accuracy: Some(acc),
            }]
        }
        Method::Map(kind) => {
            let cells: Vec<(usize, usize)> = cfg
                .nus
                .iter()
                .flat_map(|&nu| (0..cfg.repetitions).map(move |r| (nu, r)))
                .collect();
            cells
                .into_par_iter()
                .map(|(nu, r)| {
                    let seed = cell_seed(cfg.seed, nu, r);
                    let start = Instant::now();
                    let acc = match build_map(cfg, kind, nu, data, seed)? {
                        Some(map) => Some(evaluate_map(&map, data, &cfg.svm(seed))?),
                        None => {
                            log::info!("{kind} cannot run at nu = {nu}; emitting a skip row");
                            None
                        }
                    };
                    Ok(ReportRow {
                        method: method.clone(),
                        nu,
                        repetition: r,
                        seed,
                        train_time_s: if cfg.record_timing { start.elapsed().as_secs_f64() } else { 0.0 },
                        test_accuracy: acc,
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(ExperimentReport::from_rows(rows))
}

/// Descriptors, split, then [`run_sweep_prepared`].
pub fn run_sweep(ds: &DatasetManifest, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    ds.validate()?;
    let set = compute_descriptors(ds, cfg.eps)?;
    let data = Prepared::from_parts(&set.descriptors, &ds.labels(), &ds.split)?;
    run_sweep_prepared(&data, cfg)
}

/// Average ranks, ties sharing the mean of their positions.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; `None` when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}
