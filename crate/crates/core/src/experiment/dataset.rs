//! Skeleton datasets on disk and synthetic generators.
//!
//! A dataset is a manifest JSON file plus a JSON-lines samples file, one
//! record per line: `{"label": "wave", "joints": [[[x, y, z], ...], ...]}`
//! with `T` frames of `J` joints each. The manifest names the samples file
//! (relative to itself) and fixes the train/test split:
//!
//! ```json
//! {"name": "demo", "format_version": 1, "root_index": 0,
//!  "samples_file": "demo.samples.jsonl",
//!  "split": {"rule": "indices", "train": [0, 2], "test": [1, 3]}}
//! ```
//!
//! `{"rule": "alternate"}` puts the even-numbered occurrences of every class
//! in train and the odd-numbered ones in test.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::descriptor::{LogCovDescriptor, SkeletonSequence};
use crate::error::{Error, Result};
use crate::linalg::frob_norm;
use crate::rng::stream_rng;

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SplitSpec {
    Indices { train: Vec<usize>, test: Vec<usize> },
    Alternate,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub format_version: u32,
    pub root_index: usize,
    pub samples: Vec<SkeletonSequence>,
    pub split: Split,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestFile {
    name: String,
    format_version: u32,
    root_index: usize,
    samples_file: PathBuf,
    split: SplitSpec,
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleRecord {
    label: String,
    joints: Vec<Vec<[f64; 3]>>,
}

impl DatasetManifest {
    /// Checks split indices: in range and disjoint.
    pub fn validate(&self) -> Result<()> {
        let n = self.samples.len();
        let mut seen = BTreeSet::new();
        for &i in self.split.train.iter().chain(&self.split.test) {
            if i >= n {
                return Err(Error::Dataset(format!("split index {i} out of range for {n} samples")));
            }
            if !seen.insert(i) {
                return Err(Error::Dataset(format!("sample {i} appears more than once in the split")));
            }
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<String> {
        self.samples.iter().map(|s| s.label().to_string()).collect()
    }
}

/// Train/test split that alternates within each class, in sample order.
pub fn alternate_split(labels: &[String]) -> Split {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    let mut split = Split::default();
    for (i, l) in labels.iter().enumerate() {
        let k = seen.entry(l.as_str()).or_default();
        if k.is_multiple_of(2) {
            split.train.push(i);
        } else {
            split.test.push(i);
        }
        *k += 1;
    }
    split
}

fn parse_error(path: &Path, line: usize, message: impl ToString) -> Error {
    Error::Parse {
        location: format!("{}:{line}", path.display()),
        message: message.to_string(),
    }
}

fn with_path(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Reads a manifest and its samples file.
pub fn load_dataset(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|e| with_path(path, e))?;
    if text.trim().is_empty() {
        return Err(parse_error(path, 1, "empty manifest"));
    }
    let manifest: ManifestFile =
        serde_json::from_str(&text).map_err(|e| parse_error(path, e.line(), e))?;
    if manifest.format_version != DATASET_FORMAT_VERSION {
        return Err(Error::Dataset(format!(
            "unsupported dataset format version {} (expected {DATASET_FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    let samples_path = path.parent().unwrap_or(Path::new(".")).join(&manifest.samples_file);
    let reader = BufReader::new(fs::File::open(&samples_path).map_err(|e| with_path(&samples_path, e))?);
    let mut samples = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SampleRecord =
            serde_json::from_str(&line).map_err(|e| parse_error(&samples_path, lineno + 1, e))?;
        let seq = SkeletonSequence::new(rec.label, rec.joints, manifest.root_index).map_err(|e| {
            Error::Dataset(format!("sample {} (line {}): {e}", samples.len(), lineno + 1))
        })?;
        samples.push(seq);
    }
    if samples.is_empty() {
        return Err(parse_error(&samples_path, 1, "no samples"));
    }
    let split = match manifest.split {
        SplitSpec::Indices { train, test } => Split { train, test },
        SplitSpec::Alternate => {
            alternate_split(&samples.iter().map(|s| s.label().to_string()).collect::<Vec<_>>())
        }
    };
    let ds = DatasetManifest {
        name: manifest.name,
        format_version: manifest.format_version,
        root_index: manifest.root_index,
        samples,
        split,
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes the manifest to `path` and the samples next to it as
/// `<stem>.samples.jsonl`. Splits are always stored as explicit indices.
pub fn save_dataset(ds: &DatasetManifest, path: &Path) -> Result<()> {
    ds.validate()?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
    let samples_name = PathBuf::from(format!("{stem}.samples.jsonl"));
    let samples_path = path.parent().unwrap_or(Path::new(".")).join(&samples_name);
    let mut out = BufWriter::new(fs::File::create(&samples_path)?);
    for s in &ds.samples {
        let rec = SampleRecord {
            label: s.label().to_string(),
            joints: s.joints().to_vec(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    let manifest = ManifestFile {
        name: ds.name.clone(),
        format_version: ds.format_version,
        root_index: ds.root_index,
        samples_file: samples_name,
        split: SplitSpec::Indices {
            train: ds.split.train.clone(),
            test: ds.split.test.clone(),
        },
    };
    fs::write(path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

/// Parameters of [`synth_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub classes: usize,
    pub per_class: usize,
    pub joints: usize,
    /// Inclusive range of sequence lengths.
    pub frames: (usize, usize),
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            classes: 5,
            per_class: 40,
            joints: 5,
            frames: (40, 80),
            noise: 0.1,
            seed: 0,
        }
    }
}

/// Share of a class prototype's motion that is specific to the class; the
/// rest is common to all classes.
const CLASS_SPREAD: f64 = 0.15;

/// Sinusoidal motion: per joint and axis, amplitudes and phases over the
/// integer frequencies `1..=freqs`, amplitudes decaying as `1/k`.
#[derive(Clone)]
struct Motion {
    amps: Vec<[Vec<f64>; 3]>,
    phases: Vec<[Vec<f64>; 3]>,
}

impl Motion {
    fn sample(joints: usize, freqs: usize, rng: &mut impl Rng) -> Self {
        let amps = (0..joints)
            .map(|_| {
                std::array::from_fn(|_| (0..freqs).map(|k| rng.random_range(-1.0..1.0) / (k + 1) as f64).collect())
            })
            .collect();
        let phases = (0..joints)
            .map(|_| {
                std::array::from_fn(|_| (0..freqs).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect())
            })
            .collect();
        Self { amps, phases }
    }

    fn position(&self, joint: usize, axis: usize, t: f64) -> f64 {
        let a = &self.amps[joint][axis];
        let p = &self.phases[joint][axis];
        a.iter()
            .zip(p)
            .enumerate()
            .map(|(k, (a, p))| a * (std::f64::consts::TAU * (k + 1) as f64 * t + p).sin())
            .sum()
    }
}

/// A class prototype: the shared motion plus a class-specific one.
struct Prototype {
    shared: Motion,
    own: Motion,
}

impl Prototype {
    fn position(&self, joint: usize, axis: usize, t: f64) -> f64 {
        (1.0 - CLASS_SPREAD) * self.shared.position(joint, axis, t) + CLASS_SPREAD * self.own.position(joint, axis, t)
    }
}

/// Per-class smooth trajectories plus i.i.d. Gaussian noise; sequence
/// lengths are drawn uniformly from `cfg.frames`. Joint 0 is the root and
/// the split alternates within each class.
pub fn synth_dataset(cfg: &SynthConfig) -> Result<DatasetManifest> {
    if cfg.classes < 2 {
        return Err(Error::Contract(format!("need at least 2 classes, got {}", cfg.classes)));
    }
    if cfg.joints < 2 || cfg.per_class == 0 {
        return Err(Error::Contract("need at least 2 joints and 1 sample per class".into()));
    }
    let (lo, hi) = cfg.frames;
    if lo < 2 || hi < lo {
        return Err(Error::Contract(format!("bad frame range {lo}..={hi}")));
    }
    if !(cfg.noise >= 0.0) {
        return Err(Error::Contract(format!("noise must be non-negative, got {}", cfg.noise)));
    }
    // enough frequencies that the displacement covariance can be full rank
    let freqs = 3 * (cfg.joints - 1);
    let shared = Motion::sample(cfg.joints, freqs, &mut stream_rng(cfg.seed, u64::MAX));
    let protos: Vec<Prototype> = (0..cfg.classes)
        .map(|c| Prototype {
            shared: shared.clone(),
            own: Motion::sample(cfg.joints, freqs, &mut stream_rng(cfg.seed, c as u64)),
        })
        .collect();
    let mut samples = Vec::with_capacity(cfg.classes * cfg.per_class);
    for i in 0..cfg.classes * cfg.per_class {
        let class = i % cfg.classes;
        let mut rng = stream_rng(cfg.seed, (cfg.classes + i) as u64);
        let frames = rng.random_range(lo..=hi);
        let joints = (0..frames)
            .map(|f| {
                let t = f as f64 / frames as f64;
                (0..cfg.joints)
                    .map(|j| {
                        std::array::from_fn(|a| {
                            protos[class].position(j, a, t) + cfg.noise * rng.sample::<f64, _>(StandardNormal)
                        })
                    })
                    .collect()
            })
            .collect();
        samples.push(SkeletonSequence::new(format!("class{class}"), joints, 0)?);
    }
    let split = alternate_split(&samples.iter().map(|s| s.label().to_string()).collect::<Vec<_>>());
    Ok(DatasetManifest {
        name: format!("synth-{}x{}-seed{}", cfg.classes, cfg.per_class, cfg.seed),
        format_version: DATASET_FORMAT_VERSION,
        root_index: 0,
        samples,
        split,
    })
}

/// Descriptor-level data whose classes are bands of `⟨X, c⟩` around a
/// random unit upper-triangular centre `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialData {
    pub descriptors: Vec<LogCovDescriptor>,
    pub labels: Vec<String>,
    pub split: Split,
}

fn random_upper(d: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_fn((d, d), |(i, j)| if j >= i { rng.sample::<f64, _>(StandardNormal) } else { 0.0 })
}

/// `classes` bands evenly spaced over `⟨X, c⟩ ∈ [−0.8, 0.8]`, each sample
/// jittered by `noise` along `c`. Alternating split within each class.
pub fn radial_dataset(classes: usize, per_class: usize, d: usize, noise: f64, seed: u64) -> Result<RadialData> {
    if classes < 2 || d < 2 || per_class == 0 {
        return Err(Error::Contract("radial data needs >= 2 classes, d >= 2, >= 1 sample per class".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let c = random_upper(d, &mut rng);
    let c = &c / frob_norm(c.view());
    let mut descriptors = Vec::new();
    let mut labels = Vec::new();
    for i in 0..classes * per_class {
        let k = i % classes;
        let centre = -0.8 + 1.6 * k as f64 / (classes - 1) as f64;
        let t = (centre + noise * rng.sample::<f64, _>(StandardNormal)).clamp(-0.99, 0.99);
        let mut u = random_upper(d, &mut rng);
        let along: f64 = u.iter().zip(c.iter()).map(|(a, b)| a * b).sum();
        u.scaled_add(-along, &c);
        let u = &u / frob_norm(u.view());
        let x = &c * t + &u * (1.0 - t * t).sqrt();
        descriptors.push(LogCovDescriptor::from_matrix(x)?);
        labels.push(format!("band{k}"));
    }
    let split = alternate_split(&labels);
    Ok(RadialData {
        descriptors,
        labels,
        split,
    })
}
