use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kronfeat::experiment::{
    compute_descriptors, load_dataset, render_report, run_sweep, save_dataset, synth_dataset, train_pipeline,
    DescriptorCache, ExperimentConfig, Pipeline, PipelineDocument, Prepared, ReportFormat, SynthConfig,
};
use kronfeat::featmap::{sample_map, DegreeDistribution, FeatureMapKind, RbfParams};
use kronfeat::learn::accuracy;
use kronfeat::rng::stream_rng;
use kronfeat::stats::{bound_report, mc_bias_variance, variance_bound, BoundReport, McReport};
use kronfeat::{Error, ErrorClass, LogEps};
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_VERDICT: u8 = 4;

#[derive(Parser)]
#[command(name = "kronfeat", version, about = "Random feature maps for log-covariance skeleton descriptors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute log-covariance descriptors of a dataset.
    Descriptors(DescriptorsArgs),
    /// Run the accuracy-versus-ν protocol and write a report.
    Sweep(SweepArgs),
    /// Monte-Carlo checks of the estimators plus the closed-form bounds.
    Validate(ValidateArgs),
    /// Generate a synthetic skeleton dataset.
    Synth(SynthArgs),
    /// Train one map + classifier pipeline on the training split.
    Train(TrainArgs),
    /// Apply a trained pipeline to a dataset.
    Predict(PredictArgs),
}

/// Settings shared by commands that build feature maps. Each flag overrides
/// the config file.
#[derive(Args)]
struct ModelFlags {
    /// Config file (TOML or JSON) with experiment settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// exact, kron_pi, kron_e, fourier, taylor, fastfood or perceptron.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    /// Descriptor regularizer: `auto` or a number.
    #[arg(long)]
    eps: Option<String>,
}

#[derive(Args)]
struct DescriptorsArgs {
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "auto")]
    eps: String,
}

#[derive(Args)]
struct SweepArgs {
    dataset: PathBuf,
    #[command(flatten)]
    model: ModelFlags,
    /// Feature dimensions, comma separated.
    #[arg(long, value_delimiter = ',')]
    nu: Option<Vec<usize>>,
    #[arg(long)]
    reps: Option<usize>,
    /// Record wall-clock training times (makes reports machine-dependent).
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args)]
struct ValidateArgs {
    /// Restrict the estimator checks to one map kind.
    #[arg(long)]
    method: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.9)]
    theta: f64,
    /// Feature dimension of each resampled map.
    #[arg(long, default_value_t = 1)]
    nu: usize,
    /// Map resamplings per pair (at least 1000).
    #[arg(long, default_value_t = 200_000)]
    reps: usize,
    /// Matrix side of the random unit-norm inputs.
    #[arg(long, default_value_t = 4)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    pairs: u64,
    /// Deviation thresholds for the Chebyshev rows.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1")]
    chebyshev_eps: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    classes: usize,
    #[arg(long, default_value_t = 40)]
    per_class: usize,
    #[arg(long, default_value_t = 5)]
    joints: usize,
    #[arg(long, default_value_t = 40)]
    min_frames: usize,
    #[arg(long, default_value_t = 80)]
    max_frames: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    dataset: PathBuf,
    #[command(flatten)]
    model: ModelFlags,
    #[arg(long, default_value_t = 1000)]
    nu: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    model: PathBuf,
    dataset: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: String,
}

/// Anything that ends a command early, mapped to an exit status.
enum Failure {
    Usage(String),
    Lib(Error),
    Verdict,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CmdResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn parse_eps(s: &str) -> Result<LogEps, Failure> {
    if s == "auto" {
        return Ok(LogEps::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(LogEps::Fixed(v)),
        _ => Err(usage(format!("--eps expects `auto` or a non-negative number, got {s:?}"))),
    }
}

fn parse_format(s: &str) -> Result<ReportFormat, Failure> {
    s.parse().map_err(|e: Error| usage(e.to_string()))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::Lib(Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))))
}

fn read_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = read_text(path)?;
    let parse_err = |message: String| {
        Failure::Lib(Error::Parse {
            location: path.display().to_string(),
            message,
        })
    };
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))
    } else {
        toml::from_str(&text).map_err(|e| parse_err(e.to_string()))
    }
}

impl ModelFlags {
    fn resolve(&self) -> Result<ExperimentConfig, Failure> {
        let mut cfg = match &self.config {
            Some(p) => read_config(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(m) = &self.method {
            cfg.method = m.parse().map_err(|e: Error| usage(e.to_string()))?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(s) = self.sigma {
            cfg.sigma = s;
        }
        if let Some(t) = self.theta {
            cfg.theta = t;
        }
        if let Some(e) = &self.eps {
            cfg.eps = parse_eps(e)?;
        }
        Ok(cfg)
    }
}

fn write_output(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(p) => fs::write(p, text).map_err(Error::from)?,
        None => std::io::stdout().write_all(text.as_bytes()).map_err(Error::from)?,
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Failure> {
    Ok(serde_json::to_string_pretty(value).map_err(Error::from)? + "\n")
}

fn descriptors(args: &DescriptorsArgs) -> CmdResult {
    let eps = parse_eps(&args.eps)?;
    let ds = load_dataset(&args.dataset)?;
    let set = compute_descriptors(&ds, eps)?;
    log::info!("{} descriptors, {} failures", set.descriptors.len(), set.failures.len());
    let cache = DescriptorCache::new(&ds.name, eps, ds.labels(), &set);
    write_output(Some(&args.out), &to_json(&cache)?)
}

fn sweep(args: &SweepArgs) -> CmdResult {
    let mut cfg = args.model.resolve()?;
    if let Some(nus) = &args.nu {
        cfg.nus = nus.clone();
    }
    if let Some(r) = args.reps {
        cfg.repetitions = r;
    }
    cfg.record_timing |= args.timing;
    let format = parse_format(&args.format)?;
    let ds = load_dataset(&args.dataset)?;
    let report = run_sweep(&ds, &cfg)?;
    write_output(args.out.as_deref(), &render_report(&report, format)?)
}

#[derive(Serialize)]
struct PairVerdict {
    pair: u64,
    #[serde(flatten)]
    report: McReport,
}

#[derive(Serialize)]
struct KindVerdict {
    kind: FeatureMapKind,
    passed: bool,
    pairs: Vec<PairVerdict>,
}

#[derive(Serialize)]
struct ValidationOutput {
    passed: bool,
    dim: usize,
    nu: usize,
    repetitions: usize,
    seed: u64,
    bounds: BoundReport,
    estimators: Vec<KindVerdict>,
}

fn unit_pair(d: usize, seed: u64, pair: u64) -> (Array2<f64>, Array2<f64>) {
    let mut rng = stream_rng(seed, pair);
    let mut unit = || {
        let m = Array2::from_shape_fn((d, d), |_| rng.sample::<f64, _>(StandardNormal));
        let n = m.iter().map(|v| v * v).sum::<f64>().sqrt();
        m / n
    };
    let x = unit();
    (x, unit())
}

fn validate(args: &ValidateArgs) -> CmdResult {
    if args.reps < 1000 {
        return Err(usage("--reps must be at least 1000"));
    }
    if args.dim == 0 || args.nu == 0 || args.pairs == 0 {
        return Err(usage("--dim, --nu and --pairs must be positive"));
    }
    let rbf = RbfParams::new(args.sigma)?;
    let rho = DegreeDistribution::geometric(args.theta)?;
    let kinds = match &args.method {
        Some(m) => {
            let kind: FeatureMapKind = m.parse().map_err(|e: Error| usage(e.to_string()))?;
            if kind == FeatureMapKind::Perceptron {
                return Err(usage("the perceptron map is learned; it has no sampling distribution to check"));
            }
            vec![kind]
        }
        None => vec![FeatureMapKind::KronPi, FeatureMapKind::KronE, FeatureMapKind::Fourier, FeatureMapKind::Taylor],
    };
    let bounds = bound_report(args.nu, rbf, &rho, &args.chebyshev_eps)?;
    let mut estimators = Vec::new();
    for kind in kinds {
        let bound = match kind {
            FeatureMapKind::KronPi | FeatureMapKind::KronE => {
                Some(variance_bound(kind, args.nu, rbf, &rho)?).filter(|b| b.is_finite())
            }
            _ => None,
        };
        let mut pairs = Vec::new();
        for pair in 0..args.pairs {
            let (x, y) = unit_pair(args.dim, args.seed, pair);
            let report = mc_bias_variance(
                |s| sample_map(kind, args.nu, args.dim, rbf, rho, s),
                x.view(),
                y.view(),
                args.reps,
                rbf,
                kronfeat::rng::derive_seed(args.seed, 1000 + pair),
                bound,
            )?;
            if !report.unbiased || report.within_bound == Some(false) {
                log::warn!("{kind} pair {pair}: z = {:.2}, within bound = {:?}", report.z_score, report.within_bound);
            }
            pairs.push(PairVerdict { pair, report });
        }
        let passed = pairs.iter().all(|p| p.report.unbiased && p.report.within_bound != Some(false));
        estimators.push(KindVerdict { kind, passed, pairs });
    }
    let output = ValidationOutput {
        passed: estimators.iter().all(|k| k.passed),
        dim: args.dim,
        nu: args.nu,
        repetitions: args.reps,
        seed: args.seed,
        bounds,
        estimators,
    };
    write_output(args.out.as_deref(), &to_json(&output)?)?;
    if output.passed {
        Ok(())
    } else {
        Err(Failure::Verdict)
    }
}

fn synth(args: &SynthArgs) -> CmdResult {
    if args.classes < 2 {
        return Err(usage("--classes must be at least 2"));
    }
    if args.min_frames > args.max_frames {
        return Err(usage("--min-frames exceeds --max-frames"));
    }
    let ds = synth_dataset(&SynthConfig {
        classes: args.classes,
        per_class: args.per_class,
        joints: args.joints,
        frames: (args.min_frames, args.max_frames),
        noise: args.noise,
        seed: args.seed,
    })?;
    save_dataset(&ds, &args.out)?;
    Ok(())
}

fn prepare(dataset: &Path, eps: LogEps) -> Result<(Prepared, Vec<String>, kronfeat::experiment::DatasetManifest), Failure> {
    let ds = load_dataset(dataset)?;
    let labels = ds.labels();
    let set = compute_descriptors(&ds, eps)?;
    let data = Prepared::from_parts(&set.descriptors, &labels, &ds.split)?;
    Ok((data, labels, ds))
}

fn train(args: &TrainArgs) -> CmdResult {
    let cfg = args.model.resolve()?;
    let (data, _, _) = prepare(&args.dataset, cfg.eps)?;
    let pipeline = train_pipeline(&data, &cfg, args.nu)?;
    let acc = accuracy(&pipeline.predict(&data.test)?, &data.test_labels);
    log::info!("{} at nu = {}: test accuracy {acc:.4}", cfg.method, args.nu);
    write_output(Some(&args.out), &to_json(&pipeline.to_document(cfg.method, cfg.eps))?)
}

#[derive(Serialize)]
struct Prediction {
    index: usize,
    label: String,
    predicted: Option<String>,
}

fn predict(args: &PredictArgs) -> CmdResult {
    let format = parse_format(&args.format)?;
    let text = read_text(&args.model)?;
    let doc: PipelineDocument = serde_json::from_str(&text).map_err(|e| Error::Parse {
        location: format!("{}:{}", args.model.display(), e.line()),
        message: e.to_string(),
    })?;
    let pipeline = Pipeline::from_document(&doc)?;
    let ds = load_dataset(&args.dataset)?;
    let set = compute_descriptors(&ds, doc.eps)?;
    let usable: Vec<usize> = (0..set.descriptors.len()).filter(|&i| set.descriptors[i].is_some()).collect();
    let inputs: Vec<_> = usable.iter().map(|&i| set.descriptors[i].clone().expect("usable")).collect();
    let predicted = pipeline.predict(&inputs)?;
    let mut rows: Vec<Prediction> = ds
        .samples
        .iter()
        .enumerate()
        .map(|(index, s)| Prediction {
            index,
            label: s.label().to_string(),
            predicted: None,
        })
        .collect();
    for (&i, p) in usable.iter().zip(predicted) {
        rows[i].predicted = Some(p);
    }
    let test: Vec<&Prediction> = ds.split.test.iter().map(|&i| &rows[i]).filter(|r| r.predicted.is_some()).collect();
    if !test.is_empty() {
        let correct = test.iter().filter(|r| r.predicted.as_deref() == Some(r.label.as_str())).count();
        log::info!("test split accuracy {:.4} ({correct}/{})", correct as f64 / test.len() as f64, test.len());
    }
    let text = match format {
        ReportFormat::Json => to_json(&rows)?,
        ReportFormat::Csv => {
            let mut out = String::from("index,label,predicted\n");
            for r in &rows {
                out += &format!("{},{},{}\n", r.index, r.label, r.predicted.as_deref().unwrap_or("failed"));
            }
            out
        }
    };
    write_output(args.out.as_deref(), &text)
}

fn run(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::Descriptors(a) => descriptors(a),
        Command::Sweep(a) => sweep(a),
        Command::Validate(a) => validate(a),
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Verdict) => {
            eprintln!("validation failed: at least one estimator verdict is negative");
            ExitCode::from(EXIT_VERDICT)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Usage => EXIT_USAGE,
                ErrorClass::Data => EXIT_DATA,
                ErrorClass::Numeric => EXIT_NUMERIC,
            })
        }
    }
}
