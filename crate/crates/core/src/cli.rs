//! Command-line front end. Every command writes its outputs plus a
//! `<primary output>.manifest.json`; only the manifest carries timing.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bench::{run_bench, BenchConfig, BenchMethod};
use crate::calibrate::{self, FitConfig, FitTrace, RegressionFit, ScalingFit};
use crate::data::{CalibratedModel, Comparator, Grid, Method, ScoredDataset, TransformKind, DEFAULT_CLIP};
use crate::error::{Error, ErrorKind, Result};
use crate::grouping::{cluster_groups, groups_from_annotations, groups_from_thresholds, ThresholdRule};
use crate::io::{self, RunManifest, ScoreKind};
use crate::metrics;
use crate::synthetic::{generate, SyntheticSpec};

/// Environment variable that supplies `--config` when the flag is absent.
pub const CONFIG_ENV: &str = "MULTICALIB_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "multicalib", version, about = "Calibrate and multicalibrate confidence scores")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn model logits / log-probabilities into confidence scores.
    Score(ScoreArgs),
    /// Build group-membership columns from features.
    Group(GroupArgs),
    /// Generate a synthetic dataset and its truth table.
    Synth(SynthArgs),
    /// Fit a calibrator.
    Calibrate(CalibrateArgs),
    /// Report calibration metrics, optionally after applying a model.
    Evaluate(EvaluateArgs),
    /// Run the method-by-seed benchmark on synthetic data.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreKindArg {
    TrueFalse,
    Perplexity,
    MultipleChoice,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long, value_enum)]
    pub kind: ScoreKindArg,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct GroupArgs {
    /// Feature CSV with a header row.
    #[arg(long)]
    pub features: PathBuf,
    /// 0/1 columns to pass through as groups.
    #[arg(long, value_delimiter = ',')]
    pub annotate: Vec<String>,
    /// Threshold rule `name=column>=cutoff` or `name=column<cutoff`; repeatable.
    #[arg(long = "rule")]
    pub rules: Vec<String>,
    /// Number of k-means clusters.
    #[arg(long)]
    pub kmeans: Option<usize>,
    /// Feature columns used for clustering (default: all).
    #[arg(long, value_delimiter = ',')]
    pub columns: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// TOML spec; falls back to $MULTICALIB_CONFIG.
    #[arg(long, env = CONFIG_ENV)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Override the spec's row count.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Hb,
    Ls,
    Gcur,
    Gculr,
    Ighb,
    Iglb,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformArg {
    Constant,
    LogitLinear,
}

#[derive(Debug, Args, Serialize)]
pub struct CalibrateArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Mass floor for IGLB.
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    /// Required for iglb (validation split).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_rounds: Option<usize>,
    /// Bin comparators for ighb/iglb, e.g. `eq` or `le,ge`.
    #[arg(long, value_delimiter = ',')]
    pub comparators: Vec<String>,
    /// Patch kind for ighb/iglb.
    #[arg(long, value_enum)]
    pub transform: Option<TransformArg>,
    #[arg(long, default_value_t = DEFAULT_CLIP)]
    pub clip: f64,
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Extra group columns merged into the dataset.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub trace: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub groups: Option<PathBuf>,
    /// Apply this model before measuring.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Grid size; defaults to the model's.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub pergroup: PathBuf,
    /// Also write the calibrated dataset.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    /// TOML spec; falls back to $MULTICALIB_CONFIG, then the built-in benchmark.
    #[arg(long, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "uncalib,hb,ls,gcur,gculr,ighb,ighb_tau,ighb_ls,iglb")]
    pub methods: Vec<String>,
    /// First seed; runs use seed, seed+1, ...
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub runs: u64,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[arg(long)]
    pub out: PathBuf,
}

struct Outputs {
    manifest: RunManifest,
    files: Vec<(PathBuf, String)>,
}

impl Outputs {
    fn new<A: Serialize>(command: &str, args: &A, seed: Option<u64>) -> Self {
        let config = serde_json::to_value(args).unwrap_or(serde_json::Value::Null);
        Outputs { manifest: RunManifest::new(command, config, seed), files: Vec::new() }
    }

    fn read(&mut self, path: &Path) -> Result<String> {
        let bytes = fs::read(path)?;
        self.manifest.add_input(path, &bytes);
        String::from_utf8(bytes).map_err(|e| Error::Parse { line: 0, message: format!("{}: {e}", path.display()) })
    }

    fn add(&mut self, path: &Path, contents: String) {
        self.files.push((path.to_path_buf(), contents));
    }

    /// Writes every output, then the manifest beside the first one.
    fn commit(mut self, started: Instant) -> Result<()> {
        for (path, contents) in &self.files {
            fs::write(path, contents)?;
            self.manifest.outputs.push(path.display().to_string());
        }
        self.manifest.elapsed_ms = started.elapsed().as_millis();
        let primary = &self.files.first().expect("every command writes an output").0;
        fs::write(io::manifest_path(primary), io::to_json_pretty(&self.manifest)?)?;
        Ok(())
    }
}

fn load_dataset(out: &mut Outputs, input: &Path, groups: Option<&Path>) -> Result<ScoredDataset> {
    let ds = io::parse_dataset(&out.read(input)?)?;
    match groups {
        Some(path) => io::merge_groups(&ds, &io::parse_groups(&out.read(path)?)?),
        None => Ok(ds),
    }
}

pub fn cmd_score(args: &ScoreArgs) -> Result<()> {
    let started = Instant::now();
    let mut out = Outputs::new("score", args, None);
    let kind = match args.kind {
        ScoreKindArg::TrueFalse => ScoreKind::TrueFalse,
        ScoreKindArg::Perplexity => ScoreKind::Perplexity,
        ScoreKindArg::MultipleChoice => ScoreKind::MultipleChoice,
    };
    let text = out.read(&args.input)?;
    out.add(&args.out, io::score_csv(&text, kind)?);
    out.commit(started)
}

pub fn cmd_group(args: &GroupArgs) -> Result<()> {
    let started = Instant::now();
    let mut out = Outputs::new("group", args, args.seed);
    let features = io::parse_features(&out.read(&args.features)?)?;
    let modes = [!args.annotate.is_empty(), !args.rules.is_empty(), args.kmeans.is_some()];
    if modes.iter().filter(|&&m| m).count() != 1 {
        return Err(Error::Config("choose exactly one of --annotate, --rule, --kmeans".into()));
    }
    let groups = if !args.annotate.is_empty() {
        let mut cols = Vec::new();
        for name in &args.annotate {
            let j = features.column_index(name)?;
            let col = (0..features.len())
                .map(|i| match features.row(i)[j] {
                    0.0 => Ok(false),
                    1.0 => Ok(true),
                    v => Err(Error::Parse { line: i + 2, message: format!("annotation {name:?} must be 0 or 1, got {v}") }),
                })
                .collect::<Result<Vec<_>>>()?;
            cols.push(col);
        }
        groups_from_annotations(cols, args.annotate.clone())?
    } else if !args.rules.is_empty() {
        let rules = args.rules.iter().map(|r| r.parse::<ThresholdRule>()).collect::<Result<Vec<_>>>()?;
        groups_from_thresholds(&features, &rules)?
    } else {
        let k = args.kmeans.expect("mode checked");
        let seed = args.seed.ok_or_else(|| Error::Config("--kmeans needs --seed".into()))?;
        let table = if args.columns.is_empty() {
            features
        } else {
            let idx = args.columns.iter().map(|c| features.column_index(c)).collect::<Result<Vec<_>>>()?;
            let rows = (0..features.len()).map(|i| idx.iter().map(|&j| features.row(i)[j]).collect()).collect();
            crate::grouping::FeatureTable::new(args.columns.clone(), rows)?
        };
        cluster_groups(&table, k, seed)?
    };
    out.add(&args.out, io::format_groups(&groups)?);
    out.commit(started)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let started = Instant::now();
    let mut out = Outputs::new("synth", args, Some(args.seed));
    let mut spec = SyntheticSpec::from_toml(&out.read(&args.config)?)?;
    if let Some(n) = args.n {
        spec.n = n;
    }
    let (data, truth) = generate(&spec, args.seed)?;
    out.add(&args.out, io::format_dataset(&data)?);
    out.add(&args.truth, io::to_json_pretty(&truth)?);
    out.commit(started)
}

#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum FitDetails {
    Histogram { levels_patched: usize },
    Scaling(ScalingFit),
    Regression { clip_rate: f64, dropped: Vec<String>, empty: Vec<String>, iterations: usize, warnings: Vec<String> },
    Iterative(FitTrace),
}

#[derive(Debug, Serialize)]
struct TraceFile {
    method: Method,
    n: usize,
    m: usize,
    in_sample_mse: f64,
    in_sample_asce: f64,
    in_sample_max_violation: f64,
    details: FitDetails,
}

fn regression_details(fit: &RegressionFit) -> FitDetails {
    FitDetails::Regression {
        clip_rate: fit.clip_rate,
        dropped: fit.dropped.clone(),
        empty: fit.empty.clone(),
        iterations: fit.iterations,
        warnings: fit.warnings.clone(),
    }
}

/// Fits the requested calibrator; shared by the CLI and the examples.
pub fn fit_method(ds: &ScoredDataset, args: &CalibrateArgs) -> Result<(CalibratedModel, serde_json::Value)> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", args.alpha)));
    }
    let grid = Grid::from_alpha(args.alpha)?;
    let iterative = matches!(args.method, MethodArg::Ighb | MethodArg::Iglb);
    if !iterative && (!args.comparators.is_empty() || args.transform.is_some()) {
        return Err(Error::Config("--comparators/--transform apply to ighb and iglb only".into()));
    }
    let (model, details) = match args.method {
        MethodArg::Hb => {
            let m = calibrate::fit_hb(ds, grid, args.clip)?;
            let levels = m.patches.len();
            (m, FitDetails::Histogram { levels_patched: levels })
        }
        MethodArg::Ls => {
            let m = calibrate::fit_ls(ds, grid, args.clip)?;
            (m, FitDetails::Scaling(calibrate::fit_ls_params(ds, args.clip)?))
        }
        MethodArg::Gcur => {
            let fit = calibrate::fit_gcur(ds, grid, args.clip)?;
            let d = regression_details(&fit);
            (fit.model, d)
        }
        MethodArg::Gculr => {
            let fit = calibrate::fit_gculr(ds, grid, args.clip)?;
            let d = regression_details(&fit);
            (fit.model, d)
        }
        MethodArg::Ighb | MethodArg::Iglb => {
            let base = match args.method {
                MethodArg::Ighb => FitConfig::ighb(args.alpha),
                _ => {
                    let seed = args.seed.ok_or_else(|| Error::Config("iglb needs --seed for its validation split".into()))?;
                    FitConfig::iglb(args.alpha, args.epsilon, seed)
                }
            };
            let mut config = FitConfig { max_rounds: args.max_rounds, val_fraction: args.val_fraction, clip: args.clip, ..base };
            if !args.comparators.is_empty() {
                config.comparators = args.comparators.iter().map(|c| c.parse::<Comparator>()).collect::<Result<_>>()?;
            }
            if let Some(t) = args.transform {
                config.transform = match t {
                    TransformArg::Constant => TransformKind::Constant,
                    TransformArg::LogitLinear => TransformKind::LogitLinear,
                };
            }
            let (m, trace) = match args.method {
                MethodArg::Ighb => calibrate::fit_ighb(ds, &config)?,
                _ => calibrate::fit_iglb(ds, &config)?,
            };
            (m, FitDetails::Iterative(trace))
        }
    };
    let fitted = ds.with_scores(calibrate::predict(&model, ds.scores(), ds.groups())?)?;
    let trace = TraceFile {
        method: model.method,
        n: ds.len(),
        m: model.grid.m(),
        in_sample_mse: metrics::mse(&fitted),
        in_sample_asce: metrics::asce(&fitted, model.grid),
        in_sample_max_violation: metrics::multicalibration_violation(&fitted, model.grid)?.0,
        details,
    };
    Ok((model, serde_json::to_value(trace)?))
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> Result<()> {
    let started = Instant::now();
    let mut out = Outputs::new("calibrate", args, args.seed);
    let ds = load_dataset(&mut out, &args.input, args.groups.as_deref())?;
    let (model, trace) = fit_method(&ds, args)?;
    out.add(&args.out, io::model_to_json(&model)?);
    out.add(&args.trace, io::to_json_pretty(&trace)?);
    out.commit(started)
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let started = Instant::now();
    let mut out = Outputs::new("evaluate", args, None);
    let ds = load_dataset(&mut out, &args.input, args.groups.as_deref())?;
    let model = match &args.model {
        Some(p) => Some(io::model_from_json(&out.read(p)?)?),
        None => None,
    };
    let m = args
        .m
        .or(model.as_ref().map(|md| md.grid.m()))
        .ok_or_else(|| Error::Config("evaluate needs --m when no --model is given".into()))?;
    let grid = Grid::new(m)?;
    let ds = match &model {
        Some(md) => ds.with_scores(calibrate::predict(md, ds.scores(), ds.groups())?)?,
        None => ds,
    };
    let report = metrics::report(&ds, grid)?;
    out.add(&args.out, io::to_json_pretty(&report)?);
    out.add(&args.pergroup, io::format_pergroup(&report)?);
    if let Some(p) = &args.predictions {
        out.add(p, io::format_dataset(&ds)?);
    }
    out.commit(started)
}

pub fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let started = Instant::now();
    let mut out = Outputs::new("bench", args, Some(args.seed));
    let mut spec = match &args.config {
        Some(p) => SyntheticSpec::from_toml(&out.read(p)?)?,
        None => SyntheticSpec::benchmark(),
    };
    if let Some(n) = args.n {
        spec.n = n;
    }
    let methods = args.methods.iter().map(|m| m.parse::<BenchMethod>()).collect::<Result<Vec<_>>>()?;
    if args.runs == 0 {
        return Err(Error::Config("--runs must be at least 1".into()));
    }
    let seeds = (0..args.runs).map(|i| args.seed.wrapping_add(i)).collect();
    let cfg = BenchConfig { alpha: args.alpha, epsilon: args.epsilon, ..BenchConfig::new(spec, methods, seeds) };
    out.add(&args.out, run_bench(&cfg)?.to_csv()?);
    out.commit(started)
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Score(a) => cmd_score(a),
        Command::Group(a) => cmd_group(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numeric => 4,
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
