//! Method-by-seed benchmark on synthetic data: every cell generates the
//! seed's dataset, holds out a test split, fits one method on the rest and
//! scores the test split.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibrate::{self, FitConfig};
use crate::data::{split, Comparator, Grid, ScoredDataset, TransformKind, DEFAULT_CLIP};
use crate::error::{Error, Result};
use crate::metrics;
use crate::synthetic::{generate, SyntheticSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchMethod {
    Uncalib,
    Hb,
    Ls,
    Gcur,
    Gculr,
    Ighb,
    /// IGHB on lower/upper-set bins.
    IghbTau,
    /// IGHB with logit-linear patches on level-set bins.
    IghbLs,
    Iglb,
}

impl BenchMethod {
    pub const ALL: [BenchMethod; 9] = [
        BenchMethod::Uncalib,
        BenchMethod::Hb,
        BenchMethod::Ls,
        BenchMethod::Gcur,
        BenchMethod::Gculr,
        BenchMethod::Ighb,
        BenchMethod::IghbTau,
        BenchMethod::IghbLs,
        BenchMethod::Iglb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchMethod::Uncalib => "uncalib",
            BenchMethod::Hb => "hb",
            BenchMethod::Ls => "ls",
            BenchMethod::Gcur => "gcur",
            BenchMethod::Gculr => "gculr",
            BenchMethod::Ighb => "ighb",
            BenchMethod::IghbTau => "ighb_tau",
            BenchMethod::IghbLs => "ighb_ls",
            BenchMethod::Iglb => "iglb",
        }
    }
}

impl fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        BenchMethod::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown bench method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub spec: SyntheticSpec,
    pub methods: Vec<BenchMethod>,
    pub seeds: Vec<u64>,
    pub alpha: f64,
    pub epsilon: f64,
    /// Share of each generated dataset held out for scoring.
    pub test_fraction: f64,
    /// Share of the training part used for IGLB early stopping.
    pub val_fraction: f64,
    pub clip: f64,
}

impl BenchConfig {
    pub fn new(spec: SyntheticSpec, methods: Vec<BenchMethod>, seeds: Vec<u64>) -> Self {
        BenchConfig { spec, methods, seeds, alpha: 0.05, epsilon: 0.01, test_fraction: 0.2, val_fraction: 0.2, clip: DEFAULT_CLIP }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub method: BenchMethod,
    pub seed: u64,
    pub mse: f64,
    pub accuracy: f64,
    pub ece: f64,
    pub asce: f64,
    pub max_violation: f64,
    /// Held-out gASCE per group, in the dataset's group order.
    pub gasce: Vec<f64>,
    /// Accepted patches, for the iterative methods.
    pub rounds: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTable {
    pub group_names: Vec<String>,
    /// Sorted by method, then seed.
    pub runs: Vec<RunResult>,
}

/// Fits `method` on `train` and returns its predictions on `test`, with the
/// number of accepted patches for iterative methods.
pub fn fit_predict(method: BenchMethod, train: &ScoredDataset, test: &ScoredDataset, cfg: &BenchConfig, seed: u64) -> Result<(Vec<f64>, Option<usize>)> {
    let grid = Grid::from_alpha(cfg.alpha)?;
    let iter_config = |comparators: Vec<Comparator>, transform: TransformKind| FitConfig {
        alpha: cfg.alpha,
        epsilon: cfg.epsilon,
        max_rounds: None,
        val_fraction: cfg.val_fraction,
        seed,
        comparators,
        transform,
        clip: cfg.clip,
    };
    let (model, rounds) = match method {
        BenchMethod::Uncalib => return Ok((test.scores().to_vec(), None)),
        BenchMethod::Hb => (calibrate::fit_hb(train, grid, cfg.clip)?, None),
        BenchMethod::Ls => (calibrate::fit_ls(train, grid, cfg.clip)?, None),
        BenchMethod::Gcur => (calibrate::fit_gcur(train, grid, cfg.clip)?.model, None),
        BenchMethod::Gculr => (calibrate::fit_gculr(train, grid, cfg.clip)?.model, None),
        BenchMethod::Ighb | BenchMethod::IghbTau | BenchMethod::IghbLs => {
            let (cmps, kind) = match method {
                BenchMethod::Ighb => (vec![Comparator::Eq], TransformKind::Constant),
                BenchMethod::IghbTau => (vec![Comparator::Le, Comparator::Ge], TransformKind::Constant),
                _ => (vec![Comparator::Eq], TransformKind::LogitLinear),
            };
            let (m, trace) = calibrate::fit_ighb(train, &iter_config(cmps, kind))?;
            (m, Some(trace.rounds.len()))
        }
        BenchMethod::Iglb => {
            let (m, trace) = calibrate::fit_iglb(train, &iter_config(vec![Comparator::Le, Comparator::Ge], TransformKind::LogitLinear))?;
            (m, Some(trace.rounds.len()))
        }
    };
    Ok((calibrate::predict(&model, test.scores(), test.groups())?, rounds))
}

/// Fits and scores one (method, seed) cell on a train/test split.
pub fn evaluate_method(method: BenchMethod, train: &ScoredDataset, test: &ScoredDataset, cfg: &BenchConfig, seed: u64) -> Result<RunResult> {
    let grid = Grid::from_alpha(cfg.alpha)?;
    let (pred, rounds) = fit_predict(method, train, test, cfg, seed)?;
    let scored = test.with_scores(pred)?;
    let gasce = (0..scored.groups().len())
        .map(|k| if scored.groups().count(k) == 0 { Ok(f64::NAN) } else { metrics::gasce(&scored, grid, k) })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunResult {
        method,
        seed,
        mse: metrics::mse(&scored),
        accuracy: metrics::accuracy(&scored),
        ece: metrics::ece(&scored, grid.m())?,
        asce: metrics::asce(&scored, grid),
        max_violation: metrics::multicalibration_violation(&scored, grid)?.0,
        gasce,
        rounds,
    })
}

/// The train/test split used for `seed`.
pub fn seed_split(cfg: &BenchConfig, seed: u64) -> Result<(ScoredDataset, ScoredDataset)> {
    let (data, _) = generate(&cfg.spec, seed)?;
    split(&data, 1.0 - cfg.test_fraction, seed)
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchTable> {
    if cfg.methods.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::Config("bench needs at least one method and one seed".into()));
    }
    if !(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0) {
        return Err(Error::Config(format!("test_fraction must lie in (0, 1), got {}", cfg.test_fraction)));
    }
    cfg.spec.validate()?;
    let splits = cfg.seeds.par_iter().map(|&s| seed_split(cfg, s).map(|d| (s, d))).collect::<Result<Vec<_>>>()?;
    let cells: Vec<(BenchMethod, usize)> =
        cfg.methods.iter().flat_map(|&m| (0..splits.len()).map(move |i| (m, i))).collect();
    let mut runs = cells
        .par_iter()
        .map(|&(m, i)| {
            let (seed, (train, test)) = &splits[i];
            evaluate_method(m, train, test, cfg, *seed)
        })
        .collect::<Result<Vec<_>>>()?;
    runs.sort_by_key(|r| (r.method, r.seed));
    runs.dedup_by_key(|r| (r.method, r.seed));
    let group_names = splits[0].1 .0.groups().names().to_vec();
    Ok(BenchTable { group_names, runs })
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl BenchTable {
    pub fn runs_for(&self, method: BenchMethod) -> impl Iterator<Item = &RunResult> {
        self.runs.iter().filter(move |r| r.method == method)
    }

    /// Sample mean and standard deviation of a per-run statistic.
    pub fn summary(&self, method: BenchMethod, stat: impl Fn(&RunResult) -> f64) -> (f64, f64) {
        let xs: Vec<f64> = self.runs_for(method).map(stat).collect();
        mean_std(&xs)
    }

    /// One `run` row per (method, seed), then `mean` and `std` rows per
    /// method.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> =
            ["row", "method", "seed", "mse", "accuracy", "ece", "asce", "max_violation", "rounds"].map(String::from).to_vec();
        header.extend(self.group_names.iter().map(|g| format!("gasce:{g}")));
        w.write_record(&header)?;
        let fmt_opt = |v: Option<usize>| v.map_or(String::new(), |r| r.to_string());
        for r in &self.runs {
            let mut rec = vec![
                "run".to_string(),
                r.method.to_string(),
                r.seed.to_string(),
                r.mse.to_string(),
                r.accuracy.to_string(),
                r.ece.to_string(),
                r.asce.to_string(),
                r.max_violation.to_string(),
                fmt_opt(r.rounds),
            ];
            rec.extend(r.gasce.iter().map(|g| g.to_string()));
            w.write_record(&rec)?;
        }
        let mut methods: Vec<BenchMethod> = self.runs.iter().map(|r| r.method).collect();
        methods.dedup();
        for m in methods {
            let runs: Vec<&RunResult> = self.runs_for(m).collect();
            let col = |f: &dyn Fn(&RunResult) -> f64| mean_std(&runs.iter().map(|r| f(r)).collect::<Vec<_>>());
            let stats = [
                col(&|r| r.mse),
                col(&|r| r.accuracy),
                col(&|r| r.ece),
                col(&|r| r.asce),
                col(&|r| r.max_violation),
                col(&|r| r.rounds.map_or(f64::NAN, |x| x as f64)),
            ];
            let groups: Vec<(f64, f64)> = (0..self.group_names.len()).map(|k| col(&|r| r.gasce[k])).collect();
            for (label, pick) in [("mean", 0usize), ("std", 1)] {
                let get = |p: (f64, f64)| if pick == 0 { p.0 } else { p.1 };
                let mut rec = vec![label.to_string(), m.to_string(), String::new()];
                for (i, s) in stats.iter().enumerate() {
                    let v = get(*s);
                    rec.push(if i == 5 && v.is_nan() { String::new() } else { v.to_string() });
                }
                rec.extend(groups.iter().map(|g| get(*g).to_string()));
                w.write_record(&rec)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}
