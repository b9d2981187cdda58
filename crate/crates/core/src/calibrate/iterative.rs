//! Iterative grouped binning: repeatedly find the (level, group, comparator)
//! bin with the largest mass-weighted squared bias and patch the model on
//! it, re-rounding to the grid after every patch.
//!
//! [`fit_ighb`] stops once `max_g P(g) gASCE(f, g) <= alpha`.
//! [`fit_iglb`] splits off a validation set and stops when the selected bin
//! is lighter than `epsilon` or when the patch fails to lower validation
//! MSE. Comparators and patch kind come from [`FitConfig`], which is how
//! the ablation variants are expressed.

use serde::{Deserialize, Serialize};

use super::scaling::ScalingProblem;
use crate::data::{
    split, BinDescriptor, CalibratedModel, Comparator, Grid, GroupMatrix, Method, Patch, ScoredDataset, Transform,
    TransformKind, DEFAULT_CLIP,
};
use crate::error::{Error, Result};

/// Bins with fewer rows than this get a constant shift instead of a
/// logit-linear patch.
pub const MIN_LOGIT_LINEAR_ROWS: usize = 8;

/// Tolerance on the per-round in-sample MSE decrease check.
pub const MSE_DECREASE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub alpha: f64,
    /// Minimum calibration mass of a patched bin (IGLB).
    pub epsilon: f64,
    /// Hard cap on accepted patches; `None` means `ceil(4 / alpha^2)`.
    pub max_rounds: Option<usize>,
    /// Fraction of rows held out for early stopping (IGLB).
    pub val_fraction: f64,
    pub seed: u64,
    pub comparators: Vec<Comparator>,
    pub transform: TransformKind,
    pub clip: f64,
}

impl FitConfig {
    /// Equality bins, constant shifts.
    pub fn ighb(alpha: f64) -> Self {
        FitConfig {
            alpha,
            epsilon: 0.0,
            max_rounds: None,
            val_fraction: 0.2,
            seed: 0,
            comparators: vec![Comparator::Eq],
            transform: TransformKind::Constant,
            clip: DEFAULT_CLIP,
        }
    }

    /// Lower/upper-set bins, logit-linear patches, early stopping.
    pub fn iglb(alpha: f64, epsilon: f64, seed: u64) -> Self {
        FitConfig {
            epsilon,
            seed,
            comparators: vec![Comparator::Le, Comparator::Ge],
            transform: TransformKind::LogitLinear,
            ..FitConfig::ighb(alpha)
        }
    }

    pub fn with_comparators(mut self, comparators: Vec<Comparator>) -> Self {
        self.comparators = comparators;
        self
    }

    pub fn with_transform(mut self, transform: TransformKind) -> Self {
        self.transform = transform;
        self
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::from_alpha(self.alpha)
    }

    pub fn round_cap(&self) -> usize {
        self.max_rounds.unwrap_or_else(|| (4.0 / (self.alpha * self.alpha) - 1e-9).ceil() as usize)
    }

    /// Equality bins with constant shifts: the setting in which every round
    /// provably lowers in-sample MSE.
    pub fn is_level_set_binning(&self) -> bool {
        self.comparators == [Comparator::Eq] && self.transform == TransformKind::Constant
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::Config(format!("epsilon must be nonnegative, got {}", self.epsilon)));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Config(format!("val_fraction must lie in (0, 1), got {}", self.val_fraction)));
        }
        if self.comparators.is_empty() {
            return Err(Error::Config("at least one comparator is required".into()));
        }
        if self.max_rounds == Some(0) {
            return Err(Error::Config("max_rounds must be at least 1".into()));
        }
        if !(self.clip > 0.0 && self.clip < 0.5) {
            return Err(Error::Config(format!("clip must lie in (0, 0.5), got {}", self.clip)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Multicalibration violation at or below alpha.
    Converged,
    /// Selected bin lighter than epsilon.
    MassBelowEpsilon,
    /// Candidate patch did not lower validation MSE.
    ValidationStalled,
    /// Selected patch moved no calibration row.
    Stalled,
    /// Round cap reached outside the level-set setting.
    RoundCap,
    NoCandidateBins,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub bin: BinDescriptor,
    pub group_name: String,
    pub level_value: f64,
    pub mass: f64,
    pub bias: f64,
    pub transform: Transform,
    /// Violation of the model before this round's patch.
    pub violation_before: f64,
    /// In-sample MSE after the patch and re-rounding.
    pub mse: f64,
    pub val_mse: Option<f64>,
    pub rows_moved: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub method: Method,
    pub m: usize,
    pub initial_mse: f64,
    pub initial_val_mse: Option<f64>,
    pub rounds: Vec<RoundRecord>,
    pub stop_reason: StopReason,
    pub final_mse: f64,
    pub final_violation: f64,
    /// Validation MSE of the selected-but-rejected candidate, if any.
    pub rejected_val_mse: Option<f64>,
    pub calib_rows: usize,
    pub val_rows: usize,
    pub warnings: Vec<String>,
}

/// Per-(group, level) counts and residual sums over rows sitting on grid
/// levels. Empty groups are inactive and never selected.
pub(crate) struct BinTable {
    n: usize,
    levels: usize,
    active: Vec<usize>,
    count: Vec<usize>,
    resid: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Candidate {
    pub bin: BinDescriptor,
    pub count: usize,
    pub resid: f64,
    pub n: usize,
}

impl Candidate {
    pub fn mass(&self) -> f64 {
        self.count as f64 / self.n as f64
    }

    pub fn bias(&self) -> f64 {
        self.resid / self.count as f64
    }

    pub fn objective(&self) -> f64 {
        self.resid * self.resid / (self.count as f64 * self.n as f64)
    }

    /// Deterministic ordering: objective, then mass, then lower level,
    /// lower group and EQ < LE < GE.
    fn beats(&self, other: &Candidate) -> bool {
        let (a, b) = (self.objective(), other.objective());
        if a != b {
            return a > b;
        }
        if self.count != other.count {
            return self.count > other.count;
        }
        (self.bin.level, self.bin.group, self.bin.comparator)
            < (other.bin.level, other.bin.group, other.bin.comparator)
    }
}

impl BinTable {
    pub(crate) fn build(levels: &[usize], labels: &[u8], groups: &GroupMatrix, grid: Grid) -> Self {
        let nl = grid.levels();
        let k = groups.len();
        let mut count = vec![0usize; k * nl];
        let mut sum_y = vec![0.0f64; k * nl];
        for g in 0..k {
            let col = groups.column(g);
            let base = g * nl;
            for (i, &lv) in levels.iter().enumerate() {
                if col[i] {
                    count[base + lv] += 1;
                    sum_y[base + lv] += labels[i] as f64;
                }
            }
        }
        let resid = (0..k * nl).map(|c| sum_y[c] - count[c] as f64 * grid.value(c % nl)).collect();
        let active = (0..k).filter(|&g| count[g * nl..(g + 1) * nl].iter().any(|&c| c > 0)).collect();
        BinTable { n: levels.len(), levels: nl, active, count, resid }
    }

    pub(crate) fn inactive_groups(&self, k: usize) -> Vec<usize> {
        (0..k).filter(|g| !self.active.contains(g)).collect()
    }

    /// `max_g sum_p P(S_{p,g}) Delta_{p,g}^2` over active groups.
    pub(crate) fn violation(&self) -> f64 {
        let n = self.n as f64;
        self.active
            .iter()
            .map(|&g| {
                let base = g * self.levels;
                (0..self.levels)
                    .filter(|&l| self.count[base + l] > 0)
                    .map(|l| {
                        let r = self.resid[base + l];
                        r * r / (self.count[base + l] as f64 * n)
                    })
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub(crate) fn select(&self, comparators: &[Comparator]) -> Option<Candidate> {
        let mut best: Option<Candidate> = None;
        let mut consider = |c: Candidate| {
            if c.count > 0 && best.as_ref().is_none_or(|b| c.beats(b)) {
                best = Some(c);
            }
        };
        for &g in &self.active {
            let base = g * self.levels;
            let cells = &self.count[base..base + self.levels];
            let resid = &self.resid[base..base + self.levels];
            for &cmp in comparators {
                let mut acc_c = 0usize;
                let mut acc_r = 0.0f64;
                match cmp {
                    Comparator::Eq => {
                        for l in 0..self.levels {
                            consider(Candidate {
                                bin: BinDescriptor { level: l, comparator: cmp, group: g },
                                count: cells[l],
                                resid: resid[l],
                                n: self.n,
                            });
                        }
                    }
                    Comparator::Le => {
                        for l in 0..self.levels {
                            acc_c += cells[l];
                            acc_r += resid[l];
                            consider(Candidate {
                                bin: BinDescriptor { level: l, comparator: cmp, group: g },
                                count: acc_c,
                                resid: acc_r,
                                n: self.n,
                            });
                        }
                    }
                    Comparator::Ge => {
                        for l in (0..self.levels).rev() {
                            acc_c += cells[l];
                            acc_r += resid[l];
                            consider(Candidate {
                                bin: BinDescriptor { level: l, comparator: cmp, group: g },
                                count: acc_c,
                                resid: acc_r,
                                n: self.n,
                            });
                        }
                    }
                }
            }
        }
        best
    }
}

/// Worst bin of an on-grid view of `ds`, as `(bin, bias, mass)`.
pub fn select_worst_bin(ds: &ScoredDataset, grid: Grid, comparators: &[Comparator]) -> Result<(BinDescriptor, f64, f64)> {
    let levels: Vec<usize> = ds.scores().iter().map(|&s| grid.round_index(s)).collect();
    let table = BinTable::build(&levels, ds.labels(), ds.groups(), grid);
    let c = table.select(comparators).ok_or(Error::NoCandidateBins)?;
    Ok((c.bin, c.bias(), c.mass()))
}

/// Applies one patch to rows currently in its bin, re-rounding them.
/// Returns the number of rows whose level changed.
pub(crate) fn apply_patch(patch: &Patch, grid: Grid, clip: f64, levels: &mut [usize], groups: &GroupMatrix) -> usize {
    let mut moved = 0;
    let col = groups.column(patch.bin.group);
    for (i, lv) in levels.iter_mut().enumerate() {
        if col[i] && patch.bin.comparator.admits(*lv, patch.bin.level) {
            let next = grid.round_index(patch.transform.apply(grid.value(*lv), clip));
            if next != *lv {
                moved += 1;
                *lv = next;
            }
        }
    }
    moved
}

fn levels_mse(levels: &[usize], labels: &[u8], grid: Grid) -> f64 {
    let s: f64 = levels
        .iter()
        .zip(labels)
        .map(|(&l, &y)| {
            let r = y as f64 - grid.value(l);
            r * r
        })
        .sum();
    s / levels.len() as f64
}

fn fit_transform(
    cand: &Candidate,
    levels: &[usize],
    ds: &ScoredDataset,
    grid: Grid,
    config: &FitConfig,
    warnings: &mut Vec<String>,
) -> Transform {
    let constant = Transform::ConstantShift { delta: cand.bias() };
    if config.transform == TransformKind::Constant {
        return constant;
    }
    let col = ds.groups().column(cand.bin.group);
    let rows: Vec<(f64, u8)> = (0..levels.len())
        .filter(|&i| col[i] && cand.bin.comparator.admits(levels[i], cand.bin.level))
        .map(|i| (grid.value(levels[i]), ds.labels()[i]))
        .collect();
    let positives = rows.iter().filter(|r| r.1 == 1).count();
    if rows.len() < MIN_LOGIT_LINEAR_ROWS || positives == 0 || positives == rows.len() {
        return constant;
    }
    let fit = ScalingProblem::from_rows(rows, config.clip).solve();
    if !fit.converged {
        warnings.push(format!(
            "logit-linear patch on {:?} did not converge (gradient {:.2e}); using best iterate",
            cand.bin, fit.grad_norm
        ));
    }
    Transform::LogitLinear { alpha: fit.alpha, beta: fit.beta }
}

enum Mode<'a> {
    /// Stop once the violation is at most alpha.
    Guarded,
    /// Epsilon mass floor and validation early stopping.
    EarlyStop { val: &'a ScoredDataset },
}

fn run(calib: &ScoredDataset, mode: Mode<'_>, config: &FitConfig, method: Method) -> Result<(CalibratedModel, FitTrace)> {
    config.validate()?;
    let grid = config.grid()?;
    let groups = calib.groups();
    let labels = calib.labels();
    let cap = config.round_cap();
    let mut warnings = Vec::new();

    let mut levels: Vec<usize> = calib.scores().iter().map(|&s| grid.round_index(s)).collect();
    let mut val_levels: Option<Vec<usize>> = match &mode {
        Mode::EarlyStop { val } => Some(val.scores().iter().map(|&s| grid.round_index(s)).collect()),
        Mode::Guarded => None,
    };
    let val_data = match &mode {
        Mode::EarlyStop { val } => Some(*val),
        Mode::Guarded => None,
    };
    if let Some(val) = val_data {
        if val.groups().names() != groups.names() {
            return Err(Error::GroupSchemaMismatch(format!("{:?}", val.groups().names())));
        }
    }

    let initial_mse = levels_mse(&levels, labels, grid);
    let initial_val_mse = val_data.zip(val_levels.as_ref()).map(|(v, l)| levels_mse(l, v.labels(), grid));
    let mut mse = initial_mse;
    let mut val_mse = initial_val_mse;
    let mut patches = Vec::new();
    let mut rounds = Vec::new();
    let mut rejected_val_mse = None;

    let mut reported_inactive = false;
    let (stop_reason, final_violation) = loop {
        let table = BinTable::build(&levels, labels, groups, grid);
        if !reported_inactive {
            for g in table.inactive_groups(groups.len()) {
                let msg = format!("group {:?} is empty in calibration data; excluded from selection", groups.name(g));
                log::warn!("{msg}");
                warnings.push(msg);
            }
            reported_inactive = true;
        }
        let violation = table.violation();
        if matches!(mode, Mode::Guarded) && violation <= config.alpha {
            break (StopReason::Converged, violation);
        }
        let Some(cand) = table.select(&config.comparators) else {
            break (StopReason::NoCandidateBins, violation);
        };
        if matches!(mode, Mode::EarlyStop { .. }) && cand.mass() < config.epsilon {
            break (StopReason::MassBelowEpsilon, violation);
        }
        if patches.len() >= cap {
            if config.is_level_set_binning() && matches!(mode, Mode::Guarded) {
                return Err(Error::RoundLimitExceeded(cap));
            }
            break (StopReason::RoundCap, violation);
        }

        let transform = fit_transform(&cand, &levels, calib, grid, config, &mut warnings);
        let patch = Patch { bin: cand.bin, transform };
        let mut next = levels.clone();
        let moved = apply_patch(&patch, grid, config.clip, &mut next, groups);

        let mut next_val_mse = None;
        if let (Some(val), Some(vl)) = (val_data, val_levels.as_mut()) {
            let mut cand_val = vl.clone();
            apply_patch(&patch, grid, config.clip, &mut cand_val, val.groups());
            let v = levels_mse(&cand_val, val.labels(), grid);
            if v >= val_mse.expect("validation MSE tracked") {
                rejected_val_mse = Some(v);
                break (StopReason::ValidationStalled, violation);
            }
            *vl = cand_val;
            next_val_mse = Some(v);
        }
        if moved == 0 {
            log::warn!("patch on {:?} moved no rows; stopping", cand.bin);
            break (StopReason::Stalled, violation);
        }

        let next_mse = levels_mse(&next, labels, grid);
        if config.is_level_set_binning() && next_mse > mse + MSE_DECREASE_TOL {
            return Err(Error::MseIncreased { round: patches.len() + 1, before: mse, after: next_mse });
        }
        levels = next;
        mse = next_mse;
        val_mse = next_val_mse.or(val_mse);
        patches.push(patch);
        rounds.push(RoundRecord {
            round: patches.len(),
            bin: cand.bin,
            group_name: groups.name(cand.bin.group).to_string(),
            level_value: grid.value(cand.bin.level),
            mass: cand.mass(),
            bias: cand.bias(),
            transform,
            violation_before: violation,
            mse,
            val_mse: next_val_mse,
            rows_moved: moved,
        });
    };

    let model = CalibratedModel {
        grid,
        method,
        patches,
        coefficients: Vec::new(),
        group_names: groups.names().to_vec(),
        clip: config.clip,
    };
    let trace = FitTrace {
        method,
        m: grid.m(),
        initial_mse,
        initial_val_mse,
        rounds,
        stop_reason,
        final_mse: mse,
        final_violation,
        rejected_val_mse,
        calib_rows: calib.len(),
        val_rows: val_data.map_or(0, |v| v.len()),
        warnings,
    };
    Ok((model, trace))
}

/// Iterative grouped histogram binning on the full calibration set.
pub fn fit_ighb(calib: &ScoredDataset, config: &FitConfig) -> Result<(CalibratedModel, FitTrace)> {
    run(calib, Mode::Guarded, config, Method::Ighb)
}

/// Iterative grouped linear binning: splits `data` into calibration and
/// validation parts, then patches until the mass floor or validation MSE
/// stops it.
pub fn fit_iglb(data: &ScoredDataset, config: &FitConfig) -> Result<(CalibratedModel, FitTrace)> {
    config.validate()?;
    if config.epsilon <= 0.0 {
        return Err(Error::Config("IGLB needs epsilon > 0".into()));
    }
    if config.comparators.contains(&Comparator::Eq) {
        return Err(Error::Config("IGLB searches LE/GE bins only".into()));
    }
    let (calib, val) = split(data, 1.0 - config.val_fraction, config.seed)?;
    run(&calib, Mode::EarlyStop { val: &val }, config, Method::Iglb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::predict;
    use crate::metrics;

    fn brute_force(ds: &ScoredDataset, grid: Grid, comparators: &[Comparator]) -> (BinDescriptor, f64) {
        // direct recomputation of every candidate from the rows
        let n = ds.len() as f64;
        let mut best: Option<(f64, usize, BinDescriptor)> = None;
        for l in 0..grid.levels() {
            for g in 0..ds.groups().len() {
                for &cmp in comparators {
                    let rows: Vec<usize> = (0..ds.len())
                        .filter(|&i| ds.groups().contains(i, g) && cmp.admits(grid.round_index(ds.scores()[i]), l))
                        .collect();
                    if rows.is_empty() {
                        continue;
                    }
                    let bias = rows.iter().map(|&i| ds.labels()[i] as f64 - grid.round(ds.scores()[i])).sum::<f64>()
                        / rows.len() as f64;
                    let obj = rows.len() as f64 / n * bias * bias;
                    let bin = BinDescriptor { level: l, comparator: cmp, group: g };
                    let better = match &best {
                        None => true,
                        Some((o, c, b)) => {
                            (obj - o).abs() > 1e-15 && obj > *o
                                || (obj - o).abs() <= 1e-15
                                    && (rows.len() > *c
                                        || rows.len() == *c
                                            && (l, g, cmp) < (b.level, b.group, b.comparator))
                        }
                    };
                    if better {
                        best = Some((obj, rows.len(), bin));
                    }
                }
            }
        }
        let (obj, _, bin) = best.unwrap();
        (bin, obj)
    }

    fn three_level_dataset() -> ScoredDataset {
        let g = GroupMatrix::from_columns(
            9,
            vec!["a".into()],
            vec![vec![true, true, false, true, false, false, true, true, false]],
        )
        .unwrap();
        ScoredDataset::new(
            vec![0.0, 0.5, 1.0, 0.5, 0.5, 0.0, 1.0, 0.5, 0.5],
            vec![1, 1, 0, 0, 1, 0, 1, 1, 1],
            g,
        )
        .unwrap()
    }

    #[test]
    fn unique_miscalibrated_bin_selected() {
        let d = ScoredDataset::ungrouped(vec![0.5, 0.5, 0.0, 0.0], vec![1, 1, 0, 0]).unwrap();
        let (bin, bias, mass) = select_worst_bin(&d, Grid::new(2).unwrap(), &[Comparator::Eq]).unwrap();
        assert_eq!(bin, BinDescriptor { level: 1, comparator: Comparator::Eq, group: 0 });
        assert_eq!((bias, mass), (0.5, 0.5));
    }

    #[test]
    fn selection_matches_brute_force() {
        let d = three_level_dataset();
        let grid = Grid::new(2).unwrap();
        for cmps in [vec![Comparator::Eq], vec![Comparator::Le, Comparator::Ge], vec![Comparator::Eq, Comparator::Le, Comparator::Ge]] {
            let (bin, bias, mass) = select_worst_bin(&d, grid, &cmps).unwrap();
            let (expect, obj) = brute_force(&d, grid, &cmps);
            assert_eq!(bin, expect, "{cmps:?}");
            assert!((mass * bias * bias - obj).abs() < 1e-15);
        }
    }

    #[test]
    fn whole_group_bin_selected_when_group_bias_dominates() {
        // every row of the group underestimates by the same amount
        let g = GroupMatrix::from_columns(6, vec!["a".into()], vec![vec![true, true, true, false, false, false]]).unwrap();
        let d = ScoredDataset::new(vec![0.0, 0.5, 0.5, 0.5, 1.0, 0.0], vec![1, 1, 1, 0, 1, 0], g).unwrap();
        let grid = Grid::new(2).unwrap();
        let (bin, _, mass) = select_worst_bin(&d, grid, &[Comparator::Le, Comparator::Ge]).unwrap();
        let (expect, _) = brute_force(&d, grid, &[Comparator::Le, Comparator::Ge]);
        assert_eq!(bin, expect);
        assert_eq!(bin.group, 1);
        assert_eq!(mass, 0.5);
    }

    #[test]
    fn calibrated_input_needs_no_patches() {
        let d = ScoredDataset::ungrouped(vec![0.5, 0.5, 0.0, 1.0], vec![1, 0, 0, 1]).unwrap();
        let (model, trace) = fit_ighb(&d, &FitConfig::ighb(0.1)).unwrap();
        assert!(model.patches.is_empty());
        assert_eq!(trace.stop_reason, StopReason::Converged);
    }

    #[test]
    fn ighb_with_only_all_group_reaches_target() {
        let scores: Vec<f64> = (0..200).map(|i| (i % 10) as f64 / 10.0).collect();
        let labels: Vec<u8> = (0..200).map(|i| ((i * 7) % 3 == 0) as u8).collect();
        let d = ScoredDataset::ungrouped(scores, labels).unwrap();
        let config = FitConfig::ighb(0.05);
        let (model, trace) = fit_ighb(&d, &config).unwrap();
        let out = predict(&model, d.scores(), d.groups()).unwrap();
        let out_ds = d.with_scores(out).unwrap();
        let grid = config.grid().unwrap();
        assert!(metrics::asce(&out_ds, grid) <= 0.05);
        assert_eq!(metrics::mse(&out_ds), trace.final_mse);
        for w in trace.rounds.windows(2) {
            assert!(w[1].mse <= w[0].mse + MSE_DECREASE_TOL);
        }
    }

    #[test]
    fn iglb_epsilon_one_stops_immediately() {
        let d = three_level_dataset();
        let config = FitConfig::iglb(0.1, 1.0, 3);
        let (model, trace) = fit_iglb(&d, &config).unwrap();
        assert!(model.patches.is_empty());
        assert_eq!(trace.stop_reason, StopReason::MassBelowEpsilon);
        let out = predict(&model, d.scores(), d.groups()).unwrap();
        let grid = config.grid().unwrap();
        assert_eq!(out, d.scores().iter().map(|&s| grid.round(s)).collect::<Vec<_>>());
    }

    #[test]
    fn config_validation() {
        assert!(FitConfig::ighb(0.0).validate().is_err());
        assert!(FitConfig { val_fraction: 1.0, ..FitConfig::ighb(0.1) }.validate().is_err());
        assert!(FitConfig::ighb(0.1).with_comparators(vec![]).validate().is_err());
        assert_eq!(FitConfig::ighb(0.05).round_cap(), 1600);
        assert_eq!(FitConfig::ighb(0.1).round_cap(), 400);
    }
}
