//! Calibration and accuracy measures on empirical distributions.
//!
//! Level sets are keyed by the grid cell a score rounds to, while biases
//! use the scores themselves. For on-grid scores this is exactly the
//! level-set definition; for off-grid scores it is the usual binned
//! estimator (and a warning is logged). The `*_exact` variants key level
//! sets by the distinct score values instead.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{BinDescriptor, Comparator, Grid, ScoredDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default)]
struct Agg {
    count: usize,
    sum_y: f64,
    sum_s: f64,
}

impl Agg {
    fn add(&mut self, y: u8, s: f64) {
        self.count += 1;
        self.sum_y += y as f64;
        self.sum_s += s;
    }

    fn bias(&self) -> f64 {
        (self.sum_y - self.sum_s) / self.count as f64
    }
}

#[derive(Debug, Clone, Copy)]
enum Binning {
    Grid(Grid),
    Exact,
}

/// Aggregates over nonempty level sets of the masked rows, ordered by level.
fn level_sets(ds: &ScoredDataset, mask: &[bool], binning: Binning) -> Vec<(u64, Agg)> {
    let (s, y) = (ds.scores(), ds.labels());
    match binning {
        Binning::Grid(grid) => {
            let mut aggs = vec![Agg::default(); grid.levels()];
            let mut off_grid = 0usize;
            for i in (0..ds.len()).filter(|&i| mask[i]) {
                let k = grid.round_index(s[i]);
                if grid.value(k) != s[i] {
                    off_grid += 1;
                }
                aggs[k].add(y[i], s[i]);
            }
            if off_grid > 0 {
                log::debug!("{off_grid} scores are off the m={} grid; binning them by nearest grid value", grid.m());
            }
            aggs.into_iter()
                .enumerate()
                .filter(|(_, a)| a.count > 0)
                .map(|(k, a)| (k as u64, a))
                .collect()
        }
        Binning::Exact => {
            let mut map: BTreeMap<u64, Agg> = BTreeMap::new();
            for i in (0..ds.len()).filter(|&i| mask[i]) {
                // +0.0 normalises -0.0; nonnegative floats order like their bits
                map.entry((s[i] + 0.0).to_bits()).or_default().add(y[i], s[i]);
            }
            map.into_iter().collect()
        }
    }
}

/// Mass-weighted squared bias over the level sets of the masked rows,
/// normalised by the masked row count. `None` when the mask is empty.
fn conditional_asce(ds: &ScoredDataset, mask: &[bool], binning: Binning) -> Option<f64> {
    let sets = level_sets(ds, mask, binning);
    let total: usize = sets.iter().map(|(_, a)| a.count).sum();
    if total == 0 {
        return None;
    }
    Some(
        sets.iter()
            .map(|(_, a)| {
                let b = a.bias();
                a.count as f64 / total as f64 * b * b
            })
            .sum(),
    )
}

/// Mean of `label - score` over the selected rows.
pub fn bias(ds: &ScoredDataset, mask: &[bool]) -> Result<f64> {
    let mut agg = Agg::default();
    for i in (0..ds.len()).filter(|&i| mask[i]) {
        agg.add(ds.labels()[i], ds.scores()[i]);
    }
    if agg.count == 0 {
        return Err(Error::EmptyConditioningSet);
    }
    Ok(agg.bias())
}

/// Average squared calibration error over grid level sets.
pub fn asce(ds: &ScoredDataset, grid: Grid) -> f64 {
    // column 0 is the all-true group, so this is gasce(ALL) by construction
    conditional_asce(ds, ds.groups().column(0), Binning::Grid(grid)).unwrap_or(0.0)
}

/// ASCE with level sets keyed by distinct score values.
pub fn asce_exact(ds: &ScoredDataset) -> f64 {
    conditional_asce(ds, ds.groups().column(0), Binning::Exact).unwrap_or(0.0)
}

/// Group ASCE: expectation of the squared level-set bias conditioned on
/// membership in `group`.
pub fn gasce(ds: &ScoredDataset, grid: Grid, group: usize) -> Result<f64> {
    conditional_asce(ds, ds.groups().column(group), Binning::Grid(grid))
        .ok_or_else(|| Error::EmptyGroup(ds.groups().name(group).to_string()))
}

pub fn gasce_exact(ds: &ScoredDataset, group: usize) -> Result<f64> {
    conditional_asce(ds, ds.groups().column(group), Binning::Exact)
        .ok_or_else(|| Error::EmptyGroup(ds.groups().name(group).to_string()))
}

/// Mean squared error (Brier score).
pub fn mse(ds: &ScoredDataset) -> f64 {
    mse_of(ds.scores(), ds.labels())
}

pub(crate) fn mse_of(scores: &[f64], labels: &[u8]) -> f64 {
    let s: f64 = scores
        .iter()
        .zip(labels)
        .map(|(&f, &y)| {
            let r = y as f64 - f;
            r * r
        })
        .sum();
    s / scores.len() as f64
}

/// Mass-weighted within-level-set label variance (population convention):
/// the term that, added to the ASCE, recovers the MSE for on-grid scores.
pub fn label_variance(ds: &ScoredDataset, grid: Grid) -> f64 {
    let n = ds.len() as f64;
    level_sets(ds, ds.groups().column(0), Binning::Grid(grid))
        .iter()
        .map(|(_, a)| {
            let mean = a.sum_y / a.count as f64;
            a.count as f64 / n * (mean - mean * mean)
        })
        .sum()
}

/// Fraction of rows whose label equals `1[score >= 1/2]`.
pub fn accuracy(ds: &ScoredDataset) -> f64 {
    let hits = ds
        .scores()
        .iter()
        .zip(ds.labels())
        .filter(|(&s, &y)| (s >= 0.5) == (y == 1))
        .count();
    hits as f64 / ds.len() as f64
}

/// Expected calibration error with `m` equal-width bins over confidence
/// `max(f, 1-f)`. Bins are `[(i-1)/m, i/m)`, the last one closed.
pub fn ece(ds: &ScoredDataset, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::Config("ECE needs at least one bin".into()));
    }
    let mut count = vec![0usize; m];
    let mut correct = vec![0usize; m];
    let mut conf = vec![0.0f64; m];
    for (&s, &y) in ds.scores().iter().zip(ds.labels()) {
        let b = ((s * m as f64).floor() as usize).min(m - 1);
        count[b] += 1;
        if (s >= 0.5) == (y == 1) {
            correct[b] += 1;
        }
        conf[b] += s.max(1.0 - s);
    }
    let n = ds.len() as f64;
    Ok((0..m)
        .filter(|&b| count[b] > 0)
        .map(|b| {
            let c = count[b] as f64;
            c / n * (correct[b] as f64 / c - conf[b] / c).abs()
        })
        .sum())
}

/// `max_g P(g) * gASCE(f, g)` over nonempty groups, with its group name.
/// Ties go to the lowest group index.
pub fn multicalibration_violation(ds: &ScoredDataset, grid: Grid) -> Result<(f64, String)> {
    let n = ds.len() as f64;
    let mut best: Option<(f64, usize)> = None;
    for k in 0..ds.groups().len() {
        let Ok(g) = gasce(ds, grid, k) else { continue };
        let v = ds.groups().count(k) as f64 / n * g;
        if best.is_none_or(|(b, _)| v > b) {
            best = Some((v, k));
        }
    }
    best.map(|(v, k)| (v, ds.groups().name(k).to_string())).ok_or(Error::AllGroupsEmpty)
}

/// Statistics of one bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStats {
    pub bin: BinDescriptor,
    pub group_name: String,
    pub level_value: f64,
    pub count: usize,
    pub mass: f64,
    pub mean_label: f64,
    pub mean_score: f64,
    pub bias: f64,
}

/// Nonempty equality bins `S_{p,g}` for every group.
pub fn bin_stats(ds: &ScoredDataset, grid: Grid) -> Vec<BinStats> {
    let n = ds.len() as f64;
    let mut out = Vec::new();
    for k in 0..ds.groups().len() {
        for (key, a) in level_sets(ds, ds.groups().column(k), Binning::Grid(grid)) {
            let level = key as usize;
            let c = a.count as f64;
            out.push(BinStats {
                bin: BinDescriptor { level, comparator: Comparator::Eq, group: k },
                group_name: ds.groups().name(k).to_string(),
                level_value: grid.value(level),
                count: a.count,
                mass: c / n,
                mean_label: a.sum_y / c,
                mean_score: a.sum_s / c,
                bias: a.bias(),
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub count: usize,
    pub mass: f64,
    pub mean_score: f64,
    pub mean_label: f64,
    pub gasce: f64,
    /// `mass * gasce`
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub n: usize,
    pub m: usize,
    pub asce: f64,
    pub mse: f64,
    pub ece: f64,
    pub accuracy: f64,
    pub max_violation: f64,
    pub max_violation_group: String,
    pub off_grid_rows: usize,
    /// Groups in column order (the `ALL` group first).
    pub group_order: Vec<String>,
    pub per_group: BTreeMap<String, GroupSummary>,
    pub per_bin: Vec<BinStats>,
}

/// Aggregates every metric above. Empty groups report zeros.
pub fn report(ds: &ScoredDataset, grid: Grid) -> Result<CalibrationReport> {
    let n = ds.len();
    let groups = ds.groups();
    let mut per_group = BTreeMap::new();
    for k in 0..groups.len() {
        let col = groups.column(k);
        let count = groups.count(k);
        let summary = if count == 0 {
            GroupSummary { count, mass: 0.0, mean_score: 0.0, mean_label: 0.0, gasce: 0.0, violation: 0.0 }
        } else {
            let (mut sy, mut ss) = (0.0, 0.0);
            for i in (0..n).filter(|&i| col[i]) {
                sy += ds.labels()[i] as f64;
                ss += ds.scores()[i];
            }
            let mass = count as f64 / n as f64;
            let g = gasce(ds, grid, k)?;
            GroupSummary {
                count,
                mass,
                mean_score: ss / count as f64,
                mean_label: sy / count as f64,
                gasce: g,
                violation: mass * g,
            }
        };
        per_group.insert(groups.name(k).to_string(), summary);
    }
    let (max_violation, max_violation_group) = multicalibration_violation(ds, grid)?;
    Ok(CalibrationReport {
        n,
        m: grid.m(),
        asce: asce(ds, grid),
        mse: mse(ds),
        ece: ece(ds, grid.m())?,
        accuracy: accuracy(ds),
        max_violation,
        max_violation_group,
        off_grid_rows: ds.scores().iter().filter(|&&s| !grid.is_on_grid(s)).count(),
        group_order: groups.names().to_vec(),
        per_group,
        per_bin: bin_stats(ds, grid),
    })
}
