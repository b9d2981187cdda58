//! Core value types: datasets, group memberships, the score grid, bins,
//! patches and fitted models.

use std::collections::HashSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};

/// Name of the reserved all-true group column.
pub const ALL_GROUP: &str = "ALL";

/// Default clipping constant applied before taking a logit.
pub const DEFAULT_CLIP: f64 = 1e-6;

/// Dense n x K boolean membership matrix. Column 0 is always the all-true
/// `ALL` group, so marginal calibration is the single-group special case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GroupMatrixRepr", into = "GroupMatrixRepr")]
pub struct GroupMatrix {
    rows: usize,
    names: Vec<String>,
    columns: Vec<Vec<bool>>,
}

#[derive(Serialize, Deserialize)]
struct GroupMatrixRepr {
    rows: usize,
    names: Vec<String>,
    columns: Vec<Vec<bool>>,
}

impl TryFrom<GroupMatrixRepr> for GroupMatrix {
    type Error = Error;

    fn try_from(r: GroupMatrixRepr) -> Result<Self> {
        GroupMatrix::from_columns(r.rows, r.names, r.columns)
    }
}

impl From<GroupMatrix> for GroupMatrixRepr {
    fn from(g: GroupMatrix) -> Self {
        GroupMatrixRepr { rows: g.rows, names: g.names, columns: g.columns }
    }
}

impl GroupMatrix {
    /// A matrix holding only the `ALL` column.
    pub fn all_only(rows: usize) -> Self {
        GroupMatrix {
            rows,
            names: vec![ALL_GROUP.to_string()],
            columns: vec![vec![true; rows]],
        }
    }

    /// Builds a matrix from user columns. An `ALL` column may be supplied
    /// (it must be all-true and is moved to index 0); otherwise one is
    /// prepended.
    pub fn from_columns(rows: usize, names: Vec<String>, columns: Vec<Vec<bool>>) -> Result<Self> {
        let violations = Self::check(rows, &names, &columns);
        if !violations.is_empty() {
            return Err(Error::InvalidDataset(violations));
        }
        let mut out = GroupMatrix::all_only(rows);
        for (name, col) in names.into_iter().zip(columns) {
            if name == ALL_GROUP {
                continue;
            }
            out.names.push(name);
            out.columns.push(col);
        }
        Ok(out)
    }

    fn check(rows: usize, names: &[String], columns: &[Vec<bool>]) -> Vec<Violation> {
        let mut v = Vec::new();
        if names.len() != columns.len() {
            v.push(Violation::LengthMismatch {
                what: "group names",
                expected: columns.len(),
                found: names.len(),
            });
        }
        let mut seen = HashSet::new();
        for name in names {
            if name.is_empty() {
                v.push(Violation::EmptyGroupName);
            } else if !seen.insert(name.as_str()) {
                v.push(Violation::DuplicateGroupName(name.clone()));
            }
        }
        for (name, col) in names.iter().zip(columns) {
            if col.len() != rows {
                v.push(Violation::LengthMismatch { what: "group column", expected: rows, found: col.len() });
            } else if name == ALL_GROUP && !col.iter().all(|&b| b) {
                v.push(Violation::ReservedGroupNotAllTrue);
            }
        }
        v
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns, including `ALL`.
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, k: usize) -> &str {
        &self.names[k]
    }

    pub fn column(&self, k: usize) -> &[bool] {
        &self.columns[k]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn contains(&self, row: usize, k: usize) -> bool {
        self.columns[k][row]
    }

    pub fn count(&self, k: usize) -> usize {
        self.columns[k].iter().filter(|&&b| b).count()
    }

    /// Indices of columns with no members.
    pub fn empty_groups(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.count(k) == 0).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> GroupMatrix {
        GroupMatrix {
            rows: rows.len(),
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| rows.iter().map(|&r| c[r]).collect()).collect(),
        }
    }

    /// Appends the non-`ALL` columns of `other`.
    pub fn merge(&self, other: &GroupMatrix) -> Result<GroupMatrix> {
        if other.rows != self.rows {
            return Err(Error::InvalidDataset(vec![Violation::LengthMismatch {
                what: "group matrix",
                expected: self.rows,
                found: other.rows,
            }]));
        }
        let mut names = self.names.clone();
        let mut columns = self.columns.clone();
        names.extend(other.names.iter().skip(1).cloned());
        columns.extend(other.columns.iter().skip(1).cloned());
        GroupMatrix::from_columns(self.rows, names, columns)
    }
}

/// Scores in [0,1], binary labels and group memberships for n >= 1 rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DatasetRepr", into = "DatasetRepr")]
pub struct ScoredDataset {
    scores: Vec<f64>,
    labels: Vec<u8>,
    groups: GroupMatrix,
}

#[derive(Serialize, Deserialize)]
struct DatasetRepr {
    scores: Vec<f64>,
    labels: Vec<u8>,
    groups: GroupMatrix,
}

impl TryFrom<DatasetRepr> for ScoredDataset {
    type Error = Error;

    fn try_from(r: DatasetRepr) -> Result<Self> {
        ScoredDataset::new(r.scores, r.labels, r.groups)
    }
}

impl From<ScoredDataset> for DatasetRepr {
    fn from(d: ScoredDataset) -> Self {
        DatasetRepr { scores: d.scores, labels: d.labels, groups: d.groups }
    }
}

/// Unvalidated dataset arrays, as read from a file or supplied by a caller.
#[derive(Debug, Clone, Default)]
pub struct RawDataset {
    pub scores: Vec<f64>,
    pub labels: Vec<f64>,
    pub group_names: Vec<String>,
    pub group_columns: Vec<Vec<bool>>,
}

/// Checks raw arrays and builds a dataset, or returns every violation found.
pub fn validate_dataset(raw: RawDataset) -> std::result::Result<ScoredDataset, Vec<Violation>> {
    let n = raw.scores.len();
    let mut v = Vec::new();
    if n == 0 {
        v.push(Violation::EmptyDataset);
    }
    if raw.labels.len() != n {
        v.push(Violation::LengthMismatch { what: "labels", expected: n, found: raw.labels.len() });
    }
    for (i, s) in raw.scores.iter().enumerate() {
        if !(0.0..=1.0).contains(s) {
            v.push(Violation::ScoreOutOfRange(i));
        }
    }
    for (i, &y) in raw.labels.iter().enumerate() {
        if y != 0.0 && y != 1.0 {
            v.push(Violation::NonBinaryLabel(i));
        }
    }
    v.extend(GroupMatrix::check(n, &raw.group_names, &raw.group_columns));
    if !v.is_empty() {
        return Err(v);
    }
    let groups = GroupMatrix::from_columns(n, raw.group_names, raw.group_columns).map_err(|e| match e {
        Error::InvalidDataset(v) => v,
        _ => unreachable!("group checks already passed"),
    })?;
    let labels = raw.labels.iter().map(|&y| y as u8).collect();
    Ok(ScoredDataset { scores: raw.scores, labels, groups })
}

impl ScoredDataset {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>, groups: GroupMatrix) -> Result<Self> {
        let n = scores.len();
        let mut v = Vec::new();
        if n == 0 {
            v.push(Violation::EmptyDataset);
        }
        if labels.len() != n {
            v.push(Violation::LengthMismatch { what: "labels", expected: n, found: labels.len() });
        }
        if groups.rows() != n {
            v.push(Violation::LengthMismatch { what: "groups", expected: n, found: groups.rows() });
        }
        v.extend(scores.iter().enumerate().filter(|(_, s)| !(0.0..=1.0).contains(*s)).map(|(i, _)| Violation::ScoreOutOfRange(i)));
        v.extend(labels.iter().enumerate().filter(|(_, &y)| y > 1).map(|(i, _)| Violation::NonBinaryLabel(i)));
        if !v.is_empty() {
            return Err(Error::InvalidDataset(v));
        }
        Ok(ScoredDataset { scores, labels, groups })
    }

    /// Dataset with only the `ALL` group.
    pub fn ungrouped(scores: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        let n = scores.len();
        Self::new(scores, labels, GroupMatrix::all_only(n))
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn groups(&self) -> &GroupMatrix {
        &self.groups
    }

    /// Same rows and groups with replaced scores.
    pub fn with_scores(&self, scores: Vec<f64>) -> Result<Self> {
        Self::new(scores, self.labels.clone(), self.groups.clone())
    }

    pub fn with_groups(&self, groups: GroupMatrix) -> Result<Self> {
        Self::new(self.scores.clone(), self.labels.clone(), groups)
    }

    pub fn select_rows(&self, rows: &[usize]) -> ScoredDataset {
        ScoredDataset {
            scores: rows.iter().map(|&r| self.scores[r]).collect(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            groups: self.groups.select_rows(rows),
        }
    }
}

/// Row indices of a seeded two-way split. Each side is sorted ascending.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("split fraction must lie in (0, 1), got {fraction}")));
    }
    let first = (n as f64 * fraction).round() as usize;
    if n < 2 || first == 0 || first >= n {
        return Err(Error::DegenerateSplit { n, fraction });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let mut a = idx[..first].to_vec();
    let mut b = idx[first..].to_vec();
    a.sort_unstable();
    b.sort_unstable();
    Ok((a, b))
}

/// Seeded disjoint partition; the first part holds `round(n * fraction)` rows.
pub fn split(data: &ScoredDataset, fraction: f64, seed: u64) -> Result<(ScoredDataset, ScoredDataset)> {
    let (a, b) = split_indices(data.len(), fraction, seed)?;
    Ok((data.select_rows(&a), data.select_rows(&b)))
}

/// Uniform grid {i/m : i = 0..m}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    m: usize,
}

impl Grid {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Config("grid resolution m must be at least 1".into()));
        }
        Ok(Grid { m })
    }

    /// Grid with m = ceil(1/alpha).
    pub fn from_alpha(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        // guard against 1/alpha landing one ulp above an integer
        Grid::new((1.0 / alpha - 1e-9).ceil() as usize)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of grid values, m + 1.
    pub fn levels(&self) -> usize {
        self.m + 1
    }

    pub fn value(&self, i: usize) -> f64 {
        i as f64 / self.m as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..=self.m).map(|i| self.value(i)).collect()
    }

    /// Index of the nearest grid value; exact ties go to the lower point.
    pub fn round_index(&self, s: f64) -> usize {
        let s = s.clamp(0.0, 1.0);
        let guess = (s * self.m as f64).floor() as isize;
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for i in (guess - 1)..=(guess + 2) {
            if i < 0 || i as usize > self.m {
                continue;
            }
            let d = (s - self.value(i as usize)).abs();
            if d < best_d {
                best_d = d;
                best = i as usize;
            }
        }
        best
    }

    pub fn round(&self, s: f64) -> f64 {
        self.value(self.round_index(s))
    }

    /// Exact grid index of `p`, if `p` is a grid value.
    pub fn index_of(&self, p: f64) -> Option<usize> {
        let i = self.round_index(p);
        (self.value(i) == p).then_some(i)
    }

    pub fn is_on_grid(&self, s: f64) -> bool {
        self.index_of(s).is_some()
    }
}

/// Rounds each score to its nearest grid value (ties to the lower point).
pub fn round_to_grid(scores: &[f64], m: usize) -> Result<Vec<f64>> {
    let grid = Grid::new(m)?;
    Ok(scores.iter().map(|&s| grid.round(s)).collect())
}

/// How a bin conditions on the current score level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "EQ")]
    Eq,
    #[serde(rename = "LE")]
    Le,
    #[serde(rename = "GE")]
    Ge,
}

impl Comparator {
    pub fn admits(self, level: usize, pivot: usize) -> bool {
        match self {
            Comparator::Eq => level == pivot,
            Comparator::Le => level <= pivot,
            Comparator::Ge => level >= pivot,
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Comparator::Eq => "EQ",
            Comparator::Le => "LE",
            Comparator::Ge => "GE",
        })
    }
}

impl std::str::FromStr for Comparator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "EQ" => Ok(Comparator::Eq),
            "LE" => Ok(Comparator::Le),
            "GE" => Ok(Comparator::Ge),
            _ => Err(Error::Config(format!("unknown comparator {s:?}"))),
        }
    }
}

/// Conditioning set {f(x) cmp p, g(x) = 1}, with p stored as a grid index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinDescriptor {
    pub level: usize,
    pub comparator: Comparator,
    pub group: usize,
}

impl BinDescriptor {
    pub fn contains(&self, level: usize, groups: &GroupMatrix, row: usize) -> bool {
        self.comparator.admits(level, self.level) && groups.contains(row, self.group)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Constant,
    LogitLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Transform {
    ConstantShift { delta: f64 },
    LogitLinear { alpha: f64, beta: f64 },
}

impl Transform {
    /// Applies the transform to one score; the result lies in [0,1].
    pub fn apply(&self, v: f64, clip: f64) -> f64 {
        match *self {
            Transform::ConstantShift { delta } => (v + delta).clamp(0.0, 1.0),
            Transform::LogitLinear { alpha, beta } => expit(alpha + beta * logit(v.clamp(clip, 1.0 - clip))),
        }
    }

    pub fn kind(&self) -> TransformKind {
        match self {
            Transform::ConstantShift { .. } => TransformKind::Constant,
            Transform::LogitLinear { .. } => TransformKind::LogitLinear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub bin: BinDescriptor,
    pub transform: Transform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Hb,
    Ls,
    Gcur,
    Gculr,
    Ighb,
    Iglb,
}

impl Method {
    pub fn is_parametric(self) -> bool {
        matches!(self, Method::Ls | Method::Gcur | Method::Gculr)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Hb => "hb",
            Method::Ls => "ls",
            Method::Gcur => "gcur",
            Method::Gculr => "gculr",
            Method::Ighb => "ighb",
            Method::Iglb => "iglb",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hb" => Ok(Method::Hb),
            "ls" => Ok(Method::Ls),
            "gcur" => Ok(Method::Gcur),
            "gculr" => Ok(Method::Gculr),
            "ighb" => Ok(Method::Ighb),
            "iglb" => Ok(Method::Iglb),
            _ => Err(Error::Config(format!("unknown method {s:?}"))),
        }
    }
}

/// A fitted calibrator.
///
/// Patch-sequence methods (HB, IGHB, IGLB) carry patches and no
/// coefficients; parametric methods carry coefficients and no patches:
///
/// * LS: `[alpha, beta]` for `expit(alpha + beta * logit f)`
/// * GCUR: one shift per entry of `group_names`
/// * GCULR: `[theta_score, theta_group...]` for
///   `expit(theta_score * logit f + sum theta_g g)`
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedModel {
    pub grid: Grid,
    pub method: Method,
    pub patches: Vec<Patch>,
    pub coefficients: Vec<f64>,
    pub group_names: Vec<String>,
    pub clip: f64,
}

#[inline]
pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(scores: Vec<f64>, labels: Vec<f64>) -> RawDataset {
        let n = scores.len();
        RawDataset {
            scores,
            labels,
            group_names: vec!["ALL".into()],
            group_columns: vec![vec![true; n]],
        }
    }

    #[test]
    fn minimal_dataset_is_valid() {
        let d = validate_dataset(raw(vec![0.3], vec![1.0])).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.groups().names(), &["ALL".to_string()]);
    }

    #[test]
    fn score_out_of_range_reported_with_index() {
        let e = validate_dataset(raw(vec![1.2], vec![1.0])).unwrap_err();
        assert_eq!(e, vec![Violation::ScoreOutOfRange(0)]);
    }

    #[test]
    fn length_mismatch_reported() {
        let mut r = raw(vec![0.3, 0.4], vec![1.0]);
        r.group_columns = vec![vec![true; 2]];
        let e = validate_dataset(r).unwrap_err();
        assert!(matches!(e[0], Violation::LengthMismatch { what: "labels", .. }));
    }

    #[test]
    fn non_binary_label_and_duplicate_names() {
        let r = RawDataset {
            scores: vec![0.1, 0.2],
            labels: vec![0.0, 0.5],
            group_names: vec!["a".into(), "a".into()],
            group_columns: vec![vec![true, false], vec![false, true]],
        };
        let e = validate_dataset(r).unwrap_err();
        assert!(e.contains(&Violation::NonBinaryLabel(1)));
        assert!(e.contains(&Violation::DuplicateGroupName("a".into())));
    }

    #[test]
    fn all_column_prepended_when_missing() {
        let g = GroupMatrix::from_columns(3, vec!["math".into()], vec![vec![true, false, true]]).unwrap();
        assert_eq!(g.names(), &["ALL".to_string(), "math".to_string()]);
        assert!(g.column(0).iter().all(|&b| b));
        assert_eq!(g.column(1), &[true, false, true]);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let d = ScoredDataset::ungrouped(vec![0.5; 10], vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1]).unwrap();
        let (a, b) = split(&d, 0.8, 7).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        assert_eq!(split_indices(10, 0.8, 7).unwrap(), split_indices(10, 0.8, 7).unwrap());
    }

    #[test]
    fn split_of_single_row_is_degenerate() {
        assert!(matches!(split_indices(1, 0.5, 0), Err(Error::DegenerateSplit { .. })));
    }

    #[test]
    fn rounding_examples() {
        let g = Grid::new(10).unwrap();
        assert_eq!(g.round(0.24), 0.2);
        assert_eq!(g.round(0.25), 0.2);
        assert_eq!(g.round(0.26), 0.3);
        for m in 1..30 {
            let g = Grid::new(m).unwrap();
            assert_eq!(g.round(0.0), 0.0);
            assert_eq!(g.round(1.0), 1.0);
        }
    }

    #[test]
    fn grid_from_alpha() {
        assert_eq!(Grid::from_alpha(0.05).unwrap().m(), 20);
        assert_eq!(Grid::from_alpha(0.1).unwrap().m(), 10);
        assert_eq!(Grid::from_alpha(0.3).unwrap().m(), 4);
        assert!(Grid::from_alpha(0.0).is_err());
    }

    #[test]
    fn comparators_order_for_tie_breaks() {
        assert!(Comparator::Eq < Comparator::Le && Comparator::Le < Comparator::Ge);
    }
}
