//! Building group membership matrices from annotations, feature clusters
//! or threshold rules.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{GroupMatrix, ALL_GROUP};
use crate::error::{Error, Result};

const KMEANS_MAX_ITER: usize = 100;
const KMEANS_REL_TOL: f64 = 1e-6;

/// Row-major n x d table of finite features.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    names: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut seen = HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::Config(format!("duplicate feature column {n:?}")));
            }
        }
        for r in &rows {
            if r.len() != names.len() {
                return Err(Error::Config(format!(
                    "feature row has {} values, expected {}",
                    r.len(),
                    names.len()
                )));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteInput);
            }
        }
        Ok(FeatureTable { names, rows })
    }

    /// Single-column table, handy for score-based rules.
    pub fn single(name: &str, values: &[f64]) -> Result<Self> {
        Self::new(vec![name.to_string()], values.iter().map(|&v| vec![v]).collect())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }
}

/// Wraps externally produced yes/no annotations (one column per question).
/// Empty columns are kept and logged.
pub fn groups_from_annotations(columns: Vec<Vec<bool>>, names: Vec<String>) -> Result<GroupMatrix> {
    if let Some(n) = names.iter().find(|n| n.as_str() == ALL_GROUP) {
        return Err(Error::NameCollision(n.clone()));
    }
    let rows = columns.first().map_or(0, Vec::len);
    let g = GroupMatrix::from_columns(rows, names, columns)?;
    warn_empty(&g);
    Ok(g)
}

fn warn_empty(g: &GroupMatrix) {
    for k in g.empty_groups() {
        log::warn!("group {:?} has no members", g.name(k));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleOp {
    Lt,
    Ge,
}

/// `column op cutoff` defines membership of group `name`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRule {
    pub column: String,
    pub op: RuleOp,
    pub cutoff: f64,
    pub name: String,
}

impl std::str::FromStr for ThresholdRule {
    type Err = Error;

    /// Parses `name=column>=cutoff` or `name=column<cutoff`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse rule {s:?}; expected name=column>=cutoff or name=column<cutoff"));
        let (name, expr) = s.split_once('=').ok_or_else(bad)?;
        let (column, op, cutoff) = if let Some((c, v)) = expr.split_once(">=") {
            (c, RuleOp::Ge, v)
        } else if let Some((c, v)) = expr.split_once('<') {
            (c, RuleOp::Lt, v)
        } else {
            return Err(bad());
        };
        let cutoff: f64 = cutoff.trim().parse().map_err(|_| bad())?;
        Ok(ThresholdRule {
            column: column.trim().to_string(),
            op,
            cutoff,
            name: name.trim().to_string(),
        })
    }
}

/// One group per rule; rules may overlap.
pub fn groups_from_thresholds(features: &FeatureTable, rules: &[ThresholdRule]) -> Result<GroupMatrix> {
    let mut names = Vec::with_capacity(rules.len());
    let mut columns = Vec::with_capacity(rules.len());
    for rule in rules {
        if rule.name == ALL_GROUP {
            return Err(Error::NameCollision(rule.name.clone()));
        }
        let j = features.column_index(&rule.column)?;
        let col = (0..features.len())
            .map(|i| {
                let v = features.row(i)[j];
                match rule.op {
                    RuleOp::Lt => v < rule.cutoff,
                    RuleOp::Ge => v >= rule.cutoff,
                }
            })
            .collect();
        names.push(rule.name.clone());
        columns.push(col);
    }
    let g = GroupMatrix::from_columns(features.len(), names, columns)?;
    warn_empty(&g);
    Ok(g)
}

#[derive(Debug, Clone)]
pub struct KMeans {
    pub assignments: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub inertia: f64,
    pub iterations: usize,
    /// Clusters that ended with no members.
    pub empty_clusters: Vec<usize>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(point, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Lloyd's algorithm with k-means++ seeding.
pub fn kmeans(features: &FeatureTable, k: usize, seed: u64) -> Result<KMeans> {
    let n = features.len();
    if k < 2 && n > 0 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    if n < k {
        return Err(Error::TooFewSamples { n, k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centers: Vec<Vec<f64>> = vec![features.row(rng.gen_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(features.row(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // rounding can leave target just above the final partial sum
            chosen.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            rng.gen_range(0..n)
        };
        let c = features.row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(features.row(i), &c));
        }
        centers.push(c);
    }

    let dim = features.dim();
    let mut assignments = vec![0usize; n];
    let mut inertia = f64::INFINITY;
    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITER {
        iterations += 1;
        let mut new_inertia = 0.0;
        for (i, a) in assignments.iter_mut().enumerate() {
            let (c, d) = nearest(features.row(i), &centers);
            *a = c;
            new_inertia += d;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(features.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let converged = inertia.is_finite()
            && ((inertia - new_inertia).abs() <= KMEANS_REL_TOL * inertia.max(f64::MIN_POSITIVE) || new_inertia == 0.0);
        inertia = new_inertia;
        if converged || inertia == 0.0 {
            break;
        }
    }
    // final assignment against the updated centers
    inertia = 0.0;
    for (i, a) in assignments.iter_mut().enumerate() {
        let (c, d) = nearest(features.row(i), &centers);
        *a = c;
        inertia += d;
    }
    let mut counts = vec![0usize; k];
    for &a in &assignments {
        counts[a] += 1;
    }
    let empty_clusters = (0..k).filter(|&c| counts[c] == 0).collect();
    Ok(KMeans { assignments, centers, inertia, iterations, empty_clusters })
}

/// Hard k-means clustering turned into one group column per cluster,
/// named `cluster_0 .. cluster_{k-1}`.
pub fn cluster_groups(features: &FeatureTable, k: usize, seed: u64) -> Result<GroupMatrix> {
    let km = kmeans(features, k, seed)?;
    let n = features.len();
    let names = (0..k).map(|c| format!("cluster_{c}")).collect();
    let columns = (0..k).map(|c| (0..n).map(|i| km.assignments[i] == c).collect()).collect();
    let g = GroupMatrix::from_columns(n, names, columns)?;
    warn_empty(&g);
    Ok(g)
}
