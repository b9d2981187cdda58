//! Brute-force reference computations shared by the integration tests.
//! Nothing here calls into the metric or calibration code under test.
#![allow(dead_code)]

use std::collections::BTreeMap;

use multicalib::data::GroupMatrix;
use multicalib::ScoredDataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Nearest `i/m`, ties to the lower point.
pub fn nearest_level(s: f64, m: usize) -> usize {
    let lo = ((s * m as f64).floor() as usize).min(m);
    if lo == m {
        return m;
    }
    let d_lo = s - lo as f64 / m as f64;
    let d_hi = (lo + 1) as f64 / m as f64 - s;
    if d_hi < d_lo {
        lo + 1
    } else {
        lo
    }
}

fn members(ds: &ScoredDataset, g: usize) -> Vec<usize> {
    (0..ds.len()).filter(|&i| ds.groups().contains(i, g)).collect()
}

/// Sum over level sets of `P(level | g) * bias^2`, levels keyed by grid
/// cell (`Some(m)`) or by exact score (`None`).
pub fn gasce(ds: &ScoredDataset, g: usize, m: Option<usize>) -> f64 {
    let rows = members(ds, g);
    let mut cells: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for &i in &rows {
        let s = ds.scores()[i];
        let key = m.map_or(s.to_bits(), |m| nearest_level(s, m) as u64);
        let e = cells.entry(key).or_default();
        e.0 += 1.0;
        e.1 += ds.labels()[i] as f64 - s;
    }
    let n = rows.len() as f64;
    cells.values().map(|&(c, r)| (c / n) * (r / c) * (r / c)).sum()
}

/// `max_g P(g) gASCE(g)` over nonempty groups.
pub fn violation(ds: &ScoredDataset, m: usize) -> f64 {
    (0..ds.groups().len())
        .filter(|&g| ds.groups().count(g) > 0)
        .map(|g| ds.groups().count(g) as f64 / ds.len() as f64 * gasce(ds, g, Some(m)))
        .fold(0.0, f64::max)
}

pub fn mse(scores: &[f64], labels: &[u8]) -> f64 {
    scores.iter().zip(labels).map(|(s, &y)| (y as f64 - s).powi(2)).sum::<f64>() / scores.len() as f64
}

/// Mean of `label - prediction` within each nonempty group.
pub fn group_residuals(ds: &ScoredDataset, pred: &[f64]) -> Vec<f64> {
    (0..ds.groups().len())
        .filter(|&g| ds.groups().count(g) > 0)
        .map(|g| {
            let rows = members(ds, g);
            rows.iter().map(|&i| ds.labels()[i] as f64 - pred[i]).sum::<f64>() / rows.len() as f64
        })
        .collect()
}

/// Bias over `{level(score) cmp p, g}` with `cmp` one of "EQ", "LE", "GE".
pub fn set_bias(ds: &ScoredDataset, m: usize, level: usize, cmp: &str, g: usize) -> Option<f64> {
    let rows: Vec<usize> = members(ds, g)
        .into_iter()
        .filter(|&i| {
            let l = nearest_level(ds.scores()[i], m);
            match cmp {
                "EQ" => l == level,
                "LE" => l <= level,
                _ => l >= level,
            }
        })
        .collect();
    (!rows.is_empty()).then(|| rows.iter().map(|&i| ds.labels()[i] as f64 - ds.scores()[i]).sum::<f64>() / rows.len() as f64)
}

/// `k` groups with independent random rates; scores uniform on [lo, hi];
/// labels Bernoulli in the score plus a per-group offset.
pub fn random_grouped(rng: &mut ChaCha8Rng, n: usize, k: usize, lo: f64, hi: f64, offset: f64) -> ScoredDataset {
    let rates: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..0.6)).collect();
    let offsets: Vec<f64> = (0..k).map(|_| rng.gen_range(-offset..=offset)).collect();
    let mut cols = vec![Vec::with_capacity(n); k];
    let mut scores = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let s: f64 = rng.gen_range(lo..=hi);
        let mut p = s;
        for (j, col) in cols.iter_mut().enumerate() {
            let member = rng.gen::<f64>() < rates[j];
            col.push(member);
            if member {
                p += offsets[j];
            }
        }
        scores.push(s);
        labels.push((rng.gen::<f64>() < p.clamp(0.0, 1.0)) as u8);
    }
    let names = (0..k).map(|j| format!("g{j}")).collect();
    ScoredDataset::new(scores, labels, GroupMatrix::from_columns(n, names, cols).unwrap()).unwrap()
}
