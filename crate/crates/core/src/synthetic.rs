//! Synthetic data with known conditional probabilities.
//!
//! Each row has a *signature*: a latent tier index plus one bit per group.
//! The true probability `p*` is a function of the signature (additive in
//! logit space, or an explicit table), and the reported score is a
//! miscalibrated version of `p*`. Because the signature space is finite,
//! population metrics can be computed exactly by enumeration.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{expit, logit, Grid, GroupMatrix, ScoredDataset, ALL_GROUP};
use crate::error::{Error, Result};

/// Recorded in truth-table metadata so golden files are tied to a generator.
pub const RNG_NAME: &str = "ChaCha8Rng";

const PROB_CLIP: f64 = 1e-6;
const MAX_SIGNATURES: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupDef {
    /// Independent membership with probability `rate`.
    Bernoulli { name: String, rate: f64 },
    /// Exactly one of `names`, chosen with `weights`.
    Partition { names: Vec<String>, weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthEntry {
    pub tier: usize,
    /// One '0'/'1' per group, in declaration order.
    pub bits: String,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TruthModel {
    /// `p* = expit(tier_logits[t] + sum of effects of member groups)`.
    Additive {
        tier_logits: Vec<f64>,
        #[serde(default)]
        effects: BTreeMap<String, f64>,
    },
    Table {
        #[serde(default = "one")]
        tiers: usize,
        entries: Vec<TruthEntry>,
    },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Miscalibration {
    #[default]
    Identity,
    /// `expit(logit p* + sum of shifts of member groups)`.
    LogitShift { shift: BTreeMap<String, f64> },
    /// `expit(gamma * logit p*)`.
    LogitScale { gamma: f64 },
    /// `p* + sigma * N(0,1)`, truncated to [0,1].
    FixedNoise { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    /// Tier probabilities; uniform when omitted.
    #[serde(default)]
    pub tier_weights: Option<Vec<f64>>,
    #[serde(default)]
    pub groups: Vec<GroupDef>,
    pub truth: TruthModel,
    #[serde(default)]
    pub miscal: Miscalibration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub tier: usize,
    pub bits: String,
    /// Population probability of this signature.
    pub weight: f64,
    pub p_true: f64,
    /// Score for this signature; absent under noisy miscalibration.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthTable {
    pub rng: String,
    pub seed: u64,
    pub n: usize,
    pub group_names: Vec<String>,
    pub rows: Vec<TruthRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationMetrics {
    pub asce: f64,
    pub mse: f64,
    /// Group mass, keyed by group name (including ALL).
    pub mass: BTreeMap<String, f64>,
    pub gasce: BTreeMap<String, f64>,
    pub max_violation: f64,
}

/// Signature-level view of a validated spec.
struct Compiled {
    names: Vec<String>,
    tier_cdf: Vec<f64>,
    tier_w: Vec<f64>,
    /// Per block: first bit index and (for partitions) cumulative weights.
    blocks: Vec<Block>,
    truth: Truth,
    shift: Vec<f64>,
}

enum Block {
    Bernoulli { bit: usize, rate: f64 },
    Partition { first: usize, weights: Vec<f64>, cdf: Vec<f64> },
}

enum Truth {
    Additive { logits: Vec<f64>, effects: Vec<f64> },
    Table(HashMap<(usize, u64), f64>),
}

fn bits_string(bits: u64, k: usize) -> String {
    (0..k).map(|j| if bits >> j & 1 == 1 { '1' } else { '0' }).collect()
}

fn parse_bits(s: &str, k: usize) -> Result<u64> {
    if s.len() != k {
        return Err(Error::Config(format!("signature {s:?} must have {k} bits")));
    }
    s.chars().enumerate().try_fold(0u64, |acc, (j, c)| match c {
        '0' => Ok(acc),
        '1' => Ok(acc | 1 << j),
        _ => Err(Error::Config(format!("signature {s:?} must be made of 0/1"))),
    })
}

fn cdf(weights: &[f64], what: &str) -> Result<Vec<f64>> {
    if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::Config(format!("{what} weights must be finite and nonnegative")));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Config(format!("{what} weights must not all be zero")));
    }
    let mut acc = 0.0;
    Ok(weights
        .iter()
        .map(|w| {
            acc += w / total;
            acc
        })
        .collect())
}

fn draw(cdf: &[f64], u: f64) -> usize {
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

fn named_vector(map: &BTreeMap<String, f64>, names: &[String], what: &str) -> Result<Vec<f64>> {
    let mut out = vec![0.0; names.len()];
    for (name, &v) in map {
        let j = names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Config(format!("{what} names unknown group {name:?}")))?;
        if !v.is_finite() {
            return Err(Error::Config(format!("{what} for {name:?} is not finite")));
        }
        out[j] = v;
    }
    Ok(out)
}

impl SyntheticSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("synthetic spec: {e}")))
    }

    pub fn group_names(&self) -> Vec<String> {
        self.groups
            .iter()
            .flat_map(|g| match g {
                GroupDef::Bernoulli { name, .. } => vec![name.clone()],
                GroupDef::Partition { names, .. } => names.clone(),
            })
            .collect()
    }

    pub fn tiers(&self) -> usize {
        match &self.truth {
            TruthModel::Additive { tier_logits, .. } => tier_logits.len(),
            TruthModel::Table { tiers, .. } => *tiers,
        }
    }

    /// The standard benchmark: 8 overlapping groups whose scores are
    /// shifted in logit space by amounts spread over [-1.5, 1.5]. Groups
    /// with larger shifts are more common, so the scores are overconfident
    /// overall and the population violation (about 0.085 on the m=20
    /// grid) exceeds alpha=0.05.
    pub fn benchmark() -> Self {
        let k = 8;
        let names: Vec<String> = (0..k).map(|j| format!("g{j}")).collect();
        let groups = names
            .iter()
            .enumerate()
            .map(|(j, name)| GroupDef::Bernoulli { name: name.clone(), rate: 0.15 + 0.1 * j as f64 })
            .collect();
        let tier_logits = (0..21).map(|t| -2.5 + 0.25 * t as f64).collect();
        let effects = names.iter().enumerate().map(|(j, n)| (n.clone(), 0.6 * ((j % 3) as f64 - 1.0))).collect();
        let shift = names.iter().enumerate().map(|(j, n)| (n.clone(), -1.5 + 3.0 * j as f64 / 7.0)).collect();
        SyntheticSpec {
            n: 50_000,
            tier_weights: None,
            groups,
            truth: TruthModel::Additive { tier_logits, effects },
            miscal: Miscalibration::LogitShift { shift },
        }
    }

    fn compile(&self) -> Result<Compiled> {
        let names = self.group_names();
        let k = names.len();
        if k > 60 {
            return Err(Error::Config(format!("at most 60 groups are supported, got {k}")));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if name.is_empty() || name == ALL_GROUP || !seen.insert(name.as_str()) {
                return Err(Error::Config(format!("invalid or duplicate group name {name:?}")));
            }
        }
        let tiers = self.tiers();
        if tiers == 0 {
            return Err(Error::Config("at least one tier is required".into()));
        }
        let tier_w = match &self.tier_weights {
            Some(w) if w.len() != tiers => {
                return Err(Error::Config(format!("tier_weights has {} entries for {tiers} tiers", w.len())))
            }
            Some(w) => w.clone(),
            None => vec![1.0; tiers],
        };
        let tier_cdf = cdf(&tier_w, "tier")?;
        let total: f64 = tier_w.iter().sum();
        let tier_w = tier_w.iter().map(|w| w / total).collect();

        let mut blocks = Vec::new();
        let mut bit = 0;
        for g in &self.groups {
            match g {
                GroupDef::Bernoulli { rate, .. } => {
                    if !(0.0..=1.0).contains(rate) {
                        return Err(Error::Config(format!("membership rate {rate} outside [0,1]")));
                    }
                    blocks.push(Block::Bernoulli { bit, rate: *rate });
                    bit += 1;
                }
                GroupDef::Partition { names, weights } => {
                    if names.is_empty() || names.len() != weights.len() {
                        return Err(Error::Config("partition needs one weight per name".into()));
                    }
                    let c = cdf(weights, "partition")?;
                    let total: f64 = weights.iter().sum();
                    blocks.push(Block::Partition {
                        first: bit,
                        weights: weights.iter().map(|w| w / total).collect(),
                        cdf: c,
                    });
                    bit += names.len();
                }
            }
        }

        let truth = match &self.truth {
            TruthModel::Additive { tier_logits, effects } => {
                if tier_logits.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config("tier logits must be finite".into()));
                }
                Truth::Additive { logits: tier_logits.clone(), effects: named_vector(effects, &names, "truth effect")? }
            }
            TruthModel::Table { entries, .. } => {
                let mut map = HashMap::new();
                for e in entries {
                    if e.tier >= tiers || !(0.0..=1.0).contains(&e.p) {
                        return Err(Error::Config(format!("bad truth entry {e:?}")));
                    }
                    if map.insert((e.tier, parse_bits(&e.bits, k)?), e.p).is_some() {
                        return Err(Error::Config(format!("duplicate truth entry for tier {} bits {}", e.tier, e.bits)));
                    }
                }
                Truth::Table(map)
            }
        };
        let shift = match &self.miscal {
            Miscalibration::LogitShift { shift } => named_vector(shift, &names, "logit shift")?,
            Miscalibration::LogitScale { gamma } if !gamma.is_finite() => {
                return Err(Error::Config("gamma must be finite".into()))
            }
            Miscalibration::FixedNoise { sigma } if !(sigma.is_finite() && *sigma >= 0.0) => {
                return Err(Error::Config("sigma must be finite and nonnegative".into()))
            }
            _ => Vec::new(),
        };
        Ok(Compiled { names, tier_cdf, tier_w, blocks, truth, shift })
    }

    /// Validates the spec without generating anything.
    pub fn validate(&self) -> Result<()> {
        self.compile().map(|_| ())
    }
}

impl Compiled {
    fn p_true(&self, tier: usize, bits: u64) -> Result<f64> {
        match &self.truth {
            Truth::Additive { logits, effects } => {
                let u = logits[tier] + effects.iter().enumerate().filter(|(j, _)| bits >> j & 1 == 1).map(|(_, e)| e).sum::<f64>();
                Ok(expit(u))
            }
            Truth::Table(map) => map.get(&(tier, bits)).copied().ok_or_else(|| {
                Error::UnreachableSignature(format!("tier {tier} bits {}", bits_string(bits, self.names.len())))
            }),
        }
    }

    /// Deterministic part of the miscalibration; `None` for noise.
    fn score(&self, p: f64, bits: u64, miscal: &Miscalibration) -> Option<f64> {
        let z = || logit(p.clamp(PROB_CLIP, 1.0 - PROB_CLIP));
        match miscal {
            Miscalibration::Identity => Some(p),
            Miscalibration::LogitShift { .. } => {
                let s: f64 = self.shift.iter().enumerate().filter(|(j, _)| bits >> j & 1 == 1).map(|(_, d)| d).sum();
                Some(expit(z() + s))
            }
            Miscalibration::LogitScale { gamma } => Some(expit(gamma * z())),
            Miscalibration::FixedNoise { .. } => None,
        }
    }

    /// All signatures with positive probability, with that probability.
    fn signatures(&self) -> Result<Vec<(usize, u64, f64)>> {
        let mut parts: Vec<(u64, f64)> = vec![(0, 1.0)];
        for b in &self.blocks {
            let opts: Vec<(u64, f64)> = match b {
                Block::Bernoulli { bit, rate } => vec![(0, 1.0 - rate), (1 << bit, *rate)],
                Block::Partition { first, weights, .. } => {
                    weights.iter().enumerate().map(|(i, &w)| (1u64 << (first + i), w)).collect()
                }
            };
            let opts: Vec<_> = opts.into_iter().filter(|o| o.1 > 0.0).collect();
            if parts.len() * opts.len() * self.tier_w.len() > MAX_SIGNATURES {
                return Err(Error::Config(format!("more than {MAX_SIGNATURES} reachable signatures")));
            }
            parts = parts.iter().flat_map(|&(b0, w0)| opts.iter().map(move |&(b1, w1)| (b0 | b1, w0 * w1))).collect();
        }
        let mut out = Vec::new();
        for (t, &wt) in self.tier_w.iter().enumerate().filter(|(_, w)| **w > 0.0) {
            for &(bits, w) in &parts {
                out.push((t, bits, wt * w));
            }
        }
        out.sort_by_key(|&(t, b, _)| (t, b));
        Ok(out)
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; 1 - u keeps the log argument in (0, 1]
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Samples `spec.n` rows. Per row the draws are, in order: tier, one per
/// group block, a normal deviate (noise only), the label.
pub fn generate(spec: &SyntheticSpec, seed: u64) -> Result<(ScoredDataset, TruthTable)> {
    if spec.n == 0 {
        return Err(Error::EmptyDataset);
    }
    let c = spec.compile()?;
    let k = c.names.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scores = Vec::with_capacity(spec.n);
    let mut labels = Vec::with_capacity(spec.n);
    let mut columns = vec![Vec::with_capacity(spec.n); k];
    for _ in 0..spec.n {
        let tier = draw(&c.tier_cdf, rng.gen());
        let mut bits = 0u64;
        for b in &c.blocks {
            let u: f64 = rng.gen();
            match b {
                Block::Bernoulli { bit, rate } => {
                    if u < *rate {
                        bits |= 1 << bit;
                    }
                }
                Block::Partition { first, cdf, .. } => bits |= 1 << (first + draw(cdf, u)),
            }
        }
        let p = c.p_true(tier, bits)?;
        let score = match (&spec.miscal, c.score(p, bits, &spec.miscal)) {
            (_, Some(s)) => s,
            (Miscalibration::FixedNoise { sigma }, None) => (p + sigma * standard_normal(&mut rng)).clamp(0.0, 1.0),
            _ => unreachable!("only noise lacks a closed-form score"),
        };
        let y = (rng.gen::<f64>() < p) as u8;
        scores.push(score);
        labels.push(y);
        for (j, col) in columns.iter_mut().enumerate() {
            col.push(bits >> j & 1 == 1);
        }
    }
    let groups = GroupMatrix::from_columns(spec.n, c.names.clone(), columns)?;
    let data = ScoredDataset::new(scores, labels, groups)?;
    let rows = c
        .signatures()?
        .into_iter()
        .map(|(tier, bits, weight)| {
            let p_true = c.p_true(tier, bits)?;
            Ok(TruthRow { tier, bits: bits_string(bits, k), weight, p_true, score: c.score(p_true, bits, &spec.miscal) })
        })
        .collect::<Result<Vec<_>>>()?;
    let truth = TruthTable { rng: RNG_NAME.into(), seed, n: spec.n, group_names: c.names, rows };
    Ok((data, truth))
}

/// Exact population ASCE, per-group gASCE and MSE of the miscalibrated
/// score. Level sets are keyed by the exact score, or by grid cell when
/// `grid` is given (matching the empirical metrics).
pub fn population_metrics(spec: &SyntheticSpec, grid: Option<Grid>) -> Result<PopulationMetrics> {
    if matches!(spec.miscal, Miscalibration::FixedNoise { .. }) {
        return Err(Error::Config("noisy miscalibration has no enumerable score distribution".into()));
    }
    let c = spec.compile()?;
    let sigs = c.signatures()?;
    let k = c.names.len();
    // (group index or ALL=None) -> level key -> (mass, mass * (p - f))
    let mut level: Vec<BTreeMap<u64, (f64, f64)>> = vec![BTreeMap::new(); k + 1];
    let mut mse = 0.0;
    for &(tier, bits, w) in &sigs {
        let p = c.p_true(tier, bits)?;
        let f = c.score(p, bits, &spec.miscal).expect("closed-form score");
        mse += w * (p * (1.0 - p) + (p - f) * (p - f));
        let key = match grid {
            Some(g) => g.round_index(f) as u64,
            None => (f + 0.0).to_bits(),
        };
        for (slot, member) in level.iter_mut().zip(std::iter::once(true).chain((0..k).map(|j| bits >> j & 1 == 1))) {
            if member {
                let e = slot.entry(key).or_insert((0.0, 0.0));
                e.0 += w;
                e.1 += w * (p - f);
            }
        }
    }
    let mut mass = BTreeMap::new();
    let mut gasce = BTreeMap::new();
    let mut max_violation = 0.0f64;
    let mut asce = 0.0;
    for (idx, slot) in level.iter().enumerate() {
        let name = if idx == 0 { ALL_GROUP.to_string() } else { c.names[idx - 1].clone() };
        let pg: f64 = slot.values().map(|v| v.0).sum();
        mass.insert(name.clone(), pg);
        if pg <= 0.0 {
            continue;
        }
        // sum over levels of P(level | g) * bias^2
        let g: f64 = slot.values().map(|&(m, r)| (m / pg) * (r / m) * (r / m)).sum();
        if idx == 0 {
            asce = g;
        }
        max_violation = max_violation.max(pg * g);
        gasce.insert(name, g);
    }
    Ok(PopulationMetrics { asce, mse, mass, gasce, max_violation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics;

    fn single(p: f64, miscal: Miscalibration) -> SyntheticSpec {
        SyntheticSpec {
            n: 100,
            tier_weights: None,
            groups: vec![],
            truth: TruthModel::Table { tiers: 1, entries: vec![TruthEntry { tier: 0, bits: String::new(), p }] },
            miscal,
        }
    }

    #[test]
    fn constant_half_score_against_point_seven() {
        let spec = single(0.7, Miscalibration::LogitScale { gamma: 0.0 });
        let pm = population_metrics(&spec, None).unwrap();
        assert!((pm.mse - 0.25).abs() < 1e-15);
        assert!((pm.asce - 0.04).abs() < 1e-15);
    }

    #[test]
    fn identity_is_calibrated() {
        let pm = population_metrics(&SyntheticSpec { miscal: Miscalibration::Identity, ..SyntheticSpec::benchmark() }, None).unwrap();
        assert!(pm.asce < 1e-30 && pm.max_violation < 1e-30);
    }

    #[test]
    fn zero_rows_rejected() {
        assert!(matches!(generate(&SyntheticSpec { n: 0, ..single(0.5, Miscalibration::Identity) }, 1), Err(Error::EmptyDataset)));
    }

    #[test]
    fn missing_table_entry_is_reported() {
        let spec = SyntheticSpec {
            groups: vec![GroupDef::Bernoulli { name: "a".into(), rate: 0.5 }],
            truth: TruthModel::Table { tiers: 1, entries: vec![TruthEntry { tier: 0, bits: "0".into(), p: 0.3 }] },
            ..single(0.5, Miscalibration::Identity)
        };
        assert!(matches!(generate(&spec, 3), Err(Error::UnreachableSignature(_))));
    }

    #[test]
    fn same_seed_same_rows() {
        let spec = SyntheticSpec { n: 2000, ..SyntheticSpec::benchmark() };
        let (a, ta) = generate(&spec, 11).unwrap();
        let (b, tb) = generate(&spec, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let (c, _) = generate(&spec, 12).unwrap();
        assert_ne!(a.scores(), c.scores());
    }

    #[test]
    fn partition_assigns_exactly_one() {
        let spec = SyntheticSpec {
            n: 500,
            groups: vec![GroupDef::Partition { names: vec!["x".into(), "y".into(), "z".into()], weights: vec![1.0, 2.0, 1.0] }],
            truth: TruthModel::Additive { tier_logits: vec![0.0], effects: BTreeMap::new() },
            ..single(0.5, Miscalibration::Identity)
        };
        let (d, truth) = generate(&spec, 5).unwrap();
        for i in 0..d.len() {
            assert_eq!((1..4).filter(|&k| d.groups().contains(i, k)).count(), 1);
        }
        assert_eq!(truth.rows.len(), 3);
        assert!((truth.rows.iter().map(|r| r.weight).sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empirical_metrics_approach_population() {
        let spec = SyntheticSpec { n: 100_000, ..SyntheticSpec::benchmark() };
        let grid = Grid::new(20).unwrap();
        let pm = population_metrics(&spec, Some(grid)).unwrap();
        let (d, _) = generate(&spec, 21).unwrap();
        // Var of a squared error is at most 1/4
        let se = (0.25f64 / d.len() as f64).sqrt();
        assert!((metrics::mse(&d) - pm.mse).abs() < 4.0 * se, "{} vs {}", metrics::mse(&d), pm.mse);
        assert!((metrics::asce(&d, grid) - pm.asce).abs() < 0.002);
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let spec = SyntheticSpec::benchmark();
        let text = toml::to_string(&spec).unwrap();
        assert_eq!(SyntheticSpec::from_toml(&text).unwrap(), spec);
    }
}
