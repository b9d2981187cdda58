//! File formats: dataset, group and feature CSVs, model JSON, score-input
//! CSVs and run manifests. Floats are written with Rust's shortest
//! round-trip formatting, so rereading a file reproduces every bit.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{
    validate_dataset, BinDescriptor, CalibratedModel, Comparator, Grid, GroupMatrix, Method, Patch, RawDataset,
    ScoredDataset, Transform, ALL_GROUP,
};
use crate::error::{Error, Result};
use crate::grouping::FeatureTable;
use crate::metrics::CalibrationReport;
use crate::scoring::{inverse_perplexity_score, multiple_choice_score, true_false_score, SequenceLogProbs};

pub const GROUP_PREFIX: &str = "g:";
pub const MODEL_VERSION: u32 = 1;

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes())
}

fn line_of(rec: &csv::StringRecord) -> usize {
    rec.position().map_or(0, |p| p.line() as usize)
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    parse_err(line, e.to_string())
}

fn headers(rdr: &mut csv::Reader<&[u8]>) -> Result<Vec<String>> {
    Ok(rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect())
}

fn parse_f64(cell: &str, line: usize, what: &str) -> Result<f64> {
    cell.parse::<f64>().map_err(|_| parse_err(line, format!("{what} {cell:?} is not a number")))
}

fn parse_bit(cell: &str, line: usize, col: &str) -> Result<bool> {
    match cell {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(parse_err(line, format!("column {col:?} must be 0 or 1, got {cell:?}"))),
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Parses `score,label,g:<name>...`. Structural problems are parse errors
/// with a line number; value problems (range, label) are collected into
/// one `InvalidDataset`.
pub fn parse_dataset(text: &str) -> Result<ScoredDataset> {
    let mut rdr = reader(text);
    let head = headers(&mut rdr)?;
    if head.len() < 2 || head[0] != "score" || head[1] != "label" {
        return Err(parse_err(1, "header must start with score,label"));
    }
    let mut names = Vec::new();
    for h in &head[2..] {
        let name = h
            .strip_prefix(GROUP_PREFIX)
            .ok_or_else(|| parse_err(1, format!("column {h:?} must be named g:<group>")))?;
        names.push(name.to_string());
    }
    let mut raw = RawDataset { group_names: names.clone(), group_columns: vec![Vec::new(); names.len()], ..Default::default() };
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = line_of(&rec);
        raw.scores.push(parse_f64(&rec[0], line, "score")?);
        raw.labels.push(parse_f64(&rec[1], line, "label")?);
        for (j, col) in raw.group_columns.iter_mut().enumerate() {
            col.push(parse_bit(&rec[2 + j], line, &head[2 + j])?);
        }
    }
    validate_dataset(raw).map_err(Error::InvalidDataset)
}

pub fn read_dataset(path: &Path) -> Result<ScoredDataset> {
    parse_dataset(&fs::read_to_string(path)?)
}

/// Writes a dataset; the implicit `ALL` column is omitted.
pub fn format_dataset(ds: &ScoredDataset) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let g = ds.groups();
    let mut head = vec!["score".to_string(), "label".to_string()];
    head.extend(g.names().iter().skip(1).map(|n| format!("{GROUP_PREFIX}{n}")));
    w.write_record(&head)?;
    for i in 0..ds.len() {
        let mut rec = vec![ds.scores()[i].to_string(), ds.labels()[i].to_string()];
        rec.extend((1..g.len()).map(|k| if g.contains(i, k) { "1" } else { "0" }.to_string()));
        w.write_record(&rec)?;
    }
    finish(w)
}

/// Group-only CSV: one 0/1 column per group, headers with or without the
/// `g:` prefix.
pub fn parse_groups(text: &str) -> Result<GroupMatrix> {
    let mut rdr = reader(text);
    let head = headers(&mut rdr)?;
    let names: Vec<String> = head.iter().map(|h| h.strip_prefix(GROUP_PREFIX).unwrap_or(h).to_string()).collect();
    let mut cols = vec![Vec::new(); names.len()];
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = line_of(&rec);
        for (j, col) in cols.iter_mut().enumerate() {
            col.push(parse_bit(&rec[j], line, &head[j])?);
        }
        rows += 1;
    }
    GroupMatrix::from_columns(rows, names, cols)
}

pub fn format_groups(g: &GroupMatrix) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(g.names().iter().skip(1).map(|n| format!("{GROUP_PREFIX}{n}")))?;
    for i in 0..g.rows() {
        w.write_record((1..g.len()).map(|k| if g.contains(i, k) { "1" } else { "0" }))?;
    }
    finish(w)
}

/// Adds the columns of a group CSV to a dataset.
pub fn merge_groups(ds: &ScoredDataset, extra: &GroupMatrix) -> Result<ScoredDataset> {
    ds.with_groups(ds.groups().merge(extra)?)
}

/// Numeric feature table with a header row.
pub fn parse_features(text: &str) -> Result<FeatureTable> {
    let mut rdr = reader(text);
    let names = headers(&mut rdr)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = line_of(&rec);
        let row = names.iter().enumerate().map(|(j, n)| parse_f64(&rec[j], line, n)).collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    FeatureTable::new(names, rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// Columns `logit_true,logit_false`.
    TrueFalse,
    /// Columns `prompt_len,logprobs`; logprobs space-separated over the
    /// whole sequence.
    Perplexity,
    /// Column `logits`: space-separated answer-choice logits.
    MultipleChoice,
}

impl std::str::FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "true_false" => Ok(ScoreKind::TrueFalse),
            "perplexity" => Ok(ScoreKind::Perplexity),
            "multiple_choice" => Ok(ScoreKind::MultipleChoice),
            _ => Err(Error::Config(format!("unknown score kind {s:?}"))),
        }
    }
}

fn column(head: &[String], name: &str) -> Result<usize> {
    head.iter().position(|h| h == name).ok_or_else(|| parse_err(1, format!("missing column {name:?}")))
}

fn parse_list(cell: &str, line: usize, what: &str) -> Result<Vec<f64>> {
    cell.split_whitespace().map(|v| parse_f64(v, line, what)).collect()
}

/// Turns a CSV of model outputs into `score` (plus `label` and any `g:`
/// columns, passed through unchanged).
pub fn score_csv(text: &str, kind: ScoreKind) -> Result<String> {
    let mut rdr = reader(text);
    let head = headers(&mut rdr)?;
    let passthrough: Vec<usize> =
        head.iter().enumerate().filter(|(_, h)| *h == "label" || h.starts_with(GROUP_PREFIX)).map(|(j, _)| j).collect();
    let inputs: Vec<usize> = match kind {
        ScoreKind::TrueFalse => vec![column(&head, "logit_true")?, column(&head, "logit_false")?],
        ScoreKind::Perplexity => vec![column(&head, "prompt_len")?, column(&head, "logprobs")?],
        ScoreKind::MultipleChoice => vec![column(&head, "logits")?],
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut out_head = vec!["score".to_string()];
    out_head.extend(passthrough.iter().map(|&j| head[j].clone()));
    w.write_record(&out_head)?;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = line_of(&rec);
        let at_line = |e: Error| match e {
            Error::Parse { .. } => e,
            other => parse_err(line, other.to_string()),
        };
        let score = match kind {
            ScoreKind::TrueFalse => true_false_score(
                parse_f64(&rec[inputs[0]], line, "logit_true")?,
                parse_f64(&rec[inputs[1]], line, "logit_false")?,
            ),
            ScoreKind::Perplexity => {
                let prompt_len = rec[inputs[0]]
                    .parse::<usize>()
                    .map_err(|_| parse_err(line, format!("prompt_len {:?} is not a count", &rec[inputs[0]])))?;
                SequenceLogProbs::new(parse_list(&rec[inputs[1]], line, "logprob")?, prompt_len)
                    .map(|s| inverse_perplexity_score(&s))
            }
            ScoreKind::MultipleChoice => multiple_choice_score(&parse_list(&rec[inputs[0]], line, "logit")?),
        }
        .map_err(at_line)?;
        let mut out = vec![score.to_string()];
        out.extend(passthrough.iter().map(|&j| rec[j].to_string()));
        w.write_record(&out)?;
    }
    finish(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum TransformRecord {
    Constant { delta: f64 },
    LogitLinear { alpha: f64, beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PatchRecord {
    p: f64,
    cmp: Comparator,
    group: String,
    #[serde(flatten)]
    transform: TransformRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    method: Method,
    m: usize,
    patches: Vec<PatchRecord>,
    coefficients: Vec<f64>,
    group_names: Vec<String>,
    clip: f64,
}

pub fn model_to_json(model: &CalibratedModel) -> Result<String> {
    let patches = model
        .patches
        .iter()
        .map(|p| PatchRecord {
            p: model.grid.value(p.bin.level),
            cmp: p.bin.comparator,
            group: model.group_names[p.bin.group].clone(),
            transform: match p.transform {
                Transform::ConstantShift { delta } => TransformRecord::Constant { delta },
                Transform::LogitLinear { alpha, beta } => TransformRecord::LogitLinear { alpha, beta },
            },
        })
        .collect();
    let file = ModelFile {
        version: MODEL_VERSION,
        method: model.method,
        m: model.grid.m(),
        patches,
        coefficients: model.coefficients.clone(),
        group_names: model.group_names.clone(),
        clip: model.clip,
    };
    Ok(serde_json::to_string_pretty(&file)? + "\n")
}

fn bad_model(msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("model file: {msg}"))
}

pub fn model_from_json(text: &str) -> Result<CalibratedModel> {
    let file: ModelFile = serde_json::from_str(text)?;
    if file.version != MODEL_VERSION {
        return Err(bad_model(format!("unsupported version {}", file.version)));
    }
    let grid = Grid::new(file.m)?;
    if file.group_names.first().map(String::as_str) != Some(ALL_GROUP) {
        return Err(bad_model("group_names must start with ALL"));
    }
    if !(file.clip > 0.0 && file.clip < 0.5) {
        return Err(bad_model(format!("clip {} outside (0, 0.5)", file.clip)));
    }
    let expected = match file.method {
        Method::Ls => Some(2),
        Method::Gcur => Some(file.group_names.len()),
        Method::Gculr => Some(1 + file.group_names.len()),
        _ => None,
    };
    match expected {
        Some(k) if file.coefficients.len() != k || !file.patches.is_empty() => {
            return Err(bad_model(format!("{} needs {k} coefficients and no patches", file.method)));
        }
        None if !file.coefficients.is_empty() => return Err(bad_model(format!("{} takes no coefficients", file.method))),
        _ => {}
    }
    if file.coefficients.iter().any(|c| !c.is_finite()) {
        return Err(bad_model("non-finite coefficient"));
    }
    let patches = file
        .patches
        .iter()
        .map(|r| {
            let level = grid.index_of(r.p).ok_or_else(|| bad_model(format!("patch level {} is not on the m={} grid", r.p, file.m)))?;
            let group = file
                .group_names
                .iter()
                .position(|g| *g == r.group)
                .ok_or_else(|| bad_model(format!("patch names unknown group {:?}", r.group)))?;
            let transform = match r.transform {
                TransformRecord::Constant { delta } => Transform::ConstantShift { delta },
                TransformRecord::LogitLinear { alpha, beta } => Transform::LogitLinear { alpha, beta },
            };
            Ok(Patch { bin: BinDescriptor { level, comparator: r.cmp, group }, transform })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CalibratedModel { grid, method: file.method, patches, coefficients: file.coefficients, group_names: file.group_names, clip: file.clip })
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// `group,mass,mean_score,mean_label,gasce,violation`, one row per group in
/// column order.
pub fn format_pergroup(report: &CalibrationReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["group", "mass", "mean_score", "mean_label", "gasce", "violation"])?;
    for name in &report.group_order {
        let g = &report.per_group[name];
        w.write_record([
            name.clone(),
            g.mass.to_string(),
            g.mean_score.to_string(),
            g.mean_label.to_string(),
            g.gasce.to_string(),
            g.violation.to_string(),
        ])?;
    }
    finish(w)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance of one CLI run. Wall-clock data lives here and only here, so
/// every other output is byte-reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub seed: Option<u64>,
    pub started_unix_ms: u128,
    pub elapsed_ms: u128,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        let started = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_millis());
        RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed,
            started_unix_ms: started,
            elapsed_ms: 0,
        }
    }

    pub fn add_input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(InputDigest { path: path.display().to_string(), sha256: sha256_hex(bytes) });
    }
}

/// `<out>.manifest.json`, next to the primary output.
pub fn manifest_path(primary: &Path) -> PathBuf {
    let mut s = primary.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DEFAULT_CLIP;

    #[test]
    fn dataset_round_trip_is_exact() {
        let text = "score,label,g:a,g:b\n0.1,1,1,0\n0.30000000000000004,0,0,1\n1,1,1,1\n";
        let ds = parse_dataset(text).unwrap();
        assert_eq!(ds.groups().names(), ["ALL", "a", "b"]);
        assert_eq!(format_dataset(&ds).unwrap(), text);
    }

    #[test]
    fn malformed_row_reports_its_line() {
        let err = parse_dataset("score,label\n0.5,1\nabc,0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_dataset("score,label,g:a\n0.5,1,2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(matches!(parse_dataset("label,score\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn value_errors_are_collected() {
        let Err(Error::InvalidDataset(v)) = parse_dataset("score,label\n1.5,1\n0.5,2\n") else { panic!() };
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn model_round_trip() {
        let model = CalibratedModel {
            grid: Grid::new(10).unwrap(),
            method: Method::Iglb,
            patches: vec![
                Patch {
                    bin: BinDescriptor { level: 3, comparator: Comparator::Le, group: 1 },
                    transform: Transform::LogitLinear { alpha: 0.1 + 0.2, beta: 1.0 / 3.0 },
                },
                Patch { bin: BinDescriptor { level: 10, comparator: Comparator::Eq, group: 0 }, transform: Transform::ConstantShift { delta: -0.05 } },
            ],
            coefficients: vec![],
            group_names: vec!["ALL".into(), "a".into()],
            clip: DEFAULT_CLIP,
        };
        let json = model_to_json(&model).unwrap();
        assert_eq!(model_from_json(&json).unwrap(), model);
        assert!(json.contains("\"kind\": \"logit_linear\""));
    }

    #[test]
    fn off_grid_patch_rejected() {
        let json = r#"{"version":1,"method":"hb","m":10,"patches":[{"p":0.25,"cmp":"EQ","group":"ALL","kind":"constant","delta":0.1}],"coefficients":[],"group_names":["ALL"],"clip":1e-6}"#;
        assert!(model_from_json(json).is_err());
        let ok = json.replace("0.25", "0.2");
        assert_eq!(model_from_json(&ok).unwrap().patches[0].bin.level, 2);
    }

    #[test]
    fn score_kinds() {
        let out = score_csv("logit_true,logit_false,label\n0,0,1\n", ScoreKind::TrueFalse).unwrap();
        assert_eq!(out, "score,label\n0.5,1\n");
        let out = score_csv("prompt_len,logprobs\n1,-5 -1 -1\n", ScoreKind::Perplexity).unwrap();
        assert_eq!(out, format!("score\n{}\n", (-1.0f64).exp()));
        let err = score_csv("logits\n1 2\n3\n", ScoreKind::MultipleChoice).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn groups_merge_into_dataset() {
        let ds = parse_dataset("score,label\n0.5,1\n0.2,0\n").unwrap();
        let g = parse_groups("topic\n1\n0\n").unwrap();
        let merged = merge_groups(&ds, &g).unwrap();
        assert_eq!(merged.groups().names(), ["ALL", "topic"]);
        assert_eq!(format_groups(merged.groups()).unwrap(), "g:topic\n1\n0\n");
    }
}
