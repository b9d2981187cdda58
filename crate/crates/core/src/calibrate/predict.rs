use super::iterative::apply_patch;
use crate::data::{expit, logit, CalibratedModel, GroupMatrix, Method, Transform};
use crate::error::{Error, Result};

/// Reorders the caller's group columns to the model's group order.
fn align_groups(model: &CalibratedModel, groups: &GroupMatrix) -> Result<GroupMatrix> {
    if groups.names() == model.group_names.as_slice() {
        return Ok(groups.clone());
    }
    let mut names = Vec::with_capacity(model.group_names.len());
    let mut cols = Vec::with_capacity(model.group_names.len());
    for name in model.group_names.iter().skip(1) {
        let k = groups
            .index_of(name)
            .ok_or_else(|| Error::GroupSchemaMismatch(format!("model group {name:?} missing from input")))?;
        names.push(name.clone());
        cols.push(groups.column(k).to_vec());
    }
    GroupMatrix::from_columns(groups.rows(), names, cols)
}

/// Applies a fitted calibrator to new scores.
///
/// Patch methods start from the grid-rounded score. HB shifts every level
/// simultaneously; IGHB/IGLB replay their patches in order, re-rounding
/// after each. Parametric methods are evaluated in closed form and clipped
/// to [0,1].
pub fn predict(model: &CalibratedModel, scores: &[f64], groups: &GroupMatrix) -> Result<Vec<f64>> {
    if scores.len() != groups.rows() {
        return Err(Error::InvalidDataset(vec![crate::error::Violation::LengthMismatch {
            what: "groups",
            expected: scores.len(),
            found: groups.rows(),
        }]));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    if let Some(i) = scores.iter().position(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::InvalidDataset(vec![crate::error::Violation::ScoreOutOfRange(i)]));
    }
    let groups = align_groups(model, groups)?;
    let grid = model.grid;
    let clip = model.clip;
    let c = &model.coefficients;
    let out = match model.method {
        Method::Hb => {
            let mut shift = vec![0.0; grid.levels()];
            for p in &model.patches {
                if let Transform::ConstantShift { delta } = p.transform {
                    shift[p.bin.level] = delta;
                }
            }
            scores
                .iter()
                .map(|&s| {
                    let k = grid.round_index(s);
                    (grid.value(k) + shift[k]).clamp(0.0, 1.0)
                })
                .collect()
        }
        Method::Ighb | Method::Iglb => {
            let mut levels: Vec<usize> = scores.iter().map(|&s| grid.round_index(s)).collect();
            for p in &model.patches {
                apply_patch(p, grid, clip, &mut levels, &groups);
            }
            levels.into_iter().map(|l| grid.value(l)).collect()
        }
        Method::Ls => {
            let (a, b) = (c[0], c[1]);
            scores.iter().map(|&s| expit(a + b * logit(s.clamp(clip, 1.0 - clip)))).collect()
        }
        Method::Gcur => (0..scores.len())
            .map(|i| {
                let shift: f64 = (0..groups.len()).filter(|&k| groups.contains(i, k)).map(|k| c[k]).sum();
                (scores[i] + shift).clamp(0.0, 1.0)
            })
            .collect(),
        Method::Gculr => (0..scores.len())
            .map(|i| {
                let z = logit(scores[i].clamp(clip, 1.0 - clip));
                let u = c[0] * z + (0..groups.len()).filter(|&k| groups.contains(i, k)).map(|k| c[1 + k]).sum::<f64>();
                expit(u)
            })
            .collect(),
    };
    Ok(out)
}
