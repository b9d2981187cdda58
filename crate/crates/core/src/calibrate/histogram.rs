use crate::data::{BinDescriptor, CalibratedModel, Comparator, Grid, Method, Patch, ScoredDataset, Transform};
use crate::error::{Error, Result};

/// Histogram binning: round to the grid, then shift every nonempty level
/// set by its bias. All shifts are keyed on the rounded score, so they
/// apply simultaneously and are not re-rounded.
pub fn fit_hb(calib: &ScoredDataset, grid: Grid, clip: f64) -> Result<CalibratedModel> {
    if calib.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut count = vec![0usize; grid.levels()];
    let mut sum_y = vec![0.0f64; grid.levels()];
    for (&s, &y) in calib.scores().iter().zip(calib.labels()) {
        let k = grid.round_index(s);
        count[k] += 1;
        sum_y[k] += y as f64;
    }
    let patches = (0..grid.levels())
        .filter(|&k| count[k] > 0)
        .map(|k| Patch {
            bin: BinDescriptor { level: k, comparator: Comparator::Eq, group: 0 },
            transform: Transform::ConstantShift { delta: sum_y[k] / count[k] as f64 - grid.value(k) },
        })
        .collect();
    Ok(CalibratedModel {
        grid,
        method: Method::Hb,
        patches,
        coefficients: Vec::new(),
        group_names: calib.groups().names().to_vec(),
        clip,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::predict;
    use crate::data::DEFAULT_CLIP;

    #[test]
    fn one_bin_shift() {
        // level 0.3 holding labels with mean 0.7
        let d = ScoredDataset::ungrouped(vec![0.3; 10], vec![1, 1, 1, 1, 1, 1, 1, 0, 0, 0]).unwrap();
        let model = fit_hb(&d, Grid::new(10).unwrap(), DEFAULT_CLIP).unwrap();
        assert_eq!(model.patches.len(), 1);
        let Transform::ConstantShift { delta } = model.patches[0].transform else { panic!() };
        assert!((delta - 0.4).abs() < 1e-15);
        let out = predict(&model, d.scores(), d.groups()).unwrap();
        assert!(out.iter().all(|&v| (v - 0.7).abs() < 1e-15));
    }

    #[test]
    fn calibrated_input_is_a_fixed_point() {
        let d = ScoredDataset::ungrouped(vec![0.5, 0.5, 0.0, 1.0], vec![1, 0, 0, 1]).unwrap();
        let model = fit_hb(&d, Grid::new(4).unwrap(), DEFAULT_CLIP).unwrap();
        for p in &model.patches {
            assert_eq!(p.transform, Transform::ConstantShift { delta: 0.0 });
        }
        assert_eq!(predict(&model, d.scores(), d.groups()).unwrap(), d.scores());
    }
}
