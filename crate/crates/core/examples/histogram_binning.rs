// Histogram binning on a miscalibrated synthetic dataset: in-sample ASCE
// drops to zero, and the held-out split shows how much of that survives.

use multicalib::calibrate::{fit_hb, predict};
use multicalib::data::{split, DEFAULT_CLIP};
use multicalib::metrics;
use multicalib::synthetic::{generate, SyntheticSpec};
use multicalib::Grid;

fn main() -> multicalib::Result<()> {
    let spec = SyntheticSpec { n: 20_000, ..SyntheticSpec::benchmark() };
    let (data, _) = generate(&spec, 1)?;
    let (calib, test) = split(&data, 0.5, 1)?;
    let grid = Grid::from_alpha(0.05)?;

    let model = fit_hb(&calib, grid, DEFAULT_CLIP)?;
    println!("{} level shifts", model.patches.len());
    for (name, ds) in [("calibration", &calib), ("held-out", &test)] {
        let after = ds.with_scores(predict(&model, ds.scores(), ds.groups())?)?;
        println!(
            "{name:>11}: ASCE {:.5} -> {:.2e} (exact level sets)   MSE {:.4} -> {:.4}",
            metrics::asce(ds, grid),
            metrics::asce_exact(&after),
            metrics::mse(ds),
            metrics::mse(&after),
        );
    }
    Ok(())
}
