// Calibration metrics on raw scores, including the MSE decomposition
// into ASCE plus within-level label variance.

use multicalib::data::round_to_grid;
use multicalib::io::{format_pergroup, to_json_pretty};
use multicalib::metrics;
use multicalib::synthetic::{generate, SyntheticSpec};
use multicalib::Grid;

fn main() -> multicalib::Result<()> {
    let (data, _) = generate(&SyntheticSpec { n: 10_000, ..SyntheticSpec::benchmark() }, 2)?;
    let grid = Grid::new(20)?;
    let report = metrics::report(&data, grid)?;
    println!(
        "MSE {:.4}  ASCE {:.4}  ECE {:.4}  accuracy {:.3}  max violation {:.4} ({})",
        report.mse, report.asce, report.ece, report.accuracy, report.max_violation, report.max_violation_group
    );
    print!("{}", format_pergroup(&report)?);

    let on_grid = data.with_scores(round_to_grid(data.scores(), grid.m())?)?;
    let (mse, asce, var) = (metrics::mse(&on_grid), metrics::asce(&on_grid, grid), metrics::label_variance(&on_grid, grid));
    println!("on-grid: MSE {mse:.6} = ASCE {asce:.6} + variance {var:.6} (gap {:.1e})", mse - asce - var);

    let json = to_json_pretty(&report)?;
    println!("report JSON: {} bytes, {} bins", json.len(), report.per_bin.len());
    Ok(())
}
