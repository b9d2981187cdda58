// IGLB: lower/upper-set bins, logit-linear patches and validation-based
// early stopping, compared with IGHB on the same held-out split.

use multicalib::calibrate::{fit_ighb, fit_iglb, predict, FitConfig};
use multicalib::data::split;
use multicalib::metrics;
use multicalib::synthetic::{generate, SyntheticSpec};
use multicalib::Grid;

fn main() -> multicalib::Result<()> {
    let seed = 4;
    let (data, _) = generate(&SyntheticSpec::benchmark(), seed)?;
    let (train, test) = split(&data, 0.8, seed)?;
    let grid = Grid::from_alpha(0.05)?;

    let (iglb, trace) = fit_iglb(&train, &FitConfig::iglb(0.05, 0.01, seed))?;
    println!("IGLB: {} calibration / {} validation rows", trace.calib_rows, trace.val_rows);
    for r in &trace.rounds {
        println!(
            "  round {:>2}: {:?} p={:.2} {:<4} mass {:.3} val MSE {:.5}",
            r.round, r.bin.comparator, r.level_value, r.group_name, r.mass, r.val_mse.unwrap_or(f64::NAN)
        );
    }
    println!("  stopped: {:?}", trace.stop_reason);
    let (ighb, _) = fit_ighb(&train, &FitConfig::ighb(0.05))?;

    let show = |name: &str, ds: &multicalib::ScoredDataset| -> multicalib::Result<()> {
        let (v, g) = metrics::multicalibration_violation(ds, grid)?;
        println!("{name:>8}: MSE {:.4}  ECE {:.4}  max violation {v:.5} ({g})", metrics::mse(ds), metrics::ece(ds, grid.m())?);
        Ok(())
    };
    show("uncalib", &test)?;
    show("IGHB", &test.with_scores(predict(&ighb, test.scores(), test.groups())?)?)?;
    show("IGLB", &test.with_scores(predict(&iglb, test.scores(), test.groups())?)?)?;
    Ok(())
}
