// Iterative grouped histogram binning, round by round.

use multicalib::calibrate::{fit_ighb, FitConfig};
use multicalib::synthetic::{generate, SyntheticSpec};

fn main() -> multicalib::Result<()> {
    let (data, _) = generate(&SyntheticSpec::benchmark(), 0)?;
    let config = FitConfig::ighb(0.05);
    let (model, trace) = fit_ighb(&data, &config)?;

    println!("grid m = {}, round cap {}", trace.m, config.round_cap());
    println!("start: MSE {:.5}", trace.initial_mse);
    for r in &trace.rounds {
        println!(
            "round {:>2}: {:?} p={:.2} group {:<4} mass {:.4} bias {:+.4}  violation before {:.4}  MSE {:.5}  moved {}",
            r.round, r.bin.comparator, r.level_value, r.group_name, r.mass, r.bias, r.violation_before, r.mse, r.rows_moved
        );
    }
    println!("stop: {:?}, final violation {:.4} <= alpha", trace.stop_reason, trace.final_violation);
    println!("{} patches in the fitted model", model.patches.len());
    Ok(())
}
