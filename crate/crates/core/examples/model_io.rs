// Save a fitted model as JSON, load it back and apply it to new rows.

use multicalib::calibrate::{fit_iglb, predict, FitConfig};
use multicalib::io::{model_from_json, model_to_json};
use multicalib::synthetic::{generate, SyntheticSpec};

fn main() -> multicalib::Result<()> {
    let spec = SyntheticSpec { n: 10_000, ..SyntheticSpec::benchmark() };
    let (train, _) = generate(&spec, 5)?;
    let (fresh, _) = generate(&spec, 6)?;
    let (model, _) = fit_iglb(&train, &FitConfig::iglb(0.05, 0.01, 5))?;

    let json = model_to_json(&model)?;
    println!("{}", json.lines().take(16).collect::<Vec<_>>().join("\n"));
    let loaded = model_from_json(&json)?;
    assert_eq!(loaded, model);

    let a = predict(&model, fresh.scores(), fresh.groups())?;
    let b = predict(&loaded, fresh.scores(), fresh.groups())?;
    assert_eq!(a, b);
    println!("first five calibrated scores: {:?}", &a[..5]);
    Ok(())
}
