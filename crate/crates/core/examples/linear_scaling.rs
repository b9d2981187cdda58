// Linear scaling recovers a known logit-linear distortion.

use multicalib::calibrate::{fit_ls, fit_ls_params, predict};
use multicalib::data::{expit, logit, DEFAULT_CLIP};
use multicalib::{metrics, Grid, ScoredDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> multicalib::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 50_000;
    let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0.02..0.98)).collect();
    // true probability is expit(0.5 + 2 logit s)
    let labels = scores.iter().map(|&s| (rng.gen::<f64>() < expit(0.5 + 2.0 * logit(s))) as u8).collect();
    let ds = ScoredDataset::ungrouped(scores, labels)?;

    let fit = fit_ls_params(&ds, DEFAULT_CLIP)?;
    println!("alpha = {:.3}, beta = {:.3} after {} Newton steps", fit.alpha, fit.beta, fit.iterations);
    println!("MSE identity {:.5} -> fitted {:.5}", fit.identity_mse, fit.mse);

    let grid = Grid::new(20)?;
    let model = fit_ls(&ds, grid, DEFAULT_CLIP)?;
    let after = ds.with_scores(predict(&model, ds.scores(), ds.groups())?)?;
    println!("ECE {:.4} -> {:.4}", metrics::ece(&ds, 20)?, metrics::ece(&after, 20)?);
    Ok(())
}
