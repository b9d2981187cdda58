// Method-by-seed benchmark, including the IGHB ablations. Pass the number
// of seeds as the first argument (default 3).

use multicalib::bench::{run_bench, BenchConfig, BenchMethod};
use multicalib::synthetic::SyntheticSpec;

fn main() -> multicalib::Result<()> {
    let runs: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(3);
    let cfg = BenchConfig::new(SyntheticSpec::benchmark(), BenchMethod::ALL.to_vec(), (1..=runs).collect());
    let table = run_bench(&cfg)?;
    println!("{:>9}  {:>15}  {:>17}  {:>6}", "method", "held-out MSE", "max violation", "rounds");
    for m in BenchMethod::ALL {
        let (mse, mse_sd) = table.summary(m, |r| r.mse);
        let (v, v_sd) = table.summary(m, |r| r.max_violation);
        let rounds = table.runs_for(m).next().and_then(|r| r.rounds).map_or("-".to_string(), |_| {
            format!("{:.1}", table.summary(m, |r| r.rounds.unwrap_or(0) as f64).0)
        });
        println!("{:>9}  {mse:.4} ± {mse_sd:.4}  {v:.5} ± {v_sd:.5}  {rounds:>6}", m.name());
    }
    Ok(())
}
