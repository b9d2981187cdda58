mod common;

use multicalib::data::Grid;
use multicalib::io::format_dataset;
use multicalib::synthetic::{generate, population_metrics, SyntheticSpec};

use common::{gasce, violation};

fn with_n(n: usize) -> SyntheticSpec {
    SyntheticSpec { n, ..SyntheticSpec::benchmark() }
}

#[test]
fn generation_is_reproducible() {
    let spec = with_n(2000);
    let a = format_dataset(&generate(&spec, 5).unwrap().0).unwrap();
    let b = format_dataset(&generate(&spec, 5).unwrap().0).unwrap();
    let c = format_dataset(&generate(&spec, 6).unwrap().0).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn truth_table_matches_rows() {
    let (ds, truth) = generate(&with_n(500), 1).unwrap();
    assert_eq!(truth.rng, "ChaCha8Rng");
    assert!((truth.rows.iter().map(|r| r.weight).sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(truth.rows.iter().all(|r| (0.0..=1.0).contains(&r.p_true)));
    let known: Vec<u64> = truth.rows.iter().map(|r| r.score.unwrap().to_bits()).collect();
    assert!(ds.scores().iter().all(|s| known.contains(&s.to_bits())));
}

/// Empirical MSE and group shares sit within 3 standard errors of the
/// population values at every sample size; the ASCE gap stays inside a
/// 3-sigma envelope plus the plug-in estimator's upward bias.
#[test]
fn empirical_metrics_converge_to_population() {
    let grid = Grid::new(20).unwrap();
    let pop = population_metrics(&SyntheticSpec::benchmark(), Some(grid)).unwrap();
    for (n, seed) in [(1_000, 1), (10_000, 2), (100_000, 3)] {
        let (ds, _) = generate(&with_n(n), seed).unwrap();
        let sq: Vec<f64> = ds.scores().iter().zip(ds.labels()).map(|(s, &y)| (y as f64 - s).powi(2)).collect();
        let mean = sq.iter().sum::<f64>() / n as f64;
        let sd = (sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((mean - pop.mse).abs() <= 3.0 * sd / (n as f64).sqrt(), "n={n}: mse {mean} vs {}", pop.mse);

        let names = ds.groups().names();
        for g in 0..names.len() {
            let share = ds.groups().count(g) as f64 / n as f64;
            let want = pop.mass[&names[g]];
            assert!((share - want).abs() <= 3.0 * (want * (1.0 - want) / n as f64).sqrt() + 1e-12);
        }
        let gap = (gasce(&ds, 0, Some(20)) - pop.asce).abs();
        let envelope = 6.0 * (pop.asce * 0.25 / n as f64).sqrt() + 21.0 * 0.25 / n as f64;
        assert!(gap <= envelope, "n={n}: asce gap {gap} > {envelope}");
        if n == 100_000 {
            assert!((violation(&ds, 20) - pop.max_violation).abs() < 0.01);
        }
    }
}
