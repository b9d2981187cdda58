mod common;

use multicalib::calibrate::{fit_gculr, fit_ighb, fit_iglb, fit_ls_params, predict, FitConfig, StopReason};
use multicalib::data::{expit, logit, Comparator, Grid, GroupMatrix, DEFAULT_CLIP};
use multicalib::error::Error;
use multicalib::ScoredDataset;
use rand::Rng;

use common::{rng, violation};

#[test]
fn ls_recovers_logit_linear_truth() {
    let mut r = rng(11);
    let n = 100_000;
    let scores: Vec<f64> = (0..n).map(|_| r.gen_range(0.02..0.98)).collect();
    let labels = scores.iter().map(|&s| (r.gen::<f64>() < expit(0.5 + 2.0 * logit(s))) as u8).collect();
    let fit = fit_ls_params(&ScoredDataset::ungrouped(scores, labels).unwrap(), DEFAULT_CLIP).unwrap();
    assert!(fit.converged);
    assert!((fit.alpha - 0.5).abs() < 0.1, "alpha = {}", fit.alpha);
    assert!((fit.beta - 2.0).abs() < 0.1, "beta = {}", fit.beta);
    assert!(fit.mse <= fit.identity_mse);
}

#[test]
fn gculr_recovers_group_logits() {
    let mut r = rng(12);
    let n = 100_000;
    let (theta0, intercept, a, b) = (1.3, 0.2, 0.8, -0.6);
    let (mut scores, mut labels, mut ga, mut gb) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        let s: f64 = r.gen_range(0.05..0.95);
        let (in_a, in_b) = (r.gen::<f64>() < 0.4, r.gen::<f64>() < 0.5);
        let u = theta0 * logit(s) + intercept + if in_a { a } else { 0.0 } + if in_b { b } else { 0.0 };
        scores.push(s);
        labels.push((r.gen::<f64>() < expit(u)) as u8);
        ga.push(in_a);
        gb.push(in_b);
    }
    let groups = GroupMatrix::from_columns(n, vec!["a".into(), "b".into()], vec![ga, gb]).unwrap();
    let ds = ScoredDataset::new(scores, labels, groups).unwrap();
    let c = fit_gculr(&ds, Grid::new(20).unwrap(), DEFAULT_CLIP).unwrap().model.coefficients;
    for (got, want) in c.iter().zip([theta0, intercept, a, b]) {
        assert!((got - want).abs() < 0.1, "coefficients {c:?}");
    }
}

/// Two disjoint halves at score 0.5, one all positive, one all negative.
fn two_group_case() -> ScoredDataset {
    let n = 100;
    let a: Vec<bool> = (0..n).map(|i| i < 50).collect();
    let b: Vec<bool> = a.iter().map(|x| !x).collect();
    let labels = a.iter().map(|&x| x as u8).collect();
    let groups = GroupMatrix::from_columns(n, vec!["a".into(), "b".into()], vec![a, b]).unwrap();
    ScoredDataset::new(vec![0.5; n], labels, groups).unwrap()
}

#[test]
fn ighb_fixes_both_halves_in_two_rounds() {
    let ds = two_group_case();
    let (model, trace) = fit_ighb(&ds, &FitConfig::ighb(0.1)).unwrap();
    // the ALL bin starts unbiased and a beats b on index; once a has moved,
    // ALL at 0.5 holds exactly the b rows and wins the tie on index again
    let names: Vec<&str> = trace.rounds.iter().map(|r| r.group_name.as_str()).collect();
    assert_eq!(names, ["a", "ALL"]);
    assert_eq!(trace.stop_reason, StopReason::Converged);
    let pred = predict(&model, ds.scores(), ds.groups()).unwrap();
    let want: Vec<f64> = ds.labels().iter().map(|&y| y as f64).collect();
    assert_eq!(pred, want);
    assert_eq!(trace.final_mse, 0.0);
}

#[test]
fn ighb_round_cap_is_a_numeric_error() {
    let ds = two_group_case();
    let config = FitConfig { max_rounds: Some(1), ..FitConfig::ighb(0.1) };
    assert!(matches!(fit_ighb(&ds, &config), Err(Error::RoundLimitExceeded { .. })));
}

#[test]
fn iglb_rejects_level_set_bins_and_zero_epsilon() {
    let ds = two_group_case();
    let eq = FitConfig::iglb(0.1, 0.01, 1).with_comparators(vec![Comparator::Eq]);
    assert!(matches!(fit_iglb(&ds, &eq), Err(Error::Config(_))));
    assert!(matches!(fit_iglb(&ds, &FitConfig::iglb(0.1, 0.0, 1)), Err(Error::Config(_))));
}

#[test]
fn iglb_with_unit_epsilon_applies_nothing() {
    let ds = two_group_case();
    let (model, trace) = fit_iglb(&ds, &FitConfig::iglb(0.1, 1.0, 1)).unwrap();
    assert!(model.patches.is_empty());
    assert_eq!(trace.stop_reason, StopReason::MassBelowEpsilon);
}

#[test]
fn iglb_cuts_held_out_violation() {
    use multicalib::bench::{fit_predict, seed_split, BenchConfig, BenchMethod};
    use multicalib::synthetic::SyntheticSpec;

    let cfg = BenchConfig::new(SyntheticSpec::benchmark(), vec![BenchMethod::Iglb], vec![3]);
    let (train, test) = seed_split(&cfg, 3).unwrap();
    let (pred, rounds) = fit_predict(BenchMethod::Iglb, &train, &test, &cfg, 3).unwrap();
    let before = violation(&test, 20);
    let after = violation(&test.with_scores(pred).unwrap(), 20);
    assert!(rounds.unwrap() > 0);
    assert!(after * 5.0 <= before, "violation {before} -> {after}");
}
