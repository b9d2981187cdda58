mod common;

use multicalib::calibrate::{fit_hb, fit_ighb, fit_iglb, predict, FitConfig};
use multicalib::data::{split, Grid, GroupMatrix, DEFAULT_CLIP};
use multicalib::grouping::{cluster_groups, groups_from_annotations, FeatureTable};
use multicalib::io::{format_dataset, model_from_json, model_to_json, parse_dataset};
use multicalib::metrics;
use multicalib::scoring::{multiple_choice_score, true_false_score};
use multicalib::ScoredDataset;
use proptest::prelude::*;

use common::{gasce, mse};

fn score() -> impl Strategy<Value = f64> {
    prop_oneof![0.0..=1.0f64, (0..=20u32).prop_map(|i| i as f64 / 20.0)]
}

fn dataset(min: usize, max: usize) -> impl Strategy<Value = ScoredDataset> {
    (min..max, 0usize..4).prop_flat_map(|(n, k)| {
        (
            prop::collection::vec(score(), n),
            prop::collection::vec(any::<bool>(), n),
            prop::collection::vec(prop::collection::vec(any::<bool>(), n), k),
        )
            .prop_map(move |(scores, labels, cols)| {
                let names = (0..k).map(|j| format!("g{j}")).collect();
                let groups = GroupMatrix::from_columns(n, names, cols).unwrap();
                ScoredDataset::new(scores, labels.into_iter().map(u8::from).collect(), groups).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dataset_csv_roundtrip_is_exact(ds in dataset(1, 60)) {
        let back = parse_dataset(&format_dataset(&ds).unwrap()).unwrap();
        prop_assert_eq!(back.labels(), ds.labels());
        prop_assert_eq!(back.groups(), ds.groups());
        let bits = |d: &ScoredDataset| d.scores().iter().map(|s| s.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&ds));
    }

    #[test]
    fn all_column_is_present_and_true(ds in dataset(1, 60)) {
        prop_assert_eq!(ds.groups().name(0), "ALL");
        prop_assert!(ds.groups().column(0).iter().all(|&b| b));
    }

    #[test]
    fn split_partitions_rows(n in 2usize..300, frac in 0.05f64..0.95, seed in any::<u64>()) {
        let ds = ScoredDataset::ungrouped((0..n).map(|i| i as f64 / n as f64).collect(), vec![0; n]).unwrap();
        if let Ok((a, b)) = split(&ds, frac, seed) {
            let mut all: Vec<f64> = a.scores().iter().chain(b.scores()).copied().collect();
            all.sort_by(f64::total_cmp);
            prop_assert_eq!(all, ds.scores().to_vec());
        }
    }

    #[test]
    fn scoring_symmetries(a in -40.0f64..40.0, b in -40.0f64..40.0, c in -100.0f64..100.0,
                          logits in prop::collection::vec(-30.0f64..30.0, 2..10)) {
        let s = true_false_score(a, b).unwrap();
        prop_assert!((s + true_false_score(b, a).unwrap() - 1.0).abs() <= 1e-15);
        prop_assert!((true_false_score(a + c, b + c).unwrap() - s).abs() <= 1e-12);
        let mc = multiple_choice_score(&logits).unwrap();
        prop_assert!(mc >= 1.0 / logits.len() as f64 - 1e-15);
        let shifted: Vec<f64> = logits.iter().map(|l| l + c).collect();
        prop_assert!((multiple_choice_score(&shifted).unwrap() - mc).abs() <= 1e-12);
    }

    #[test]
    fn annotations_keep_membership(cols in prop::collection::vec(prop::collection::vec(any::<bool>(), 12), 0..5)) {
        let names: Vec<String> = (0..cols.len()).map(|j| format!("a{j}")).collect();
        let g = groups_from_annotations(cols.clone(), names).unwrap();
        prop_assert!(g.column(0).iter().all(|&b| b));
        for (j, col) in cols.iter().enumerate() {
            prop_assert_eq!(g.column(j + 1), col.as_slice());
        }
    }

    #[test]
    fn kmeans_clusters_partition_rows(points in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 4..80),
                                      k in 2usize..5, seed in any::<u64>()) {
        let rows = points.iter().map(|&(x, y)| vec![x, y]).collect();
        let table = FeatureTable::new(vec!["x".into(), "y".into()], rows).unwrap();
        let g = cluster_groups(&table, k, seed).unwrap();
        prop_assert_eq!(g.len(), k + 1);
        for i in 0..points.len() {
            prop_assert_eq!((1..g.len()).filter(|&c| g.contains(i, c)).count(), 1);
        }
    }

    #[test]
    fn metric_identities_and_bounds(ds in dataset(1, 120), m in 2usize..30) {
        let grid = Grid::new(m).unwrap();
        let asce = metrics::asce(&ds, grid);
        prop_assert_eq!(metrics::gasce(&ds, grid, 0).unwrap(), asce);
        prop_assert!((asce - gasce(&ds, 0, Some(m))).abs() <= 1e-12);
        let mse = metrics::mse(&ds);
        let ece = metrics::ece(&ds, m).unwrap();
        for v in [asce, mse, ece] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let rev: Vec<usize> = (0..ds.len()).rev().collect();
        prop_assert!((metrics::asce(&ds.select_rows(&rev), grid) - asce).abs() <= 1e-12);
    }

    #[test]
    fn hb_has_zero_in_sample_asce(ds in dataset(1, 200), m in 2usize..30) {
        let model = fit_hb(&ds, Grid::new(m).unwrap(), DEFAULT_CLIP).unwrap();
        let pred = predict(&model, ds.scores(), ds.groups()).unwrap();
        let out = ScoredDataset::ungrouped(pred, ds.labels().to_vec()).unwrap();
        prop_assert!(gasce(&out, 0, None) <= 1e-12);
    }

    #[test]
    fn ighb_respects_round_bound_and_mse_descent(ds in dataset(20, 300), alpha in 0.02f64..0.3) {
        let config = FitConfig::ighb(alpha);
        let (model, trace) = fit_ighb(&ds, &config).unwrap();
        prop_assert!((trace.rounds.len() as f64) < 4.0 / (alpha * alpha) + 1.0);
        let mut prev = trace.initial_mse;
        for r in &trace.rounds {
            prop_assert!(r.mse <= prev + 1e-10);
            prev = r.mse;
        }
        let pred = predict(&model, ds.scores(), ds.groups()).unwrap();
        let grid = config.grid().unwrap();
        prop_assert!(pred.iter().all(|&p| grid.is_on_grid(p)));
        prop_assert!((mse(&pred, ds.labels()) - trace.final_mse).abs() <= 1e-12);
        prop_assert!(trace.final_violation <= alpha);
    }

    #[test]
    fn iglb_validation_mse_strictly_decreases(ds in dataset(50, 400), seed in any::<u64>()) {
        let (_, trace) = fit_iglb(&ds, &FitConfig::iglb(0.05, 0.01, seed)).unwrap();
        let mut prev = trace.initial_val_mse.unwrap();
        for r in &trace.rounds {
            let v = r.val_mse.unwrap();
            prop_assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn model_json_roundtrip_and_pure_predict(ds in dataset(20, 200), seed in any::<u64>()) {
        let (model, _) = fit_iglb(&ds, &FitConfig::iglb(0.1, 0.01, seed)).unwrap();
        let back = model_from_json(&model_to_json(&model).unwrap()).unwrap();
        prop_assert_eq!(&back, &model);
        let a = predict(&model, ds.scores(), ds.groups()).unwrap();
        let b = predict(&back, ds.scores(), ds.groups()).unwrap();
        prop_assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}
