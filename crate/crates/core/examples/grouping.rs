// Three ways to build group memberships: annotations, threshold rules and
// k-means clusters over feature vectors.

use multicalib::grouping::{cluster_groups, groups_from_annotations, groups_from_thresholds, FeatureTable, ThresholdRule};
use multicalib::io::format_groups;

fn main() -> multicalib::Result<()> {
    let topics = groups_from_annotations(
        vec![vec![true, false, true, false], vec![false, true, true, false]],
        vec!["algebra".into(), "geometry".into()],
    )?;
    print!("annotations:\n{}", format_groups(&topics)?);

    let features = FeatureTable::new(
        vec!["length".into(), "x".into(), "y".into()],
        vec![vec![12.0, 0.1, 0.2], vec![40.0, 0.0, 0.1], vec![8.0, 5.0, 5.1], vec![55.0, 5.2, 4.9], vec![30.0, 10.0, 0.0], vec![9.0, 9.8, 0.3]],
    )?;
    let rules: Vec<ThresholdRule> = ["long=length>=30", "short=length<10"].iter().map(|r| r.parse()).collect::<Result<_, _>>()?;
    print!("thresholds:\n{}", format_groups(&groups_from_thresholds(&features, &rules)?)?);

    let xy = FeatureTable::new(vec!["x".into(), "y".into()], (0..features.len()).map(|i| features.row(i)[1..].to_vec()).collect())?;
    print!("k-means (k=3):\n{}", format_groups(&cluster_groups(&xy, 3, 1)?)?);
    Ok(())
}
