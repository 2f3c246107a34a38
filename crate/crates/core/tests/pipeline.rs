mod common;

use common::{chain_run, fixture_path};
use psir::dataio::read_trajectory;
use psir::network::NetState;
use psir::{export_trajectory, load_case_series, moving_average, render_svg, TimeSeries};

#[test]
fn fixture_loads_as_consecutive_days() {
    let raw = load_case_series(fixture_path()).unwrap();
    assert_eq!(raw.len(), 271);
    assert!(raw.times().windows(2).all(|w| w[1] - w[0] == 1.0));
    assert!(raw.values().iter().all(|v| *v >= 0.0 && v.fract() == 0.0));
}

#[test]
fn smoothing_preserves_length_and_removes_weekly_cycle() {
    let raw = load_case_series(fixture_path()).unwrap();
    let smooth = moving_average(&raw, 7).unwrap();
    assert_eq!(smooth.times(), raw.times());
    let roughness = |s: &TimeSeries| {
        s.values()
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .sum::<f64>()
            / s.values().iter().sum::<f64>()
    };
    assert!(roughness(&smooth) < 0.5 * roughness(&raw));
}

#[test]
fn network_trajectory_round_trips_through_csv() {
    let (params, traj) = chain_run(30.0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.csv");
    let labels = NetState::labels(params.districts());
    export_trajectory(&traj, &labels, &path).unwrap();
    let (read_labels, back) = read_trajectory(&path).unwrap();
    assert_eq!(read_labels, labels);
    assert_eq!(back, traj);
}

#[test]
fn chart_output_is_deterministic() {
    let (_, traj) = chain_run(60.0);
    let series: Vec<(String, TimeSeries)> = (0..3)
        .map(|i| {
            (
                format!("I{}", i + 1),
                TimeSeries::new(traj.times().to_vec(), traj.column(10 + i)).unwrap(),
            )
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.svg"), dir.path().join("b.svg"));
    render_svg(&series, &a).unwrap();
    render_svg(&series, &b).unwrap();
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("<svg") || text.starts_with("<?xml"));
    assert_eq!(text.matches("<polyline").count(), 3);
}
