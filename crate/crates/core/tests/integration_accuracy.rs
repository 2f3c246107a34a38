mod common;

use psir::model::agg_rhs_slice;
use psir::{integrate, make_agg_initial, sample_at, IntegratorConfig, ModelValues, Trajectory};

fn metapop_run(cfg: &IntegratorConfig, t_end: f64) -> Trajectory {
    let values = ModelValues::METAPOP_FIT;
    let params = values.agg_params().unwrap();
    let y0 = make_agg_initial(values.n, values.i0, values.p_i0).unwrap();
    integrate(
        |_, y: &[f64], dy: &mut [f64]| agg_rhs_slice(&params, y, dy),
        &y0.to_array(),
        0.0,
        t_end,
        cfg,
    )
    .unwrap()
}

fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1e-6))
        .fold(0.0, f64::max)
}

#[test]
fn exponential_decay_order_four() {
    let err = |dt: f64| {
        let traj = integrate(
            |_, y: &[f64], dy: &mut [f64]| dy[0] = -y[0],
            &[1.0],
            0.0,
            2.0,
            &IntegratorConfig::rk4(dt),
        )
        .unwrap();
        (traj.last()[0] - (-2.0f64).exp()).abs()
    };
    let e = [0.1, 0.05, 0.025].map(err);
    for w in e.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((3.7..=4.3).contains(&order), "{order}");
    }
}

#[test]
fn halving_the_default_step_changes_little() {
    let days: Vec<f64> = (0..=120).map(f64::from).collect();
    let coarse = sample_at(&metapop_run(&IntegratorConfig::rk4(0.05), 120.0), &days).unwrap();
    let fine = sample_at(&metapop_run(&IntegratorConfig::rk4(0.025), 120.0), &days).unwrap();
    for (c, f) in coarse.iter().zip(&fine) {
        assert!(max_rel_diff(c, f) < 1e-7, "{c:?} vs {f:?}");
    }
}

#[test]
fn adaptive_agrees_with_fine_fixed_step() {
    let adaptive = metapop_run(&IntegratorConfig::rk45(1e-9, 1e-14), 120.0);
    let fixed = metapop_run(&IntegratorConfig::rk4(1e-3), 120.0);
    // Compare at the adaptive nodes, where the fine run's interpolation
    // error is far below the tolerance.
    let reference = sample_at(&fixed, adaptive.times()).unwrap();
    for j in 0..adaptive.width() {
        let scale = fixed.column(j).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (row, want) in adaptive.rows().zip(&reference) {
            assert!(
                (row[j] - want[j]).abs() <= 1e-6 * scale,
                "component {j}: {} vs {}",
                row[j],
                want[j]
            );
        }
    }
}

#[test]
fn daily_sampling_matches_fine_rerun() {
    let days: Vec<f64> = (0..=120).map(f64::from).collect();
    let default = sample_at(&metapop_run(&IntegratorConfig::default(), 120.0), &days).unwrap();
    let fine = sample_at(&metapop_run(&IntegratorConfig::rk4(0.005), 120.0), &days).unwrap();
    for (a, b) in default.iter().zip(&fine) {
        assert!(max_rel_diff(a, b) <= 1e-6);
    }
}

#[test]
fn integration_is_bit_reproducible() {
    let a = metapop_run(&IntegratorConfig::default(), 200.0);
    let b = metapop_run(&IntegratorConfig::default(), 200.0);
    assert_eq!(a, b);
    let a = metapop_run(&IntegratorConfig::rk45(1e-8, 1e-12), 200.0);
    let b = metapop_run(&IntegratorConfig::rk45(1e-8, 1e-12), 200.0);
    assert_eq!(a, b);
}

#[test]
fn last_step_lands_on_end_time() {
    let traj = metapop_run(&IntegratorConfig::rk4(0.3), 10.0);
    assert_eq!(*traj.times().last().unwrap(), 10.0);
    let traj = metapop_run(&IntegratorConfig::rk45(1e-6, 1e-9), 10.0);
    assert_eq!(*traj.times().last().unwrap(), 10.0);
}
