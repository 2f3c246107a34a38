//! Scenario builders shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use psir::network::net_rhs_slice;
use psir::{
    chain_mobility, integrate, load_case_series, moving_average, normalize_cases, sample_at,
    IntegratorConfig, NetParams, NetState, TimeSeries, Trajectory,
};

pub const DISTRICTS: usize = 10;
pub const NEIGHBOUR_FRACTION: f64 = 0.005;
pub const SEED_SIZE: f64 = 1e-6;

/// Ten-district chain with β = 1, γ = 0.5 and unit total population.
pub fn chain_params() -> NetParams {
    NetParams::uniform(
        1.0,
        0.5,
        1.0,
        chain_mobility(DISTRICTS, NEIGHBOUR_FRACTION).unwrap(),
    )
    .unwrap()
}

/// Chain run seeded with `SEED_SIZE` infected in the first district.
pub fn chain_run(t_end: f64) -> (NetParams, Trajectory) {
    let params = chain_params();
    let y0 = NetState::seeded(&params, 0, SEED_SIZE).unwrap();
    let traj = integrate(
        |_, y: &[f64], dy: &mut [f64]| net_rhs_slice(&params, y, dy).unwrap(),
        &y0.to_vec(),
        0.0,
        t_end,
        &IntegratorConfig::default(),
    )
    .unwrap();
    (params, traj)
}

/// Total infected of the chain run at days `0..=120`.
pub fn chain_total_infected() -> TimeSeries {
    let (_, traj) = chain_run(120.0);
    let days: Vec<f64> = (0..=120).map(f64::from).collect();
    let totals = sample_at(&traj, &days)
        .unwrap()
        .iter()
        .map(|r| r[DISTRICTS..2 * DISTRICTS].iter().sum())
        .collect();
    TimeSeries::new(days, totals).unwrap()
}

pub fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/ar_2020_daily_cases_synthetic.csv")
}

/// Bundled case series smoothed over 7 days and normalised by a population
/// of 45e6 with under-detection factor 10.
pub fn argentina_series() -> TimeSeries {
    let raw = load_case_series(fixture_path()).unwrap();
    normalize_cases(&moving_average(&raw, 7).unwrap(), 45e6, 10.0).unwrap()
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    ((got - want) / want).abs()
}
