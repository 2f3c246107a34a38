//! Regenerates `data/ar_2020_daily_cases_synthetic.csv`.
//!
//! Daily incidence of the aggregated model with the Argentina 2020 fit,
//! scaled to raw reported counts (population 45e6, under-detection 10),
//! with a weekday reporting cycle and log-normal noise. Deterministic.
//!
//! cargo run -p psir --example synth_case_fixture -- data/ar_2020_daily_cases_synthetic.csv

use chrono::{Duration, NaiveDate};
use psir::{IntegratorConfig, ModelValues, Observable};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

const POPULATION: f64 = 45e6;
const DETECTION: f64 = 10.0;
const DAYS: usize = 271;
// Monday first; weekend reporting dips.
const WEEKDAY: [f64; 7] = [0.92, 1.10, 1.12, 1.09, 1.06, 0.97, 0.74];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "data/ar_2020_daily_cases_synthetic.csv".into());
    let times: Vec<f64> = (0..DAYS).map(|k| k as f64).collect();
    let incidence = ModelValues::ARGENTINA_FIT.simulate(
        &times,
        Observable::DailyIncidence,
        &IntegratorConfig::default(),
    )?;

    let start = NaiveDate::from_ymd_opt(2020, 3, 3).unwrap();
    let mean_cycle = WEEKDAY.iter().sum::<f64>() / 7.0;
    let noise = LogNormal::new(0.0, 0.08)?;
    let mut rng = ChaCha8Rng::seed_from_u64(20200303);

    let mut text = String::from("date,cases\n");
    for (k, inc) in incidence.iter().enumerate() {
        let date = start + Duration::days(k as i64);
        let weekday = WEEKDAY[date.format("%u").to_string().parse::<usize>()? - 1] / mean_cycle;
        let count = (inc * POPULATION / DETECTION * weekday * noise.sample(&mut rng)).round();
        text.push_str(&format!("{},{}\n", date.format("%Y-%m-%d"), count as u64));
    }
    std::fs::write(&out, text)?;
    eprintln!("wrote {DAYS} rows to {out}");
    Ok(())
}
