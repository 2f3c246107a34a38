use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use psir::calibration::ModelValues;
use psir::dataio::{format_f64, write_table};
use psir::model::agg_rhs_slice;
use psir::network::net_rhs_slice;
use psir::{
    export_trajectory, integrate, load_case_series, make_agg_initial, moving_average,
    normalize_cases, r0_aggregated, r0_network, render_svg, sample_at, AggParams, AggState,
    FitParam, FitProblem, NetState, TimeSeries, Trajectory,
};

use crate::config::{ModelKind, Settings};
use crate::CliError;

fn required_out(s: &Settings) -> Result<&Path, CliError> {
    s.out
        .as_deref()
        .ok_or_else(|| CliError::Invalid("missing 'out' path".into()))
}

/// `dir/name.csv` + `infected` → `dir/name.infected.csv`.
fn sibling(path: &Path, tag: &str, ext: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{tag}.{ext}"))
}

/// Creates the parent directories of every output path. Called only once
/// all validation has passed.
fn create_parents<'a>(paths: impl IntoIterator<Item = &'a Path>) -> Result<(), CliError> {
    for p in paths {
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)
                .map_err(|e| CliError::Invalid(format!("cannot create {}: {e}", dir.display())))?;
        }
    }
    Ok(())
}

fn column_series(traj: &Trajectory, j: usize) -> TimeSeries {
    TimeSeries::new(traj.times().to_vec(), traj.column(j)).expect("trajectory times are increasing")
}

pub fn simulate(s: &Settings) -> Result<(), CliError> {
    let kind = s.model()?;
    let t_end = s.t_end()?;
    let cfg = s.integrator()?;
    let out = required_out(s)?;

    match kind {
        ModelKind::Agg => {
            let values = s.model_values(&[])?;
            let params = values.agg_params()?;
            let y0 = make_agg_initial(values.n, values.i0, values.p_i0)?;
            let traj = integrate(
                |_, y: &[f64], dy: &mut [f64]| agg_rhs_slice(&params, y, dy),
                &y0.to_array(),
                0.0,
                t_end,
                &cfg,
            )?;
            create_parents([out].into_iter().chain(s.svg.as_deref()))?;
            export_trajectory(&traj, &AggState::LABELS, out)?;
            if let Some(svg) = &s.svg {
                let series: Vec<(String, TimeSeries)> = AggState::LABELS[..5]
                    .iter()
                    .enumerate()
                    .map(|(j, l)| (l.to_string(), column_series(&traj, j)))
                    .collect();
                render_svg(&series, svg)?;
            }
        }
        ModelKind::Net => {
            let params = s.net_params()?;
            let d = params.districts();
            let district = s.seed_district.unwrap_or(1);
            if district == 0 {
                return Err(CliError::Invalid("seed_district is numbered from 1".into()));
            }
            let seed = s
                .seed_size
                .ok_or_else(|| CliError::Invalid("missing 'seed_size'".into()))?;
            let y0 = NetState::seeded(&params, district - 1, seed)?;
            let traj = integrate(
                |_, y: &[f64], dy: &mut [f64]| {
                    net_rhs_slice(&params, y, dy).expect("state width fixed by params")
                },
                &y0.to_vec(),
                0.0,
                t_end,
                &cfg,
            )?;

            let infected: Vec<Vec<f64>> = traj
                .rows()
                .map(|r| {
                    let mut row = r[d..2 * d].to_vec();
                    row.push(row.iter().sum());
                    row
                })
                .collect();
            let days: Vec<f64> = (0..=t_end.floor() as usize).map(|k| k as f64).collect();
            let daily_total: Vec<f64> = sample_at(&traj, &days)?
                .iter()
                .map(|r| r[d..2 * d].iter().sum())
                .collect();

            create_parents([out].into_iter().chain(s.svg.as_deref()))?;
            export_trajectory(&traj, &NetState::labels(d), out)?;
            let mut labels: Vec<String> = (1..=d).map(|k| format!("I{k}")).collect();
            labels.push("I_total".into());
            write_table(
                sibling(out, "infected", "csv"),
                &labels,
                traj.times(),
                infected.iter().map(Vec::as_slice),
            )?;
            write_total(&sibling(out, "total", "csv"), &days, &daily_total)?;

            if let Some(svg) = &s.svg {
                let series: Vec<(String, TimeSeries)> = labels
                    .iter()
                    .enumerate()
                    .map(|(j, l)| {
                        let v = infected.iter().map(|r| r[j]).collect();
                        (
                            l.clone(),
                            TimeSeries::new(traj.times().to_vec(), v).expect("increasing times"),
                        )
                    })
                    .collect();
                render_svg(&series, svg)?;
            }
        }
    }
    Ok(())
}

/// Two-column `day,value` file readable by `fit --data`.
fn write_total(path: &Path, days: &[f64], values: &[f64]) -> Result<(), CliError> {
    let mut text = String::from("day,total\n");
    for (t, v) in days.iter().zip(values) {
        let _ = writeln!(text, "{},{}", *t as i64, format_f64(*v));
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::Invalid(format!("cannot write {}: {e}", path.display())))
}

pub fn fit(s: &Settings) -> Result<(), CliError> {
    if s.model.as_deref().is_some_and(|m| m != "agg") {
        return Err(CliError::Invalid(
            "only the aggregated model (agg) can be fitted".into(),
        ));
    }
    let data = s
        .data
        .as_deref()
        .ok_or_else(|| CliError::Invalid("missing 'data' path".into()))?;
    let out = required_out(s)?;
    let free = s.free_params()?;
    if free.is_empty() {
        return Err(CliError::Invalid("free parameter list is empty".into()));
    }
    let observable = s.observable()?;
    let cfg = s.integrator()?;
    let base = s.model_values(&free)?;
    let init: Vec<f64> = free
        .iter()
        .map(|p| s.init_for(*p).unwrap_or_else(|| p.default_init()))
        .collect();

    let raw = load_case_series(data)?;
    let window = s.window.unwrap_or(7);
    let smoothed = moving_average(&raw, window)?;
    let observed = normalize_cases(&smoothed, s.pop.unwrap_or(1.0), s.detect.unwrap_or(1.0))?;

    let mut problem = FitProblem::new(observed.clone(), observable, free.clone(), base, init)?;
    problem.integrator = cfg;
    if let Some(m) = s.max_iterations {
        if m == 0 {
            return Err(CliError::Invalid(
                "max_iterations must be at least 1".into(),
            ));
        }
        problem.options.max_iterations = m;
    }
    let result = psir::fit(&problem);

    let model = result
        .params
        .simulate(observed.times(), observable, &cfg)
        .unwrap_or_else(|_| vec![f64::NAN; observed.len()]);

    let svg = s.svg.clone().unwrap_or_else(|| out.with_extension("svg"));
    create_parents([out, svg.as_path()])?;
    std::fs::write(out, report(&result, &problem, window, s))
        .map_err(|e| CliError::Invalid(format!("cannot write {}: {e}", out.display())))?;
    let rows: Vec<[f64; 2]> = observed
        .values()
        .iter()
        .zip(&model)
        .map(|(o, m)| [*o, *m])
        .collect();
    write_table(
        sibling(out, "curve", "csv"),
        &["observed", "model"],
        observed.times(),
        rows.iter().map(|r| r.as_slice()),
    )?;
    let mut series = vec![("data".to_string(), observed.clone())];
    if model.iter().all(|v| v.is_finite()) {
        series.push((
            "model".to_string(),
            TimeSeries::new(observed.times().to_vec(), model)?,
        ));
    }
    render_svg(&series, svg)?;

    if result.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged)
    }
}

fn report(result: &psir::FitResult, problem: &FitProblem, window: usize, s: &Settings) -> String {
    let p: &ModelValues = &result.params;
    let free: Vec<&str> = result.free.iter().map(|f| f.name()).collect();
    let mut text = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(text, "{k} = {v}");
    };
    kv("converged", result.converged.to_string());
    kv("termination", format!("{:?}", result.termination));
    kv("iterations", result.iterations.to_string());
    kv("observable", format!("{:?}", problem.observable()));
    kv("points", result.residuals.len().to_string());
    kv("window", window.to_string());
    kv("pop", format_f64(s.pop.unwrap_or(1.0)));
    kv("detect", format_f64(s.detect.unwrap_or(1.0)));
    kv("free", free.join(","));
    kv("sse", format_f64(result.sse));
    kv("rmse", format_f64(result.rmse));
    for param in FitParam::ALL {
        kv(param.name(), format_f64(p.get(param)));
    }
    kv("gamma", format_f64(p.gamma));
    kv("I0", format_f64(p.i0));
    kv("N", format_f64(p.n));
    if let Ok(agg) = p.agg_params() {
        kv("R0", format_f64(r0_aggregated(&agg)));
        kv("r_inf", format_f64(agg.r_inf()));
    }
    text
}

pub fn r0(s: &Settings) -> Result<(), CliError> {
    match s.model()? {
        ModelKind::Agg => {
            let beta = s
                .beta
                .ok_or_else(|| CliError::Invalid("missing 'beta'".into()))?;
            let gamma = s
                .gamma
                .ok_or_else(|| CliError::Invalid("missing 'gamma'".into()))?;
            let params = AggParams::new(
                beta,
                gamma,
                s.rho.unwrap_or(0.0),
                s.alpha.unwrap_or(0.0),
                s.beta_r.unwrap_or(0.0),
                s.n.unwrap_or(1.0),
            )?;
            println!("R0 = {:.12}", r0_aggregated(&params));
            println!("r_inf = {:.12}", params.r_inf());
        }
        ModelKind::Net => {
            let params = s.net_params()?;
            println!("R0 = {:.12}", r0_network(&params)?);
        }
    }
    Ok(())
}
