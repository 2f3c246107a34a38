//! Case-series ingestion, preprocessing and trajectory export.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::integrator::Trajectory;

/// Values on a strictly increasing time grid, in days.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Validation(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Validation(
                "series times must be strictly increasing".into(),
            ));
        }
        Ok(TimeSeries { times, values })
    }

    /// Series on the daily grid `0, 1, …, n−1`.
    pub fn daily(values: Vec<f64>) -> Self {
        let times = (0..values.len()).map(|k| k as f64).collect();
        TimeSeries { times, values }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> TimeSeries {
        TimeSeries {
            times: self.times.clone(),
            values: self.values.iter().copied().map(f).collect(),
        }
    }
}

enum DayKey {
    Index(f64),
    Date(NaiveDate),
}

fn parse_day(field: &str) -> Option<DayKey> {
    if let Ok(k) = field.parse::<i64>() {
        return Some(DayKey::Index(k as f64));
    }
    NaiveDate::parse_from_str(field, "%Y-%m-%d")
        .ok()
        .map(DayKey::Date)
}

/// Reads a `date_or_day,count` CSV. A header row is optional; dates are ISO
/// `YYYY-MM-DD` and become day offsets from the first row.
pub fn load_case_series(path: impl AsRef<Path>) -> Result<TimeSeries> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    parse_case_series(&text)
}

/// Parses the contents of a case-series CSV; see [`load_case_series`].
pub fn parse_case_series(text: &str) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut origin: Option<NaiveDate> = None;
    let mut uses_dates: Option<bool> = None;
    let (mut times, mut values) = (Vec::new(), Vec::new());

    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(idx + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 columns, found {}", record.len()),
            });
        }
        let (day_field, count_field) = (&record[0], &record[1]);
        let count = count_field.parse::<f64>();
        let day = parse_day(day_field);

        if times.is_empty() && uses_dates.is_none() && (count.is_err() || day.is_none()) && idx == 0
        {
            // Header row.
            continue;
        }
        let day = day.ok_or_else(|| Error::Parse {
            line,
            message: format!("'{day_field}' is neither a day index nor an ISO date"),
        })?;
        let count = count.map_err(|_| Error::Parse {
            line,
            message: format!("'{count_field}' is not a number"),
        })?;
        if !count.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("count '{count_field}' is not finite"),
            });
        }
        if count < 0.0 {
            return Err(Error::Validation(format!(
                "negative count {count} at line {line}"
            )));
        }

        let t = match day {
            DayKey::Index(k) => {
                if uses_dates == Some(true) {
                    return Err(Error::Parse {
                        line,
                        message: "mixes day indices with dates".into(),
                    });
                }
                uses_dates = Some(false);
                k
            }
            DayKey::Date(d) => {
                if uses_dates == Some(false) {
                    return Err(Error::Parse {
                        line,
                        message: "mixes dates with day indices".into(),
                    });
                }
                uses_dates = Some(true);
                let o = *origin.get_or_insert(d);
                (d - o).num_days() as f64
            }
        };
        if times.last().is_some_and(|&prev| t <= prev) {
            return Err(Error::Parse {
                line,
                message: format!("day {t} does not follow the previous row"),
            });
        }
        times.push(t);
        values.push(count);
    }

    if times.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no data rows".into(),
        });
    }
    if uses_dates == Some(false) {
        let first = times[0];
        times.iter_mut().for_each(|t| *t -= first);
    }
    TimeSeries::new(times, values)
}

/// Centered moving average of odd width `window`.
///
/// Near the ends the window shrinks symmetrically to the widest odd window
/// that fits, down to width 1 at the first and last samples.
pub fn moving_average(series: &TimeSeries, window: usize) -> Result<TimeSeries> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::domain(format!(
            "window must be odd and positive, got {window}"
        )));
    }
    let n = series.len();
    if window > n {
        return Err(Error::domain(format!(
            "window {window} longer than series of length {n}"
        )));
    }
    let half = window / 2;
    let v = series.values();
    let smoothed = (0..n)
        .map(|k| {
            let h = half.min(k).min(n - 1 - k);
            let slice = &v[k - h..=k + h];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect();
    Ok(TimeSeries {
        times: series.times.clone(),
        values: smoothed,
    })
}

/// Converts raw counts to fractions of a unit population, scaling up by
/// an under-detection factor: `v · detection / population`.
pub fn normalize_cases(
    series: &TimeSeries,
    population: f64,
    detection_factor: f64,
) -> Result<TimeSeries> {
    if !(population > 0.0) || !(detection_factor > 0.0) {
        return Err(Error::domain(
            "population and detection factor must be positive",
        ));
    }
    Ok(series.map_values(|v| v * detection_factor / population))
}

/// Renders a value with 17 significant digits, enough to round-trip any f64.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `t,<labels…>` followed by one row per stored time.
pub fn export_trajectory(
    traj: &Trajectory,
    labels: &[impl AsRef<str>],
    path: impl AsRef<Path>,
) -> Result<()> {
    if labels.len() != traj.width() {
        return Err(Error::domain(format!(
            "{} labels for a state of width {}",
            labels.len(),
            traj.width()
        )));
    }
    write_table(path, labels, traj.times(), traj.rows())
}

/// Writes a header `t,<labels…>` and numeric rows; shared by all CSV outputs.
pub fn write_table<'a>(
    path: impl AsRef<Path>,
    labels: &[impl AsRef<str>],
    times: &[f64],
    rows: impl Iterator<Item = &'a [f64]>,
) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    let mut header = String::from("t");
    for l in labels {
        header.push(',');
        header.push_str(l.as_ref());
    }
    writeln!(out, "{header}").map_err(io)?;
    for (t, row) in times.iter().zip(rows) {
        let mut line = format_f64(*t);
        for v in row {
            line.push(',');
            line.push_str(&format_f64(*v));
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Reads a file written by [`export_trajectory`], returning the labels
/// (without `t`) and the trajectory.
pub fn read_trajectory(path: impl AsRef<Path>) -> Result<(Vec<String>, Trajectory)> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        line: 0,
        message: format!("{}: {e}", path.display()),
    })?;
    let labels: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .skip(1)
        .map(str::to_owned)
        .collect();
    let (mut times, mut rows) = (Vec::new(), Vec::new());
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let nums = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
        times.push(nums[0]);
        rows.push(nums[1..].to_vec());
    }
    Ok((labels, Trajectory::new(times, rows)?))
}
