//! Explicit Runge–Kutta integration with linear dense output.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Classical fourth-order Runge–Kutta with a uniform step.
    FixedRk4 { dt: f64 },
    /// Dormand–Prince 5(4) embedded pair with PI step-size control.
    AdaptiveRk45 { rel_tol: f64, abs_tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig::rk4(0.05)
    }
}

impl IntegratorConfig {
    pub fn rk4(dt: f64) -> Self {
        IntegratorConfig {
            method: Method::FixedRk4 { dt },
            max_steps: 10_000_000,
        }
    }

    pub fn rk45(rel_tol: f64, abs_tol: f64) -> Self {
        IntegratorConfig {
            method: Method::AdaptiveRk45 { rel_tol, abs_tol },
            max_steps: 1_000_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.method {
            Method::FixedRk4 { dt } if !(dt > 0.0 && dt.is_finite()) => {
                return Err(Error::domain(format!("dt must be positive, got {dt}")));
            }
            Method::AdaptiveRk45 { rel_tol, abs_tol } if !(rel_tol > 0.0 && abs_tol > 0.0) => {
                return Err(Error::domain("tolerances must be positive"));
            }
            _ => {}
        }
        if self.max_steps == 0 {
            return Err(Error::domain("max_steps must be at least 1"));
        }
        Ok(())
    }
}

/// Sampled solution: strictly increasing times and one state row per time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<f64>,
    width: usize,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != states.len() || times.is_empty() {
            return Err(Error::domain(
                "trajectory needs one state row per time, at least one row",
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain(
                "trajectory times must be strictly increasing",
            ));
        }
        let width = states[0].len();
        if states.iter().any(|r| r.len() != width) {
            return Err(Error::domain("trajectory rows differ in width"));
        }
        Ok(Trajectory {
            times,
            states: states.into_iter().flatten().collect(),
            width,
        })
    }

    fn start(t0: f64, y0: &[f64]) -> Self {
        Trajectory {
            times: vec![t0],
            states: y0.to_vec(),
            width: y0.len(),
        }
    }

    fn push(&mut self, t: f64, y: &[f64]) {
        self.times.push(t);
        self.states.extend_from_slice(y);
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.states[k * self.width..(k + 1) * self.width]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.width.max(1))
    }

    pub fn last(&self) -> &[f64] {
        self.row(self.len() - 1)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t_end`, recording every step.
///
/// The returned trajectory starts at `t0` and ends at exactly `t_end`.
pub fn integrate<F>(
    mut rhs: F,
    y0: &[f64],
    t0: f64,
    t_end: f64,
    config: &IntegratorConfig,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    config.validate()?;
    if !(t_end > t0) {
        return Err(Error::domain(format!(
            "t_end ({t_end}) must exceed t0 ({t0})"
        )));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("initial state is not finite"));
    }
    match config.method {
        Method::FixedRk4 { dt } => rk4(&mut rhs, y0, t0, t_end, dt, config.max_steps),
        Method::AdaptiveRk45 { rel_tol, abs_tol } => {
            dopri5(&mut rhs, y0, t0, t_end, rel_tol, abs_tol, config.max_steps)
        }
    }
}

fn check_finite(t: f64, y: &[f64]) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::numeric(format!("non-finite state at t = {t}")))
    }
}

fn rk4<F>(
    rhs: &mut F,
    y0: &[f64],
    t0: f64,
    t_end: f64,
    dt: f64,
    max_steps: usize,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let span = t_end - t0;
    // Treat a remainder below this as round-off so no sliver step is taken.
    let steps = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
    if steps > max_steps {
        return Err(Error::numeric(format!(
            "{steps} steps of {dt} needed to reach t = {t_end}, cap is {max_steps}"
        )));
    }

    let mut traj = Trajectory::start(t0, y0);
    traj.times.reserve(steps);
    traj.states.reserve(steps * n);
    let mut y = y0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    );
    let mut t = t0;
    for k in 1..=steps {
        let t_next = if k == steps {
            t_end
        } else {
            t0 + k as f64 * dt
        };
        let h = t_next - t;

        rhs(t, &y, &mut k1);
        for j in 0..n {
            tmp[j] = y[j] + 0.5 * h * k1[j];
        }
        rhs(t + 0.5 * h, &tmp, &mut k2);
        for j in 0..n {
            tmp[j] = y[j] + 0.5 * h * k2[j];
        }
        rhs(t + 0.5 * h, &tmp, &mut k3);
        for j in 0..n {
            tmp[j] = y[j] + h * k3[j];
        }
        rhs(t + h, &tmp, &mut k4);
        for j in 0..n {
            y[j] += h / 6.0 * (k1[j] + 2.0 * (k2[j] + k3[j]) + k4[j]);
        }
        t = t_next;
        check_finite(t, &y)?;
        traj.push(t, &y);
    }
    Ok(traj)
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Fifth-order weights equal the last row of A (FSAL); E holds b5 - b4.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
// PI controller exponents (Hairer & Wanner, beta = 0.04 for DOPRI5).
const PI_ALPHA: f64 = 0.2 - 0.04 * 0.75;
const PI_BETA: f64 = 0.04;

fn dopri5<F>(
    rhs: &mut F,
    y0: &[f64],
    t0: f64,
    t_end: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_steps: usize,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut traj = Trajectory::start(t0, y0);
    let mut y = y0.to_vec();
    let mut k = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut t = t0;

    rhs(t, &y, &mut k[0]);
    let mut h = initial_step(&y, &k[0], t_end - t0, rel_tol, abs_tol);
    let mut err_prev: f64 = 1e-4;
    let mut rejected_last = false;

    for _ in 0..max_steps {
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        for s in 1..7 {
            for j in 0..n {
                let mut acc = 0.0;
                for (m, a) in A[s][..s].iter().enumerate() {
                    acc += a * k[m][j];
                }
                stage[j] = y[j] + h * acc;
            }
            rhs(t + C[s] * h, &stage, &mut k[s]);
            if s == 6 {
                y_new.copy_from_slice(&stage);
            }
        }

        let mut err_sq = 0.0;
        for j in 0..n {
            let mut e = 0.0;
            for (m, w) in E.iter().enumerate() {
                e += w * k[m][j];
            }
            let scale = abs_tol + rel_tol * y[j].abs().max(y_new[j].abs());
            err_sq += (h * e / scale).powi(2);
        }
        let err = (err_sq / n.max(1) as f64).sqrt();

        if !err.is_finite() {
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::numeric(format!("non-finite state at t = {t}")));
            }
            h *= MIN_FACTOR;
            rejected_last = true;
            continue;
        }

        if err <= 1.0 {
            t = if last { t_end } else { t + h };
            y.copy_from_slice(&y_new);
            check_finite(t, &y)?;
            traj.push(t, &y);
            if last {
                return Ok(traj);
            }
            k.swap(0, 6);

            let mut factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                SAFETY * err.powf(-PI_ALPHA) * err_prev.powf(PI_BETA)
            };
            factor = factor.clamp(MIN_FACTOR, MAX_FACTOR);
            if rejected_last {
                factor = factor.min(1.0);
            }
            h *= factor;
            err_prev = err.max(1e-4);
            rejected_last = false;
        } else {
            h *= (SAFETY * err.powf(-0.2)).max(MIN_FACTOR);
            rejected_last = true;
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::numeric(format!("step size underflow at t = {t}")));
        }
    }
    Err(Error::numeric(format!(
        "step cap of {max_steps} reached at t = {t} before t_end = {t_end}"
    )))
}

fn initial_step(y: &[f64], f: &[f64], span: f64, rel_tol: f64, abs_tol: f64) -> f64 {
    let (mut d0, mut d1) = (0.0_f64, 0.0_f64);
    for (yj, fj) in y.iter().zip(f) {
        let sc = abs_tol + rel_tol * yj.abs();
        d0 = d0.max((yj / sc).abs());
        d1 = d1.max((fj / sc).abs());
    }
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h.min(span)
}

/// Linearly interpolates the trajectory at each requested time.
///
/// Returns one row per requested time; stored nodes are reproduced exactly.
pub fn sample_at(traj: &Trajectory, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let ts = traj.times();
    let (first, last) = (ts[0], ts[ts.len() - 1]);
    times
        .iter()
        .map(|&t| {
            if !(t >= first && t <= last) {
                return Err(Error::domain(format!(
                    "sample time {t} outside trajectory range [{first}, {last}]"
                )));
            }
            let hi = ts.partition_point(|&x| x < t);
            if ts[hi] == t {
                return Ok(traj.row(hi).to_vec());
            }
            let lo = hi - 1;
            let w = (t - ts[lo]) / (ts[hi] - ts[lo]);
            Ok(traj
                .row(lo)
                .iter()
                .zip(traj.row(hi))
                .map(|(a, b)| a + w * (b - a))
                .collect())
        })
        .collect()
}
