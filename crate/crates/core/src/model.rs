//! The aggregated spatial SIR model.
//!
//! The population is split by the status of the district people live in:
//! `p_S` lives where the epidemic has not arrived, `p_I = S + I + R` where it
//! is active, and `p_R` where it has already passed. Inside the active
//! region a modified SIR model runs, fed by arrivals from `p_S` and drained
//! towards `p_R` once districts reach herd immunity.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Relative population below which the active region is treated as empty.
const ACTIVE_REGION_FLOOR: f64 = 1e-12;

const R_INFTY_LOWER: f64 = 1e-9;
const R_INFTY_TOL: f64 = 1e-14;

/// Smooth saturation `(2/π)·atan((π/2)·x)`.
///
/// Behaves like `x` near the origin and approaches 1 for large arguments.
///
/// ```
/// assert_eq!(psir::saturation(0.0), 0.0);
/// assert!(psir::saturation(1e6) < 1.0);
/// ```
pub fn saturation(x: f64) -> f64 {
    (FRAC_PI_2 * x).atan() / FRAC_PI_2
}

/// Final attack fraction of a single SIR outbreak: the root in `[0, 1)` of
/// `r = 1 − exp(−r0·r)`.
///
/// Returns 0 when `r0 ≤ 1`; otherwise bisects on `[1e-9, 1]` down to an
/// interval width of `1e-14`.
pub fn solve_r_infty(r0: f64) -> f64 {
    if !(r0 > 1.0) {
        return 0.0;
    }
    let g = |r: f64| r - 1.0 + (-r0 * r).exp();
    // g < 0 just above zero when r0 > 1, and g(1) = exp(-r0) > 0.
    let (mut lo, mut hi) = (R_INFTY_LOWER, 1.0);
    if g(lo) >= 0.0 {
        // r0 so close to 1 that the root sits below the bracket.
        return lo;
    }
    while hi - lo > R_INFTY_TOL {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Parameters of the aggregated model.
///
/// `r_inf` and `s_inf` are derived from `beta / gamma` whenever either rate
/// is set, so they can never drift out of sync with the transmission rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggParams {
    beta: f64,
    gamma: f64,
    rho: f64,
    alpha: f64,
    beta_r: f64,
    n: f64,
    r_inf: f64,
    s_inf: f64,
}

impl AggParams {
    pub fn new(beta: f64, gamma: f64, rho: f64, alpha: f64, beta_r: f64, n: f64) -> Result<Self> {
        for (name, v) in [
            ("beta", beta),
            ("gamma", gamma),
            ("rho", rho),
            ("alpha", alpha),
            ("beta_R", beta_r),
            ("N", n),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::domain(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if gamma <= 0.0 {
            return Err(Error::domain("gamma must be positive"));
        }
        if n <= 0.0 {
            return Err(Error::domain("N must be positive"));
        }
        let r_inf = solve_r_infty(beta / gamma);
        Ok(AggParams {
            beta,
            gamma,
            rho,
            alpha,
            beta_r,
            n,
            r_inf,
            s_inf: 1.0 - r_inf,
        })
    }

    pub fn with_beta(self, beta: f64) -> Result<Self> {
        Self::new(beta, self.gamma, self.rho, self.alpha, self.beta_r, self.n)
    }

    pub fn with_gamma(self, gamma: f64) -> Result<Self> {
        Self::new(self.beta, gamma, self.rho, self.alpha, self.beta_r, self.n)
    }

    pub fn with_spatial(self, rho: f64, alpha: f64, beta_r: f64) -> Result<Self> {
        Self::new(self.beta, self.gamma, rho, alpha, beta_r, self.n)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta_r(&self) -> f64 {
        self.beta_r
    }
    pub fn population(&self) -> f64 {
        self.n
    }
    pub fn r_inf(&self) -> f64 {
        self.r_inf
    }
    pub fn s_inf(&self) -> f64 {
        self.s_inf
    }
}

/// State of the aggregated model. `c` accumulates new infections since the
/// start of the run and is used only for incidence observables.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AggState {
    pub p_s: f64,
    pub s: f64,
    pub i: f64,
    pub r: f64,
    pub p_r: f64,
    pub c: f64,
}

impl AggState {
    /// Column names in the order of [`AggState::to_array`].
    pub const LABELS: [&'static str; 6] = ["p_S", "S", "I", "R", "p_R", "C"];

    /// Population of the active region, `S + I + R`.
    pub fn p_i(&self) -> f64 {
        self.s + self.i + self.r
    }

    /// `p_S + p_I + p_R`; equals `N` along exact trajectories.
    pub fn total(&self) -> f64 {
        self.p_s + self.s + self.i + self.r + self.p_r
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.p_s, self.s, self.i, self.r, self.p_r, self.c]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        AggState {
            p_s: y[0],
            s: y[1],
            i: y[2],
            r: y[3],
            p_r: y[4],
            c: y[5],
        }
    }
}

/// Initial state with the epidemic active in a region of size `p_i0`
/// containing `i0` infected people.
pub fn make_agg_initial(n: f64, i0: f64, p_i0: f64) -> Result<AggState> {
    if !(i0 > 0.0) {
        return Err(Error::domain(format!("I0 must be positive, got {i0}")));
    }
    if !(i0 < p_i0) {
        return Err(Error::domain(format!(
            "I0 ({i0}) must be smaller than pI0 ({p_i0})"
        )));
    }
    if !(p_i0 <= n) {
        return Err(Error::domain(format!(
            "pI0 ({p_i0}) must not exceed N ({n})"
        )));
    }
    Ok(AggState {
        p_s: n - p_i0,
        s: p_i0 - i0,
        i: i0,
        r: 0.0,
        p_r: 0.0,
        c: i0,
    })
}

/// Time derivative of the aggregated model.
///
/// `dC/dt` counts only the infection flux `β·S·I/p_I`; arrivals from `p_S`
/// relabel susceptibles and are not new infections.
pub fn agg_rhs(state: &AggState, params: &AggParams) -> AggState {
    let mut dy = [0.0; 6];
    agg_rhs_slice(params, &state.to_array(), &mut dy);
    AggState::from_slice(&dy)
}

/// Slice form of [`agg_rhs`] used by the integrator. Layout is
/// `[p_S, S, I, R, p_R, C]`.
pub fn agg_rhs_slice(params: &AggParams, y: &[f64], dy: &mut [f64]) {
    let (p_s, s, i, r) = (y[0], y[1], y[2], y[3]);
    let p_i = s + i + r;

    let arrival = params.rho * i * saturation(params.alpha * p_s / params.n);
    let (infection, herd) = if p_i < ACTIVE_REGION_FLOOR * params.n {
        (0.0, 0.0)
    } else {
        (params.beta * s * i / p_i, params.beta_r * s * r / p_i)
    };
    let departure = herd / params.s_inf;

    dy[0] = -arrival;
    dy[1] = arrival - infection - herd;
    dy[2] = infection - params.gamma * i;
    dy[3] = params.gamma * i - params.r_inf * departure;
    dy[4] = departure;
    dy[5] = infection;
}

/// Classical single-population SIR right-hand side on `[S, I, R]` with
/// total population `n`.
pub fn sir_rhs(beta: f64, gamma: f64, n: f64, y: &[f64], dy: &mut [f64]) {
    let infection = if n > 0.0 { beta * y[0] * y[1] / n } else { 0.0 };
    dy[0] = -infection;
    dy[1] = infection - gamma * y[1];
    dy[2] = gamma * y[1];
}
