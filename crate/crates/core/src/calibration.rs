//! Least-squares calibration of the aggregated model against an observed
//! series.
//!
//! Free parameters are optimised in an unconstrained space: rates and the
//! connectivity scale through a logarithm, the initial active-region size
//! through a logit. `gamma` and the initial infected count stay fixed, and
//! `r_inf` is always re-derived from `beta / gamma`.

use std::fmt;
use std::str::FromStr;

use crate::dataio::TimeSeries;
use crate::error::{Error, Result};
use crate::integrator::{integrate, sample_at, IntegratorConfig};
use crate::lm::{self, LmOptions, Termination};
use crate::model::{agg_rhs_slice, make_agg_initial, AggParams};

/// Parameters that may be freed in a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FitParam {
    Rho,
    BetaR,
    Alpha,
    Beta,
    /// Initial size of the active region, `p_I(0)`.
    PI0,
}

impl FitParam {
    pub const ALL: [FitParam; 5] = [
        FitParam::Rho,
        FitParam::BetaR,
        FitParam::Alpha,
        FitParam::Beta,
        FitParam::PI0,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FitParam::Rho => "rho",
            FitParam::BetaR => "beta_R",
            FitParam::Alpha => "alpha",
            FitParam::Beta => "beta",
            FitParam::PI0 => "pI0",
        }
    }

    pub fn transform(self) -> Transform {
        match self {
            FitParam::PI0 => Transform::Logit,
            _ => Transform::Log,
        }
    }

    /// Starting value used when the caller supplies none.
    pub fn default_init(self) -> f64 {
        match self {
            FitParam::Rho => 1.0,
            FitParam::BetaR => 0.1,
            FitParam::Alpha => 10.0,
            FitParam::Beta => 0.3,
            FitParam::PI0 => 0.2,
        }
    }
}

impl fmt::Display for FitParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FitParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FitParam::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::Validation(format!(
                    "unknown free parameter '{s}' (expected one of rho, beta_R, alpha, beta, pI0)"
                ))
            })
    }
}

/// Bijection between a parameter's natural domain and the real line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    /// `(0, ∞) ↔ ℝ`
    Log,
    /// `(0, 1) ↔ ℝ`
    Logit,
}

impl Transform {
    pub fn to_unconstrained(self, x: f64) -> f64 {
        match self {
            Transform::Log => x.ln(),
            Transform::Logit => (x / (1.0 - x)).ln(),
        }
    }

    pub fn to_natural(self, theta: f64) -> f64 {
        match self {
            Transform::Log => theta.exp(),
            Transform::Logit => {
                // Evaluated on the side that avoids overflow in exp.
                if theta >= 0.0 {
                    1.0 / (1.0 + (-theta).exp())
                } else {
                    let e = theta.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    pub fn in_domain(self, x: f64) -> bool {
        match self {
            Transform::Log => x > 0.0 && x.is_finite(),
            Transform::Logit => x > 0.0 && x < 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    /// Infected count `I(t)`.
    Prevalence,
    /// New infections per day, `C(t) − C(t − 1)`.
    DailyIncidence,
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "prevalence" => Ok(Observable::Prevalence),
            "daily-incidence" | "incidence" => Ok(Observable::DailyIncidence),
            other => Err(Error::Validation(format!(
                "unknown observable '{other}' (expected prevalence or daily-incidence)"
            ))),
        }
    }
}

/// Full set of scenario values: model rates plus initial conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelValues {
    pub beta: f64,
    pub gamma: f64,
    pub rho: f64,
    pub alpha: f64,
    pub beta_r: f64,
    /// Initial active-region population `p_I(0)`.
    pub p_i0: f64,
    /// Initial infected `I(0)`.
    pub i0: f64,
    pub n: f64,
}

impl ModelValues {
    /// Aggregated-model fit to the 10-district chain metapopulation.
    pub const METAPOP_FIT: ModelValues = ModelValues {
        beta: 1.0,
        gamma: 0.5,
        rho: 0.657,
        alpha: 32.81,
        beta_r: 0.152,
        p_i0: 0.105,
        i0: 1e-6,
        n: 1.0,
    };

    /// Aggregated-model fit to Argentina's first COVID-19 wave (2020).
    pub const ARGENTINA_FIT: ModelValues = ModelValues {
        beta: 0.2118,
        gamma: 0.1667,
        rho: 0.8026,
        alpha: 242.4,
        beta_r: 0.01911,
        p_i0: 0.1796,
        i0: 1.43e-4,
        n: 1.0,
    };

    pub fn get(&self, p: FitParam) -> f64 {
        match p {
            FitParam::Rho => self.rho,
            FitParam::BetaR => self.beta_r,
            FitParam::Alpha => self.alpha,
            FitParam::Beta => self.beta,
            FitParam::PI0 => self.p_i0,
        }
    }

    pub fn set(&mut self, p: FitParam, v: f64) {
        match p {
            FitParam::Rho => self.rho = v,
            FitParam::BetaR => self.beta_r = v,
            FitParam::Alpha => self.alpha = v,
            FitParam::Beta => self.beta = v,
            FitParam::PI0 => self.p_i0 = v,
        }
    }

    pub fn agg_params(&self) -> Result<AggParams> {
        AggParams::new(
            self.beta,
            self.gamma,
            self.rho,
            self.alpha,
            self.beta_r,
            self.n,
        )
    }

    /// Simulates `observable` on `times` with these values.
    pub fn simulate(
        &self,
        times: &[f64],
        observable: Observable,
        config: &IntegratorConfig,
    ) -> Result<Vec<f64>> {
        simulate_observable(
            &self.agg_params()?,
            self.p_i0,
            self.i0,
            times,
            observable,
            config,
        )
    }
}

/// Simulates the aggregated model from `make_agg_initial(N, i0, p_i0)` and
/// returns the requested observable at `times`.
///
/// Prevalence starts integration at `times[0]`. Daily incidence starts one
/// day earlier so that the first value `C(t₀) − C(t₀ − 1)` is defined.
pub fn simulate_observable(
    params: &AggParams,
    p_i0: f64,
    i0: f64,
    times: &[f64],
    observable: Observable,
    config: &IntegratorConfig,
) -> Result<Vec<f64>> {
    let y0 = make_agg_initial(params.population(), i0, p_i0)?;
    let (first, last) = match (times.first(), times.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Err(Error::domain("no sample times requested")),
    };
    let start = match observable {
        Observable::Prevalence => first,
        Observable::DailyIncidence => first - 1.0,
    };
    // A single-time prevalence request still needs a non-empty span.
    let end = if last > start { last } else { start + 1.0 };
    let traj = integrate(
        |_, y: &[f64], dy: &mut [f64]| agg_rhs_slice(params, y, dy),
        &y0.to_array(),
        start,
        end,
        config,
    )?;
    match observable {
        Observable::Prevalence => Ok(sample_at(&traj, times)?.into_iter().map(|r| r[2]).collect()),
        Observable::DailyIncidence => {
            let earlier: Vec<f64> = times.iter().map(|t| t - 1.0).collect();
            let now = sample_at(&traj, times)?;
            let before = sample_at(&traj, &earlier)?;
            Ok(now.iter().zip(&before).map(|(a, b)| a[5] - b[5]).collect())
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitProblem {
    observed: TimeSeries,
    observable: Observable,
    free: Vec<FitParam>,
    base: ModelValues,
    init: Vec<f64>,
    pub integrator: IntegratorConfig,
    pub options: LmOptions,
}

impl FitProblem {
    /// `base` supplies every fixed value; entries for free parameters are
    /// replaced by `init` (one value per free parameter, same order).
    pub fn new(
        observed: TimeSeries,
        observable: Observable,
        free: Vec<FitParam>,
        base: ModelValues,
        init: Vec<f64>,
    ) -> Result<Self> {
        if observed.is_empty() {
            return Err(Error::Validation("observed series is empty".into()));
        }
        if free.is_empty() {
            return Err(Error::Validation("no free parameters".into()));
        }
        for (k, p) in free.iter().enumerate() {
            if free[..k].contains(p) {
                return Err(Error::Validation(format!("parameter {p} listed twice")));
            }
        }
        if init.len() != free.len() {
            return Err(Error::Validation(format!(
                "{} initial values for {} free parameters",
                init.len(),
                free.len()
            )));
        }
        for (p, v) in free.iter().zip(&init) {
            let natural = if *p == FitParam::PI0 { v / base.n } else { *v };
            if !p.transform().in_domain(natural) {
                return Err(Error::Validation(format!(
                    "initial {p} = {v} is outside its domain"
                )));
            }
        }
        base.agg_params()?;
        Ok(FitProblem {
            observed,
            observable,
            free,
            base,
            init,
            integrator: IntegratorConfig::default(),
            options: LmOptions::default(),
        })
    }

    /// Like [`FitProblem::new`] with the documented default starting values.
    pub fn with_default_init(
        observed: TimeSeries,
        observable: Observable,
        free: Vec<FitParam>,
        base: ModelValues,
    ) -> Result<Self> {
        let init = free
            .iter()
            .map(|p| p.default_init() * if *p == FitParam::PI0 { base.n } else { 1.0 })
            .collect();
        Self::new(observed, observable, free, base, init)
    }

    pub fn observed(&self) -> &TimeSeries {
        &self.observed
    }
    pub fn observable(&self) -> Observable {
        self.observable
    }
    pub fn free(&self) -> &[FitParam] {
        &self.free
    }
    pub fn init(&self) -> &[f64] {
        &self.init
    }
    pub fn base(&self) -> &ModelValues {
        &self.base
    }

    pub fn to_theta(&self, values: &ModelValues) -> Vec<f64> {
        self.free
            .iter()
            .map(|p| {
                let v = values.get(*p);
                let v = if *p == FitParam::PI0 { v / values.n } else { v };
                p.transform().to_unconstrained(v)
            })
            .collect()
    }

    pub fn from_theta(&self, theta: &[f64]) -> ModelValues {
        let mut values = self.base;
        for (p, th) in self.free.iter().zip(theta) {
            let v = p.transform().to_natural(*th);
            values.set(
                *p,
                if *p == FitParam::PI0 {
                    v * self.base.n
                } else {
                    v
                },
            );
        }
        values
    }

    pub fn initial_theta(&self) -> Vec<f64> {
        let mut start = self.base;
        for (p, v) in self.free.iter().zip(&self.init) {
            start.set(*p, *v);
        }
        self.to_theta(&start)
    }

    /// Model-minus-data residuals for the values `values`, without the
    /// failure penalty.
    pub fn residuals_at(&self, values: &ModelValues) -> Result<Vec<f64>> {
        let sim = values.simulate(self.observed.times(), self.observable, &self.integrator)?;
        let r: Vec<f64> = sim
            .iter()
            .zip(self.observed.values())
            .map(|(m, o)| m - o)
            .collect();
        if r.iter().all(|v| v.is_finite()) {
            Ok(r)
        } else {
            Err(Error::numeric("simulation produced non-finite values"))
        }
    }

    fn penalty(&self) -> Vec<f64> {
        let n = self.observed.len() as f64;
        let norm = self
            .observed
            .values()
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        let norm = if norm > 0.0 { norm } else { 1.0 };
        vec![1e6 * norm / n.sqrt(); self.observed.len()]
    }
}

/// Residual vector at unconstrained point `theta`. Any simulation failure is
/// mapped to a large constant residual so the optimiser stays total.
pub fn residuals(problem: &FitProblem, theta: &[f64]) -> Vec<f64> {
    if theta.len() != problem.free.len() || theta.iter().any(|v| !v.is_finite()) {
        return problem.penalty();
    }
    problem
        .residuals_at(&problem.from_theta(theta))
        .unwrap_or_else(|_| problem.penalty())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Fitted values in natural units; fixed entries are copied from the problem.
    pub params: ModelValues,
    pub free: Vec<FitParam>,
    pub sse: f64,
    pub rmse: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub residuals: Vec<f64>,
    /// SSE after each accepted step, starting with the initial point.
    pub sse_history: Vec<f64>,
}

impl FitResult {
    pub fn free_values(&self) -> Vec<(FitParam, f64)> {
        self.free
            .iter()
            .map(|p| (*p, self.params.get(*p)))
            .collect()
    }
}

/// Root-mean-square of a residual vector.
pub fn rmse(residuals: &[f64]) -> f64 {
    (lm::sum_squares(residuals) / residuals.len().max(1) as f64).sqrt()
}

/// Runs Levenberg–Marquardt on `problem` from its initial values.
///
/// Hitting the iteration cap or ending on a penalised point is reported as
/// `converged = false` together with the best point found.
pub fn fit(problem: &FitProblem) -> FitResult {
    let report = lm::minimize(
        |th: &[f64]| residuals(problem, th),
        &problem.initial_theta(),
        &problem.options,
    );
    let params = problem.from_theta(&report.x);
    let penalised = problem.residuals_at(&params).is_err();
    let converged = !penalised && report.termination != Termination::MaxIterations;
    FitResult {
        params,
        free: problem.free.clone(),
        sse: report.sse,
        rmse: rmse(&report.residuals),
        iterations: report.iterations,
        converged,
        termination: report.termination,
        residuals: report.residuals,
        sse_history: report.sse_history,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sir_rhs;
    use proptest::prelude::*;

    fn daily(n: usize) -> Vec<f64> {
        (0..n).map(|k| k as f64).collect()
    }

    #[test]
    fn parse_names() {
        assert_eq!("beta_R".parse::<FitParam>().unwrap(), FitParam::BetaR);
        assert_eq!("pi0".parse::<FitParam>().unwrap(), FitParam::PI0);
        assert!("gamma".parse::<FitParam>().is_err());
        assert_eq!(
            "daily-incidence".parse::<Observable>().unwrap(),
            Observable::DailyIncidence
        );
    }

    #[test]
    fn prevalence_reduces_to_sir() {
        let values = ModelValues {
            rho: 0.0,
            beta_r: 0.0,
            p_i0: 1.0,
            i0: 1e-3,
            ..ModelValues::METAPOP_FIT
        };
        let times = daily(40);
        let cfg = IntegratorConfig::rk4(0.01);
        let prev = values
            .simulate(&times, Observable::Prevalence, &cfg)
            .unwrap();
        let sir = integrate(
            |_, y: &[f64], dy: &mut [f64]| sir_rhs(1.0, 0.5, 1.0, y, dy),
            &[1.0 - 1e-3, 1e-3, 0.0],
            0.0,
            39.0,
            &cfg,
        )
        .unwrap();
        let sir_i: Vec<f64> = sample_at(&sir, &times)
            .unwrap()
            .iter()
            .map(|r| r[1])
            .collect();
        for (a, b) in prev.iter().zip(&sir_i) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn incidence_matches_cumulative_differences() {
        let times = daily(10);
        let cfg = IntegratorConfig::default();
        let inc = ModelValues::ARGENTINA_FIT
            .simulate(&times, Observable::DailyIncidence, &cfg)
            .unwrap();
        assert_eq!(inc.len(), 10);
        assert!(inc.iter().all(|v| *v > 0.0));
        // Early on, incidence is roughly beta * I.
        assert!(
            (inc[0] / (0.2118 * 1.43e-4) - 1.0).abs() < 0.2,
            "{}",
            inc[0]
        );
    }

    #[test]
    fn zero_initial_infected_rejected() {
        let values = ModelValues {
            i0: 0.0,
            ..ModelValues::METAPOP_FIT
        };
        assert!(values
            .simulate(
                &daily(5),
                Observable::Prevalence,
                &IntegratorConfig::default()
            )
            .is_err());
    }

    #[test]
    fn problem_validation() {
        let obs = TimeSeries::daily(vec![0.0; 5]);
        let base = ModelValues::METAPOP_FIT;
        assert!(
            FitProblem::new(obs.clone(), Observable::Prevalence, vec![], base, vec![]).is_err()
        );
        assert!(FitProblem::new(
            obs.clone(),
            Observable::Prevalence,
            vec![FitParam::Rho, FitParam::Rho],
            base,
            vec![1.0, 1.0]
        )
        .is_err());
        assert!(FitProblem::new(
            obs.clone(),
            Observable::Prevalence,
            vec![FitParam::Rho],
            base,
            vec![]
        )
        .is_err());
        assert!(FitProblem::new(
            obs.clone(),
            Observable::Prevalence,
            vec![FitParam::PI0],
            base,
            vec![1.5]
        )
        .is_err());
        assert!(FitProblem::new(
            obs,
            Observable::Prevalence,
            vec![FitParam::Rho],
            base,
            vec![-1.0]
        )
        .is_err());
    }

    #[test]
    fn self_consistent_residuals_and_perturbation() {
        let truth = ModelValues::METAPOP_FIT;
        let times = daily(120);
        let cfg = IntegratorConfig::default();
        let data = truth
            .simulate(&times, Observable::Prevalence, &cfg)
            .unwrap();
        let free = vec![
            FitParam::Rho,
            FitParam::BetaR,
            FitParam::Alpha,
            FitParam::PI0,
        ];
        let problem = FitProblem::with_default_init(
            TimeSeries::daily(data),
            Observable::Prevalence,
            free.clone(),
            truth,
        )
        .unwrap();
        let theta = problem.to_theta(&truth);
        let at_truth = lm::sum_squares(&residuals(&problem, &theta)).sqrt();
        assert!(at_truth <= 1e-8);
        for p in free {
            let mut moved = truth;
            moved.set(p, truth.get(p) * 1.1);
            let r = lm::sum_squares(&residuals(&problem, &problem.to_theta(&moved))).sqrt();
            assert!(r > at_truth, "{p}");
        }
    }

    #[test]
    fn failure_becomes_penalty() {
        let obs = TimeSeries::daily(vec![1.0, 2.0, 2.0]);
        let problem = FitProblem::with_default_init(
            obs,
            Observable::Prevalence,
            vec![FitParam::Rho],
            ModelValues::METAPOP_FIT,
        )
        .unwrap();
        let r = residuals(&problem, &[f64::NAN]);
        let norm = lm::sum_squares(&r).sqrt();
        assert!((norm / 3.0 - 1e6).abs() < 1e-3);
        // pI0 below I0 cannot build an initial state.
        let problem = FitProblem::with_default_init(
            TimeSeries::daily(vec![1.0, 2.0, 2.0]),
            Observable::Prevalence,
            vec![FitParam::PI0],
            ModelValues::METAPOP_FIT,
        )
        .unwrap();
        let r = residuals(&problem, &[-40.0]);
        assert_eq!(r, problem.penalty());
    }

    proptest! {
        #[test]
        fn log_round_trip(x in 1e-8f64..1e6) {
            let t = Transform::Log;
            prop_assert!((t.to_natural(t.to_unconstrained(x)) - x).abs() <= 1e-12 * x);
        }

        #[test]
        fn logit_round_trip(x in 1e-6f64..(1.0 - 1e-6)) {
            let t = Transform::Logit;
            prop_assert!((t.to_natural(t.to_unconstrained(x)) - x).abs() <= 1e-12);
        }

        #[test]
        fn logit_stays_inside_unit_interval(theta in -700.0f64..700.0) {
            let p = Transform::Logit.to_natural(theta);
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
