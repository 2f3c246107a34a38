//! Levenberg–Marquardt for small dense least-squares problems with a
//! finite-difference Jacobian.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    /// Forward-difference step per coordinate.
    pub fd_step: f64,
    pub initial_damping: f64,
    pub damping_up: f64,
    pub damping_down: f64,
    /// Relative SSE improvement regarded as no progress.
    pub sse_rtol: f64,
    /// Number of consecutive no-progress accepted steps before stopping.
    pub stall_steps: usize,
    pub gradient_tol: f64,
    pub max_iterations: usize,
    /// Scale damping by `diag(JᵀJ)` (Marquardt) instead of the identity.
    /// Off by default: on log/logit-transformed parameters the identity
    /// keeps weakly identified directions from running off to infinity.
    pub diagonal_scaling: bool,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            fd_step: 1e-6,
            initial_damping: 1e-3,
            damping_up: 10.0,
            damping_down: 10.0,
            sse_rtol: 1e-10,
            stall_steps: 3,
            gradient_tol: 1e-12,
            max_iterations: 500,
            diagonal_scaling: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Relative SSE improvement stayed below tolerance.
    SmallImprovement,
    SmallGradient,
    /// Residuals are exactly zero.
    ExactFit,
    /// No damped step reduced the SSE even at maximal damping.
    DampingExhausted,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmReport {
    pub x: Vec<f64>,
    pub residuals: Vec<f64>,
    pub sse: f64,
    /// Trial steps taken, accepted or not.
    pub iterations: usize,
    pub termination: Termination,
    /// SSE at the start point followed by the SSE after each accepted step.
    pub sse_history: Vec<f64>,
}

const MAX_DAMPING: f64 = 1e16;

pub fn sum_squares(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Forward-difference Jacobian, one column per coordinate of `x`.
///
/// Columns are evaluated in parallel and assembled in column order, so the
/// result does not depend on scheduling.
pub fn jacobian_forward<F>(f: &F, x: &[f64], fx: &[f64], step: f64) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    let cols: Vec<Vec<f64>> = (0..x.len())
        .into_par_iter()
        .map(|j| {
            let mut xp = x.to_vec();
            xp[j] += step;
            let h = xp[j] - x[j];
            f(&xp).iter().zip(fx).map(|(a, b)| (a - b) / h).collect()
        })
        .collect();
    columns_to_matrix(fx.len(), &cols)
}

/// Central-difference Jacobian; used to cross-check the forward version.
pub fn jacobian_central<F>(f: &F, x: &[f64], step: f64) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    let cols: Vec<Vec<f64>> = (0..x.len())
        .into_par_iter()
        .map(|j| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += step;
            xm[j] -= step;
            let h = xp[j] - xm[j];
            f(&xp)
                .iter()
                .zip(f(&xm))
                .map(|(a, b)| (a - b) / h)
                .collect()
        })
        .collect();
    let m = cols.first().map_or(0, Vec::len);
    columns_to_matrix(m, &cols)
}

fn columns_to_matrix(m: usize, cols: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(m, cols.len(), |i, j| cols[j][i])
}

/// Minimises `Σ r(x)²` starting from `x0`.
///
/// Steps solve `(JᵀJ + λ·D)·δ = −Jᵀr` with `D = I`, or `D = diag(JᵀJ)` when
/// [`LmOptions::diagonal_scaling`] is set. Accepted steps never increase
/// the SSE.
pub fn minimize<F>(f: F, x0: &[f64], opts: &LmOptions) -> LmReport
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    let mut x = x0.to_vec();
    let mut r = f(&x);
    let mut sse = sum_squares(&r);
    let mut history = vec![sse];
    let mut lambda = opts.initial_damping;
    let mut iterations = 0;
    let mut stalled = 0;

    let termination = 'outer: loop {
        if sse == 0.0 {
            break Termination::ExactFit;
        }
        let jac = jacobian_forward(&f, &x, &r, opts.fd_step);
        let jtj = jac.tr_mul(&jac);
        let grad = jac.tr_mul(&DVector::from_column_slice(&r));
        if grad.amax() < opts.gradient_tol {
            break Termination::SmallGradient;
        }
        let diag_floor = 1e-12 * jtj.diagonal().amax().max(f64::MIN_POSITIVE);

        loop {
            if iterations >= opts.max_iterations {
                break 'outer Termination::MaxIterations;
            }
            if lambda > MAX_DAMPING {
                break 'outer Termination::DampingExhausted;
            }
            iterations += 1;

            let mut lhs = jtj.clone();
            for k in 0..lhs.nrows() {
                let scale = if opts.diagonal_scaling {
                    jtj[(k, k)].max(diag_floor)
                } else {
                    1.0
                };
                lhs[(k, k)] += lambda * scale;
            }
            let step = match lhs.cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    lambda *= opts.damping_up;
                    continue;
                }
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + d).collect();
            let r_trial = f(&trial);
            let sse_trial = sum_squares(&r_trial);

            if sse_trial.is_finite() && sse_trial < sse {
                let improvement = (sse - sse_trial) / sse;
                x = trial;
                r = r_trial;
                sse = sse_trial;
                history.push(sse);
                lambda /= opts.damping_down;
                if improvement < opts.sse_rtol {
                    stalled += 1;
                    if stalled >= opts.stall_steps {
                        break 'outer Termination::SmallImprovement;
                    }
                } else {
                    stalled = 0;
                }
                break;
            }
            lambda *= opts.damping_up;
        }
    };

    LmReport {
        x,
        residuals: r,
        sse,
        iterations,
        termination,
        sse_history: history,
    }
}
