//! Basic reproduction numbers via the next-generation matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::AggParams;
use crate::network::NetParams;

const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 10_000;

/// Dominant eigenvalue magnitude of a non-negative square matrix, by power
/// iteration from the all-ones vector.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::domain(format!(
            "spectral radius needs a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = m.nrows();
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut lambda = f64::NAN;
    for _ in 0..POWER_MAX_ITER {
        let y = m * &x;
        let norm = y.iter().map(|v| v.abs()).sum::<f64>();
        if !norm.is_finite() {
            return Err(Error::numeric(
                "power iteration produced a non-finite vector",
            ));
        }
        if norm == 0.0 {
            // Nilpotent on the starting vector.
            return Ok(0.0);
        }
        let next = y / norm;
        let step = (&next - &x).amax();
        let settled = (norm - lambda).abs() <= POWER_TOL * norm && step <= POWER_TOL * next.amax();
        lambda = norm;
        x = next;
        if settled {
            return Ok(lambda);
        }
    }
    Err(Error::numeric(format!(
        "power iteration did not converge in {POWER_MAX_ITER} iterations (last estimate {lambda})"
    )))
}

/// `ρ(F·V⁻¹)` for new-infection matrix `F` and transition matrix `V`.
pub fn next_gen_r0(f: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<f64> {
    if f.shape() != v.shape() || !f.is_square() {
        return Err(Error::domain(format!(
            "F is {:?} and V is {:?}; both must be the same square shape",
            f.shape(),
            v.shape()
        )));
    }
    let v_inv = v
        .clone()
        .try_inverse()
        .filter(|inv| inv.iter().all(|x| x.is_finite()))
        .ok_or_else(|| Error::domain("V is singular"))?;
    spectral_radius(&(f * v_inv))
}

/// Reproduction number of the aggregated model, `β/γ`.
pub fn r0_aggregated(params: &AggParams) -> f64 {
    params.beta() / params.gamma()
}

/// Next-generation matrices of the network model at the disease-free
/// equilibrium, where `S_i = N_i`: `F = β·Pᵀ`, `V = γ·I`.
pub fn network_next_gen_matrices(params: &NetParams) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = params.districts();
    let f = params.mobility().transpose() * params.beta();
    let v = DMatrix::identity(d, d) * params.gamma();
    (f, v)
}

/// Reproduction number of the network model, computed as `ρ(F·V⁻¹)`.
///
/// For row-stochastic mobility this is `β/γ`, but it is evaluated the long
/// way so that identity can be checked.
pub fn r0_network(params: &NetParams) -> Result<f64> {
    let (f, v) = network_next_gen_matrices(params);
    next_gen_r0(&f, &v)
}
