//! Metapopulation SIR: `D` districts coupled through a row-stochastic
//! mobility matrix, where entry `(i, j)` is the daily fraction of time a
//! resident of district `i` spends in district `j`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    beta: f64,
    gamma: f64,
    populations: DVector<f64>,
    mobility: DMatrix<f64>,
}

impl NetParams {
    pub fn new(
        beta: f64,
        gamma: f64,
        populations: DVector<f64>,
        mobility: DMatrix<f64>,
    ) -> Result<Self> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::domain(format!(
                "beta must be non-negative, got {beta}"
            )));
        }
        if !gamma.is_finite() || gamma <= 0.0 {
            return Err(Error::domain(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        validate_mobility(&mobility)?;
        if populations.len() != mobility.nrows() {
            return Err(Error::domain(format!(
                "{} populations given for a {}-district mobility matrix",
                populations.len(),
                mobility.nrows()
            )));
        }
        if let Some(bad) = populations.iter().find(|n| !(**n > 0.0) || !n.is_finite()) {
            return Err(Error::domain(format!(
                "district populations must be positive, got {bad}"
            )));
        }
        Ok(NetParams {
            beta,
            gamma,
            populations,
            mobility,
        })
    }

    /// `D` districts of equal size summing to `total`.
    pub fn uniform(beta: f64, gamma: f64, total: f64, mobility: DMatrix<f64>) -> Result<Self> {
        let d = mobility.nrows();
        Self::new(
            beta,
            gamma,
            DVector::from_element(d, total / d as f64),
            mobility,
        )
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn districts(&self) -> usize {
        self.populations.len()
    }
    pub fn populations(&self) -> &DVector<f64> {
        &self.populations
    }
    pub fn mobility(&self) -> &DMatrix<f64> {
        &self.mobility
    }
}

/// Checks that `m` is square, non-negative and row-stochastic.
pub fn validate_mobility(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() == 0 || !m.is_square() {
        return Err(Error::domain(format!(
            "mobility matrix must be square and non-empty, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    for (i, row) in m.row_iter().enumerate() {
        if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::domain(format!(
                "mobility row {} has a negative or non-finite entry",
                i + 1
            )));
        }
        let sum = row.sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::domain(format!(
                "mobility row {} sums to {sum}, not 1",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Per-district SIR state.
#[derive(Debug, Clone, PartialEq)]
pub struct NetState {
    pub s: DVector<f64>,
    pub i: DVector<f64>,
    pub r: DVector<f64>,
}

impl NetState {
    /// Fully susceptible districts, with `seed` people in `district`
    /// (zero-based) moved from S to I.
    pub fn seeded(params: &NetParams, district: usize, seed: f64) -> Result<Self> {
        let d = params.districts();
        if district >= d {
            return Err(Error::domain(format!(
                "seed district {} outside 1..={d}",
                district + 1
            )));
        }
        if !(seed > 0.0) || seed > params.populations[district] {
            return Err(Error::domain(format!(
                "seed size {seed} must be in (0, N_i]"
            )));
        }
        let mut s = params.populations.clone();
        let mut i = DVector::zeros(d);
        s[district] -= seed;
        i[district] = seed;
        Ok(NetState {
            s,
            i,
            r: DVector::zeros(d),
        })
    }

    pub fn districts(&self) -> usize {
        self.s.len()
    }

    /// Flattened `[S_1..S_D, I_1..I_D, R_1..R_D]`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.s
            .iter()
            .chain(self.i.iter())
            .chain(self.r.iter())
            .copied()
            .collect()
    }

    pub fn from_slice(y: &[f64]) -> Self {
        let d = y.len() / 3;
        NetState {
            s: DVector::from_column_slice(&y[..d]),
            i: DVector::from_column_slice(&y[d..2 * d]),
            r: DVector::from_column_slice(&y[2 * d..3 * d]),
        }
    }

    /// Column names matching [`NetState::to_vec`], districts numbered from 1.
    pub fn labels(d: usize) -> Vec<String> {
        ["S", "I", "R"]
            .iter()
            .flat_map(|c| (1..=d).map(move |k| format!("{c}{k}")))
            .collect()
    }
}

/// Tridiagonal mobility where residents spend a fraction `p` of their time in
/// each neighbouring district of a line of `d` districts.
pub fn chain_mobility(d: usize, p: f64) -> Result<DMatrix<f64>> {
    if d < 2 {
        return Err(Error::domain(format!(
            "chain needs at least 2 districts, got {d}"
        )));
    }
    if !(0.0..=0.5).contains(&p) {
        return Err(Error::domain(format!(
            "neighbour fraction p must be in [0, 0.5], got {p}"
        )));
    }
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        let mut stay = 1.0;
        if i > 0 {
            m[(i, i - 1)] = p;
            stay -= p;
        }
        if i + 1 < d {
            m[(i, i + 1)] = p;
            stay -= p;
        }
        m[(i, i)] = stay;
    }
    Ok(m)
}

/// Effective infected seen by each district: `Î_i = Σ_j P_ji · I_j`.
pub fn effective_infected(
    infected: &DVector<f64>,
    mobility: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    if mobility.nrows() != infected.len() || mobility.ncols() != infected.len() {
        return Err(Error::domain(format!(
            "mobility is {}x{} but {} districts were given",
            mobility.nrows(),
            mobility.ncols(),
            infected.len()
        )));
    }
    Ok(mobility.tr_mul(infected))
}

/// Time derivative of the metapopulation model.
pub fn net_rhs(state: &NetState, params: &NetParams) -> Result<NetState> {
    let y = state.to_vec();
    let mut dy = vec![0.0; y.len()];
    net_rhs_slice(params, &y, &mut dy)?;
    Ok(NetState::from_slice(&dy))
}

/// Slice form of [`net_rhs`] on the flattened `[S, I, R]` layout.
pub fn net_rhs_slice(params: &NetParams, y: &[f64], dy: &mut [f64]) -> Result<()> {
    let d = params.districts();
    if y.len() != 3 * d || dy.len() != 3 * d {
        return Err(Error::domain(format!(
            "state has length {}, expected {}",
            y.len(),
            3 * d
        )));
    }
    let (s, rest) = y.split_at(d);
    let i = &rest[..d];
    for k in 0..d {
        let hat: f64 = (0..d).map(|j| params.mobility[(j, k)] * i[j]).sum();
        let infection = params.beta * s[k] * hat / params.populations[k];
        let recovery = params.gamma * i[k];
        dy[k] = -infection;
        dy[d + k] = infection - recovery;
        dy[2 * d + k] = recovery;
    }
    Ok(())
}
