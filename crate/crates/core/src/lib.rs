//! Simulation and calibration of the aggregated spatial SIR ("pSIR")
//! epidemic model and of the metapopulation network model it summarises.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: aggregated-model parameters, state and right-hand side;
//!   the saturation function and the final-size equation.
//! - [`network`]: districts coupled through a row-stochastic mobility matrix.
//! - [`reproduction`]: next-generation reproduction numbers.
//! - [`integrator`]: fixed-step RK4 and adaptive Dormand–Prince integration.
//! - [`lm`] and [`calibration`]: Levenberg–Marquardt fitting of model
//!   parameters to prevalence or daily-incidence series.
//! - [`dataio`] and [`svg`]: case-series ingestion, smoothing, CSV export
//!   and line charts.
//!
//! The guide in `book/` walks through each piece; its code listings are
//! compiled and run as doc-tests of this crate.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod dataio;
pub mod error;
pub mod integrator;
pub mod lm;
pub mod model;
pub mod network;
pub mod reproduction;
pub mod svg;

pub use calibration::{
    fit, residuals, simulate_observable, FitParam, FitProblem, FitResult, ModelValues, Observable,
    Transform,
};
pub use dataio::{
    export_trajectory, load_case_series, moving_average, normalize_cases, TimeSeries,
};
pub use error::{Error, Result};
pub use integrator::{integrate, sample_at, IntegratorConfig, Method, Trajectory};
pub use model::{agg_rhs, make_agg_initial, saturation, solve_r_infty, AggParams, AggState};
pub use network::{chain_mobility, effective_infected, net_rhs, NetParams, NetState};
pub use reproduction::{next_gen_r0, r0_aggregated, r0_network, spectral_radius};
pub use svg::render_svg;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/aggregated-model.md")]
mod book_aggregated_model {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/network-model.md")]
mod book_network_model {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/reproduction.md")]
mod book_reproduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/integration.md")]
mod book_integration {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/calibration.md")]
mod book_calibration {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/data-pipeline.md")]
mod book_data_pipeline {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}
