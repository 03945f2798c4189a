//! Mid-term hourly electricity load forecasting.
//!
//! The crate implements a two-stage additive model built from penalized
//! B-splines: exponentially smoothed temperatures and deterministic calendar,
//! holiday and impact covariates feed a first additive fit; its residuals are
//! aggregated to weekly peak-hour averages and filtered by a seasonal
//! exponential-smoothing model to extract slowly varying level and seasonal
//! states; a second additive fit adds the states as varying-coefficient
//! inputs, and an autoregressive model on the remaining residuals captures
//! short-range dependence. Forecasts over horizons up to a year combine the
//! additive prediction with the decaying autoregressive component.
//!
//! Alongside the main model the crate ships eight reference models, a
//! rolling-origin evaluation harness with Diebold-Mariano testing, CSV
//! ingestion with data-quality screens, and a synthetic data generator so
//! the whole stack can be exercised without external data.

pub mod ar;
pub mod benchmarks;
pub mod calendar;
pub mod error;
pub mod ets;
pub mod evaluation;
pub mod gam;
pub mod io;
pub mod pipeline;
pub mod preprocess;
pub mod splines;
pub mod synth;
pub mod timeseries;

mod linalg;
mod optimize;

pub use error::{Error, Result};
pub use timeseries::TimeSeries;
