//! Reference models: seasonal random walks, the linear regression family,
//! the weekly-difference autoregression, a multi-seasonal decomposition
//! forecaster and a small feed-forward network.

mod fnn;
mod stl;
mod vanilla;

pub use fnn::{fnn_fit_forecast, FnnConfig};
pub use stl::{stl_fit_forecast, stl_decompose, StlComponents};
pub use vanilla::{vanilla_fit_forecast, VanillaVariant};

use serde::{Deserialize, Serialize};

use crate::ar::fit_ar;
use crate::calendar::CalendarRow;
use crate::error::{Error, Result};

/// The eight benchmark kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkKind {
    Srww,
    Srwa,
    VanDet,
    VanBas,
    VanRec,
    Arwd,
    Stl,
    Fnn,
}

impl BenchmarkKind {
    pub fn all() -> [BenchmarkKind; 8] {
        [
            BenchmarkKind::Srww,
            BenchmarkKind::Srwa,
            BenchmarkKind::VanDet,
            BenchmarkKind::VanBas,
            BenchmarkKind::VanRec,
            BenchmarkKind::Arwd,
            BenchmarkKind::Stl,
            BenchmarkKind::Fnn,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            BenchmarkKind::Srww => "srww",
            BenchmarkKind::Srwa => "srwa",
            BenchmarkKind::VanDet => "van_det",
            BenchmarkKind::VanBas => "van_bas",
            BenchmarkKind::VanRec => "van_rec",
            BenchmarkKind::Arwd => "arwd",
            BenchmarkKind::Stl => "stl",
            BenchmarkKind::Fnn => "fnn",
        }
    }
}

/// Shared inputs a benchmark may consume. Temperature slices span the
/// training range plus the horizon (forecast values appended); activation
/// slices likewise.
pub struct BenchmarkInputs<'a> {
    pub s: usize,
    /// Training load.
    pub y: &'a [f64],
    /// Calendar rows for the training range plus the horizon.
    pub cal: &'a [CalendarRow],
    pub temp_actual: Option<&'a [f64]>,
    pub temp1: Option<&'a [f64]>,
    pub temp2: Option<&'a [f64]>,
    pub hldp: &'a [f64],
    pub hldw_max: &'a [f64],
    pub hldf_max: &'a [f64],
    pub horizon: usize,
}

#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub seed: u64,
    /// Weekly-difference model maximum order; `None` uses `8 * 7 * S`.
    pub arwd_p_max: Option<usize>,
    pub fnn: FnnConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            seed: 1,
            arwd_p_max: None,
            fnn: FnnConfig::default(),
        }
    }
}

/// Seasonal random walk: repeats the last observed cycle of length `m`.
pub fn srw_forecast(y: &[f64], m: usize, h: usize) -> Result<Vec<f64>> {
    if y.len() < m {
        return Err(Error::InsufficientData { needed: m, got: y.len() });
    }
    let last_cycle = &y[y.len() - m..];
    Ok((0..h).map(|j| last_cycle[j % m]).collect())
}

/// Weekly-profile autoregression: subtract the hour-of-week sample mean,
/// fit an AIC-selected autoregression on the anomaly, forecast profile plus
/// anomaly forecast.
pub fn arwd_fit_forecast(
    y: &[f64],
    cal: &[CalendarRow],
    s: usize,
    p_max: usize,
    h: usize,
) -> Result<Vec<f64>> {
    let n = y.len();
    if n < 2 * 7 * s {
        return Err(Error::InsufficientData { needed: 2 * 7 * s, got: n });
    }
    let mut sums = vec![0.0f64; 7 * s];
    let mut counts = vec![0usize; 7 * s];
    for t in 0..n {
        let slot = cal[t].how as usize;
        sums[slot] += y[t];
        counts[slot] += 1;
    }
    let profile: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let anomaly: Vec<f64> = (0..n).map(|t| y[t] - profile[cal[t].how as usize]).collect();
    let model = fit_ar(&anomaly, p_max.min(n / 4))?;
    let ar_fc = model.forecast(&anomaly, h)?;
    Ok((0..h)
        .map(|j| profile[cal[n + j].how as usize] + ar_fc[j])
        .collect())
}

/// Runs one benchmark.
pub fn forecast(kind: BenchmarkKind, inputs: &BenchmarkInputs, cfg: &BenchmarkConfig) -> Result<Vec<f64>> {
    let s = inputs.s;
    let h = inputs.horizon;
    match kind {
        BenchmarkKind::Srww => srw_forecast(inputs.y, 7 * s, h),
        BenchmarkKind::Srwa => srw_forecast(inputs.y, 365 * s, h),
        BenchmarkKind::VanDet => vanilla_fit_forecast(VanillaVariant::Deterministic, inputs),
        BenchmarkKind::VanBas => vanilla_fit_forecast(VanillaVariant::Basic, inputs),
        BenchmarkKind::VanRec => vanilla_fit_forecast(VanillaVariant::Recency, inputs),
        BenchmarkKind::Arwd => {
            arwd_fit_forecast(inputs.y, inputs.cal, s, cfg.arwd_p_max.unwrap_or(8 * 7 * s), h)
        }
        BenchmarkKind::Stl => stl_fit_forecast(inputs.y, s, h),
        BenchmarkKind::Fnn => fnn_fit_forecast(inputs, &cfg.fnn, cfg.seed),
    }
}
