//! Additive exponential-smoothing filters with zero trend.
//!
//! Two forms are used: a level-only filter and a level-plus-seasonal filter
//! with period `m`. Both follow the one-step recursions
//! `l_t = l_{t-1} + alpha * e_t` and `s_t = s_{t-m} + gamma * e_t` with
//! `e_t = y_t - (l_{t-1} + s_{t-m})`, which makes level and season unit-root
//! states. Estimation minimizes the trace mean absolute error over a short
//! multi-step horizon.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::nelder_mead;

/// A fitted exponential-smoothing filter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EtsModel {
    pub alpha: f64,
    /// Seasonal smoothing; absent for the level-only form.
    pub gamma: Option<f64>,
    /// Seasonal period; absent for the level-only form.
    pub m: Option<usize>,
    /// Filtered level `l_1..l_T`.
    pub level_path: Vec<f64>,
    /// Filtered seasonal states `s_1..s_T` (state updated at `t`).
    pub seasonal_path: Option<Vec<f64>>,
    pub initial_level: f64,
    pub initial_seasonals: Vec<f64>,
    /// One-step innovations along the filter path.
    #[serde(skip)]
    pub innovations: Vec<f64>,
}

impl EtsModel {
    pub fn is_seasonal(&self) -> bool {
        self.m.is_some()
    }

    /// Level at the end of the sample.
    pub fn final_level(&self) -> f64 {
        *self.level_path.last().unwrap_or(&self.initial_level)
    }

    /// Seasonal state that applies `h` steps after the sample end
    /// (`s_{T+h-m*ceil(h/m)}` under the frozen seasonal cycle).
    pub fn seasonal_at(&self, h: usize) -> f64 {
        let (m, path) = match (self.m, &self.seasonal_path) {
            (Some(m), Some(p)) => (m, p),
            _ => return 0.0,
        };
        let t = path.len();
        let h1 = h.max(1);
        let wrap = h1.div_ceil(m);
        let idx = t as i64 + h1 as i64 - (wrap * m) as i64;
        if idx >= 1 {
            path[(idx - 1) as usize]
        } else {
            // Not enough filtered history; fall back to the initial cycle.
            let j = (idx - 1).rem_euclid(m as i64) as usize;
            self.initial_seasonals.get(j).copied().unwrap_or(0.0)
        }
    }

    /// Point forecasts for `1..=h` steps ahead: final level plus the last
    /// seasonal cycle repeated.
    pub fn forecast(&self, h: usize) -> Vec<f64> {
        let l = self.final_level();
        (1..=h).map(|j| l + self.seasonal_at(j)).collect()
    }
}

/// Initial states for a seasonal filter: level is the mean of the first
/// period; seasonals are per-slot means of the series after removing a
/// centered moving average of one period, normalized to sum to zero.
///
/// Detrending before the slot averages keeps level drift out of the
/// seasonal initials; with few cycles per period the filter never forgets
/// its initials, so drift-contaminated ones would persist into forecasts.
fn initial_states(y: &[f64], m: usize) -> (f64, Vec<f64>) {
    let n = y.len();
    let l0 = y[..m].iter().sum::<f64>() / m as f64;
    let half = m / 2;
    let mut slot_sum = vec![0.0f64; m];
    let mut slot_n = vec![0usize; m];
    if n >= 2 * half + 1 {
        for t in half..n - half {
            // Centered average over exactly one period (half-weighted end
            // points when the period is even), which removes the cycle.
            let trend = if m % 2 == 0 {
                let mut acc = 0.5 * (y[t - half] + y[t + half]);
                for v in &y[t - half + 1..t + half] {
                    acc += v;
                }
                acc / m as f64
            } else {
                y[t - half..=t + half].iter().sum::<f64>() / m as f64
            };
            slot_sum[t % m] += y[t] - trend;
            slot_n[t % m] += 1;
        }
    }
    if slot_n.iter().any(|&c| c == 0) {
        // Too short to detrend every slot; fall back to first-period
        // deviations.
        let mut s0: Vec<f64> = y[..m].iter().map(|v| v - l0).collect();
        let mean = s0.iter().sum::<f64>() / m as f64;
        for s in s0.iter_mut() {
            *s -= mean;
        }
        return (l0, s0);
    }
    let mut s0: Vec<f64> = slot_sum
        .iter()
        .zip(&slot_n)
        .map(|(s, &c)| s / c as f64)
        .collect();
    let mean = s0.iter().sum::<f64>() / m as f64;
    for s in s0.iter_mut() {
        *s -= mean;
    }
    (l0, s0)
}

/// Runs the filter at fixed parameters.
///
/// For the seasonal form (`gamma` and `m` both present) the series must be
/// longer than one period. The input may not contain missing values.
pub fn ets_filter(y: &[f64], alpha: f64, gamma: Option<f64>, m: Option<usize>) -> Result<EtsModel> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("series contains non-finite values"));
    }
    if y.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    match (gamma, m) {
        (Some(g), Some(m)) => {
            if y.len() <= m {
                return Err(Error::InsufficientData { needed: m + 1, got: y.len() });
            }
            let (l0, s0) = initial_states(y, m);
            let mut level = l0;
            let mut seasonal = s0.clone();
            let mut level_path = Vec::with_capacity(y.len());
            let mut seasonal_path = Vec::with_capacity(y.len());
            let mut innovations = Vec::with_capacity(y.len());
            for (t, &yt) in y.iter().enumerate() {
                let si = t % m; // s_{t-m} lives in slot t mod m
                let e = yt - (level + seasonal[si]);
                level += alpha * e;
                seasonal[si] += g * e;
                level_path.push(level);
                seasonal_path.push(seasonal[si]);
                innovations.push(e);
            }
            Ok(EtsModel {
                alpha,
                gamma: Some(g),
                m: Some(m),
                level_path,
                seasonal_path: Some(seasonal_path),
                initial_level: l0,
                initial_seasonals: s0,
                innovations,
            })
        }
        (None, None) => {
            let l0 = y[0];
            let mut level = l0;
            let mut level_path = Vec::with_capacity(y.len());
            let mut innovations = Vec::with_capacity(y.len());
            for &yt in y {
                let e = yt - level;
                level += alpha * e;
                level_path.push(level);
                innovations.push(e);
            }
            Ok(EtsModel {
                alpha,
                gamma: None,
                m: None,
                level_path,
                seasonal_path: None,
                initial_level: l0,
                initial_seasonals: Vec::new(),
                innovations,
            })
        }
        _ => Err(Error::invalid("gamma and m must be given together")),
    }
}

/// Trace mean absolute error: the sum over lead times `1..=h_ets` of the
/// in-sample mean absolute `j`-step forecast error, each mean taken over
/// `t = 1..=T-h_ets` with states frozen at `t`.
pub fn trace_mae(y: &[f64], alpha: f64, gamma: Option<f64>, m: Option<usize>, h_ets: usize) -> Result<f64> {
    if h_ets < 1 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    if y.len() <= h_ets {
        return Err(Error::InsufficientData { needed: h_ets + 1, got: y.len() });
    }
    let model = ets_filter(y, alpha, gamma, m)?;
    let t_max = y.len() - h_ets;
    let mut sums = vec![0.0f64; h_ets];
    match model.m {
        None => {
            for t in 0..t_max {
                let l = model.level_path[t];
                for (j, sum) in sums.iter_mut().enumerate() {
                    *sum += (y[t + 1 + j] - l).abs();
                }
            }
        }
        Some(m) => {
            let s_path = model.seasonal_path.as_ref().unwrap();
            // Seasonal state visible at time t for lead j: s_{t+j-m*ceil(j/m)}
            // (1-based); with h_ets <= m this is s_{t+j-m}.
            for t in 0..t_max {
                let l = model.level_path[t];
                for (j, sum) in sums.iter_mut().enumerate() {
                    let lead = j + 1;
                    let wrap = lead.div_ceil(m);
                    let idx = (t + 1) as i64 + lead as i64 - (wrap * m) as i64;
                    let s = if idx >= 1 {
                        s_path[(idx - 1) as usize]
                    } else {
                        let slot = (idx - 1).rem_euclid(m as i64) as usize;
                        model.initial_seasonals[slot]
                    };
                    *sum += (y[t + lead] - (l + s)).abs();
                }
            }
        }
    }
    Ok(sums.iter().map(|s| s / t_max as f64).sum())
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

const PARAM_FLOOR: f64 = 1e-4;

/// Fits the seasonal filter by trace-MAE minimization over `(alpha, gamma)`,
/// with a Nelder-Mead search on logit-transformed parameters from four
/// starting points.
pub fn fit_ets(y: &[f64], m: usize, h_ets: usize) -> Result<EtsModel> {
    if y.len() <= m.max(h_ets) {
        return Err(Error::InsufficientData {
            needed: m.max(h_ets) + 1,
            got: y.len(),
        });
    }
    let objective = |p: &[f64]| -> f64 {
        let a = logistic(p[0]);
        let g = logistic(p[1]);
        trace_mae(y, a, Some(g), Some(m), h_ets).unwrap_or(f64::INFINITY)
    };
    let starts = [(0.1, 0.05), (0.3, 0.05), (0.5, 0.2), (0.8, 0.2)];
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (a0, g0) in starts {
        let x0 = [logit(a0), logit(g0)];
        let (x, v) = nelder_mead(&objective, &x0, 0.5, 1e-9, 400);
        if best.as_ref().map(|(_, bv)| v < *bv).unwrap_or(true) {
            best = Some((x, v));
        }
    }
    let (x, _) = best.unwrap();
    let mut alpha = logistic(x[0]);
    let mut gamma = logistic(x[1]);
    if !(PARAM_FLOOR..=1.0 - PARAM_FLOOR).contains(&alpha) {
        log::warn!("alpha hit the boundary; clamped");
        alpha = alpha.clamp(PARAM_FLOOR, 1.0 - PARAM_FLOOR);
    }
    if !(PARAM_FLOOR..=1.0 - PARAM_FLOOR).contains(&gamma) {
        log::warn!("gamma hit the boundary; clamped");
        gamma = gamma.clamp(PARAM_FLOOR, 1.0 - PARAM_FLOOR);
    }
    ets_filter(y, alpha, Some(gamma), Some(m))
}

/// Fits the level-only filter by trace-MAE minimization over `alpha`.
pub fn fit_ets_level(y: &[f64], h_ets: usize) -> Result<EtsModel> {
    let objective = |p: &[f64]| -> f64 {
        let a = logistic(p[0]);
        trace_mae(y, a, None, None, h_ets).unwrap_or(f64::INFINITY)
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for a0 in [0.1, 0.3, 0.8] {
        let (x, v) = nelder_mead(&objective, &[logit(a0)], 0.5, 1e-9, 200);
        if best.as_ref().map(|(_, bv)| v < *bv).unwrap_or(true) {
            best = Some((x, v));
        }
    }
    let alpha = logistic(best.unwrap().0[0]).clamp(PARAM_FLOOR, 1.0 - PARAM_FLOOR);
    ets_filter(y, alpha, None, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn alpha_one_is_naive_filter() {
        let y = vec![3.0, 1.0, 4.0, 1.0, 5.0];
        let model = ets_filter(&y, 1.0, None, None).unwrap();
        assert_eq!(model.level_path, y);
    }

    #[test]
    fn constant_series_is_fixed_point() {
        let y = vec![2.5; 50];
        let model = ets_filter(&y, 0.3, None, None).unwrap();
        for (l, e) in model.level_path.iter().zip(&model.innovations) {
            assert!((l - 2.5).abs() < 1e-12);
            assert!(e.abs() < 1e-12);
        }
    }

    #[test]
    fn seasonal_filter_matches_stepwise_oracle() {
        // 12-point series, alpha=0.3, gamma=0.1, m=4: recompute the
        // initialization and recursion step by step with explicit state
        // bookkeeping.
        let y = vec![10.0, 12.0, 8.0, 9.0, 11.0, 13.0, 7.0, 10.0, 12.0, 14.0, 8.0, 11.0];
        let (alpha, gamma, m) = (0.3, 0.1, 4usize);
        let model = ets_filter(&y, alpha, Some(gamma), Some(m)).unwrap();

        // Initials: level = first-period mean; seasonals = per-slot means of
        // (y - centered one-period average), half-weighted ends for even m,
        // interior windows only, normalized to sum to zero.
        let l0 = (10.0 + 12.0 + 8.0 + 9.0) / 4.0;
        let mut slot_sum = [0.0f64; 4];
        let mut slot_n = [0usize; 4];
        for t in 2..y.len() - 2 {
            let trend = (0.5 * y[t - 2] + y[t - 1] + y[t] + y[t + 1] + 0.5 * y[t + 2]) / 4.0;
            slot_sum[t % 4] += y[t] - trend;
            slot_n[t % 4] += 1;
        }
        let mut s: Vec<f64> = (0..4).map(|j| slot_sum[j] / slot_n[j] as f64).collect();
        let s_mean = s.iter().sum::<f64>() / 4.0;
        for v in s.iter_mut() {
            *v -= s_mean;
        }
        for (a, b) in model.initial_seasonals.iter().zip(&s) {
            assert!((a - b).abs() < 1e-12, "initial seasonals");
        }

        let mut l = l0;
        for t in 0..y.len() {
            let e = y[t] - (l + s[t % 4]);
            l += alpha * e;
            s[t % 4] += gamma * e;
            assert!((model.level_path[t] - l).abs() < 1e-12, "level at {t}");
            assert!(
                (model.seasonal_path.as_ref().unwrap()[t] - s[t % 4]).abs() < 1e-12,
                "seasonal at {t}"
            );
        }
    }

    #[test]
    fn reconstruction_identity_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let y: Vec<f64> = (0..200)
            .map(|t| (t as f64 / 10.0).sin() * 3.0 + rng.gen_range(-1.0..1.0))
            .collect();
        let m = 12;
        let model = ets_filter(&y, 0.4, Some(0.2), Some(m)).unwrap();
        let s_path = model.seasonal_path.as_ref().unwrap();
        for t in 0..y.len() {
            let l_prev = if t == 0 { model.initial_level } else { model.level_path[t - 1] };
            let s_prev = if t < m {
                model.initial_seasonals[t % m]
            } else {
                s_path[t - m]
            };
            let recon = l_prev + s_prev + model.innovations[t];
            assert!((recon - y[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn level_differences_are_scaled_innovations() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let y: Vec<f64> = (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let alpha = 0.37;
        let model = ets_filter(&y, alpha, None, None).unwrap();
        for t in 1..y.len() {
            let dl = model.level_path[t] - model.level_path[t - 1];
            assert!((dl - alpha * model.innovations[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn tmae_of_exact_skeleton_is_zero() {
        // Deterministic skeleton: constant level plus a fixed cycle.
        let m = 4;
        let cycle = [1.0, -0.5, 0.25, -0.75];
        let y: Vec<f64> = (0..40).map(|t| 5.0 + cycle[t % m]).collect();
        let tmae = trace_mae(&y, 0.3, Some(0.1), Some(m), 3).unwrap();
        assert!(tmae < 1e-10, "got {tmae}");
    }

    #[test]
    fn tmae_h1_is_mean_abs_innovation() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let y: Vec<f64> = (0..60).map(|_| rng.gen_range(0.0..10.0)).collect();
        let model = ets_filter(&y, 0.25, None, None).unwrap();
        let tmae = trace_mae(&y, 0.25, None, None, 1).unwrap();
        // e_{t+1|t} = y_{t+1} - l_t = innovation at t+1.
        let expect: f64 = model.innovations[1..].iter().map(|e| e.abs()).sum::<f64>()
            / (y.len() - 1) as f64;
        assert!((tmae - expect).abs() < 1e-12);
    }

    #[test]
    fn tmae_matches_brute_force_multistep() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let m = 5;
        let y: Vec<f64> = (0..48)
            .map(|t| 3.0 * ((t % m) as f64) + rng.gen_range(-1.0..1.0))
            .collect();
        let (alpha, gamma, h) = (0.35, 0.15, 3usize);
        let tmae = trace_mae(&y, alpha, Some(gamma), Some(m), h).unwrap();

        // Brute force: refilter, then for each t roll the skeleton forward.
        let model = ets_filter(&y, alpha, Some(gamma), Some(m)).unwrap();
        let s_path = model.seasonal_path.as_ref().unwrap();
        let t_max = y.len() - h;
        let mut total = 0.0;
        for j in 1..=h {
            let mut acc = 0.0;
            for t in 1..=t_max {
                let l = model.level_path[t - 1];
                // 1-based index of the frozen seasonal state: t + j - m*ceil(j/m).
                let idx = t as i64 + j as i64 - (m as i64) * (j as i64 + m as i64 - 1).div_euclid(m as i64);
                let s = if idx >= 1 {
                    s_path[(idx - 1) as usize]
                } else {
                    model.initial_seasonals[((idx - 1).rem_euclid(m as i64)) as usize]
                };
                acc += (y[t - 1 + j] - (l + s)).abs();
            }
            total += acc / t_max as f64;
        }
        assert!((tmae - total).abs() < 1e-10, "{tmae} vs {total}");
    }

    #[test]
    fn forecast_is_flat_or_periodic() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let y: Vec<f64> = (0..90).map(|_| rng.gen_range(0.0..1.0)).collect();
        let level_only = ets_filter(&y, 0.2, None, None).unwrap();
        let f = level_only.forecast(10);
        for v in &f {
            assert_eq!(*v, level_only.final_level());
        }

        let m = 6;
        let seasonal = ets_filter(&y, 0.2, Some(0.1), Some(m)).unwrap();
        let f = seasonal.forecast(3 * m);
        for j in 0..m {
            assert!((f[j] - f[j + m]).abs() < 1e-12);
            assert!((f[j] - f[j + 2 * m]).abs() < 1e-12);
        }
        // One full period ahead equals the last fitted cycle plus the level.
        let s_path = seasonal.seasonal_path.as_ref().unwrap();
        let t = y.len();
        for j in 1..=m {
            let expect = seasonal.final_level() + s_path[t + j - m - 1];
            assert!((f[j - 1] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn recovers_simulated_parameters() {
        // Simulation-recovery: alpha=0.3, gamma=0.05, m=12, n=2000.
        let mut hits = 0;
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let m = 12;
            let (alpha, gamma) = (0.3, 0.05);
            let mut level = 10.0;
            let mut seasonal: Vec<f64> = (0..m)
                .map(|j| (j as f64 / m as f64 * std::f64::consts::TAU).sin())
                .collect();
            let mut y = Vec::with_capacity(2000);
            for t in 0..2000 {
                let e: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal);
                let obs = level + seasonal[t % m] + e;
                level += alpha * e;
                seasonal[t % m] += gamma * e;
                y.push(obs);
            }
            let model = fit_ets(&y, m, 6).unwrap();
            if (0.2..=0.4).contains(&model.alpha) {
                hits += 1;
            }
        }
        assert!(hits >= 8, "recovered alpha in range only {hits}/10 times");
    }

    #[test]
    fn white_noise_drives_alpha_to_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(200);
        let y: Vec<f64> = (0..1500)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let model = fit_ets_level(&y, 8).unwrap();
        assert!(model.alpha < 0.1, "alpha = {}", model.alpha);
    }

    #[test]
    fn seasonal_needs_more_than_one_period() {
        let y = vec![1.0; 10];
        assert!(ets_filter(&y, 0.3, Some(0.1), Some(12)).is_err());
    }
}
