//! Seasonal-trend decomposition with locally weighted regression, applied
//! sequentially at the daily, weekly and annual periods, with exponential
//! smoothing of the seasonally adjusted remainder for forecasting.

use crate::error::{Error, Result};
use crate::optimize::nelder_mead;

/// Locally weighted linear regression on an index grid, evaluated every
/// `jump` points and linearly interpolated in between. `span` is the window
/// width in points (made odd); `rw` are optional robustness weights.
fn loess(y: &[f64], span: usize, jump: usize, rw: Option<&[f64]>) -> Vec<f64> {
    let n = y.len();
    if n == 0 {
        return Vec::new();
    }
    let span = span.clamp(3, n.max(3)) | 1; // odd
    let half = span / 2;
    let jump = jump.max(1);

    let fit_at = |x0: usize| -> f64 {
        let lo = x0.saturating_sub(half);
        let hi = (x0 + half + 1).min(n);
        let lo = if hi == n { n.saturating_sub(span) } else { lo };
        let hi = (lo + span).min(n);
        let radius = ((x0 as f64 - lo as f64).max(hi as f64 - 1.0 - x0 as f64)).max(1.0);
        let (mut sw, mut swx, mut swx2, mut swy, mut swxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (i, &yi) in y.iter().enumerate().take(hi).skip(lo) {
            let d = ((i as f64 - x0 as f64) / radius).abs().min(1.0);
            let tric = (1.0 - d * d * d).powi(3);
            let w = tric * rw.map(|r| r[i]).unwrap_or(1.0);
            if w <= 0.0 {
                continue;
            }
            let x = i as f64 - x0 as f64;
            sw += w;
            swx += w * x;
            swx2 += w * x * x;
            swy += w * yi;
            swxy += w * x * yi;
        }
        if sw <= 0.0 {
            return 0.0;
        }
        let det = sw * swx2 - swx * swx;
        if det.abs() < 1e-12 * sw * sw {
            swy / sw
        } else {
            // Intercept of the local line at x = 0.
            (swx2 * swy - swx * swxy) / det
        }
    };

    let mut out = vec![0.0; n];
    let mut prev_x = 0usize;
    let mut prev_v = fit_at(0);
    out[0] = prev_v;
    let mut x = jump.min(n - 1);
    loop {
        let v = fit_at(x);
        for i in prev_x + 1..=x {
            let w = (i - prev_x) as f64 / (x - prev_x) as f64;
            out[i] = prev_v * (1.0 - w) + v * w;
        }
        if x == n - 1 {
            break;
        }
        prev_x = x;
        prev_v = v;
        x = (x + jump).min(n - 1);
    }
    out
}

fn moving_average(y: &[f64], window: usize) -> Vec<f64> {
    let n = y.len();
    if n < window {
        return vec![y.iter().sum::<f64>() / n.max(1) as f64; n.saturating_sub(window).max(0)];
    }
    let mut out = Vec::with_capacity(n - window + 1);
    let mut sum: f64 = y[..window].iter().sum();
    out.push(sum / window as f64);
    for t in window..n {
        sum += y[t] - y[t - window];
        out.push(sum / window as f64);
    }
    out
}

/// One decomposition at a single period.
#[derive(Debug, Clone)]
pub struct StlComponents {
    pub seasonal: Vec<f64>,
    pub trend: Vec<f64>,
    pub remainder: Vec<f64>,
}

/// Decomposition at one seasonal period with cycle-subseries smoothing, a
/// low-pass de-leveling filter and a trend smoother; two inner iterations
/// and one robustness pass.
pub fn stl_decompose(y: &[f64], period: usize, seasonal_span: usize, inner: usize, outer: usize) -> Result<StlComponents> {
    let n = y.len();
    if n < 2 * period {
        return Err(Error::InsufficientData { needed: 2 * period, got: n });
    }
    let trend_span = {
        let raw = 1.5 * period as f64 / (1.0 - 1.5 / seasonal_span as f64);
        let mut v = raw.ceil() as usize;
        if v % 2 == 0 {
            v += 1;
        }
        v
    };
    let mut seasonal = vec![0.0; n];
    let mut trend = vec![0.0; n];
    let mut rw: Option<Vec<f64>> = None;

    for _outer in 0..=outer {
        for _inner in 0..inner {
            // Detrend, smooth each cycle subseries (extended one position on
            // both sides for the low-pass filter).
            let detrended: Vec<f64> = y.iter().zip(&trend).map(|(a, b)| a - b).collect();
            let mut extended = vec![0.0; n + 2 * period];
            for phase in 0..period {
                let sub: Vec<f64> = detrended[phase..].iter().step_by(period).copied().collect();
                let sub_rw: Option<Vec<f64>> = rw
                    .as_ref()
                    .map(|w| w[phase..].iter().step_by(period).copied().collect());
                // Near-periodic seasonality: the span covers the whole
                // subseries, so each phase gets a slowly drifting fit rather
                // than a wiggly one.
                let span = seasonal_span.max(sub.len()) | 1;
                let jump = (span / 10).max(1);
                let smoothed = loess(&sub, span, jump, sub_rw.as_deref());
                // Extend by one cycle on each side using the boundary fits.
                let m = smoothed.len();
                for (k, &v) in smoothed.iter().enumerate() {
                    extended[period + phase + k * period] = v;
                }
                extended[phase] = smoothed[0] * 2.0 - smoothed.get(1).copied().unwrap_or(smoothed[0]);
                let last = smoothed[m - 1];
                let prev = if m >= 2 { smoothed[m - 2] } else { last };
                if period + phase + m * period < extended.len() {
                    extended[period + phase + m * period] = last * 2.0 - prev;
                }
            }
            // Low-pass: two averages of length `period`, one of length 3,
            // then a light smoother; removes the level the subseries kept.
            let lp1 = moving_average(&extended, period);
            let lp2 = moving_average(&lp1, period);
            let lp3 = moving_average(&lp2, 3);
            let low_pass = loess(&lp3, seasonal_span | 1, (seasonal_span / 2).max(1), None);
            for t in 0..n {
                seasonal[t] = extended[period + t] - low_pass[t.min(low_pass.len() - 1)];
            }
            // Trend from the deseasonalized series.
            let deseasonal: Vec<f64> = y.iter().zip(&seasonal).map(|(a, b)| a - b).collect();
            let jump = (trend_span / 10).max(1);
            trend = loess(&deseasonal, trend_span, jump, rw.as_deref());
        }
        if _outer < outer {
            // Robustness weights from the remainder (bisquare).
            let remainder: Vec<f64> = (0..n).map(|t| y[t] - seasonal[t] - trend[t]).collect();
            let mut abs: Vec<f64> = remainder.iter().map(|v| v.abs()).collect();
            abs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let med = abs[n / 2].max(1e-300);
            let h = 6.0 * med;
            rw = Some(
                remainder
                    .iter()
                    .map(|r| {
                        let u = (r.abs() / h).min(1.0);
                        (1.0 - u * u).powi(2)
                    })
                    .collect(),
            );
        }
    }

    let remainder: Vec<f64> = (0..n).map(|t| y[t] - seasonal[t] - trend[t]).collect();
    Ok(StlComponents { seasonal, trend, remainder })
}

/// Additive exponential smoothing with optional (damped) trend, fitted by
/// one-step squared error; used on the seasonally adjusted series.
#[derive(Debug, Clone, Copy)]
enum HoltForm {
    Level,
    Trend,
    DampedTrend,
}

struct HoltFit {
    level: f64,
    trend: f64,
    phi: f64,
    sse: f64,
    k: usize,
}

fn holt_fit(y: &[f64], form: HoltForm) -> HoltFit {
    let logistic = |x: f64| 1.0 / (1.0 + (-x).exp());
    match form {
        HoltForm::Level => {
            let obj = |p: &[f64]| filter_sse(y, logistic(p[0]), 0.0, 1.0, false);
            let (x, _) = nelder_mead(obj, &[0.0], 0.8, 1e-8, 200);
            let a = logistic(x[0]);
            let mut f = run_filter(y, a, 0.0, 1.0, false);
            f.k = 2;
            f
        }
        HoltForm::Trend => {
            let obj = |p: &[f64]| filter_sse(y, logistic(p[0]), logistic(p[1]), 1.0, true);
            let (x, _) = nelder_mead(obj, &[0.0, -2.0], 0.8, 1e-8, 300);
            let mut f = run_filter(y, logistic(x[0]), logistic(x[1]), 1.0, true);
            f.k = 4;
            f
        }
        HoltForm::DampedTrend => {
            let obj = |p: &[f64]| {
                let phi = 0.8 + 0.19 * logistic(p[2]);
                filter_sse(y, logistic(p[0]), logistic(p[1]), phi, true)
            };
            let (x, _) = nelder_mead(obj, &[0.0, -2.0, 0.0], 0.8, 1e-8, 300);
            let phi = 0.8 + 0.19 * logistic(x[2]);
            let mut f = run_filter(y, logistic(x[0]), logistic(x[1]), phi, true);
            f.k = 5;
            f
        }
    }
}

fn run_filter(y: &[f64], alpha: f64, beta: f64, phi: f64, with_trend: bool) -> HoltFit {
    let mut level = y[0];
    let mut trend = if with_trend && y.len() > 1 { (y[1] - y[0]).clamp(-1e6, 1e6) } else { 0.0 };
    let mut sse = 0.0;
    for &yt in &y[1..] {
        let pred = level + phi * trend;
        let e = yt - pred;
        sse += e * e;
        let new_level = alpha * yt + (1.0 - alpha) * pred;
        if with_trend {
            trend = beta * (new_level - level) + (1.0 - beta) * phi * trend;
        }
        level = new_level;
    }
    HoltFit { level, trend, phi, sse, k: 0 }
}

fn filter_sse(y: &[f64], alpha: f64, beta: f64, phi: f64, with_trend: bool) -> f64 {
    run_filter(y, alpha, beta, phi, with_trend).sse
}

/// Decomposes at the daily, weekly and annual periods sequentially, then
/// forecasts: each seasonal component repeats its last cycle, and the
/// seasonally adjusted series is continued by the information-criterion best
/// of level-only, trend and damped-trend exponential smoothing.
pub fn stl_fit_forecast(y: &[f64], s: usize, h: usize) -> Result<Vec<f64>> {
    let n = y.len();
    let periods = [s, 7 * s, 365 * s];
    if n < 2 * periods[2] {
        return Err(Error::InsufficientData { needed: 2 * periods[2], got: n });
    }
    let mut work = y.to_vec();
    let mut seasonals: Vec<Vec<f64>> = Vec::new();
    for &p in &periods {
        let res = stl_decompose(&work, p, 11, 2, 1)?;
        for (w, sv) in work.iter_mut().zip(&res.seasonal) {
            *w -= sv;
        }
        seasonals.push(res.seasonal);
    }
    // `work` is now trend + remainder.
    let mut best: Option<HoltFit> = None;
    let mut best_aic = f64::INFINITY;
    for form in [HoltForm::Level, HoltForm::Trend, HoltForm::DampedTrend] {
        let fit = holt_fit(&work, form);
        let sigma2 = (fit.sse / (n - 1) as f64).max(1e-300);
        let aic = (n as f64) * sigma2.ln() + 2.0 * fit.k as f64;
        if aic < best_aic {
            best_aic = aic;
            best = Some(fit);
        }
    }
    let fit = best.unwrap();

    let mut out = Vec::with_capacity(h);
    for j in 1..=h {
        // Damped-trend forecast: level + trend * sum of phi powers.
        let damp_sum = if fit.phi >= 1.0 {
            j as f64
        } else {
            fit.phi * (1.0 - fit.phi.powi(j as i32)) / (1.0 - fit.phi)
        };
        let mut v = fit.level + fit.trend * damp_sum;
        for (p, seasonal) in periods.iter().zip(&seasonals) {
            v += seasonal[n - p + (j - 1) % p];
        }
        out.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn loess_reproduces_a_line() {
        let y: Vec<f64> = (0..200).map(|t| 2.0 + 0.5 * t as f64).collect();
        let sm = loess(&y, 21, 4, None);
        for (a, b) in sm.iter().zip(&y) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn decomposition_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 24 * 120;
        let y: Vec<f64> = (0..n)
            .map(|t| {
                10.0 + 3.0 * ((t % 24) as f64 / 24.0 * std::f64::consts::TAU).sin()
                    + rng.sample::<f64, _>(StandardNormal) * 0.3
            })
            .collect();
        let res = stl_decompose(&y, 24, 11, 2, 1).unwrap();
        for t in 0..n {
            let sum = res.seasonal[t] + res.trend[t] + res.remainder[t];
            assert!((sum - y[t]).abs() < 1e-10);
        }
    }

    #[test]
    fn recovers_three_sinusoids() {
        let s = 24;
        let n = 2 * 365 * s;
        let tau = std::f64::consts::TAU;
        let amp = [3.0, 2.0, 5.0];
        let periods = [s, 7 * s, 365 * s];
        let y: Vec<f64> = (0..n)
            .map(|t| {
                10.0 + amp[0] * (t as f64 / periods[0] as f64 * tau).sin()
                    + amp[1] * (t as f64 / periods[1] as f64 * tau).sin()
                    + amp[2] * (t as f64 / periods[2] as f64 * tau).sin()
            })
            .collect();
        let mut work = y.clone();
        for (k, &p) in periods.iter().enumerate() {
            let res = stl_decompose(&work, p, 11, 2, 1).unwrap();
            // Component amplitude within 5% of the truth.
            let est_amp = res
                .seasonal
                .iter()
                .fold(0.0f64, |a, &v| a.max(v.abs()));
            assert!(
                (est_amp - amp[k]).abs() < 0.05 * amp[k] + 0.15,
                "period {p}: amplitude {est_amp} vs {}",
                amp[k]
            );
            for (w, sv) in work.iter_mut().zip(&res.seasonal) {
                *w -= sv;
            }
        }
    }

    #[test]
    fn white_noise_has_small_seasonals() {
        // Daily and weekly components average over hundreds of cycles and
        // come out near zero; the annual component sees only two cycles, so
        // it stays noise-limited. The forecast must remain unbiased and not
        // amplify the noise.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 24 * 365 * 2;
        let y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let sd = 1.0;

        let mut work = y.clone();
        // A full-span local-linear fit over m cycles keeps roughly 1.8/m of
        // the noise variance: ~0.05 sd for the daily component (730 cycles)
        // and ~0.13 sd for the weekly one (104 cycles).
        for (p, bound) in [(24usize, 0.1), (168, 0.2)] {
            let res = stl_decompose(&work, p, 11, 2, 1).unwrap();
            let comp_sd =
                (res.seasonal.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
            assert!(comp_sd < bound * sd, "period {p} sd {comp_sd}");
            for (w, s) in work.iter_mut().zip(&res.seasonal) {
                *w -= s;
            }
        }

        let f = stl_fit_forecast(&y, 24, 24 * 14).unwrap();
        let mean = f.iter().sum::<f64>() / f.len() as f64;
        let fsd = (f.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / f.len() as f64).sqrt();
        assert!(mean.abs() < 0.25 * sd, "forecast bias {mean}");
        assert!(fsd < sd, "forecast spread {fsd}");
    }

    #[test]
    fn forecast_of_pure_seasonality_is_accurate() {
        let s = 24;
        let n = 2 * 365 * s;
        let tau = std::f64::consts::TAU;
        let h = 7 * s;
        let gen = |t: usize| -> f64 {
            5.0 + 2.0 * (t as f64 / s as f64 * tau).sin()
                + 1.0 * (t as f64 / (7 * s) as f64 * tau).sin()
                + 3.0 * (t as f64 / (365 * s) as f64 * tau).sin()
        };
        let y: Vec<f64> = (0..n).map(gen).collect();
        let f = stl_fit_forecast(&y, s, h).unwrap();
        let mae: f64 = (0..h).map(|j| (f[j] - gen(n + j)).abs()).sum::<f64>() / h as f64;
        assert!(mae < 0.35, "mae {mae}");
    }
}
