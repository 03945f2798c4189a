//! Synthetic load/temperature generator.
//!
//! Composes annual, weekly and daily seasonal profiles, a nonlinear
//! temperature response driven by a persistent synthetic weather path,
//! per-holiday dips (damped by the weekday for fixed-date holidays), a
//! random-walk level and stationary autoregressive noise. Ground-truth
//! components are returned so recovery can be asserted in tests.

use chrono::{Datelike, Duration, NaiveDate};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::calendar::{
    compute_calendar, easter_sunday, CalendarContext, HolidayCategory, HolidaySpec, TimezoneRule,
};
use crate::timeseries::TimeSeries;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub start_year: i32,
    pub years: usize,
    pub s: usize,
    pub seed: u64,
    /// Mean load level in MW.
    pub base: f64,
    /// Amplitude of the direct annual cycle (MW).
    pub annual_amplitude: f64,
    /// Weekday/weekend swing (MW).
    pub weekly_amplitude: f64,
    /// Day/night swing (MW).
    pub daily_amplitude: f64,
    /// Scales the nonlinear heating/cooling response.
    pub temp_sensitivity: f64,
    /// Peak depth of single-holiday dips (MW).
    pub holiday_dip: f64,
    /// Peak depth of the winter-period dip (MW).
    pub period_dip: f64,
    /// Hourly standard deviation of the random-walk level (MW).
    pub level_walk_sd: f64,
    /// Innovation standard deviation of the AR noise (MW).
    pub noise_sd: f64,
    pub ar_coefficients: Vec<f64>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            start_year: 2015,
            years: 6,
            s: 24,
            seed: 1,
            base: 50_000.0,
            annual_amplitude: 1_500.0,
            weekly_amplitude: 4_000.0,
            daily_amplitude: 5_000.0,
            temp_sensitivity: 1.0,
            holiday_dip: 11_000.0,
            period_dip: 6_500.0,
            level_walk_sd: 22.0,
            noise_sd: 350.0,
            ar_coefficients: vec![0.85, -0.05, 0.08],
        }
    }
}

/// Noise-free component paths underlying a generated sample.
#[derive(Debug, Clone)]
pub struct SynthTruth {
    pub temp_effect: Vec<f64>,
    pub holiday_effect: Vec<f64>,
    pub level: Vec<f64>,
    pub seasonal: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub ctx: CalendarContext,
    pub load: TimeSeries,
    /// Aggregate temperature on the same (offset-free) grid.
    pub temp: TimeSeries,
    pub holidays: Vec<HolidaySpec>,
    pub truth: SynthTruth,
}

/// The nonlinear heating/cooling response in MW for a temperature in deg C.
pub fn temperature_response(t: f64) -> f64 {
    let heating = (16.0 - t).max(0.0);
    let cooling = (t - 21.0).max(0.0);
    230.0 * heating.powf(1.35) + 180.0 * cooling.powf(1.25)
}

/// Holiday calendar used by the generator: fixed-date holidays plus
/// Easter-anchored weekday holidays, covering `[first_year, last_year]`.
pub fn synthetic_holidays(first_year: i32, last_year: i32, bridge: usize) -> Vec<HolidaySpec> {
    let years: Vec<i32> = (first_year..=last_year).collect();
    let fixed = |name: &str, month: u32, day: u32| HolidaySpec {
        name: name.to_string(),
        occurrences: years
            .iter()
            .map(|&y| NaiveDate::from_ymd_opt(y, month, day).unwrap())
            .collect(),
        category: HolidayCategory::FixedDate,
        bridge,
    };
    let easter_offset = |name: &str, days: i64| HolidaySpec {
        name: name.to_string(),
        occurrences: years
            .iter()
            .map(|&y| easter_sunday(y) + Duration::days(days))
            .collect(),
        category: HolidayCategory::Weekday,
        bridge,
    };
    vec![
        fixed("new_year", 1, 1),
        fixed("labour_day", 5, 1),
        fixed("national_day", 10, 3),
        fixed("christmas_day", 12, 25),
        fixed("second_christmas_day", 12, 26),
        easter_offset("good_friday", -2),
        easter_offset("easter_monday", 1),
        easter_offset("ascension", 39),
        easter_offset("whit_monday", 50),
    ]
}

fn smooth_dip(j: usize, len: usize) -> f64 {
    // Asymmetric bump: fast onset, slow decay, zero at both window ends.
    let x = (j as f64 + 0.5) / len as f64;
    (std::f64::consts::PI * x).sin().powf(0.7) * (1.0 - 0.3 * x)
}

/// Generates one synthetic dataset.
pub fn generate(cfg: &SynthConfig) -> SynthData {
    let s = cfg.s;
    let n = cfg.years * 365 * s + leap_days(cfg.start_year, cfg.years) * s;
    let start = NaiveDate::from_ymd_opt(cfg.start_year, 1, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    let ctx = CalendarContext::new(start, s, TimezoneRule::None).unwrap();
    let cal = compute_calendar(&ctx, n);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let tau = std::f64::consts::TAU;

    // Temperature: annual + daily cycles plus a persistent weather path with
    // a slowly wandering year-scale mood.
    let mut weather = 0.0f64;
    let mut mood = 0.0f64;
    let mut temp = Vec::with_capacity(n);
    for row in &cal {
        let season = -9.5 * ((row.doy as f64 + 14.0) / 365.0 * tau).cos();
        let diurnal = -3.5 * ((row.hod as f64 + 2.0) / s as f64 * tau).cos();
        let e: f64 = rng.sample(StandardNormal);
        weather = 0.9995 * weather + 0.155 * e; // month-scale spells, sd ~4.9
        let em: f64 = rng.sample(StandardNormal);
        mood = 0.9999 * mood + 0.02 * em; // year-scale wandering, sd ~1.4
        temp.push(10.5 + season + diurnal + weather + mood * 1.5);
    }
    // Load responds to thermally integrated temperature: buildings average
    // the weather over hours to days, which is what makes the smoothed
    // temperature covariates informative.
    let alpha_fast = 1.0 / s as f64;
    let mut integrated = Vec::with_capacity(n);
    let mut level_t = temp[0];
    for &tv in &temp {
        level_t += alpha_fast * (tv - level_t);
        integrated.push(level_t);
    }

    // Holiday truth: per-holiday dips with weekday damping for fixed dates.
    let bridge = s;
    let holidays = synthetic_holidays(cfg.start_year - 1, cfg.start_year + cfg.years as i32 + 2, bridge);
    let mut holiday_effect = vec![0.0f64; n];
    for spec in &holidays {
        let win = 2 * bridge + s;
        for &date in &spec.occurrences {
            let damp = match spec.category {
                HolidayCategory::Weekday => 1.0,
                HolidayCategory::FixedDate => match date.weekday().num_days_from_monday() {
                    6 => 0.05,
                    5 => 0.45,
                    4 => 0.75,
                    0 => 0.85,
                    _ => 1.0,
                },
            };
            let t0 = ctx.index_of_date(date) - bridge as i64;
            for j in 0..win {
                let t = t0 + j as i64;
                if t >= 0 && (t as usize) < n {
                    let dip = cfg.holiday_dip * damp * smooth_dip(j, win);
                    // Overlapping windows take the deepest dip.
                    let cell = &mut holiday_effect[t as usize];
                    if -dip < *cell {
                        *cell = -dip;
                    }
                }
            }
        }
    }
    // Winter period on top of the single-day dips.
    for year in cfg.start_year - 1..=cfg.start_year + cfg.years as i32 + 1 {
        let t0 = ctx.index_of_date(NaiveDate::from_ymd_opt(year, 12, 18).unwrap());
        let len = 20 * s;
        for j in 0..len {
            let t = t0 + j as i64;
            if t >= 0 && (t as usize) < n {
                holiday_effect[t as usize] -= cfg.period_dip * smooth_dip(j, len);
            }
        }
    }

    // Random-walk level and AR noise.
    let mut level_path = Vec::with_capacity(n);
    let mut level = 0.0f64;
    for _ in 0..n {
        let e: f64 = rng.sample(StandardNormal);
        level += cfg.level_walk_sd * e;
        level_path.push(level);
    }
    let p = cfg.ar_coefficients.len();
    let mut noise = vec![0.0f64; n];
    for t in 0..n {
        let mut v: f64 = rng.sample::<f64, _>(StandardNormal) * cfg.noise_sd;
        for (k, phi) in cfg.ar_coefficients.iter().enumerate() {
            if t > k {
                v += phi * noise[t - 1 - k];
            }
        }
        noise[t] = v;
        let _ = p;
    }

    let mut seasonal = Vec::with_capacity(n);
    let mut temp_effect = Vec::with_capacity(n);
    let mut load = Vec::with_capacity(n);
    for (t, row) in cal.iter().enumerate() {
        let annual = cfg.annual_amplitude * ((row.doy as f64 - 20.0) / 365.0 * tau).cos();
        let dow = row.how / s as u32;
        let weekend = match dow {
            5 => 0.55,
            6 => 0.9,
            _ => -0.25,
        };
        let weekly = -cfg.weekly_amplitude * weekend;
        let hour_frac = row.hod as f64 / s as f64;
        // The daily profile deepens in winter and flattens in summer, and
        // its evening peak is a winter feature.
        let winter = ((row.doy as f64 - 15.0) / 365.0 * tau).cos();
        let season_mod = 1.0 + 0.35 * winter;
        let evening = (tau * (hour_frac - 0.79)).cos().max(0.0).powi(2);
        let daily = cfg.daily_amplitude
            * (season_mod
                * (0.55 * (tau * (hour_frac - 0.38)).sin().max(-0.4)
                    + 0.25 * (2.0 * tau * (hour_frac - 0.42)).sin())
                + 0.45 * winter.max(0.0) * evening);
        let season_part = annual + weekly + daily;
        let g = cfg.temp_sensitivity * temperature_response(integrated[t]);
        seasonal.push(season_part);
        temp_effect.push(g);
        load.push(cfg.base + season_part + g + holiday_effect[t] + level_path[t] + noise[t]);
    }

    SynthData {
        ctx,
        load: TimeSeries::new(start, s, load).unwrap(),
        temp: TimeSeries::new(start, s, temp).unwrap(),
        holidays,
        truth: SynthTruth {
            temp_effect,
            holiday_effect,
            level: level_path,
            seasonal,
        },
    }
}

fn leap_days(start_year: i32, years: usize) -> usize {
    (start_year..start_year + years as i32)
        .filter(|&y| NaiveDate::from_ymd_opt(y, 1, 1).unwrap().leap_year())
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig { years: 1, ..Default::default() };
        let a = generate(&cfg);
        let b = generate(&cfg);
        assert_eq!(a.load.values, b.load.values);
        assert_eq!(a.temp.values, b.temp.values);
    }

    #[test]
    fn length_covers_leap_days() {
        let cfg = SynthConfig { start_year: 2015, years: 2, ..Default::default() };
        let data = generate(&cfg);
        assert_eq!(data.load.len(), (365 + 366) * 24);
    }

    #[test]
    fn holiday_dips_are_negative_and_local() {
        let cfg = SynthConfig { years: 1, ..Default::default() };
        let data = generate(&cfg);
        assert!(data.truth.holiday_effect.iter().all(|&v| v <= 0.0));
        let active = data.truth.holiday_effect.iter().filter(|&&v| v < 0.0).count();
        // Nine holidays and the winter period leave most of the year alone.
        assert!(active < data.load.len() / 5);
        assert!(active > 20 * 24);
    }

    #[test]
    fn temperature_has_annual_range() {
        let cfg = SynthConfig { years: 2, ..Default::default() };
        let data = generate(&cfg);
        let min = data.temp.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = data.temp.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(min < 3.0, "min temp {min}");
        assert!(max > 20.0, "max temp {max}");
    }
}
