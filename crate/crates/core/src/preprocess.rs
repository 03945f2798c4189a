//! Raw-data conditioning: clock-change regularization, temperature
//! aggregation and smoothing, and single-outlier adjustment.

use chrono::{Duration, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::calendar::CalendarContext;
use crate::error::{Error, Result};
use crate::ets::ets_filter;
use crate::timeseries::{fill_missing_linear, TimeSeries};

/// What the conditioning pass changed.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CleaningReport {
    /// Spring clock-change slots filled by interpolation.
    pub interpolated_indices: Vec<usize>,
    /// Fall clock-change slots replaced by the mean of the double reading.
    pub averaged_indices: Vec<usize>,
    /// Ordinary gaps filled by linear interpolation.
    pub missing_filled_indices: Vec<usize>,
    /// Adjusted single outliers.
    pub outliers: Vec<Outlier>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Outlier {
    pub index: usize,
    /// Estimated additive contamination removed from the series.
    pub adjustment: f64,
}

/// A raw local-wall-clock series: timestamps may skip the spring hour and
/// repeat the fall hour.
#[derive(Debug, Clone)]
pub struct RawSeries {
    pub rows: Vec<(NaiveDateTime, f64)>,
}

/// Regularizes a raw local-time series onto the fictional no-clock-change
/// grid: exactly `S` observations per civil day.
///
/// The missing spring hour is linearly interpolated from its neighbours and
/// the doubled fall hour is averaged; both are recorded in the report.
/// Doubled readings outside a known transition are an error naming the date.
pub fn regularize_dst(
    raw: &RawSeries,
    ctx: &CalendarContext,
    report: &mut CleaningReport,
) -> Result<TimeSeries> {
    if raw.rows.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let step = ctx.step_seconds();
    let start = raw.rows[0].0;
    let end = raw.rows[raw.rows.len() - 1].0;
    let n_slots = (end.signed_duration_since(start).num_seconds() / step) as usize + 1;

    let slot_of = |ts: NaiveDateTime| -> i64 { ts.signed_duration_since(start).num_seconds() / step };

    #[derive(Clone)]
    enum Slot {
        Empty,
        One(f64),
        Many(Vec<f64>),
    }
    let mut slots = vec![Slot::Empty; n_slots];
    for &(ts, v) in &raw.rows {
        let i = slot_of(ts);
        if i < 0 || i as usize >= n_slots {
            continue;
        }
        let cell = &mut slots[i as usize];
        *cell = match cell {
            Slot::Empty => Slot::One(v),
            Slot::One(prev) => Slot::Many(vec![*prev, v]),
            Slot::Many(list) => {
                let mut l = std::mem::take(list);
                l.push(v);
                Slot::Many(l)
            }
        };
    }

    let mut values = Vec::with_capacity(n_slots);
    let mut spring_slots: Vec<usize> = Vec::new();
    for (i, slot) in slots.iter().enumerate() {
        let ts = start + Duration::seconds(step * i as i64);
        let year = chrono::Datelike::year(&ts.date());
        let transitions = ctx.tz.transitions(year);
        match slot {
            Slot::One(v) => values.push(*v),
            Slot::Empty => {
                let is_spring = transitions
                    .map(|(spring, _)| ts >= spring && ts < spring + Duration::hours(1))
                    .unwrap_or(false);
                if is_spring {
                    spring_slots.push(i);
                }
                values.push(f64::NAN);
            }
            Slot::Many(list) => {
                let repeated_start = transitions.map(|(_, fall)| fall - Duration::hours(1));
                let is_fall = repeated_start
                    .map(|rs| ts >= rs && ts < rs + Duration::hours(1))
                    .unwrap_or(false);
                if !is_fall {
                    return Err(Error::DataQuality(format!(
                        "doubled reading at {ts} not explained by the clock-change rule"
                    )));
                }
                report.averaged_indices.push(i);
                values.push(list.iter().sum::<f64>() / list.len() as f64);
            }
        }
    }

    // Spring gaps: linear interpolation of the neighbouring readings.
    for &i in &spring_slots {
        let left = values[..i].iter().rev().find(|v| v.is_finite());
        let right = values[i + 1..].iter().find(|v| v.is_finite());
        values[i] = match (left, right) {
            (Some(l), Some(r)) => 0.5 * (l + r),
            (Some(l), None) => *l,
            (None, Some(r)) => *r,
            (None, None) => 0.0,
        };
        report.interpolated_indices.push(i);
    }
    // Ordinary gaps and explicitly missing readings are both filled here;
    // the report records every filled slot.
    report.missing_filled_indices = fill_missing_linear(&mut values);

    TimeSeries::new(start, ctx.s, values)
}

/// Pointwise mean of station series on their overlapping range; missing
/// station values are excluded per time step, and steps where every station
/// is missing are linearly interpolated. More than 5% all-missing steps
/// reject the dataset.
pub fn aggregate_temperature(stations: &[TimeSeries]) -> Result<(TimeSeries, usize)> {
    if stations.is_empty() {
        return Err(Error::invalid("no temperature stations supplied"));
    }
    let res = stations[0].resolution;
    if stations.iter().any(|s| s.resolution != res) {
        return Err(Error::invalid("temperature stations have mixed resolutions"));
    }
    let start = stations.iter().map(|s| s.start).max().unwrap();
    let end = stations
        .iter()
        .map(|s| s.timestamp(s.len().saturating_sub(1)))
        .min()
        .unwrap();
    if end < start {
        return Err(Error::invalid("temperature stations do not overlap in time"));
    }
    let step = 86_400 / res as i64;
    let n = (end.signed_duration_since(start).num_seconds() / step) as usize + 1;

    let mut values = Vec::with_capacity(n);
    let mut all_missing = 0usize;
    let mut present: Vec<f64> = Vec::with_capacity(stations.len());
    for i in 0..n {
        let ts = start + Duration::seconds(step * i as i64);
        present.clear();
        for s in stations {
            let offset = ts.signed_duration_since(s.start).num_seconds() / step;
            if offset >= 0 && (offset as usize) < s.len() {
                let v = s.values[offset as usize];
                if v.is_finite() {
                    present.push(v);
                }
            }
        }
        if present.is_empty() {
            all_missing += 1;
            values.push(f64::NAN);
        } else {
            // Summation in value order keeps the mean invariant under
            // station permutation, bit for bit.
            present.sort_by(f64::total_cmp);
            values.push(present.iter().sum::<f64>() / present.len() as f64);
        }
    }
    if all_missing * 20 > n {
        return Err(Error::DataQuality(format!(
            "temperature has {all_missing}/{n} steps with every station missing (> 5%)"
        )));
    }
    fill_missing_linear(&mut values);
    Ok((TimeSeries::new(start, res, values)?, all_missing))
}

/// The two fixed-parameter level filters applied to temperature: smoothing
/// weights `1/S` and `1/(14 S)`.
pub fn smooth_temperature(temp: &TimeSeries) -> Result<(TimeSeries, TimeSeries)> {
    let s = temp.resolution as f64;
    let fast = ets_filter(&temp.values, 1.0 / s, None, None)?;
    let slow = ets_filter(&temp.values, 1.0 / (14.0 * s), None, None)?;
    Ok((
        TimeSeries::new(temp.start, temp.resolution, fast.level_path)?,
        TimeSeries::new(temp.start, temp.resolution, slow.level_path)?,
    ))
}

/// Maps a UTC-timeline series onto the local regularized grid of `ctx`,
/// honouring the standard offset and the clock-change rule: each local slot
/// reads the UTC slot one hour earlier while daylight saving is in effect.
///
/// Out-of-range reads clamp to the series boundary. Returns `n` values for
/// local rows `0..n`.
pub fn align_utc_to_local(
    utc: &TimeSeries,
    ctx: &CalendarContext,
    std_offset_secs: i64,
    n: usize,
) -> Vec<f64> {
    let step = ctx.step_seconds();
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let local = ctx.timestamp(t);
        let year = chrono::Datelike::year(&local.date());
        let dst = match ctx.tz.transitions(year) {
            Some((spring, fall)) => local >= spring && local < fall,
            None => false,
        };
        let offset = std_offset_secs + if dst { 3600 } else { 0 };
        let utc_instant = local - Duration::seconds(offset);
        let idx = utc_instant.signed_duration_since(utc.start).num_seconds() / step;
        let idx = idx.clamp(0, utc.len() as i64 - 1) as usize;
        out.push(utc.values[idx]);
    }
    out
}

fn running_median3(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let lo = t.saturating_sub(1);
        let hi = (t + 2).min(n);
        let mut w: Vec<f64> = y[lo..hi].to_vec();
        w.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m = if w.len() == 3 {
            w[1]
        } else {
            0.5 * (w[0] + w[w.len() - 1])
        };
        out.push(m);
    }
    out
}

/// Single-outlier adjustment by an L1-penalized regression of load on a
/// dummy per observation, hour-of-day dummies and the centered running
/// median of three consecutive observations.
///
/// The penalty weight is chosen on a 50-point path by minimizing
/// `n ln(RSS/n) + (ln n)^2 df`; the load is adjusted by subtracting the
/// selected observation-dummy coefficients. Runs of equal consecutive
/// spikes are deliberately left alone (the running median absorbs them).
pub fn adjust_outliers(load: &TimeSeries) -> Result<(TimeSeries, Vec<Outlier>)> {
    let y = &load.values;
    let n = y.len();
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("load contains missing values; fill them first"));
    }
    let s = load.resolution;
    let start_slot = (load.start.hour() as usize * load.resolution) / 24;
    let hod: Vec<usize> = (0..n).map(|t| (start_slot + t) % s).collect();

    let mean_y = y.iter().sum::<f64>() / n as f64;
    let med = running_median3(y);
    let med_mean = med.iter().sum::<f64>() / n as f64;
    let med_c: Vec<f64> = med.iter().map(|v| v - med_mean).collect();
    let med_norm2: f64 = med_c.iter().map(|v| v * v).sum();

    // Residual state for coordinate descent; start from the centered series.
    let mut r: Vec<f64> = y.iter().map(|v| v - mean_y).collect();
    let mut beta_obs = vec![0.0f64; n];
    let mut beta_hod = vec![0.0f64; s]; // slot 0 is the reference, stays 0
    let mut beta_med = 0.0f64;

    // Rows per hour-of-day slot.
    let mut hod_rows: Vec<Vec<u32>> = vec![Vec::new(); s];
    for (t, &h) in hod.iter().enumerate() {
        hod_rows[h].push(t as u32);
    }

    // Path from the smallest weight that zeroes every coefficient.
    let mut lambda_max = 0.0f64;
    for &v in r.iter() {
        lambda_max = lambda_max.max(v.abs());
    }
    for h in 1..s {
        let dot: f64 = hod_rows[h].iter().map(|&t| r[t as usize]).sum();
        lambda_max = lambda_max.max(dot.abs() / (hod_rows[h].len() as f64).sqrt().max(1.0));
    }
    let med_dot: f64 = med_c.iter().zip(r.iter()).map(|(a, b)| a * b).sum();
    lambda_max = lambda_max.max(med_dot.abs() / med_norm2.sqrt().max(1.0));
    if lambda_max <= 0.0 {
        return Ok((load.clone(), Vec::new()));
    }
    let soft = |x: f64, t: f64| -> f64 {
        if x > t {
            x - t
        } else if x < -t {
            x + t
        } else {
            0.0
        }
    };

    let npath = 50;
    let mut best: Option<(f64, Vec<f64>, usize)> = None; // (bic, beta_obs, df)
    for k in 0..npath {
        let lambda = lambda_max * 10f64.powf(-3.0 * k as f64 / (npath - 1) as f64) * 1.0000001;
        // Coordinate descent sweeps at this weight, warm-started.
        for _ in 0..60 {
            let mut max_delta = 0.0f64;
            // Running-median regressor.
            if med_norm2 > 0.0 {
                let dot: f64 = med_c.iter().zip(r.iter()).map(|(a, b)| a * b).sum();
                let new = soft(beta_med + dot / med_norm2, lambda / med_norm2);
                let delta = new - beta_med;
                if delta != 0.0 {
                    for (ri, mi) in r.iter_mut().zip(&med_c) {
                        *ri -= delta * mi;
                    }
                    beta_med = new;
                    max_delta = max_delta.max(delta.abs());
                }
            }
            // Hour-of-day dummies (reference slot 0 skipped).
            for h in 1..s {
                let rows = &hod_rows[h];
                if rows.is_empty() {
                    continue;
                }
                let g = rows.len() as f64;
                let dot: f64 = rows.iter().map(|&t| r[t as usize]).sum();
                let new = soft(beta_hod[h] + dot / g, lambda / g);
                let delta = new - beta_hod[h];
                if delta != 0.0 {
                    for &t in rows {
                        r[t as usize] -= delta;
                    }
                    beta_hod[h] = new;
                    max_delta = max_delta.max(delta.abs());
                }
            }
            // Observation dummies: unit columns, O(1) each.
            for t in 0..n {
                let new = soft(beta_obs[t] + r[t], lambda);
                let delta = new - beta_obs[t];
                if delta != 0.0 {
                    r[t] -= delta;
                    beta_obs[t] = new;
                    max_delta = max_delta.max(delta.abs());
                }
            }
            if max_delta < 1e-8 * lambda_max {
                break;
            }
        }
        let rss: f64 = r.iter().map(|v| v * v).sum::<f64>().max(1e-300);
        let df = beta_obs.iter().filter(|&&b| b != 0.0).count()
            + beta_hod.iter().filter(|&&b| b != 0.0).count()
            + usize::from(beta_med != 0.0);
        let bic = n as f64 * (rss / n as f64).ln() + (n as f64).ln().powi(2) * df as f64;
        if best.as_ref().map(|(b, _, _)| bic < *b).unwrap_or(true) {
            best = Some((bic, beta_obs.clone(), df));
        }
    }

    let (_, chosen, _) = best.unwrap();
    let mut adjusted = load.clone();
    let mut outliers = Vec::new();
    for (t, &b) in chosen.iter().enumerate() {
        if b != 0.0 {
            adjusted.values[t] -= b;
            outliers.push(Outlier { index: t, adjustment: b });
        }
    }
    Ok((adjusted, outliers))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::TimezoneRule;
    use chrono::NaiveDate;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn dt(y: i32, m: u32, d: u32, h: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(h, 0, 0).unwrap()
    }

    fn eu_ctx(start: NaiveDateTime) -> CalendarContext {
        CalendarContext::new(start, 24, TimezoneRule::EuropeanUnion).unwrap()
    }

    #[test]
    fn spring_gap_is_interpolated() {
        // 2015 spring transition: March 29, hour 2 missing.
        let mut rows = Vec::new();
        for d in 28..=30u32 {
            for h in 0..24u32 {
                if d == 29 && h == 2 {
                    continue;
                }
                rows.push((dt(2015, 3, d, h), (d * 100 + h) as f64));
            }
        }
        assert_eq!(rows.len(), 71);
        let mut report = CleaningReport::default();
        let ts = regularize_dst(&RawSeries { rows }, &eu_ctx(dt(2015, 3, 28, 0)), &mut report).unwrap();
        assert_eq!(ts.len(), 72, "exactly S observations per day");
        let idx = 24 + 2;
        assert_eq!(report.interpolated_indices, vec![idx]);
        let expect = 0.5 * (2901.0 + 2903.0);
        assert!((ts.values[idx] - expect).abs() < 1e-12);
    }

    #[test]
    fn fall_double_hour_is_averaged() {
        // 2015 fall transition: October 25, hour 2 doubled.
        let mut rows = Vec::new();
        for h in 0..24u32 {
            rows.push((dt(2015, 10, 25, h), h as f64));
            if h == 2 {
                rows.push((dt(2015, 10, 25, h), h as f64 + 10.0));
            }
        }
        let mut report = CleaningReport::default();
        let ts = regularize_dst(&RawSeries { rows }, &eu_ctx(dt(2015, 10, 25, 0)), &mut report).unwrap();
        assert_eq!(ts.len(), 24);
        assert_eq!(report.averaged_indices, vec![2]);
        assert!((ts.values[2] - 7.0).abs() < 1e-12);
    }

    #[test]
    fn plain_day_passes_through() {
        let rows: Vec<_> = (0..48u32)
            .map(|i| (dt(2015, 6, 1, 0) + Duration::hours(i as i64), i as f64))
            .collect();
        let mut report = CleaningReport::default();
        let ts = regularize_dst(&RawSeries { rows }, &eu_ctx(dt(2015, 6, 1, 0)), &mut report).unwrap();
        assert_eq!(ts.values, (0..48).map(|i| i as f64).collect::<Vec<_>>());
        assert!(report.interpolated_indices.is_empty());
        assert!(report.averaged_indices.is_empty());
    }

    #[test]
    fn unexplained_duplicate_is_an_error() {
        let mut rows: Vec<_> = (0..24u32).map(|h| (dt(2015, 6, 1, h), h as f64)).collect();
        rows.push((dt(2015, 6, 1, 5), 99.0));
        let mut report = CleaningReport::default();
        let err = regularize_dst(&RawSeries { rows }, &eu_ctx(dt(2015, 6, 1, 0)), &mut report);
        assert!(matches!(err, Err(Error::DataQuality(_))));
    }

    #[test]
    fn temperature_mean_and_partial_mean() {
        let start = dt(2020, 1, 1, 0);
        let mk = |values: Vec<f64>| TimeSeries::new(start, 24, values).unwrap();
        let stations = vec![
            mk(vec![1.0, 2.0]),
            mk(vec![2.0, 4.0]),
            mk(vec![3.0, 6.0]),
            mk(vec![4.0, 8.0]),
            mk(vec![5.0, f64::NAN]),
        ];
        let (agg, misses) = aggregate_temperature(&stations).unwrap();
        assert_eq!(misses, 0);
        assert!((agg.values[0] - 3.0).abs() < 1e-12);
        assert!((agg.values[1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn temperature_mean_is_permutation_invariant() {
        let start = dt(2020, 1, 1, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut stations: Vec<TimeSeries> = (0..5)
            .map(|_| {
                TimeSeries::new(start, 24, (0..50).map(|_| rng.gen_range(-5.0..25.0)).collect())
                    .unwrap()
            })
            .collect();
        let (a, _) = aggregate_temperature(&stations).unwrap();
        stations.reverse();
        let (b, _) = aggregate_temperature(&stations).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn temperature_rejects_too_many_gaps() {
        let start = dt(2020, 1, 1, 0);
        let mut vals = vec![10.0; 100];
        for v in vals.iter_mut().take(6) {
            *v = f64::NAN;
        }
        let stations = vec![TimeSeries::new(start, 24, vals).unwrap()];
        assert!(aggregate_temperature(&stations).is_err());
    }

    #[test]
    fn smoothing_weights_and_fixed_point() {
        let start = dt(2020, 1, 1, 0);
        let temp = TimeSeries::new(start, 24, vec![7.5; 200]).unwrap();
        let (t1, t2) = smooth_temperature(&temp).unwrap();
        assert!(t1.values.iter().all(|&v| (v - 7.5).abs() < 1e-12));
        assert!(t2.values.iter().all(|&v| (v - 7.5).abs() < 1e-12));
    }

    #[test]
    fn smoothing_filter_identity() {
        let start = dt(2020, 1, 1, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let vals: Vec<f64> = (0..500).map(|_| rng.gen_range(-10.0..30.0)).collect();
        let temp = TimeSeries::new(start, 24, vals.clone()).unwrap();
        let (t1, _) = smooth_temperature(&temp).unwrap();
        let alpha = 1.0 / 24.0;
        for t in 1..vals.len() {
            let lhs = vals[t] - t1.values[t];
            let rhs = (1.0 - alpha) * (vals[t] - t1.values[t - 1]);
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn smoothing_step_response_ratio() {
        let start = dt(2020, 1, 1, 0);
        let n = 40_000;
        let vals: Vec<f64> = (0..n).map(|t| if t < 100 { 0.0 } else { 1.0 }).collect();
        let temp = TimeSeries::new(start, 24, vals).unwrap();
        let (t1, t2) = smooth_temperature(&temp).unwrap();
        let half_life = |v: &[f64]| v.iter().skip(100).position(|&x| x >= 0.5).unwrap() as f64;
        let ratio = half_life(&t2.values) / half_life(&t1.values);
        assert!((12.0..=16.0).contains(&ratio), "ratio {ratio}");
    }

    fn synthetic_load(n: usize, seed: u64) -> TimeSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals: Vec<f64> = (0..n)
            .map(|t| {
                100.0
                    + 20.0 * ((t % 24) as f64 / 24.0 * std::f64::consts::TAU).sin()
                    + rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        TimeSeries::new(dt(2020, 1, 1, 0), 24, vals).unwrap()
    }

    #[test]
    fn clean_load_is_left_alone() {
        let mut clean_runs = 0;
        for seed in 0..10 {
            let load = synthetic_load(24 * 60, seed);
            let (adjusted, outliers) = adjust_outliers(&load).unwrap();
            if outliers.is_empty() {
                clean_runs += 1;
                assert_eq!(adjusted.values, load.values);
            }
        }
        assert!(clean_runs >= 9, "clean in {clean_runs}/10 runs");
    }

    #[test]
    fn single_spike_is_flagged_and_mostly_removed() {
        let mut load = synthetic_load(24 * 60, 42);
        let sd = {
            let m = load.values.iter().sum::<f64>() / load.len() as f64;
            (load.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / load.len() as f64).sqrt()
        };
        let spike = 10.0 * sd;
        let at = 700;
        load.values[at] += spike;
        let (adjusted, outliers) = adjust_outliers(&load).unwrap();
        let hit = outliers.iter().find(|o| o.index == at).expect("spike flagged");
        assert!(
            (hit.adjustment - spike).abs() <= 0.2 * spike,
            "adjustment {} vs spike {spike}",
            hit.adjustment
        );
        // Other observations unchanged unless flagged.
        for t in 0..load.len() {
            if outliers.iter().all(|o| o.index != t) {
                assert_eq!(adjusted.values[t], load.values[t]);
            }
        }
    }

    #[test]
    fn consecutive_spikes_survive() {
        let mut load = synthetic_load(24 * 60, 7);
        let sd = 20.0;
        let spike = 10.0 * sd;
        load.values[500] += spike;
        load.values[501] += spike;
        let (adjusted, _) = adjust_outliers(&load).unwrap();
        // The running median tracks the doubled spike, so neither
        // observation is fully removed.
        let removed0 = load.values[500] - adjusted.values[500];
        let removed1 = load.values[501] - adjusted.values[501];
        assert!(removed0 < 0.8 * spike, "removed {removed0} of {spike}");
        assert!(removed1 < 0.8 * spike, "removed {removed1} of {spike}");
    }

    #[test]
    fn utc_alignment_shifts_by_dst() {
        // UTC series is a ramp; offset +1h standard, EU rule.
        let utc = TimeSeries::new(dt(2015, 3, 27, 0), 24, (0..24 * 6).map(|i| i as f64).collect()).unwrap();
        let ctx = eu_ctx(dt(2015, 3, 27, 0));
        let vals = align_utc_to_local(&utc, &ctx, 3600, 24 * 5);
        // Before the transition (March 29 02:00) local reads utc index t-1.
        assert_eq!(vals[30], 29.0);
        // Well after the transition local reads utc index t-2.
        let t_after = 24 * 4; // March 31 00:00
        assert_eq!(vals[t_after], (t_after - 2) as f64);
    }
}
