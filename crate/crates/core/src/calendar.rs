//! Deterministic calendar, holiday and impact covariates.
//!
//! All quantities here are pure functions of the civil calendar: clock
//! changes are treated as non-existing, so every civil day contributes
//! exactly `S` observations. The day-of-year index is leap-adjusted so that
//! February 28th and 29th share a value and December 31st is always 364.

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Local clock-change specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TimezoneRule {
    /// No daylight saving time.
    None,
    /// Last Sunday of March 02:00 -> 03:00, last Sunday of October 03:00 -> 02:00.
    EuropeanUnion,
    /// Explicit transitions per year.
    Explicit(Vec<DstTransition>),
}

/// One year's clock changes, given as local wall-clock instants.
///
/// `spring_forward` is the first skipped instant (e.g. 02:00 when clocks jump
/// to 03:00); `fall_back` is the instant at which clocks are set back by one
/// hour (e.g. 03:00 back to 02:00).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DstTransition {
    pub year: i32,
    pub spring_forward: NaiveDateTime,
    pub fall_back: NaiveDateTime,
}

fn last_sunday(year: i32, month: u32) -> NaiveDate {
    let last_day = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1).unwrap()
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1).unwrap()
    } - Duration::days(1);
    let back = last_day.weekday().num_days_from_sunday() as i64;
    last_day - Duration::days(back)
}

impl TimezoneRule {
    /// The (spring-forward, fall-back) local instants for `year`, if any.
    pub fn transitions(&self, year: i32) -> Option<(NaiveDateTime, NaiveDateTime)> {
        match self {
            TimezoneRule::None => None,
            TimezoneRule::EuropeanUnion => {
                let spring = last_sunday(year, 3).and_hms_opt(2, 0, 0).unwrap();
                let fall = last_sunday(year, 10).and_hms_opt(3, 0, 0).unwrap();
                Some((spring, fall))
            }
            TimezoneRule::Explicit(list) => list
                .iter()
                .find(|t| t.year == year)
                .map(|t| (t.spring_forward, t.fall_back)),
        }
    }
}

/// Start instant, resolution and clock-change rule of a series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalendarContext {
    pub start: NaiveDateTime,
    /// Observations per day, at least 3.
    pub s: usize,
    pub tz: TimezoneRule,
}

impl CalendarContext {
    pub fn new(start: NaiveDateTime, s: usize, tz: TimezoneRule) -> Result<Self> {
        if s < 3 {
            return Err(Error::invalid(format!(
                "observations per day must be at least 3, got {s}"
            )));
        }
        if 86_400 % s != 0 {
            return Err(Error::invalid(format!(
                "{s} observations per day do not divide the day evenly"
            )));
        }
        let step = 86_400 / s as i64;
        let midnight_secs = start.signed_duration_since(start.date().and_hms_opt(0, 0, 0).unwrap());
        if midnight_secs.num_seconds() % step != 0 {
            return Err(Error::invalid(
                "series start is not aligned to an observation slot".to_string(),
            ));
        }
        Ok(CalendarContext { start, s, tz })
    }

    pub fn step_seconds(&self) -> i64 {
        86_400 / self.s as i64
    }

    /// Within-day slot index of the start instant.
    pub fn start_slot(&self) -> usize {
        let secs = self
            .start
            .signed_duration_since(self.start.date().and_hms_opt(0, 0, 0).unwrap())
            .num_seconds();
        (secs / self.step_seconds()) as usize
    }

    pub fn timestamp(&self, i: usize) -> NaiveDateTime {
        self.start + Duration::seconds(self.step_seconds() * i as i64)
    }

    /// Signed observation index of `date` at 00:00 relative to the series start.
    pub fn index_of_date(&self, date: NaiveDate) -> i64 {
        let days = date.signed_duration_since(self.start.date()).num_days();
        days * self.s as i64 - self.start_slot() as i64
    }

    /// Derives the context for the window starting `offset` observations in.
    pub fn offset(&self, offset: usize) -> CalendarContext {
        CalendarContext {
            start: self.timestamp(offset),
            s: self.s,
            tz: self.tz.clone(),
        }
    }
}

/// Calendar covariates of one observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CalendarRow {
    /// Slot of the day, `0..S`.
    pub hod: u32,
    /// Slot of the week, `0..7S`, zero on Mondays at the first slot.
    pub how: u32,
    /// Slot of the (leap-adjusted) year, `0..365S`.
    pub hoy: u32,
    /// Leap-adjusted day of the year, `0..365`.
    pub doy: u32,
    pub date: NaiveDate,
}

/// Leap-adjusted day of the year: January 1st is 0, December 31st is 364 in
/// every year, and February 28th/29th share a value in leap years.
pub fn day_of_year(date: NaiveDate) -> u32 {
    let ord = date.ordinal0();
    if date.leap_year() && ord >= 59 {
        ord - 1
    } else {
        ord
    }
}

/// Calendar covariates for `n` observations starting at the context origin.
pub fn compute_calendar(ctx: &CalendarContext, n: usize) -> Vec<CalendarRow> {
    let s = ctx.s as u32;
    let slot0 = ctx.start_slot() as u64;
    let start_date = ctx.start.date();
    let mut rows = Vec::with_capacity(n);
    let mut date = start_date;
    let mut doy = day_of_year(date);
    let mut wd = date.weekday().num_days_from_monday();
    let mut day_counter = slot0; // slot within the current day
    for _ in 0..n {
        if day_counter == s as u64 {
            day_counter = 0;
            date += Duration::days(1);
            doy = day_of_year(date);
            wd = date.weekday().num_days_from_monday();
        }
        let hod = day_counter as u32;
        rows.push(CalendarRow {
            hod,
            how: wd * s + hod,
            hoy: doy * s + hod,
            doy,
            date,
        });
        day_counter += 1;
    }
    rows
}

/// The two single-day holiday categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HolidayCategory {
    /// Falls on the same weekday every year (dates vary).
    Weekday,
    /// Falls on the same date every year (weekday varies).
    FixedDate,
}

/// A named holiday with its yearly occurrences.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolidaySpec {
    pub name: String,
    pub occurrences: Vec<NaiveDate>,
    pub category: HolidayCategory,
    /// Bridging steps into the adjacent days, `0..=S`.
    pub bridge: usize,
}

impl HolidaySpec {
    pub fn validate(&self, s: usize) -> Result<()> {
        if self.bridge > s {
            return Err(Error::invalid(format!(
                "holiday `{}`: bridge {} exceeds {} observations per day",
                self.name, self.bridge, s
            )));
        }
        match self.category {
            HolidayCategory::Weekday => {
                let mut wd = None;
                for d in &self.occurrences {
                    let w = d.weekday();
                    if *wd.get_or_insert(w) != w {
                        return Err(Error::invalid(format!(
                            "weekday holiday `{}` has occurrences on different weekdays",
                            self.name
                        )));
                    }
                }
            }
            HolidayCategory::FixedDate => {
                let mut md = None;
                for d in &self.occurrences {
                    let m = (d.month(), d.day());
                    if *md.get_or_insert(m) != m {
                        return Err(Error::invalid(format!(
                            "fixed-date holiday `{}` has occurrences on different dates",
                            self.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Infers the category of a holiday from its occurrence dates.
///
/// Ambiguous evidence (a single year, or identical weekday *and* date across
/// all years) falls back to fixed-date with a logged warning.
pub fn classify_holiday(occurrences: &[NaiveDate]) -> HolidayCategory {
    if occurrences.len() < 2 {
        log::warn!("holiday with a single occurrence classified as fixed-date by default");
        return HolidayCategory::FixedDate;
    }
    let same_weekday = occurrences
        .windows(2)
        .all(|w| w[0].weekday() == w[1].weekday());
    let same_monthday = occurrences
        .windows(2)
        .all(|w| (w[0].month(), w[0].day()) == (w[1].month(), w[1].day()));
    match (same_weekday, same_monthday) {
        (true, false) => HolidayCategory::Weekday,
        (false, true) => HolidayCategory::FixedDate,
        (true, true) => {
            log::warn!("holiday occurrences share both weekday and date; treated as fixed-date");
            HolidayCategory::FixedDate
        }
        (false, false) => {
            log::warn!("holiday occurrences share neither weekday nor date; treated as fixed-date");
            HolidayCategory::FixedDate
        }
    }
}

/// Activation sequence of a single-day holiday.
///
/// Each occurrence activates the window `[t_hld - b, t_hld + b + S - 1]`
/// (the holiday bridged by `b` steps into both neighbouring days), counting
/// `1, 2, ..., 2b + S` in order; zero elsewhere. Occurrences outside the
/// series range are skipped; windows are clipped at the boundaries.
pub fn holiday_activation(spec: &HolidaySpec, ctx: &CalendarContext, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let b = spec.bridge as i64;
    let s = ctx.s as i64;
    for &date in &spec.occurrences {
        let t_hld = ctx.index_of_date(date);
        let w_start = t_hld - b;
        let w_len = 2 * b + s;
        for j in 0..w_len {
            let t = w_start + j;
            if t >= 0 && (t as usize) < n {
                out[t as usize] = (j + 1) as f64;
            }
        }
    }
    out
}

/// Activation sequence of the winter holiday period (December 18th 00:00
/// through January 6th, covering `20S` observations), counting `1..20S`.
pub fn holiday_period_activation(ctx: &CalendarContext, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let s = ctx.s as i64;
    let len = 20 * s;
    let first_year = ctx.start.date().year() - 1;
    let last_year = ctx.timestamp(n.saturating_sub(1)).date().year();
    for year in first_year..=last_year {
        let start_date = NaiveDate::from_ymd_opt(year, 12, 18).unwrap();
        let w_start = ctx.index_of_date(start_date);
        for j in 0..len {
            let t = w_start + j;
            if t >= 0 && (t as usize) < n {
                out[t as usize] = (j + 1) as f64;
            }
        }
    }
    out
}

/// Weekly impact profile damping fixed-date holiday effects.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImpactProfile {
    /// One value per hour of the week, each in `[0, 1]`; Sunday slots are 0.
    pub values: Vec<f64>,
    /// Hour-of-day slots whose peak/Sunday denominator was not positive.
    pub degenerate_slots: Vec<usize>,
}

impl ImpactProfile {
    pub fn value_at(&self, how: u32) -> f64 {
        self.values[how as usize]
    }
}

fn median(sorted_scratch: &mut Vec<f64>) -> f64 {
    sorted_scratch.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted_scratch.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        sorted_scratch[n / 2]
    } else {
        0.5 * (sorted_scratch[n / 2 - 1] + sorted_scratch[n / 2])
    }
}

/// Computes the impact profile from load medians per hour of the week.
///
/// For each week slot the deviation of the weekly profile from the Sunday
/// profile is scaled by the deviation of the Tuesday-Thursday peak profile
/// from the Sunday profile and clamped to `[0, 1]`. Sunday slots are exactly
/// zero, and slots with a non-positive denominator are zeroed and flagged.
pub fn impact_profile(load: &[f64], cal: &[CalendarRow], s: usize) -> Result<ImpactProfile> {
    let n = load.len().min(cal.len());
    if n < 8 * 7 * s {
        return Err(Error::InsufficientData {
            needed: 8 * 7 * s,
            got: n,
        });
    }
    let mut by_how: Vec<Vec<f64>> = vec![Vec::new(); 7 * s];
    for i in 0..n {
        let v = load[i];
        if v.is_finite() {
            by_how[cal[i].how as usize].push(v);
        }
    }
    let med: Vec<f64> = by_how.iter_mut().map(median).collect();

    let mut values = vec![0.0; 7 * s];
    let mut degenerate = Vec::new();
    for hod in 0..s {
        let sun = med[hod + 6 * s];
        let peak = (med[hod + s] + med[hod + 2 * s] + med[hod + 3 * s]) / 3.0;
        let denom = peak - sun;
        for day in 0..6 {
            let how = day * s + hod;
            if !(denom > 0.0) || !denom.is_finite() {
                values[how] = 0.0;
                if day == 0 {
                    degenerate.push(hod);
                }
            } else {
                let i_t = (med[how] - sun) / denom;
                values[how] = i_t.clamp(0.0, 1.0);
            }
        }
        values[6 * s + hod] = 0.0;
    }
    Ok(ImpactProfile {
        values,
        degenerate_slots: degenerate,
    })
}

/// Gregorian Easter Sunday (anonymous computus).
pub fn easter_sunday(year: i32) -> NaiveDate {
    let a = year % 19;
    let b = year / 100;
    let c = year % 100;
    let d = b / 4;
    let e = b % 4;
    let f = (b + 8) / 25;
    let g = (b - f + 1) / 3;
    let h = (19 * a + b - d - g + 15) % 30;
    let i = c / 4;
    let k = c % 4;
    let l = (32 + 2 * e + 2 * i - h - k) % 7;
    let m = (a + 11 * h + 22 * l) / 451;
    let month = (h + l - 7 * m + 114) / 31;
    let day = (h + l - 7 * m + 114) % 31 + 1;
    NaiveDate::from_ymd_opt(year, month as u32, day as u32).unwrap()
}

/// First Monday at or before `date`.
pub fn monday_on_or_before(date: NaiveDate) -> NaiveDate {
    date - Duration::days(date.weekday().num_days_from_monday() as i64)
}

pub use chrono::Weekday as ChronoWeekday;

/// Convenience for tests and the synthetic generator.
pub fn weekday_of(date: NaiveDate) -> Weekday {
    date.weekday()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx_hourly(y: i32, m: u32, d: u32) -> CalendarContext {
        let start = NaiveDate::from_ymd_opt(y, m, d).unwrap().and_hms_opt(0, 0, 0).unwrap();
        CalendarContext::new(start, 24, TimezoneRule::None).unwrap()
    }

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn doy_origin_is_zero() {
        assert_eq!(day_of_year(date(2015, 1, 1)), 0);
    }

    #[test]
    fn doy_leap_day_shares_value() {
        assert_eq!(day_of_year(date(2016, 2, 29)), day_of_year(date(2016, 2, 28)));
    }

    #[test]
    fn doy_dec31_by_enumeration() {
        // Oracle: walk through 2016 counting days but skipping Feb 29.
        let mut count = 0u32;
        let mut d = date(2016, 1, 1);
        while d < date(2016, 12, 31) {
            if !(d.month() == 2 && d.day() == 29) {
                count += 1;
            }
            d += Duration::days(1);
        }
        assert_eq!(day_of_year(date(2016, 12, 31)), count);
        assert_eq!(count, 364);
    }

    #[test]
    fn doy_identities_all_years() {
        for y in 2000..=2030 {
            assert_eq!(day_of_year(date(y, 12, 31)), 364, "year {y}");
            if date(y, 1, 1).leap_year() {
                assert_eq!(day_of_year(date(y, 2, 29)), day_of_year(date(y, 2, 28)));
                // Post-leap dates match their non-leap values.
                assert_eq!(day_of_year(date(y, 3, 1)), day_of_year(date(2015, 3, 1)));
            }
        }
    }

    #[test]
    fn doy_monotone_and_surjective_within_year() {
        let mut seen = vec![false; 365];
        let mut prev = 0;
        let mut d = date(2020, 1, 1);
        while d.year() == 2020 {
            let v = day_of_year(d);
            assert!(v >= prev);
            prev = v;
            seen[v as usize] = true;
            d += Duration::days(1);
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn calendar_start_on_thursday() {
        // 2015-01-01 is a Thursday.
        let ctx = ctx_hourly(2015, 1, 1);
        let rows = compute_calendar(&ctx, 48);
        assert_eq!(rows[0].hod, 0);
        assert_eq!(rows[0].doy, 0);
        assert_eq!(rows[0].hoy, 0);
        assert_eq!(rows[0].how, 3 * 24);
        assert_eq!(rows[25].hod, 1);
        assert_eq!(rows[25].how, 4 * 24 + 1);
    }

    #[test]
    fn calendar_hoy_identity_and_ranges() {
        let ctx = ctx_hourly(2015, 6, 15);
        for r in compute_calendar(&ctx, 24 * 400) {
            assert!(r.hod < 24);
            assert!(r.how < 7 * 24);
            assert!(r.hoy < 365 * 24);
            assert_eq!(r.hoy, r.doy * 24 + r.hod);
            assert_eq!(r.hoy % 24, r.hod);
        }
    }

    #[test]
    fn calendar_weekly_periodicity() {
        let ctx = ctx_hourly(2015, 3, 2);
        let rows = compute_calendar(&ctx, 24 * 30);
        for t in 0..24 * 30 - 7 * 24 {
            assert_eq!(rows[t].how, rows[t + 7 * 24].how);
        }
    }

    #[test]
    fn calendar_mid_day_start() {
        let start = date(2015, 1, 1).and_hms_opt(9, 0, 0).unwrap();
        let ctx = CalendarContext::new(start, 24, TimezoneRule::None).unwrap();
        let rows = compute_calendar(&ctx, 24);
        assert_eq!(rows[0].hod, 9);
        assert_eq!(rows[14].hod, 23);
        assert_eq!(rows[15].hod, 0);
        assert_eq!(rows[15].doy, 1);
    }

    #[test]
    fn activation_without_bridging() {
        let ctx = ctx_hourly(2015, 1, 1);
        let spec = HolidaySpec {
            name: "x".into(),
            occurrences: vec![date(2015, 1, 3)],
            category: HolidayCategory::FixedDate,
            bridge: 0,
        };
        let act = holiday_activation(&spec, &ctx, 24 * 5);
        for t in 0..24 * 5 {
            let day = t / 24;
            if day == 2 {
                assert_eq!(act[t], (t % 24 + 1) as f64);
            } else {
                assert_eq!(act[t], 0.0);
            }
        }
    }

    #[test]
    fn activation_full_bridge_spans_three_days() {
        let ctx = ctx_hourly(2015, 1, 1);
        let spec = HolidaySpec {
            name: "x".into(),
            occurrences: vec![date(2015, 1, 3)],
            category: HolidayCategory::FixedDate,
            bridge: 24,
        };
        let act = holiday_activation(&spec, &ctx, 24 * 6);
        let nonzero: Vec<usize> = (0..act.len()).filter(|&t| act[t] != 0.0).collect();
        assert_eq!(nonzero.len(), 3 * 24);
        assert_eq!(*nonzero.first().unwrap(), 24);
        assert_eq!(*nonzero.last().unwrap(), 4 * 24 - 1);
        assert_eq!(act[4 * 24 - 1], (3 * 24) as f64);
    }

    #[test]
    fn activations_do_not_overlap_when_far_apart() {
        let ctx = ctx_hourly(2015, 1, 1);
        for b in [0usize, 12, 24] {
            let spec = HolidaySpec {
                name: "x".into(),
                occurrences: vec![date(2015, 1, 5), date(2015, 1, 8)],
                category: HolidayCategory::Weekday,
                bridge: b,
            };
            let act = holiday_activation(&spec, &ctx, 24 * 12);
            // Pointwise max equals sum: windows are disjoint.
            let spec_a = HolidaySpec { occurrences: vec![date(2015, 1, 5)], ..spec.clone() };
            let spec_b = HolidaySpec { occurrences: vec![date(2015, 1, 8)], ..spec.clone() };
            let a = holiday_activation(&spec_a, &ctx, 24 * 12);
            let bb = holiday_activation(&spec_b, &ctx, 24 * 12);
            for t in 0..act.len() {
                assert_eq!(act[t], a[t] + bb[t]);
                assert_eq!(act[t], a[t].max(bb[t]));
            }
        }
    }

    #[test]
    fn activation_skips_out_of_range_occurrence() {
        let ctx = ctx_hourly(2015, 1, 1);
        let spec = HolidaySpec {
            name: "x".into(),
            occurrences: vec![date(2014, 5, 1), date(2015, 1, 2)],
            category: HolidayCategory::FixedDate,
            bridge: 0,
        };
        let act = holiday_activation(&spec, &ctx, 24 * 3);
        assert_eq!(act.iter().filter(|&&v| v != 0.0).count(), 24);
    }

    #[test]
    fn activation_runs_are_contiguous_blocks() {
        let ctx = ctx_hourly(2015, 1, 1);
        let spec = HolidaySpec {
            name: "x".into(),
            occurrences: vec![date(2015, 2, 10), date(2015, 7, 3)],
            category: HolidayCategory::Weekday,
            bridge: 8,
        };
        let n = 24 * 365;
        let act = holiday_activation(&spec, &ctx, n);
        let expect_len = 2 * 8 + 24;
        let mut t = 0;
        let mut blocks = 0;
        while t < n {
            if act[t] != 0.0 {
                for j in 0..expect_len {
                    assert_eq!(act[t + j], (j + 1) as f64);
                }
                t += expect_len;
                blocks += 1;
            } else {
                t += 1;
            }
        }
        assert_eq!(blocks, 2);
        let zeros = act.iter().filter(|&&v| v == 0.0).count();
        assert_eq!(zeros, n - 2 * expect_len);
    }

    #[test]
    fn period_window_length_and_counts() {
        let ctx = ctx_hourly(2015, 12, 1);
        let n = 24 * 60;
        let act = holiday_period_activation(&ctx, n);
        let nonzero = act.iter().filter(|&&v| v != 0.0).count();
        assert_eq!(nonzero, 20 * 24, "window covers 20S observations");
        // Dec 17 23:00 inactive.
        let idx_dec17_23 = 16 * 24 + 23;
        assert_eq!(act[idx_dec17_23], 0.0);
        // Dec 25 00:00 is the (7S+1)-th observation of the window.
        let idx_dec25_0 = 24 * 24;
        assert_eq!(act[idx_dec25_0], (7 * 24 + 1) as f64);
        // Jan 6 23:00 is the last active observation.
        let idx_jan6_23 = 36 * 24 + 23;
        assert_eq!(act[idx_jan6_23], (20 * 24) as f64);
        assert_eq!(act[idx_jan6_23 + 1], 0.0);
    }

    #[test]
    fn impact_profile_on_stylized_week() {
        // Tue=Wed=Thu load 2, Sunday 1, Monday 1.5, Fri/Sat 1.8 at every hour.
        let ctx = ctx_hourly(2015, 1, 5); // a Monday
        let n = 24 * 7 * 10;
        let cal = compute_calendar(&ctx, n);
        let load: Vec<f64> = cal
            .iter()
            .map(|r| match r.how / 24 {
                0 => 1.5,
                1 | 2 | 3 => 2.0,
                4 | 5 => 1.8,
                _ => 1.0,
            })
            .collect();
        let p = impact_profile(&load, &cal, 24).unwrap();
        for hod in 0..24 {
            assert!((p.value_at(hod) - 0.5).abs() < 1e-12, "Monday slot");
            assert!((p.value_at(24 + hod as u32) - 1.0).abs() < 1e-12, "Tuesday slot");
            assert!((p.value_at(4 * 24 + hod as u32) - 0.8).abs() < 1e-12, "Friday slot");
            assert_eq!(p.value_at(6 * 24 + hod as u32), 0.0, "Sunday slot");
        }
        assert!(p.degenerate_slots.is_empty());
    }

    #[test]
    fn impact_profile_constant_load_is_degenerate() {
        let ctx = ctx_hourly(2015, 1, 5);
        let n = 24 * 7 * 9;
        let cal = compute_calendar(&ctx, n);
        let load = vec![3.0; n];
        let p = impact_profile(&load, &cal, 24).unwrap();
        assert!(p.values.iter().all(|&v| v == 0.0));
        assert_eq!(p.degenerate_slots.len(), 24);
    }

    #[test]
    fn impact_profile_needs_eight_weeks() {
        let ctx = ctx_hourly(2015, 1, 5);
        let n = 24 * 7 * 4;
        let cal = compute_calendar(&ctx, n);
        assert!(impact_profile(&vec![1.0; n], &cal, 24).is_err());
    }

    #[test]
    fn classify_weekday_holiday() {
        // Good Friday occurrences.
        let occ = vec![date(2015, 4, 3), date(2016, 3, 25), date(2017, 4, 14)];
        assert_eq!(classify_holiday(&occ), HolidayCategory::Weekday);
    }

    #[test]
    fn classify_fixed_date_holiday() {
        let occ = vec![date(2015, 1, 1), date(2016, 1, 1), date(2017, 1, 1)];
        assert_eq!(classify_holiday(&occ), HolidayCategory::FixedDate);
    }

    #[test]
    fn classify_single_occurrence_defaults_to_fixed() {
        assert_eq!(classify_holiday(&[date(2015, 8, 9)]), HolidayCategory::FixedDate);
    }

    #[test]
    fn easter_known_dates() {
        assert_eq!(easter_sunday(2015), date(2015, 4, 5));
        assert_eq!(easter_sunday(2016), date(2016, 3, 27));
        assert_eq!(easter_sunday(2024), date(2024, 3, 31));
    }

    #[test]
    fn eu_dst_transitions() {
        let (spring, fall) = TimezoneRule::EuropeanUnion.transitions(2015).unwrap();
        assert_eq!(spring.date(), date(2015, 3, 29));
        assert_eq!(fall.date(), date(2015, 10, 25));
    }
}
