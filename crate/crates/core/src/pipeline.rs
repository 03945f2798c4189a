//! The full forecasting pipeline: temperature models, the two-stage additive
//! fit with state extraction, residual autoregression, and horizon assembly.
//!
//! Fitting runs three steps in order. First the exponentially smoothed
//! temperatures are modelled on the UTC timeline by a seasonal additive model
//! plus an autoregression on its residuals. Second, load is fitted on
//! calendar, holiday and smoothed-temperature covariates; weekly peak-hour
//! averages of the residuals are filtered by a seasonal exponential-smoothing
//! model to extract level and seasonal states, and the model is refitted with
//! the states as varying-coefficient inputs. Third, an autoregression on the
//! second-stage residuals captures what the smooth terms leave behind.

use std::collections::BTreeMap;
use std::time::Instant;

use chrono::{Datelike, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::ar::{fit_ar, ArModel};
use crate::calendar::{
    compute_calendar, holiday_activation, holiday_period_activation, impact_profile,
    CalendarContext, CalendarRow, HolidayCategory, HolidaySpec, ImpactProfile, TimezoneRule,
};
use crate::error::{Error, Result};
use crate::ets::{fit_ets, EtsModel};
use crate::gam::{self, Constraint, CovariateSet, FitOptions, GamModel, SplineKind, TermSpec};
use crate::preprocess::{smooth_temperature, CleaningReport};
use crate::timeseries::TimeSeries;

/// Ablation switches: drop one modelling component at a time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    pub no_holidays: bool,
    pub no_temperature: bool,
    pub no_states: bool,
}

/// Pipeline hyperparameters. Defaults follow the hourly (`S = 24`) setup.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub s: usize,
    /// Bridging steps applied to holidays without an explicit bridge.
    pub bridge: usize,
    /// Multi-step estimation horizon of the weekly state filter, in weeks.
    pub h_ets_weeks: usize,
    /// Seasonal period of the state filter, in weeks.
    pub state_period: usize,
    /// Effective-degrees inflation for smoothing selection; `None` uses
    /// `ln(n)/2`.
    pub gamma_eff: Option<f64>,
    /// Residual autoregression maximum order; `None` uses `8 * 7 * S`.
    pub p_max_residual: Option<usize>,
    /// Temperature-residual autoregression maximum order; `None` uses
    /// `7 * 4 * S`.
    pub p_max_temp: Option<usize>,
    pub max_sweeps: usize,
    pub ablation: Ablation,
}

impl PipelineConfig {
    pub fn hourly() -> Self {
        PipelineConfig {
            s: 24,
            bridge: 24,
            h_ets_weeks: 2,
            state_period: 52,
            gamma_eff: None,
            p_max_residual: None,
            p_max_temp: None,
            max_sweeps: 2,
            ablation: Ablation::default(),
        }
    }

    pub fn for_resolution(s: usize) -> Self {
        PipelineConfig {
            s,
            bridge: s,
            ..Self::hourly()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.s < 3 || self.s % 3 != 0 {
            return Err(Error::InvalidConfig(format!(
                "resolution {} must be a positive multiple of 3",
                self.s
            )));
        }
        let period = 2 * self.bridge + self.s;
        if period % (self.s / 3) != 0 {
            return Err(Error::InvalidConfig(format!(
                "bridge {} gives a holiday window of {} steps, not divisible by the basis rank {}",
                self.bridge,
                period,
                self.s / 3
            )));
        }
        Ok(())
    }
}

/// A cleaned dataset ready for fitting: regularized local-clock load, the
/// aggregated temperature on its UTC timeline, and the holiday calendar.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub ctx: CalendarContext,
    /// Load in MW on the regular local grid.
    pub load: TimeSeries,
    /// Aggregated temperature on the UTC timeline.
    pub temp_utc: TimeSeries,
    /// Standard (non-DST) offset of local time ahead of UTC, in seconds.
    pub std_offset_secs: i64,
    pub holidays: Vec<HolidaySpec>,
    pub cleaning: CleaningReport,
    /// Optional externally supplied day-ahead forecasts for comparison.
    pub tso: Option<TimeSeries>,
}

impl Dataset {
    /// A self-contained copy of local rows `[t0, t0 + len)`; the temperature
    /// series is sliced to the matching UTC span with a safety margin.
    pub fn window(&self, t0: usize, len: usize) -> Result<Dataset> {
        if t0 + len > self.load.len() {
            return Err(Error::InsufficientData {
                needed: t0 + len,
                got: self.load.len(),
            });
        }
        let step = self.ctx.step_seconds();
        let local_start = self.ctx.timestamp(t0);
        let local_end = self.ctx.timestamp(t0 + len - 1);
        // The local window reads UTC instants in
        // [start - offset - 1h, end - offset]; pad by a few steps.
        let utc_from = local_start - chrono::Duration::seconds(self.std_offset_secs + 7200);
        let utc_to = local_end - chrono::Duration::seconds(self.std_offset_secs) + chrono::Duration::seconds(7200);
        let from_idx = (utc_from
            .signed_duration_since(self.temp_utc.start)
            .num_seconds()
            / step)
            .max(0) as usize;
        let to_idx = ((utc_to.signed_duration_since(self.temp_utc.start).num_seconds() / step) + 1)
            .min(self.temp_utc.len() as i64)
            .max(from_idx as i64 + 1) as usize;
        let tso = match &self.tso {
            Some(t) => Some(t.window(t0, len.min(t.len().saturating_sub(t0)))?),
            None => None,
        };
        Ok(Dataset {
            ctx: self.ctx.offset(t0),
            load: self.load.window(t0, len)?,
            temp_utc: self.temp_utc.window(from_idx, to_idx - from_idx)?,
            std_offset_secs: self.std_offset_secs,
            holidays: self.holidays.clone(),
            cleaning: CleaningReport::default(),
            tso,
        })
    }
}

/// Weekly level/seasonal state covariates interpolated to the observation
/// grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateCovariates {
    pub level: Vec<f64>,
    pub season: Vec<f64>,
    /// Local row of each weekly anchor (the central peak hour of the week).
    pub anchors: Vec<usize>,
    pub ets: EtsModel,
}

/// One temperature forecasting variant (per smoothing weight).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TempVariant {
    pub gam: GamModel,
    pub ar: ArModel,
    /// Residual history tail for the autoregressive forecast.
    pub ar_tail: Vec<f64>,
    /// Tail of the in-sample smoothed series (for alignment reads that fall
    /// just before the forecast origin).
    pub smooth_tail: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TempModels {
    pub utc_start: NaiveDateTime,
    pub utc_len: usize,
    pub variants: Vec<TempVariant>,
}

/// Everything needed to produce an H-step load forecast.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelBundle {
    pub config: PipelineConfig,
    pub start: NaiveDateTime,
    pub s: usize,
    pub tz: TimezoneRule,
    pub std_offset_secs: i64,
    pub train_len: usize,
    pub holidays: Vec<HolidaySpec>,
    pub impact: ImpactProfile,
    pub temp: Option<TempModels>,
    pub stage1: GamModel,
    pub states: Option<StateCovariates>,
    pub stage2: GamModel,
    pub residual_ar: ArModel,
    pub residual_tail: Vec<f64>,
    pub timings: FitTimings,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FitTimings {
    pub temperature_s: f64,
    pub stage1_s: f64,
    pub states_s: f64,
    pub stage2_s: f64,
    pub residual_ar_s: f64,
    pub total_s: f64,
}

/// A forecast with its additive decomposition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForecastDetail {
    pub point: Vec<f64>,
    pub intercept: f64,
    pub effects: Vec<(String, Vec<f64>)>,
    pub ar_component: Vec<f64>,
    pub timestamps_start: NaiveDateTime,
}

const HOUR_COVS: [&str; 3] = ["hod", "how", "hoy"];

fn push_calendar_covariates(data: &mut CovariateSet, cal: &[CalendarRow]) -> Result<()> {
    data.insert("hod", cal.iter().map(|r| r.hod as f64).collect())?;
    data.insert("how", cal.iter().map(|r| r.how as f64).collect())?;
    data.insert("hoy", cal.iter().map(|r| r.hoy as f64).collect())?;
    let _ = HOUR_COVS;
    Ok(())
}

/// The Eq.-content term list of the load model.
///
/// Seven seasonal/temperature smooths, one activation smooth per holiday,
/// the winter-period smooth, and (second stage) the two state multiplier
/// terms.
pub fn stage_terms(
    s: usize,
    bridge: usize,
    holidays: &[HolidaySpec],
    include_temp: bool,
    include_holidays: bool,
    include_states: bool,
) -> Vec<TermSpec> {
    let sf = s as f64;
    let k3 = s / 3;
    let mut terms = Vec::new();
    if include_temp {
        terms.push(TermSpec::smooth("temp1", "temp1", 6));
        terms.push(TermSpec::smooth("temp2", "temp2", 6));
    }
    terms.push(TermSpec::cyclic("hod", "hod", sf, s));
    terms.push(TermSpec::cyclic("how", "how", 7.0 * sf, 7 * s));
    terms.push(TermSpec::cyclic("hoy", "hoy", 365.0 * sf, 12));
    terms.push(TermSpec::tensor_cyclic(
        "hoy_x_hod",
        "hoy",
        365.0 * sf,
        12,
        "hod",
        sf,
        k3,
    ));
    terms.push(TermSpec::tensor_cyclic(
        "hoy_x_how",
        "hoy",
        365.0 * sf,
        12,
        "how",
        7.0 * sf,
        7,
    ));
    if include_holidays {
        for h in holidays {
            let b = h.bridge.min(s).max(0);
            let period = (2 * b + s) as f64;
            let name = format!("hld:{}", h.name);
            let mut term = TermSpec {
                name: name.clone(),
                covariates: vec![name],
                kinds: vec![SplineKind::Cyclic { period, rank: k3 }],
                degree: 3,
                penalty_order: 2,
                constraint: Constraint::ZeroAtZero,
                multiplier: None,
            };
            if h.category == HolidayCategory::FixedDate {
                term.multiplier = Some("impact".to_string());
            }
            terms.push(term);
            let _ = bridge;
        }
        terms.push(TermSpec {
            name: "hldp".to_string(),
            covariates: vec!["hldp".to_string()],
            kinds: vec![SplineKind::Cyclic { period: 20.0 * sf, rank: k3 }],
            degree: 3,
            penalty_order: 2,
            constraint: Constraint::ZeroAtZero,
            multiplier: None,
        });
    }
    if include_states {
        terms.push(
            TermSpec::cyclic("level", "hod", sf, k3)
                .with_constraint(Constraint::None)
                .with_multiplier("level"),
        );
        terms.push(
            TermSpec::cyclic("season", "hod", sf, k3)
                .with_constraint(Constraint::None)
                .with_multiplier("season"),
        );
    }
    terms
}

/// Builds the covariate table for rows `[from, to)` of the local grid.
#[allow(clippy::too_many_arguments)]
fn build_covariates(
    cal: &[CalendarRow],
    from: usize,
    to: usize,
    temps: Option<(&[f64], &[f64])>,
    activations: &BTreeMap<String, Vec<f64>>,
    impact: Option<&ImpactProfile>,
    states: Option<(&[f64], &[f64])>,
) -> Result<CovariateSet> {
    let n = to - from;
    let mut data = CovariateSet::new(n);
    push_calendar_covariates(&mut data, &cal[from..to])?;
    if let Some((t1, t2)) = temps {
        data.insert("temp1", t1[from..to].to_vec())?;
        data.insert("temp2", t2[from..to].to_vec())?;
    }
    for (name, act) in activations {
        data.insert(name, act[from..to].to_vec())?;
    }
    if let Some(p) = impact {
        data.insert(
            "impact",
            cal[from..to].iter().map(|r| p.value_at(r.how)).collect(),
        )?;
    }
    if let Some((lvl, ssn)) = states {
        data.insert("level", lvl[from..to].to_vec())?;
        data.insert("season", ssn[from..to].to_vec())?;
    }
    Ok(data)
}

fn holiday_activations(
    holidays: &[HolidaySpec],
    ctx: &CalendarContext,
    n: usize,
    default_bridge: usize,
    s: usize,
) -> BTreeMap<String, Vec<f64>> {
    let mut map = BTreeMap::new();
    for h in holidays {
        let mut spec = h.clone();
        if spec.bridge > s {
            spec.bridge = default_bridge;
        }
        map.insert(format!("hld:{}", h.name), holiday_activation(&spec, ctx, n));
    }
    map.insert("hldp".to_string(), holiday_period_activation(ctx, n));
    map
}

/// Seasonal model of one smoothed temperature variant on the UTC timeline:
/// cyclic day and year smooths plus their interaction, with an
/// autoregression on the residuals.
pub fn forecast_temperature_model(
    smooth_utc: &TimeSeries,
    k_hod: usize,
    p_max: usize,
    gamma_eff: Option<f64>,
    max_sweeps: usize,
) -> Result<TempVariant> {
    let s = smooth_utc.resolution;
    let sf = s as f64;
    let utc_ctx = CalendarContext::new(smooth_utc.start, s, TimezoneRule::None)?;
    let cal = compute_calendar(&utc_ctx, smooth_utc.len());
    let mut data = CovariateSet::new(smooth_utc.len());
    push_calendar_covariates(&mut data, &cal)?;
    let terms = vec![
        TermSpec::cyclic("hod", "hod", sf, k_hod),
        TermSpec::cyclic("hoy", "hoy", 365.0 * sf, 6),
        TermSpec::tensor_cyclic("hoy_x_hod", "hoy", 365.0 * sf, 6, "hod", sf, k_hod),
    ];
    let opts = FitOptions {
        gamma_eff,
        max_sweeps,
        fixed_lambdas: None,
    };
    let gam = gam::fit(&terms, &data, &smooth_utc.values, &opts)?;
    let ar = fit_ar(&gam.residuals, p_max.min(gam.residuals.len() / 4))?;
    let tail_len = ar.order.max(1);
    let ar_tail = gam.residuals[gam.residuals.len().saturating_sub(tail_len)..].to_vec();
    let smooth_tail_len = (2 * s).min(smooth_utc.len());
    let smooth_tail = smooth_utc.values[smooth_utc.len() - smooth_tail_len..].to_vec();
    Ok(TempVariant {
        gam,
        ar,
        ar_tail,
        smooth_tail,
    })
}

impl TempVariant {
    /// Forecast on the UTC timeline for `h` steps past the training end.
    pub fn forecast(&self, utc_start: NaiveDateTime, utc_len: usize, s: usize, h: usize) -> Result<Vec<f64>> {
        let utc_ctx = CalendarContext::new(utc_start, s, TimezoneRule::None)?;
        let horizon_ctx = utc_ctx.offset(utc_len);
        let cal = compute_calendar(&horizon_ctx, h);
        let mut data = CovariateSet::new(h);
        push_calendar_covariates(&mut data, &cal)?;
        let seasonal = self.gam.predict(&data)?;
        let ar = self.ar.forecast(&self.ar_tail, h)?;
        Ok(seasonal.iter().zip(&ar).map(|(a, b)| a + b).collect())
    }
}

/// Weekly aggregation set: within-week row offsets of the working-day peak
/// hours (08:00 to 19:59 local, Monday through Friday).
pub fn peak_hour_offsets(s: usize) -> Vec<usize> {
    let lo = 8 * s / 24;
    let hi = 20 * s / 24;
    let mut out = Vec::with_capacity(5 * (hi - lo));
    for day in 0..5 {
        for slot in lo..hi {
            out.push(day * s + slot);
        }
    }
    out
}

/// Extracts level/seasonal states from first-stage residuals: weekly means
/// over the peak-hour set, a seasonal exponential-smoothing fit on the
/// weekly series, and linear interpolation between weekly anchors (constant
/// beyond the first and last anchor).
pub fn extract_states(
    residuals: &[f64],
    cal: &[CalendarRow],
    s: usize,
    state_period: usize,
    h_ets_weeks: usize,
) -> Result<StateCovariates> {
    let n = residuals.len().min(cal.len());
    let offsets = peak_hour_offsets(s);
    let mid = offsets[(offsets.len() - 1) / 2];
    let week_len = 7 * s;

    // First complete week start.
    let w0 = cal[..n.min(week_len)]
        .iter()
        .position(|r| r.how == 0)
        .ok_or_else(|| Error::InsufficientData { needed: week_len, got: n })?;
    let n_weeks = (n - w0) / week_len;
    if n_weeks < 2 * state_period {
        return Err(Error::InsufficientData {
            needed: 2 * state_period,
            got: n_weeks,
        });
    }

    let mut weekly = Vec::with_capacity(n_weeks);
    let mut anchors = Vec::with_capacity(n_weeks);
    for w in 0..n_weeks {
        let base = w0 + w * week_len;
        let mut sum = 0.0;
        for &o in &offsets {
            sum += residuals[base + o];
        }
        weekly.push(sum / offsets.len() as f64);
        anchors.push(base + mid);
    }

    let ets = fit_ets(&weekly, state_period, h_ets_weeks)?;
    let level = interpolate_anchors(&anchors, &ets.level_path, n);
    let season = interpolate_anchors(&anchors, ets.seasonal_path.as_ref().unwrap(), n);
    Ok(StateCovariates {
        level,
        season,
        anchors,
        ets,
    })
}

/// Piecewise-linear interpolation between anchor values, constant beyond the
/// boundary anchors.
fn interpolate_anchors(anchors: &[usize], values: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    if anchors.is_empty() {
        return out;
    }
    let k = anchors.len().min(values.len());
    let mut seg = 0usize;
    for (t, slot) in out.iter_mut().enumerate() {
        if t <= anchors[0] {
            *slot = values[0];
        } else if t >= anchors[k - 1] {
            *slot = values[k - 1];
        } else {
            while anchors[seg + 1] < t {
                seg += 1;
            }
            let (a0, a1) = (anchors[seg], anchors[seg + 1]);
            let w = (t - a0) as f64 / (a1 - a0) as f64;
            *slot = values[seg] * (1.0 - w) + values[seg + 1] * w;
        }
    }
    out
}

/// Horizon continuation of the state covariates: the level forecast is the
/// final level, the seasonal forecast repeats the last fitted cycle; both
/// are interpolated between future weekly anchors exactly as in sample.
fn extend_states(states: &StateCovariates, train_len: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let last_anchor = *states.anchors.last().unwrap();
    let week_len = if states.anchors.len() >= 2 {
        states.anchors[1] - states.anchors[0]
    } else {
        7 * 24
    };
    let l_final = states.ets.final_level();
    let n_future = h.div_ceil(week_len) + 1;
    let mut anchor_rows = vec![last_anchor];
    let mut level_vals = vec![*states.ets.level_path.last().unwrap()];
    let mut season_vals = vec![*states.ets.seasonal_path.as_ref().unwrap().last().unwrap()];
    for j in 1..=n_future {
        anchor_rows.push(last_anchor + j * week_len);
        level_vals.push(l_final);
        season_vals.push(states.ets.seasonal_at(j));
    }
    let total = train_len + h;
    let level_full = interpolate_anchors(&anchor_rows, &level_vals, total);
    let season_full = interpolate_anchors(&anchor_rows, &season_vals, total);
    (
        level_full[train_len..].to_vec(),
        season_full[train_len..].to_vec(),
    )
}

/// Aligns a UTC-timeline value accessor to local rows `[from, to)`,
/// combining in-sample values and the forecast continuation.
#[allow(clippy::too_many_arguments)]
fn align_series_to_local(
    in_sample: impl Fn(usize) -> Option<f64>,
    forecast: &[f64],
    utc_start: NaiveDateTime,
    utc_len: usize,
    ctx: &CalendarContext,
    std_offset_secs: i64,
    from: usize,
    to: usize,
) -> Vec<f64> {
    let step = ctx.step_seconds();
    let mut out = Vec::with_capacity(to - from);
    for t in from..to {
        let local = ctx.timestamp(t);
        let year = local.date().year();
        let dst = match ctx.tz.transitions(year) {
            Some((spring, fall)) => local >= spring && local < fall,
            None => false,
        };
        let offset = std_offset_secs + if dst { 3600 } else { 0 };
        let instant = local - chrono::Duration::seconds(offset);
        let idx = instant.signed_duration_since(utc_start).num_seconds() / step;
        let v = if idx < 0 {
            in_sample(0).unwrap_or(f64::NAN)
        } else if (idx as usize) < utc_len {
            in_sample(idx as usize).unwrap_or(f64::NAN)
        } else {
            let fidx = ((idx as usize) - utc_len).min(forecast.len().saturating_sub(1));
            forecast.get(fidx).copied().unwrap_or(f64::NAN)
        };
        out.push(v);
    }
    out
}

/// Fits the full pipeline on a cleaned dataset.
///
/// The impact profile is computed from this window unless a frozen profile
/// is supplied (rolling studies freeze the first window's profile).
pub fn fit_full(
    data: &Dataset,
    cfg: &PipelineConfig,
    frozen_impact: Option<&ImpactProfile>,
) -> Result<ModelBundle> {
    cfg.validate()?;
    let t_start = Instant::now();
    let s = cfg.s;
    if data.ctx.s != s || data.load.resolution != s {
        return Err(Error::InvalidConfig(format!(
            "dataset resolution {} does not match the configured {}",
            data.load.resolution, s
        )));
    }
    let n = data.load.len();
    let cal = compute_calendar(&data.ctx, n);

    let impact = match frozen_impact {
        Some(p) => p.clone(),
        None => impact_profile(&data.load.values, &cal, s)
            .map_err(|e| e.in_stage("impact_profile"))?,
    };

    // Step (i): temperature smoothing, seasonal models and forecast setup.
    let t0 = Instant::now();
    let mut temp_models = None;
    let mut temp1_local = None;
    let mut temp2_local = None;
    if !cfg.ablation.no_temperature {
        let (sm1, sm2) =
            smooth_temperature(&data.temp_utc).map_err(|e| e.in_stage("smooth_temperature"))?;
        let p_max_temp = cfg.p_max_temp.unwrap_or(7 * 4 * s);
        let v1 = forecast_temperature_model(&sm1, s, p_max_temp, cfg.gamma_eff, cfg.max_sweeps)
            .map_err(|e| e.in_stage("forecast_temperature[1]"))?;
        let v2 = forecast_temperature_model(&sm2, s / 3, p_max_temp, cfg.gamma_eff, cfg.max_sweeps)
            .map_err(|e| e.in_stage("forecast_temperature[2]"))?;
        // Local alignment of the in-sample smoothed series.
        let t1 = align_series_to_local(
            |i| sm1.values.get(i).copied(),
            &[],
            sm1.start,
            sm1.len(),
            &data.ctx,
            data.std_offset_secs,
            0,
            n,
        );
        let t2 = align_series_to_local(
            |i| sm2.values.get(i).copied(),
            &[],
            sm2.start,
            sm2.len(),
            &data.ctx,
            data.std_offset_secs,
            0,
            n,
        );
        temp_models = Some(TempModels {
            utc_start: data.temp_utc.start,
            utc_len: data.temp_utc.len(),
            variants: vec![v1, v2],
        });
        temp1_local = Some(t1);
        temp2_local = Some(t2);
    }
    let timing_temp = t0.elapsed().as_secs_f64();

    let activations = holiday_activations(&data.holidays, &data.ctx, n, cfg.bridge, s);
    let include_holidays = !cfg.ablation.no_holidays;
    let include_temp = !cfg.ablation.no_temperature;

    // Step (ii): first-stage fit and state extraction.
    let t0 = Instant::now();
    let temps = match (&temp1_local, &temp2_local) {
        (Some(a), Some(b)) => Some((a.as_slice(), b.as_slice())),
        _ => None,
    };
    let covs1 = build_covariates(&cal, 0, n, temps, &activations, Some(&impact), None)?;
    let terms1 = stage_terms(s, cfg.bridge, &data.holidays, include_temp, include_holidays, false);
    let opts = FitOptions {
        gamma_eff: cfg.gamma_eff,
        max_sweeps: cfg.max_sweeps,
        fixed_lambdas: None,
    };
    let stage1 = gam::fit(&terms1, &covs1, &data.load.values, &opts)
        .map_err(|e| e.in_stage("stage1"))?;
    let timing_stage1 = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let states = if cfg.ablation.no_states {
        None
    } else {
        Some(
            extract_states(&stage1.residuals, &cal, s, cfg.state_period, cfg.h_ets_weeks)
                .map_err(|e| e.in_stage("extract_states"))?,
        )
    };
    let timing_states = t0.elapsed().as_secs_f64();

    // Step (iii): second-stage fit and the residual autoregression.
    let t0 = Instant::now();
    let stage2 = match &states {
        Some(st) => {
            let covs2 = build_covariates(
                &cal,
                0,
                n,
                temps,
                &activations,
                Some(&impact),
                Some((&st.level, &st.season)),
            )?;
            let terms2 =
                stage_terms(s, cfg.bridge, &data.holidays, include_temp, include_holidays, true);
            gam::fit(&terms2, &covs2, &data.load.values, &opts).map_err(|e| e.in_stage("stage2"))?
        }
        None => stage1.clone(),
    };
    let timing_stage2 = if states.is_some() { t0.elapsed().as_secs_f64() } else { 0.0 };

    let t0 = Instant::now();
    let p_max = cfg.p_max_residual.unwrap_or(8 * 7 * s).min(n / 4);
    let residual_ar = fit_ar(&stage2.residuals, p_max).map_err(|e| e.in_stage("fit_residual_ar"))?;
    let tail_len = residual_ar.order.max(1);
    let residual_tail = stage2.residuals[stage2.residuals.len() - tail_len..].to_vec();
    let timing_ar = t0.elapsed().as_secs_f64();

    Ok(ModelBundle {
        config: cfg.clone(),
        start: data.ctx.start,
        s,
        tz: data.ctx.tz.clone(),
        std_offset_secs: data.std_offset_secs,
        train_len: n,
        holidays: data.holidays.clone(),
        impact,
        temp: temp_models,
        stage1,
        states,
        stage2,
        residual_ar,
        residual_tail,
        timings: FitTimings {
            temperature_s: timing_temp,
            stage1_s: timing_stage1,
            states_s: timing_states,
            stage2_s: timing_stage2,
            residual_ar_s: timing_ar,
            total_s: t_start.elapsed().as_secs_f64(),
        },
    })
}

impl ModelBundle {
    fn ctx(&self) -> CalendarContext {
        CalendarContext {
            start: self.start,
            s: self.s,
            tz: self.tz.clone(),
        }
    }

    /// Checks that every holiday calendar covers the forecast years.
    fn check_holiday_coverage(&self, horizon_end: NaiveDateTime) -> Result<()> {
        if self.holidays.is_empty() || self.config.ablation.no_holidays {
            return Ok(());
        }
        let last_year = horizon_end.date().year();
        let covered = self
            .holidays
            .iter()
            .flat_map(|h| h.occurrences.iter().map(|d| d.year()))
            .max()
            .unwrap_or(i32::MIN);
        if covered < last_year {
            let missing: Vec<i32> = (covered + 1..=last_year).collect();
            return Err(Error::HolidayCoverage(missing));
        }
        Ok(())
    }

    /// H-step load forecast with its additive decomposition.
    pub fn forecast(&self, h: usize) -> Result<ForecastDetail> {
        if h == 0 {
            return Err(Error::invalid("forecast horizon must be positive"));
        }
        let ctx = self.ctx();
        let t_end = self.train_len;
        let total = t_end + h;
        self.check_holiday_coverage(ctx.timestamp(total - 1))?;
        let cal = compute_calendar(&ctx, total);

        // Temperature forecasts aligned to the local horizon rows.
        let mut temps_h = None;
        if let Some(tm) = &self.temp {
            let extra = 3 * self.s; // alignment margin past the horizon
            let mut aligned = Vec::new();
            for variant in &tm.variants {
                let fc = variant.forecast(tm.utc_start, tm.utc_len, self.s, h + extra)?;
                let tail = variant.smooth_tail.clone();
                let tail_from = tm.utc_len - tail.len();
                let vals = align_series_to_local(
                    move |i| {
                        if i >= tail_from {
                            tail.get(i - tail_from).copied()
                        } else {
                            None
                        }
                    },
                    &fc,
                    tm.utc_start,
                    tm.utc_len,
                    &ctx,
                    self.std_offset_secs,
                    t_end,
                    total,
                );
                aligned.push(vals);
            }
            temps_h = Some(aligned);
        }

        let activations = holiday_activations(&self.holidays, &ctx, total, self.config.bridge, self.s);
        let states_h = self.states.as_ref().map(|st| extend_states(st, t_end, h));

        // Assemble horizon covariates; temp/state slices are horizon-length,
        // so build the table directly over `[t_end, total)`.
        let mut data = CovariateSet::new(h);
        push_calendar_covariates(&mut data, &cal[t_end..total])?;
        if let Some(tv) = &temps_h {
            data.insert("temp1", tv[0].clone())?;
            data.insert("temp2", tv[1].clone())?;
        }
        for (name, act) in &activations {
            data.insert(name, act[t_end..total].to_vec())?;
        }
        data.insert(
            "impact",
            cal[t_end..total].iter().map(|r| self.impact.value_at(r.how)).collect(),
        )?;
        if let Some((lvl, ssn)) = &states_h {
            data.insert("level", lvl.clone())?;
            data.insert("season", ssn.clone())?;
        }

        let (intercept, effects) = self.stage2.term_effects(&data)?;
        let ar_component = self.residual_ar.forecast(&self.residual_tail, h)?;
        let mut point = vec![intercept; h];
        for (_, eff) in &effects {
            for (p, e) in point.iter_mut().zip(eff) {
                *p += e;
            }
        }
        for (p, a) in point.iter_mut().zip(&ar_component) {
            *p += a;
        }
        Ok(ForecastDetail {
            point,
            intercept,
            effects,
            ar_component,
            timestamps_start: ctx.timestamp(t_end),
        })
    }
}
