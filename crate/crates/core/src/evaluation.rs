//! Rolling-origin forecasting study, error aggregation and significance
//! testing of accuracy differences.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmarks::{self, BenchmarkConfig, BenchmarkInputs, BenchmarkKind};
use crate::calendar::{compute_calendar, impact_profile, ImpactProfile};
use crate::error::{Error, Result};
use crate::pipeline::{self, Ablation, Dataset, PipelineConfig};
use crate::preprocess::align_utc_to_local;

/// Study layout: window length, horizon, sampling of forecast origins.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    /// Training window length in observations (4 years of hourly data by
    /// default).
    pub in_sample_len: usize,
    /// Forecast horizon in observations (52 weeks by default).
    pub horizon: usize,
    /// Origin spacing in observations (one day).
    pub roll_step: usize,
    /// Local hour at which every forecast starts.
    pub first_forecast_hour: u32,
    /// Number of experiments sampled from the feasible origins.
    pub n_experiments: usize,
    pub rng_seed: u64,
    /// Keep the per-step error curves (memory scales with models x N x H).
    pub store_per_step: bool,
}

impl StudyConfig {
    pub fn hourly_default() -> Self {
        StudyConfig {
            in_sample_len: 4 * 365 * 24,
            horizon: 168 * 52,
            roll_step: 24,
            first_forecast_hour: 9,
            n_experiments: 100,
            rng_seed: 1,
            store_per_step: false,
        }
    }
}

/// A model entering the study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelSpec {
    /// The full pipeline, optionally with one component ablated.
    Gam { ablation: Ablation },
    Benchmark(BenchmarkKind),
}

impl ModelSpec {
    pub fn name(&self) -> String {
        match self {
            ModelSpec::Gam { ablation } => {
                if ablation.no_holidays {
                    "gam_no_hld".into()
                } else if ablation.no_temperature {
                    "gam_no_temp".into()
                } else if ablation.no_states {
                    "gam_no_states".into()
                } else {
                    "gam".into()
                }
            }
            ModelSpec::Benchmark(kind) => kind.name().into(),
        }
    }
}

/// Accumulated errors of one model on one experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellStats {
    pub abs_sum: f64,
    pub sq_sum: f64,
    pub count: usize,
    pub weekly_abs: Vec<f64>,
    pub weekly_n: Vec<usize>,
    pub hourly_abs: Vec<f64>,
    pub hourly_n: Vec<usize>,
    pub fit_seconds: f64,
}

impl CellStats {
    pub fn mae(&self) -> f64 {
        self.abs_sum / self.count as f64
    }

    pub fn rmse(&self) -> f64 {
        (self.sq_sum / self.count as f64).sqrt()
    }
}

/// Per-model, per-experiment error aggregates of a study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorTable {
    pub model_names: Vec<String>,
    pub origins: Vec<usize>,
    pub s: usize,
    pub horizon_weeks: usize,
    /// `cells[model][experiment]`; a failed fit leaves `None`.
    pub cells: Vec<Vec<Option<CellStats>>>,
    /// Optional absolute error curves per step: `[model][experiment][h]`.
    pub per_step: Option<Vec<Vec<Option<Vec<f32>>>>>,
    pub failures: Vec<StudyFailure>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyFailure {
    pub model: String,
    pub origin: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregateMode {
    Overall,
    Weekly,
    Hourly,
}

impl ErrorTable {
    pub fn model_index(&self, name: &str) -> Option<usize> {
        self.model_names.iter().position(|n| n == name)
    }

    /// Pooled mean absolute error over every experiment and step.
    pub fn overall_mae(&self, model: usize) -> f64 {
        let (mut a, mut c) = (0.0, 0usize);
        for cell in self.cells[model].iter().flatten() {
            a += cell.abs_sum;
            c += cell.count;
        }
        a / c.max(1) as f64
    }

    pub fn overall_rmse(&self, model: usize) -> f64 {
        let (mut a, mut c) = (0.0, 0usize);
        for cell in self.cells[model].iter().flatten() {
            a += cell.sq_sum;
            c += cell.count;
        }
        (a / c.max(1) as f64).sqrt()
    }

    /// Per-experiment mean absolute errors (NaN where the model failed).
    pub fn per_experiment_mae(&self, model: usize) -> Vec<f64> {
        self.cells[model]
            .iter()
            .map(|c| c.as_ref().map(|s| s.mae()).unwrap_or(f64::NAN))
            .collect()
    }

    /// Aggregated curves or scalars.
    pub fn aggregate(&self, model: usize, mode: AggregateMode) -> Vec<f64> {
        match mode {
            AggregateMode::Overall => vec![self.overall_mae(model)],
            AggregateMode::Weekly => {
                let w = self.horizon_weeks;
                let mut sums = vec![0.0; w];
                let mut counts = vec![0usize; w];
                for cell in self.cells[model].iter().flatten() {
                    for k in 0..w {
                        sums[k] += cell.weekly_abs[k];
                        counts[k] += cell.weekly_n[k];
                    }
                }
                sums.iter().zip(&counts).map(|(s, &c)| s / c.max(1) as f64).collect()
            }
            AggregateMode::Hourly => {
                let mut sums = vec![0.0; self.s];
                let mut counts = vec![0usize; self.s];
                for cell in self.cells[model].iter().flatten() {
                    for k in 0..self.s {
                        sums[k] += cell.hourly_abs[k];
                        counts[k] += cell.hourly_n[k];
                    }
                }
                sums.iter().zip(&counts).map(|(s, &c)| s / c.max(1) as f64).collect()
            }
        }
    }

    pub fn mean_fit_seconds(&self, model: usize) -> f64 {
        let times: Vec<f64> = self.cells[model]
            .iter()
            .flatten()
            .map(|c| c.fit_seconds)
            .collect();
        times.iter().sum::<f64>() / times.len().max(1) as f64
    }
}

/// Feasible forecast origins: window plus horizon fit inside the data and
/// the first forecast lands on the configured local hour.
pub fn feasible_origins(data_len: usize, cfg: &StudyConfig, s: usize, start_slot: usize) -> Vec<usize> {
    let first_slot = (cfg.first_forecast_hour as usize * s) / 24;
    let mut out = Vec::new();
    let mut t = 0usize;
    // Align the forecast start (origin + in_sample) to the requested hour.
    let misalign = (start_slot + cfg.in_sample_len) % s;
    let offset = (first_slot + s - misalign) % s;
    t += offset;
    while t + cfg.in_sample_len + cfg.horizon <= data_len {
        out.push(t);
        t += cfg.roll_step;
    }
    out
}

/// Draws `n_experiments` origins uniformly without replacement; when fewer
/// are feasible, all are used with a warning.
pub fn sample_origins(feasible: &[usize], cfg: &StudyConfig) -> Vec<usize> {
    if feasible.len() <= cfg.n_experiments {
        if feasible.len() < cfg.n_experiments {
            log::warn!(
                "only {} feasible origins for {} requested experiments; using all",
                feasible.len(),
                cfg.n_experiments
            );
        }
        return feasible.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut idx: Vec<usize> = (0..feasible.len()).collect();
    // Partial Fisher-Yates: the first n positions become the sample.
    for i in 0..cfg.n_experiments {
        let j = rng.gen_range(i..idx.len());
        idx.swap(i, j);
    }
    let mut chosen: Vec<usize> = idx[..cfg.n_experiments].iter().map(|&i| feasible[i]).collect();
    chosen.sort_unstable();
    chosen
}

struct ExperimentOutput {
    results: Vec<std::result::Result<(CellStats, Option<Vec<f32>>, f64), String>>,
}

/// Runs the rolling-origin study: every model is fitted on every sampled
/// window and scored over the horizon. Experiments run in parallel; a
/// model's failure on one origin leaves a gap rather than aborting.
pub fn run_study(
    data: &Dataset,
    models: &[ModelSpec],
    study: &StudyConfig,
    pipe_cfg: &PipelineConfig,
    bench_cfg: &BenchmarkConfig,
) -> Result<ErrorTable> {
    let s = data.ctx.s;
    let feasible = feasible_origins(data.load.len(), study, s, data.ctx.start_slot());
    if feasible.is_empty() {
        return Err(Error::InsufficientData {
            needed: study.in_sample_len + study.horizon,
            got: data.load.len(),
        });
    }
    let origins = sample_origins(&feasible, study);

    // The impact profile is frozen from the first in-sample window.
    let first_window = data.window(origins[0], study.in_sample_len)?;
    let first_cal = compute_calendar(&first_window.ctx, first_window.load.len());
    let impact = impact_profile(&first_window.load.values, &first_cal, s)?;

    let outputs: Vec<ExperimentOutput> = origins
        .par_iter()
        .map(|&origin| run_experiment(data, origin, models, study, pipe_cfg, bench_cfg, &impact))
        .collect();

    let horizon_weeks = study.horizon.div_ceil(7 * s);
    let mut table = ErrorTable {
        model_names: models.iter().map(|m| m.name()).collect(),
        origins: origins.clone(),
        s,
        horizon_weeks,
        cells: vec![vec![None; origins.len()]; models.len()],
        per_step: if study.store_per_step {
            Some(vec![vec![None; origins.len()]; models.len()])
        } else {
            None
        },
        failures: Vec::new(),
    };
    for (e, out) in outputs.into_iter().enumerate() {
        for (m, res) in out.results.into_iter().enumerate() {
            match res {
                Ok((cell, steps, _fit_s)) => {
                    table.cells[m][e] = Some(cell);
                    if let (Some(store), Some(st)) = (table.per_step.as_mut(), steps) {
                        store[m][e] = Some(st);
                    }
                }
                Err(msg) => {
                    table.failures.push(StudyFailure {
                        model: table.model_names[m].clone(),
                        origin: origins[e],
                        message: msg,
                    });
                }
            }
        }
    }
    Ok(table)
}

#[allow(clippy::too_many_arguments)]
fn run_experiment(
    data: &Dataset,
    origin: usize,
    models: &[ModelSpec],
    study: &StudyConfig,
    pipe_cfg: &PipelineConfig,
    bench_cfg: &BenchmarkConfig,
    impact: &ImpactProfile,
) -> ExperimentOutput {
    let s = data.ctx.s;
    let h = study.horizon;
    let n = study.in_sample_len;
    let window = match data.window(origin, n) {
        Ok(w) => w,
        Err(e) => {
            return ExperimentOutput {
                results: models.iter().map(|_| Err(e.to_string())).collect(),
            }
        }
    };
    let actual = &data.load.values[origin + n..origin + n + h];
    let cal = compute_calendar(&window.ctx, n + h);

    let needs_bench_temp = models.iter().any(|m| {
        matches!(
            m,
            ModelSpec::Benchmark(BenchmarkKind::VanBas)
                | ModelSpec::Benchmark(BenchmarkKind::VanRec)
                | ModelSpec::Benchmark(BenchmarkKind::Fnn)
        )
    });
    let needs_bench = models.iter().any(|m| matches!(m, ModelSpec::Benchmark(_)));

    // Fit pipeline variants first; the benchmarks reuse a fitted bundle's
    // temperature models when one carries them.
    let mut fit_errors: Vec<Option<String>> = vec![None; models.len()];
    let mut fit_secs: Vec<f64> = vec![0.0; models.len()];
    let mut bundles: Vec<Option<pipeline::ModelBundle>> = Vec::new();
    for (mi, model) in models.iter().enumerate() {
        let mut bundle = None;
        if let ModelSpec::Gam { ablation } = model {
            let mut cfg = pipe_cfg.clone();
            cfg.ablation = *ablation;
            let started = std::time::Instant::now();
            match pipeline::fit_full(&window, &cfg, Some(impact)) {
                Ok(b) => bundle = Some(b),
                Err(e) => fit_errors[mi] = Some(e.to_string()),
            }
            fit_secs[mi] = started.elapsed().as_secs_f64();
        }
        bundles.push(bundle);
    }

    let mut shared_temp: Option<(Vec<f64>, Vec<f64>, Vec<f64>)> = None; // temp1, temp2, raw
    if needs_bench_temp {
        let donor = bundles
            .iter()
            .flatten()
            .find_map(|b| b.temp.clone());
        let tm = match donor {
            Some(tm) => Some(tm),
            None => build_temp_models(&window, pipe_cfg).ok(),
        };
        if let Some(tm) = tm {
            let smooth_pair = crate::preprocess::smooth_temperature(&window.temp_utc).ok();
            if let Some((sm1, sm2)) = smooth_pair {
                let extra = 3 * s;
                let mut aligned: Vec<Vec<f64>> = Vec::new();
                for (variant, smooth) in tm.variants.iter().zip([&sm1, &sm2]) {
                    let fc = variant
                        .forecast(tm.utc_start, tm.utc_len, s, h + extra)
                        .unwrap_or_else(|_| vec![f64::NAN; h + extra]);
                    aligned.push(align_with_forecast(&smooth.values, &fc, &window, &tm, n + h));
                }
                // Raw temperature aligned locally; the horizon takes the
                // fast-smoothed forecast as its stand-in.
                let raw_local =
                    align_utc_to_local(&window.temp_utc, &window.ctx, window.std_offset_secs, n);
                let mut raw_full = raw_local;
                raw_full.extend_from_slice(&aligned[0][n..]);
                shared_temp = Some((aligned[0].clone(), aligned[1].clone(), raw_full));
            }
        }
    }

    let zeros = vec![0.0f64; n + h];
    let (hldw_max, hldf_max, hldp) = if needs_bench {
        build_activation_maxima(&window, n + h, pipe_cfg)
    } else {
        (zeros.clone(), zeros.clone(), zeros.clone())
    };

    let mut results: Vec<std::result::Result<(CellStats, Option<Vec<f32>>, f64), String>> =
        Vec::with_capacity(models.len());
    for (mi, model) in models.iter().enumerate() {
        let started = std::time::Instant::now();
        let forecast: std::result::Result<Vec<f64>, String> = match model {
            ModelSpec::Gam { .. } => match (&bundles[mi], &fit_errors[mi]) {
                (Some(bundle), _) => bundle
                    .forecast(h)
                    .map(|d| d.point)
                    .map_err(|e| e.to_string()),
                (None, Some(msg)) => Err(msg.clone()),
                (None, None) => Err("fit failed".to_string()),
            },
            ModelSpec::Benchmark(kind) => {
                let (t1, t2, raw) = match &shared_temp {
                    Some((a, b, c)) => (Some(a.as_slice()), Some(b.as_slice()), Some(c.as_slice())),
                    None => (None, None, None),
                };
                let inputs = BenchmarkInputs {
                    s,
                    y: &window.load.values,
                    cal: &cal,
                    temp_actual: raw,
                    temp1: t1,
                    temp2: t2,
                    hldp: &hldp,
                    hldw_max: &hldw_max,
                    hldf_max: &hldf_max,
                    horizon: h,
                };
                benchmarks::forecast(*kind, &inputs, bench_cfg).map_err(|e| e.to_string())
            }
        };
        let fit_seconds = fit_secs[mi] + started.elapsed().as_secs_f64();
        match forecast {
            Ok(fc) if fc.len() == h => {
                let mut cell = empty_cell(s, h, fit_seconds);
                let mut steps = if study.store_per_step {
                    Some(Vec::with_capacity(h))
                } else {
                    None
                };
                for j in 0..h {
                    let e = actual[j] - fc[j];
                    let ae = e.abs();
                    cell.abs_sum += ae;
                    cell.sq_sum += e * e;
                    cell.count += 1;
                    let week = (j / (7 * s)).min(cell.weekly_abs.len() - 1);
                    cell.weekly_abs[week] += ae;
                    cell.weekly_n[week] += 1;
                    let hod = cal[n + j].hod as usize;
                    cell.hourly_abs[hod] += ae;
                    cell.hourly_n[hod] += 1;
                    if let Some(st) = steps.as_mut() {
                        st.push(ae as f32);
                    }
                }
                results.push(Ok((cell, steps, fit_seconds)));
            }
            Ok(_) => results.push(Err("forecast has the wrong length".into())),
            Err(msg) => results.push(Err(msg)),
        }
    }
    ExperimentOutput { results }
}

fn empty_cell(s: usize, h: usize, fit_seconds: f64) -> CellStats {
    let weeks = h.div_ceil(7 * s);
    CellStats {
        abs_sum: 0.0,
        sq_sum: 0.0,
        count: 0,
        weekly_abs: vec![0.0; weeks],
        weekly_n: vec![0; weeks],
        hourly_abs: vec![0.0; s],
        hourly_n: vec![0; s],
        fit_seconds,
    }
}

fn build_temp_models(window: &Dataset, cfg: &PipelineConfig) -> Result<pipeline::TempModels> {
    let (sm1, sm2) = crate::preprocess::smooth_temperature(&window.temp_utc)?;
    let p_max = cfg.p_max_temp.unwrap_or(7 * 4 * cfg.s);
    let v1 = pipeline::forecast_temperature_model(&sm1, cfg.s, p_max, cfg.gamma_eff, cfg.max_sweeps)?;
    let v2 = pipeline::forecast_temperature_model(&sm2, cfg.s / 3, p_max, cfg.gamma_eff, cfg.max_sweeps)?;
    Ok(pipeline::TempModels {
        utc_start: window.temp_utc.start,
        utc_len: window.temp_utc.len(),
        variants: vec![v1, v2],
    })
}

fn align_with_forecast(
    smooth: &[f64],
    forecast: &[f64],
    window: &Dataset,
    tm: &pipeline::TempModels,
    total: usize,
) -> Vec<f64> {
    let step = window.ctx.step_seconds();
    let mut out = Vec::with_capacity(total);
    for t in 0..total {
        let local = window.ctx.timestamp(t);
        let year = chrono::Datelike::year(&local.date());
        let dst = match window.ctx.tz.transitions(year) {
            Some((spring, fall)) => local >= spring && local < fall,
            None => false,
        };
        let offset = window.std_offset_secs + if dst { 3600 } else { 0 };
        let instant = local - chrono::Duration::seconds(offset);
        let idx = instant.signed_duration_since(tm.utc_start).num_seconds() / step;
        let v = if idx < 0 {
            smooth[0]
        } else if (idx as usize) < smooth.len() {
            smooth[idx as usize]
        } else {
            let fi = (idx as usize - smooth.len()).min(forecast.len().saturating_sub(1));
            forecast[fi]
        };
        out.push(v);
    }
    out
}

fn build_activation_maxima(
    window: &Dataset,
    total: usize,
    cfg: &PipelineConfig,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    use crate::calendar::{holiday_activation, holiday_period_activation, HolidayCategory};
    let mut w = vec![0.0f64; total];
    let mut f = vec![0.0f64; total];
    for h in &window.holidays {
        let mut spec = h.clone();
        if spec.bridge > cfg.s {
            spec.bridge = cfg.bridge;
        }
        let act = holiday_activation(&spec, &window.ctx, total);
        let target = match h.category {
            HolidayCategory::Weekday => &mut w,
            HolidayCategory::FixedDate => &mut f,
        };
        for (dst, v) in target.iter_mut().zip(&act) {
            *dst = dst.max(*v);
        }
    }
    let p = holiday_period_activation(&window.ctx, total);
    (w, f, p)
}

/// Two-sided and one-sided significance of an accuracy difference between
/// per-experiment mean-loss series, with a lag-window long-run variance
/// (Bartlett weights, lag `floor(N^(1/3))`).
///
/// Returns `(statistic, p_two_sided, p_one_sided)`; the one-sided value is
/// small when the first model is more accurate. Identical series give a
/// statistic of 0 and p-values of 1.
pub fn dm_test(losses_a: &[f64], losses_b: &[f64]) -> Result<(f64, f64, f64)> {
    if losses_a.len() != losses_b.len() || losses_a.is_empty() {
        return Err(Error::invalid("loss series must be non-empty and equal length"));
    }
    let d: Vec<f64> = losses_a
        .iter()
        .zip(losses_b)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| a - b)
        .collect();
    let n = d.len();
    if n < 2 {
        return Err(Error::invalid("need at least two paired losses"));
    }
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let centered: Vec<f64> = d.iter().map(|v| v - mean).collect();
    let gamma = |k: usize| -> f64 {
        centered[k..]
            .iter()
            .zip(&centered[..n - k])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / nf
    };
    let lag = (nf.powf(1.0 / 3.0)).floor() as usize;
    let mut lrv = gamma(0);
    for k in 1..=lag.min(n - 1) {
        let w = 1.0 - k as f64 / (lag + 1) as f64;
        lrv += 2.0 * w * gamma(k);
    }
    if lrv <= 0.0 {
        if gamma(0) <= f64::EPSILON * mean.abs().max(1.0) {
            // Identical models.
            return Ok((0.0, 1.0, 1.0));
        }
        lrv = gamma(0);
    }
    if lrv <= 0.0 {
        return Ok((0.0, 1.0, 1.0));
    }
    let stat = mean / (lrv / nf).sqrt();
    let p_two = 2.0 * (1.0 - normal_cdf(stat.abs()));
    let p_one = normal_cdf(stat);
    Ok((stat, p_two.clamp(0.0, 1.0), p_one.clamp(0.0, 1.0)))
}

/// Standard normal CDF via a rational complementary-error approximation
/// (absolute error below 1.2e-7).
pub fn normal_cdf(x: f64) -> f64 {
    let z = x / std::f64::consts::SQRT_2;
    0.5 * erfc_approx(-z)
}

fn erfc_approx(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}
