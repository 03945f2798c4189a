//! Data ingestion, run configuration and artifact emission.
//!
//! Input CSVs: load as `(timestamp with offset, load_mw)`, temperature as
//! `(timestamp_utc, one column per station)`, holidays as
//! `(date, name[, category])`. Emitted CSVs start with a schema comment line
//! (`# loadgam-schema: <kind> v1`) and are re-ingestable.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::calendar::{classify_holiday, CalendarContext, HolidaySpec, TimezoneRule};
use crate::error::{Error, Result};
use crate::evaluation::{dm_test, AggregateMode, ErrorTable, StudyConfig};
use crate::pipeline::{Ablation, Dataset, ForecastDetail, ModelBundle, PipelineConfig};
use crate::preprocess::{
    adjust_outliers, aggregate_temperature, regularize_dst, CleaningReport, RawSeries,
};
use crate::timeseries::TimeSeries;

/// Complete run configuration: paths, resolution, clock rule and every
/// overridable hyperparameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub load_csv: PathBuf,
    pub temperature_csv: PathBuf,
    pub holiday_csv: PathBuf,
    pub tso_csv: Option<PathBuf>,
    pub country: String,
    pub s: usize,
    pub std_offset_hours: i64,
    /// Clock-change rule: "none" or "eu".
    pub dst: String,
    pub pipeline: PipelineConfig,
    pub study: StudyConfig,
    pub benchmark_seed: u64,
    pub fnn_epochs: usize,
    pub output_dir: PathBuf,
    pub workers: usize,
}

impl RunConfig {
    pub fn defaults() -> Self {
        RunConfig {
            load_csv: PathBuf::from("load.csv"),
            temperature_csv: PathBuf::from("temperature.csv"),
            holiday_csv: PathBuf::from("holidays.csv"),
            tso_csv: None,
            country: "synthetic".to_string(),
            s: 24,
            std_offset_hours: 0,
            dst: "none".to_string(),
            pipeline: PipelineConfig::hourly(),
            study: StudyConfig::hourly_default(),
            benchmark_seed: 1,
            fnn_epochs: 100,
            output_dir: PathBuf::from("out"),
            workers: 0,
        }
    }

    pub fn timezone_rule(&self) -> Result<TimezoneRule> {
        match self.dst.as_str() {
            "none" => Ok(TimezoneRule::None),
            "eu" => Ok(TimezoneRule::EuropeanUnion),
            other => Err(Error::InvalidConfig(format!(
                "unknown dst rule `{other}` (use `none` or `eu`)"
            ))),
        }
    }
}

/// Parses the flat `key = value` configuration format (`#` comments).
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    let mut cfg = RunConfig::defaults();
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("line {}: expected `key = value`", lineno + 1))
        })?;
        let key = key.trim();
        let value = value.trim();
        apply_key(&mut cfg, key, value, &base)
            .map_err(|e| Error::InvalidConfig(format!("line {}: {e}", lineno + 1)))?;
    }
    Ok(cfg)
}

fn apply_key(cfg: &mut RunConfig, key: &str, value: &str, base: &Path) -> Result<()> {
    let path_of = |v: &str| -> PathBuf {
        let p = PathBuf::from(v);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    };
    let parse_usize = |v: &str| -> Result<usize> {
        v.parse().map_err(|_| Error::InvalidConfig(format!("`{v}` is not an integer")))
    };
    let parse_bool = |v: &str| -> Result<bool> {
        match v {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            _ => Err(Error::InvalidConfig(format!("`{v}` is not a boolean"))),
        }
    };
    match key {
        "load_csv" => cfg.load_csv = path_of(value),
        "temperature_csv" => cfg.temperature_csv = path_of(value),
        "holiday_csv" => cfg.holiday_csv = path_of(value),
        "tso_csv" => cfg.tso_csv = Some(path_of(value)),
        "country" => cfg.country = value.to_string(),
        "output_dir" => cfg.output_dir = path_of(value),
        "s" => {
            cfg.s = parse_usize(value)?;
            cfg.pipeline = PipelineConfig::for_resolution(cfg.s);
            cfg.study.in_sample_len = 4 * 365 * cfg.s;
            cfg.study.horizon = 52 * 7 * cfg.s;
            cfg.study.roll_step = cfg.s;
        }
        "utc_offset_hours" => {
            cfg.std_offset_hours = value
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("`{value}` is not an integer")))?
        }
        "dst" => cfg.dst = value.to_string(),
        "bridge" => cfg.pipeline.bridge = parse_usize(value)?,
        "h_ets_weeks" => cfg.pipeline.h_ets_weeks = parse_usize(value)?,
        "state_period" => cfg.pipeline.state_period = parse_usize(value)?,
        "gamma_eff" => {
            cfg.pipeline.gamma_eff = if value == "auto" {
                None
            } else {
                Some(value.parse().map_err(|_| {
                    Error::InvalidConfig(format!("`{value}` is not a number"))
                })?)
            }
        }
        "p_max_residual" => cfg.pipeline.p_max_residual = Some(parse_usize(value)?),
        "p_max_temp" => cfg.pipeline.p_max_temp = Some(parse_usize(value)?),
        "max_sweeps" => cfg.pipeline.max_sweeps = parse_usize(value)?,
        "no_holidays" => cfg.pipeline.ablation.no_holidays = parse_bool(value)?,
        "no_temperature" => cfg.pipeline.ablation.no_temperature = parse_bool(value)?,
        "no_states" => cfg.pipeline.ablation.no_states = parse_bool(value)?,
        "in_sample_len" => cfg.study.in_sample_len = parse_usize(value)?,
        "horizon" => cfg.study.horizon = parse_usize(value)?,
        "roll_step" => cfg.study.roll_step = parse_usize(value)?,
        "first_forecast_hour" => cfg.study.first_forecast_hour = parse_usize(value)? as u32,
        "n_experiments" => cfg.study.n_experiments = parse_usize(value)?,
        "seed" => {
            cfg.study.rng_seed = parse_usize(value)? as u64;
            cfg.benchmark_seed = cfg.study.rng_seed;
        }
        "store_per_step" => cfg.study.store_per_step = parse_bool(value)?,
        "fnn_epochs" => cfg.fnn_epochs = parse_usize(value)?,
        "workers" => cfg.workers = parse_usize(value)?,
        other => {
            return Err(Error::InvalidConfig(format!("unknown key `{other}`")));
        }
    }
    Ok(())
}

/// Writes a documented configuration template.
pub fn write_config_template(path: &Path) -> Result<()> {
    let text = "\
# Run configuration: flat key = value lines, `#` starts a comment.
# Paths are resolved relative to this file.

load_csv = load.csv                # (timestamp with offset, load_mw)
temperature_csv = temperature.csv  # (timestamp_utc, one column per station)
holiday_csv = holidays.csv         # (date, name[, category])
#tso_csv = tso.csv                 # optional day-ahead comparison column
country = synthetic
output_dir = out

s = 24                  # observations per day
utc_offset_hours = 0    # standard offset of local time ahead of UTC
dst = none              # clock-change rule: none | eu

# Model hyperparameters
bridge = 24             # holiday bridging steps into adjacent days (<= s)
h_ets_weeks = 2         # multi-step loss horizon of the weekly state filter
state_period = 52       # seasonal period of the state filter, in weeks
gamma_eff = auto        # effective-degrees inflation; auto = ln(n)/2
#p_max_residual = 1344  # default 8*7*s
#p_max_temp = 672       # default 7*4*s
max_sweeps = 2          # smoothing-selection sweeps

# Ablations
no_holidays = false
no_temperature = false
no_states = false

# Rolling study
in_sample_len = 35040   # training window, observations (4 years hourly)
horizon = 8736          # forecast horizon, observations (52 weeks hourly)
roll_step = 24          # origin spacing, observations (one day)
first_forecast_hour = 9
n_experiments = 100
seed = 1
store_per_step = false
fnn_epochs = 100
workers = 0             # 0 = all cores
";
    fs::write(path, text)?;
    Ok(())
}

fn parse_local_timestamp(s: &str) -> Result<NaiveDateTime> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.naive_local());
    }
    // Offset-free fallbacks.
    NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S")
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S"))
        .map_err(|_| Error::invalid(format!("unparseable timestamp `{s}`")))
}

fn parse_utc_timestamp(s: &str) -> Result<NaiveDateTime> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.naive_utc());
    }
    NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S")
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S"))
        .map_err(|_| Error::invalid(format!("unparseable timestamp `{s}`")))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(false)
        .from_path(path)
        .map_err(Error::from)
}

/// Reads a two-column timestamped series (local wall clock).
pub fn read_local_series(path: &Path) -> Result<RawSeries> {
    let mut rdr = csv_reader(path)?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        if record.len() < 2 {
            return Err(Error::invalid("expected (timestamp, value) rows"));
        }
        let ts = parse_local_timestamp(record[0].trim())?;
        let field = record[1].trim();
        let v = if field.is_empty() {
            f64::NAN
        } else {
            field
                .parse()
                .map_err(|_| Error::invalid(format!("unparseable value `{field}`")))?
        };
        rows.push((ts, v));
    }
    if rows.is_empty() {
        return Err(Error::invalid(format!("{} is empty", path.display())));
    }
    Ok(RawSeries { rows })
}

/// Reads the temperature file: one UTC timestamp column plus one column per
/// station.
pub fn read_temperature_stations(path: &Path, s: usize) -> Result<Vec<TimeSeries>> {
    let mut rdr = csv_reader(path)?;
    let headers = rdr.headers()?.clone();
    let n_stations = headers.len().saturating_sub(1);
    if n_stations == 0 {
        return Err(Error::invalid("temperature file needs at least one station column"));
    }
    let mut start: Option<NaiveDateTime> = None;
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); n_stations];
    for record in rdr.records() {
        let record = record?;
        let ts = parse_utc_timestamp(record[0].trim())?;
        if start.is_none() {
            start = Some(ts);
        }
        for (k, col) in cols.iter_mut().enumerate() {
            let field = record.get(k + 1).unwrap_or("").trim();
            col.push(if field.is_empty() {
                f64::NAN
            } else {
                field.parse().unwrap_or(f64::NAN)
            });
        }
    }
    let start = start.ok_or_else(|| Error::invalid("temperature file is empty"))?;
    cols.into_iter()
        .map(|values| TimeSeries::new(start, s, values))
        .collect()
}

/// Reads the holiday calendar; rows without a category are classified from
/// the occurrence pattern.
pub fn read_holidays(path: &Path, default_bridge: usize) -> Result<Vec<HolidaySpec>> {
    let mut rdr = csv_reader(path)?;
    let mut by_name: std::collections::BTreeMap<String, (Vec<NaiveDate>, Option<String>)> =
        std::collections::BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        if record.len() < 2 {
            return Err(Error::invalid("expected (date, name[, category]) rows"));
        }
        let date = NaiveDate::parse_from_str(record[0].trim(), "%Y-%m-%d")
            .map_err(|_| Error::invalid(format!("unparseable date `{}`", &record[0])))?;
        let name = record[1].trim().to_string();
        let category = record.get(2).map(|c| c.trim().to_string()).filter(|c| !c.is_empty());
        let entry = by_name.entry(name).or_insert_with(|| (Vec::new(), None));
        entry.0.push(date);
        if category.is_some() {
            entry.1 = category;
        }
    }
    let mut out = Vec::new();
    for (name, (mut occurrences, category)) in by_name {
        occurrences.sort();
        let category = match category.as_deref() {
            Some("weekday") => crate::calendar::HolidayCategory::Weekday,
            Some("fixed_date") => crate::calendar::HolidayCategory::FixedDate,
            Some(other) => {
                return Err(Error::invalid(format!(
                    "holiday `{name}`: unknown category `{other}`"
                )))
            }
            None => classify_holiday(&occurrences),
        };
        out.push(HolidaySpec {
            name,
            occurrences,
            category,
            bridge: default_bridge,
        });
    }
    Ok(out)
}

fn count_zero_blocks(values: &[f64]) -> usize {
    let mut blocks = 0;
    let mut in_block = false;
    for &v in values {
        if v == 0.0 {
            if !in_block {
                blocks += 1;
                in_block = true;
            }
        } else {
            in_block = false;
        }
    }
    blocks
}

/// Reads, screens and conditions the input data.
///
/// Quality screens mirror the dataset-selection rules: more than 5% missing
/// load or more than 5 blocks of consecutive zero readings reject the
/// dataset, naming the violated rule.
pub fn ingest(cfg: &RunConfig) -> Result<Dataset> {
    let tz = cfg.timezone_rule()?;
    let raw = read_local_series(&cfg.load_csv)?;
    let ctx = CalendarContext::new(raw.rows[0].0, cfg.s, tz.clone())?;

    let mut report = CleaningReport::default();
    let load = regularize_dst(&raw, &ctx, &mut report)?;

    let missing = report.missing_filled_indices.len();
    if missing * 20 > load.len() {
        return Err(Error::DataQuality(format!(
            "more than 5% missing load data ({missing} of {} observations)",
            load.len()
        )));
    }
    let zero_blocks = count_zero_blocks(&load.values);
    if zero_blocks > 5 {
        return Err(Error::DataQuality(format!(
            "more than 5 blocks of consecutive zeros in reported load ({zero_blocks} blocks)"
        )));
    }

    let mut load = load;
    crate::timeseries::fill_missing_linear(&mut load.values);
    let (load, outliers) = adjust_outliers(&load)?;
    report.outliers = outliers;

    let stations = read_temperature_stations(&cfg.temperature_csv, cfg.s)?;
    let (temp_utc, _gaps) = aggregate_temperature(&stations)?;
    let holidays = read_holidays(&cfg.holiday_csv, cfg.pipeline.bridge)?;

    let tso = match &cfg.tso_csv {
        Some(path) => {
            let raw = read_local_series(path)?;
            let mut r = CleaningReport::default();
            Some(regularize_dst(&raw, &ctx, &mut r)?)
        }
        None => None,
    };

    Ok(Dataset {
        ctx,
        load,
        temp_utc,
        std_offset_secs: cfg.std_offset_hours * 3600,
        holidays,
        cleaning: report,
        tso,
    })
}

fn schema_line(kind: &str) -> String {
    format!("# loadgam-schema: {kind} v1\n")
}

/// Verifies the schema comment of an emitted CSV.
pub fn check_schema(path: &Path, kind: &str) -> Result<()> {
    let text = fs::read_to_string(path)?;
    let expect = schema_line(kind);
    if !text.starts_with(&expect) {
        return Err(Error::invalid(format!(
            "{} does not carry schema `{kind} v1`",
            path.display()
        )));
    }
    Ok(())
}

/// Forecast CSV: timestamp, point forecast, intercept, one effect column per
/// term, and the autoregressive component. The columns sum to the point
/// forecast.
pub fn write_forecast_csv(path: &Path, detail: &ForecastDetail, step_secs: i64) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(schema_line("forecast").as_bytes())?;
    let mut header = String::from("timestamp,forecast_mw,intercept");
    for (name, _) in &detail.effects {
        header.push(',');
        header.push_str(&format!("effect_{}", sanitize(name)));
    }
    header.push_str(",ar_component\n");
    f.write_all(header.as_bytes())?;
    for t in 0..detail.point.len() {
        let ts = detail.timestamps_start + chrono::Duration::seconds(step_secs * t as i64);
        let mut line = format!("{},{:.6},{:.6}", ts.format("%Y-%m-%dT%H:%M:%S"), detail.point[t], detail.intercept);
        for (_, eff) in &detail.effects {
            line.push_str(&format!(",{:.6}", eff[t]));
        }
        line.push_str(&format!(",{:.6}\n", detail.ar_component[t]));
        f.write_all(line.as_bytes())?;
    }
    Ok(())
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_alphanumeric() { c } else { '_' })
        .collect()
}

/// Serializes a fitted bundle (deterministic JSON).
pub fn save_bundle(path: &Path, bundle: &ModelBundle) -> Result<()> {
    let json = serde_json::to_vec(bundle)?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_bundle(path: &Path) -> Result<ModelBundle> {
    let data = fs::read(path)?;
    Ok(serde_json::from_slice(&data)?)
}

/// Writes every evaluation artifact: per-model accuracy, per-experiment
/// errors, significance matrix, weekly/hourly curves and the runtime log.
pub fn write_study_reports(dir: &Path, table: &ErrorTable, study: &StudyConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    let m = table.model_names.len();

    // Headline accuracy per model (MW and GW).
    {
        let mut f = fs::File::create(dir.join("accuracy.csv"))?;
        f.write_all(schema_line("accuracy").as_bytes())?;
        f.write_all(b"model,mae_mw,rmse_mw,mae_gw,rmse_gw,experiments,failures,mean_fit_seconds\n")?;
        for i in 0..m {
            let ok = table.cells[i].iter().filter(|c| c.is_some()).count();
            let failures = table.cells[i].len() - ok;
            let mae = table.overall_mae(i);
            let rmse = table.overall_rmse(i);
            writeln!(
                f,
                "{},{:.3},{:.3},{:.6},{:.6},{},{},{:.3}",
                table.model_names[i],
                mae,
                rmse,
                mae / 1000.0,
                rmse / 1000.0,
                ok,
                failures,
                table.mean_fit_seconds(i)
            )?;
        }
    }

    // Per-experiment mean absolute errors.
    {
        let mut f = fs::File::create(dir.join("per_experiment_mae.csv"))?;
        f.write_all(schema_line("per_experiment_mae").as_bytes())?;
        let mut header = String::from("origin");
        for name in &table.model_names {
            header.push(',');
            header.push_str(name);
        }
        header.push('\n');
        f.write_all(header.as_bytes())?;
        for (e, &origin) in table.origins.iter().enumerate() {
            let mut line = format!("{origin}");
            for i in 0..m {
                match &table.cells[i][e] {
                    Some(c) => line.push_str(&format!(",{:.3}", c.mae())),
                    None => line.push_str(","),
                }
            }
            line.push('\n');
            f.write_all(line.as_bytes())?;
        }
    }

    // Pairwise significance: two-sided p above the diagonal mirror, one-sided
    // in full.
    {
        let mut f = fs::File::create(dir.join("dm_matrix.csv"))?;
        f.write_all(schema_line("dm_matrix").as_bytes())?;
        f.write_all(b"model_a,model_b,statistic,p_two_sided,p_one_sided\n")?;
        for a in 0..m {
            for b in 0..m {
                if a == b {
                    continue;
                }
                let la = table.per_experiment_mae(a);
                let lb = table.per_experiment_mae(b);
                // Pairwise-complete experiments only.
                let pairs: Vec<(f64, f64)> = la
                    .iter()
                    .zip(&lb)
                    .filter(|(x, y)| x.is_finite() && y.is_finite())
                    .map(|(x, y)| (*x, *y))
                    .collect();
                if pairs.len() < 2 {
                    continue;
                }
                let (xa, xb): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
                if let Ok((stat, p2, p1)) = dm_test(&xa, &xb) {
                    writeln!(
                        f,
                        "{},{},{:.4},{:.6},{:.6}",
                        table.model_names[a], table.model_names[b], stat, p2, p1
                    )?;
                }
            }
        }
    }

    // Weekly and hourly error curves.
    {
        let mut f = fs::File::create(dir.join("weekly_mae.csv"))?;
        f.write_all(schema_line("weekly_mae").as_bytes())?;
        let mut header = String::from("week");
        for name in &table.model_names {
            header.push(',');
            header.push_str(name);
        }
        header.push('\n');
        f.write_all(header.as_bytes())?;
        let curves: Vec<Vec<f64>> = (0..m).map(|i| table.aggregate(i, AggregateMode::Weekly)).collect();
        for w in 0..table.horizon_weeks {
            let mut line = format!("{}", w + 1);
            for curve in &curves {
                line.push_str(&format!(",{:.3}", curve[w]));
            }
            line.push('\n');
            f.write_all(line.as_bytes())?;
        }
    }
    {
        let mut f = fs::File::create(dir.join("hourly_mae.csv"))?;
        f.write_all(schema_line("hourly_mae").as_bytes())?;
        let mut header = String::from("hour");
        for name in &table.model_names {
            header.push(',');
            header.push_str(name);
        }
        header.push('\n');
        f.write_all(header.as_bytes())?;
        let curves: Vec<Vec<f64>> = (0..m).map(|i| table.aggregate(i, AggregateMode::Hourly)).collect();
        for hod in 0..table.s {
            let mut line = format!("{hod}");
            for curve in &curves {
                line.push_str(&format!(",{:.3}", curve[hod]));
            }
            line.push('\n');
            f.write_all(line.as_bytes())?;
        }
    }

    // Runtime log.
    {
        let mut f = fs::File::create(dir.join("runtime.csv"))?;
        f.write_all(schema_line("runtime").as_bytes())?;
        f.write_all(b"model,mean_fit_seconds\n")?;
        for i in 0..m {
            writeln!(f, "{},{:.3}", table.model_names[i], table.mean_fit_seconds(i))?;
        }
    }

    // Study metadata.
    {
        let json = serde_json::to_string_pretty(study)?;
        fs::write(dir.join("study.json"), json)?;
    }

    // Full table for the report command.
    {
        let json = serde_json::to_vec(table)?;
        fs::write(dir.join("error_table.json"), json)?;
    }
    Ok(())
}

/// Renders the human-readable summary from a study output directory.
pub fn render_report(dir: &Path) -> Result<String> {
    check_schema(&dir.join("accuracy.csv"), "accuracy")?;
    let table: ErrorTable = serde_json::from_slice(&fs::read(dir.join("error_table.json"))?)?;
    let mut out = String::new();
    out.push_str("forecast accuracy over the rolling study\n");
    out.push_str(&format!(
        "experiments: {}   horizon weeks: {}\n\n",
        table.origins.len(),
        table.horizon_weeks
    ));
    out.push_str(&format!(
        "{:<14} {:>10} {:>10} {:>8} {:>9}\n",
        "model", "MAE (GW)", "RMSE (GW)", "fit (s)", "failures"
    ));
    let mut order: Vec<usize> = (0..table.model_names.len()).collect();
    order.sort_by(|&a, &b| {
        table
            .overall_mae(a)
            .partial_cmp(&table.overall_mae(b))
            .unwrap()
    });
    for i in order {
        let failures = table.cells[i].iter().filter(|c| c.is_none()).count();
        out.push_str(&format!(
            "{:<14} {:>10.4} {:>10.4} {:>8.2} {:>9}\n",
            table.model_names[i],
            table.overall_mae(i) / 1000.0,
            table.overall_rmse(i) / 1000.0,
            table.mean_fit_seconds(i),
            failures
        ));
    }
    Ok(out)
}

/// Writes the synthetic dataset as CSV inputs plus a matching config file.
pub fn write_synth_dataset(
    dir: &Path,
    data: &crate::synth::SynthData,
    n_stations: usize,
    seed: u64,
) -> Result<()> {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fs::create_dir_all(dir)?;
    let step = data.load.step_seconds();

    {
        let mut f = fs::File::create(dir.join("load.csv"))?;
        f.write_all(b"timestamp,load_mw\n")?;
        for t in 0..data.load.len() {
            let ts = data.load.timestamp(t);
            writeln!(f, "{}+00:00,{:.6}", ts.format("%Y-%m-%dT%H:%M:%S"), data.load.values[t])?;
        }
    }
    {
        // Stations around the aggregate with mean-zero offsets and noise, so
        // averaging recovers the aggregate path exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e);
        let offsets: Vec<f64> = (0..n_stations)
            .map(|k| (k as f64 - (n_stations as f64 - 1.0) / 2.0) * 0.8)
            .collect();
        let mut f = fs::File::create(dir.join("temperature.csv"))?;
        let mut header = String::from("timestamp_utc");
        for k in 0..n_stations {
            header.push_str(&format!(",station_{}", k + 1));
        }
        header.push('\n');
        f.write_all(header.as_bytes())?;
        for t in 0..data.temp.len() {
            let ts = data.temp.start + chrono::Duration::seconds(step * t as i64);
            let mut line = format!("{}", ts.format("%Y-%m-%dT%H:%M:%S"));
            let mut noises: Vec<f64> = (0..n_stations - 1)
                .map(|_| rng.sample::<f64, _>(StandardNormal) * 0.3)
                .collect();
            let balance: f64 = -noises.iter().sum::<f64>();
            noises.push(balance);
            for k in 0..n_stations {
                line.push_str(&format!(",{:.6}", data.temp.values[t] + offsets[k] + noises[k]));
            }
            line.push('\n');
            f.write_all(line.as_bytes())?;
        }
    }
    {
        let mut f = fs::File::create(dir.join("holidays.csv"))?;
        f.write_all(b"date,name,category\n")?;
        for h in &data.holidays {
            let cat = match h.category {
                crate::calendar::HolidayCategory::Weekday => "weekday",
                crate::calendar::HolidayCategory::FixedDate => "fixed_date",
            };
            for d in &h.occurrences {
                writeln!(f, "{},{},{}", d.format("%Y-%m-%d"), h.name, cat)?;
            }
        }
    }
    write_config_template(&dir.join("run.conf"))?;
    Ok(())
}

/// Summary for the fit command.
pub fn fit_summary(bundle: &ModelBundle) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "trained on {} observations from {}\n",
        bundle.train_len,
        bundle.start.format("%Y-%m-%d %H:%M")
    ));
    out.push_str(&format!(
        "second-stage terms: {}   effective dof: {:.1}\n",
        bundle.stage2.terms.len(),
        bundle.stage2.selection.edf
    ));
    if let Some(st) = &bundle.states {
        out.push_str(&format!(
            "state filter: alpha {:.3}, gamma {:.3}, {} weekly anchors\n",
            st.ets.alpha,
            st.ets.gamma.unwrap_or(f64::NAN),
            st.anchors.len()
        ));
    }
    out.push_str(&format!(
        "residual autoregression order: {}\n",
        bundle.residual_ar.order
    ));
    out.push_str(&format!(
        "timings (s): temperature {:.2}, stage1 {:.2}, states {:.2}, stage2 {:.2}, ar {:.2}, total {:.2}\n",
        bundle.timings.temperature_s,
        bundle.timings.stage1_s,
        bundle.timings.states_s,
        bundle.timings.stage2_s,
        bundle.timings.residual_ar_s,
        bundle.timings.total_s
    ));
    out
}

/// Ablation flag helper shared by the CLI.
pub fn ablation_models(include_ablations: bool) -> Vec<crate::evaluation::ModelSpec> {
    use crate::evaluation::ModelSpec;
    let mut models = vec![ModelSpec::Gam { ablation: Ablation::default() }];
    if include_ablations {
        models.push(ModelSpec::Gam {
            ablation: Ablation { no_holidays: true, ..Default::default() },
        });
        models.push(ModelSpec::Gam {
            ablation: Ablation { no_temperature: true, ..Default::default() },
        });
        models.push(ModelSpec::Gam {
            ablation: Ablation { no_states: true, ..Default::default() },
        });
    }
    models
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig};
    use tempfile::tempdir;

    #[test]
    fn config_roundtrip_with_overrides() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("run.conf");
        write_config_template(&path).unwrap();
        let cfg = parse_config(&path).unwrap();
        assert_eq!(cfg.s, 24);
        assert_eq!(cfg.pipeline.bridge, 24);
        assert_eq!(cfg.study.n_experiments, 100);

        let text = fs::read_to_string(&path).unwrap() + "\nbridge = 12\nseed = 99\n";
        fs::write(&path, text).unwrap();
        let cfg = parse_config(&path).unwrap();
        assert_eq!(cfg.pipeline.bridge, 12);
        assert_eq!(cfg.study.rng_seed, 99);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.conf");
        fs::write(&path, "frobnicate = 1\n").unwrap();
        assert!(parse_config(&path).is_err());
    }

    #[test]
    fn synth_files_ingest_cleanly() {
        let dir = tempdir().unwrap();
        let data = generate(&SynthConfig { years: 1, ..Default::default() });
        write_synth_dataset(dir.path(), &data, 5, 1).unwrap();
        let mut cfg = parse_config(&dir.path().join("run.conf")).unwrap();
        cfg.load_csv = dir.path().join("load.csv");
        cfg.temperature_csv = dir.path().join("temperature.csv");
        cfg.holiday_csv = dir.path().join("holidays.csv");
        let ds = ingest(&cfg).unwrap();
        assert_eq!(ds.load.len(), data.load.len());
        assert_eq!(ds.load.len() % 24, 0, "whole days");
        // Station averaging recovers the aggregate within noise balance.
        for t in (0..ds.temp_utc.len()).step_by(997) {
            assert!((ds.temp_utc.values[t] - data.temp.values[t]).abs() < 1e-4);
        }
        assert_eq!(ds.holidays.len(), data.holidays.len());
    }

    #[test]
    fn quality_screens_reject_bad_files() {
        let dir = tempdir().unwrap();
        let data = generate(&SynthConfig { years: 1, ..Default::default() });
        write_synth_dataset(dir.path(), &data, 2, 1).unwrap();
        let mut cfg = parse_config(&dir.path().join("run.conf")).unwrap();
        cfg.load_csv = dir.path().join("load.csv");
        cfg.temperature_csv = dir.path().join("temperature.csv");
        cfg.holiday_csv = dir.path().join("holidays.csv");

        // 6% missing load.
        let text = fs::read_to_string(&cfg.load_csv).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let n = lines.len() - 1;
        let missing = n * 6 / 100;
        for line in lines.iter_mut().skip(1).take(missing) {
            let comma = line.rfind(',').unwrap();
            line.truncate(comma + 1);
        }
        let bad = dir.path().join("load_missing.csv");
        fs::write(&bad, lines.join("\n")).unwrap();
        let mut cfg2 = cfg.clone();
        cfg2.load_csv = bad;
        match ingest(&cfg2) {
            Err(Error::DataQuality(msg)) => assert!(msg.contains("missing load"), "{msg}"),
            other => panic!("expected data-quality rejection, got {other:?}"),
        }

        // Six blocks of consecutive zeros.
        let text = fs::read_to_string(&cfg.load_csv).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        for b in 0..6usize {
            let at = 1 + b * 500;
            for line in lines.iter_mut().skip(at).take(3) {
                let comma = line.rfind(',').unwrap();
                line.truncate(comma + 1);
                line.push_str("0.0");
            }
        }
        let bad = dir.path().join("load_zeros.csv");
        fs::write(&bad, lines.join("\n")).unwrap();
        let mut cfg3 = cfg.clone();
        cfg3.load_csv = bad;
        match ingest(&cfg3) {
            Err(Error::DataQuality(msg)) => assert!(msg.contains("zeros"), "{msg}"),
            other => panic!("expected data-quality rejection, got {other:?}"),
        }
    }

    #[test]
    fn holiday_classification_from_file() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("holidays.csv");
        fs::write(
            &path,
            "date,name\n2015-01-01,new_year\n2016-01-01,new_year\n2017-01-01,new_year\n\
             2015-04-03,good_friday\n2016-03-25,good_friday\n2017-04-14,good_friday\n",
        )
        .unwrap();
        let holidays = read_holidays(&path, 24).unwrap();
        let gf = holidays.iter().find(|h| h.name == "good_friday").unwrap();
        assert_eq!(gf.category, crate::calendar::HolidayCategory::Weekday);
        let ny = holidays.iter().find(|h| h.name == "new_year").unwrap();
        assert_eq!(ny.category, crate::calendar::HolidayCategory::FixedDate);
    }
}
