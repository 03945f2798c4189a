//! Regularly spaced time series with missing-value markers.

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A regularly spaced series of observations.
///
/// `resolution` is the number of observations per civil day (at least 3);
/// missing values are stored as `f64::NAN`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeSeries {
    pub start: NaiveDateTime,
    /// Observations per day.
    pub resolution: usize,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(start: NaiveDateTime, resolution: usize, values: Vec<f64>) -> Result<Self> {
        if resolution < 3 {
            return Err(Error::invalid(format!(
                "resolution must be at least 3 observations per day, got {resolution}"
            )));
        }
        if 86_400 % resolution != 0 {
            return Err(Error::invalid(format!(
                "resolution {resolution} does not divide the day evenly"
            )));
        }
        Ok(TimeSeries {
            start,
            resolution,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Seconds between consecutive observations.
    pub fn step_seconds(&self) -> i64 {
        86_400 / self.resolution as i64
    }

    /// Timestamp of observation `i` (0-based).
    pub fn timestamp(&self, i: usize) -> NaiveDateTime {
        self.start + Duration::seconds(self.step_seconds() * i as i64)
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }

    /// Fills missing values by linear interpolation between the nearest
    /// observed neighbours; leading/trailing gaps take the nearest value.
    /// Returns the indices that were filled.
    pub fn fill_missing_linear(&mut self) -> Vec<usize> {
        fill_missing_linear(&mut self.values)
    }

    /// A copy restricted to `[offset, offset + len)`.
    pub fn window(&self, offset: usize, len: usize) -> Result<TimeSeries> {
        if offset + len > self.values.len() {
            return Err(Error::InsufficientData {
                needed: offset + len,
                got: self.values.len(),
            });
        }
        Ok(TimeSeries {
            start: self.timestamp(offset),
            resolution: self.resolution,
            values: self.values[offset..offset + len].to_vec(),
        })
    }
}

/// In-place linear interpolation of NaN runs; returns filled indices.
pub fn fill_missing_linear(values: &mut [f64]) -> Vec<usize> {
    let n = values.len();
    let mut filled = Vec::new();
    let mut i = 0;
    while i < n {
        if values[i].is_nan() {
            let run_start = i;
            while i < n && values[i].is_nan() {
                i += 1;
            }
            let run_end = i; // exclusive
            let left = run_start.checked_sub(1).map(|j| values[j]);
            let right = if run_end < n { Some(values[run_end]) } else { None };
            for (k, slot) in (run_start..run_end).enumerate() {
                let v = match (left, right) {
                    (Some(l), Some(r)) => {
                        let span = (run_end - run_start + 1) as f64;
                        l + (r - l) * (k + 1) as f64 / span
                    }
                    (Some(l), None) => l,
                    (None, Some(r)) => r,
                    (None, None) => 0.0,
                };
                values[slot] = v;
                filled.push(slot);
            }
        } else {
            i += 1;
        }
    }
    filled
}
