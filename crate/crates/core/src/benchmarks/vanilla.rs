//! The linear-regression benchmark family: trend, calendar class dummies,
//! a weekday-by-hour interaction and optional cubic temperature blocks with
//! month- and hour-interacted coefficients.

use chrono::Datelike;
use nalgebra::{DMatrix, DVector};

use super::BenchmarkInputs;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VanillaVariant {
    /// No temperature information.
    Deterministic,
    /// Actual temperature only.
    Basic,
    /// Actual plus both smoothed temperatures.
    Recency,
}

impl VanillaVariant {
    fn temp_inputs(&self) -> usize {
        match self {
            VanillaVariant::Deterministic => 0,
            VanillaVariant::Basic => 1,
            VanillaVariant::Recency => 3,
        }
    }
}

/// Sparse designer for one observation; pushes `(column, value)` pairs.
struct RowBuilder {
    entries: Vec<(usize, f64)>,
}

impl RowBuilder {
    fn push(&mut self, col: usize, v: f64) {
        if v != 0.0 {
            self.entries.push((col, v));
        }
    }
}

struct VanillaLayout {
    s: usize,
    temp_inputs: usize,
    ncols: usize,
    trend_scale: f64,
}

impl VanillaLayout {
    fn new(s: usize, temp_inputs: usize, n_train: usize) -> Self {
        // 1 intercept + 1 trend + 11 month + 6 weekday + (S-1) hour
        // + 6*(S-1) weekday-by-hour + per-temp (3 + 33 + 3*(S-1)).
        let ncols = 2 + 11 + 6 + (s - 1) + 6 * (s - 1) + temp_inputs * (3 + 33 + 3 * (s - 1));
        VanillaLayout {
            s,
            temp_inputs,
            ncols,
            trend_scale: 1.0 / n_train as f64,
        }
    }

    fn fill_row(
        &self,
        row: &mut RowBuilder,
        t: usize,
        month: u32,
        weekday: u32,
        hour: usize,
        temps: &[f64],
    ) {
        let s = self.s;
        row.push(0, 1.0);
        row.push(1, t as f64 * self.trend_scale);
        let mut base = 2;
        if month >= 2 {
            row.push(base + month as usize - 2, 1.0);
        }
        base += 11;
        if weekday >= 1 {
            row.push(base + weekday as usize - 1, 1.0);
        }
        base += 6;
        if hour >= 1 {
            row.push(base + hour - 1, 1.0);
        }
        base += s - 1;
        if weekday >= 1 && hour >= 1 {
            row.push(base + (weekday as usize - 1) * (s - 1) + hour - 1, 1.0);
        }
        base += 6 * (s - 1);
        for (k, &temp) in temps.iter().enumerate().take(self.temp_inputs) {
            let x = temp / 10.0; // degrees in decadegrees for conditioning
            let powers = [x, x * x, x * x * x];
            let mut b = base + k * (3 + 33 + 3 * (s - 1));
            for &p in &powers {
                row.push(b, p);
                b += 1;
            }
            if month >= 2 {
                let mb = b + (month as usize - 2) * 3;
                for (i, &p) in powers.iter().enumerate() {
                    row.push(mb + i, p);
                }
            }
            b += 33;
            if hour >= 1 {
                let hb = b + (hour - 1) * 3;
                for (i, &p) in powers.iter().enumerate() {
                    row.push(hb + i, p);
                }
            }
        }
    }
}

/// Ordinary least squares on the accumulated normal equations, dropping
/// aliased columns deterministically (first occurrence kept): a column whose
/// Cholesky pivot collapses is forced to zero.
fn solve_with_drops(g: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, usize) {
    let p = g.nrows();
    let mut l = g.clone();
    let mut dropped = vec![false; p];
    let tol = 1e-10;
    for j in 0..p {
        let mut d = l[(j, j)];
        for k in 0..j {
            if !dropped[k] {
                d -= l[(j, k)] * l[(j, k)];
            }
        }
        if d <= tol * g[(j, j)].max(1e-300) {
            dropped[j] = true;
            for i in j..p {
                l[(i, j)] = 0.0;
            }
            continue;
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in j + 1..p {
            let mut v = l[(i, j)];
            for k in 0..j {
                if !dropped[k] {
                    v -= l[(i, k)] * l[(j, k)];
                }
            }
            l[(i, j)] = v / dj;
        }
    }
    // Forward/backward substitution skipping dropped coordinates.
    let mut x = b.clone();
    for j in 0..p {
        if dropped[j] {
            x[j] = 0.0;
            continue;
        }
        let mut v = x[j];
        for k in 0..j {
            if !dropped[k] {
                v -= l[(j, k)] * x[k];
            }
        }
        x[j] = v / l[(j, j)];
    }
    for j in (0..p).rev() {
        if dropped[j] {
            continue;
        }
        let mut v = x[j];
        for i in j + 1..p {
            if !dropped[i] {
                v -= l[(i, j)] * x[i];
            }
        }
        x[j] = v / l[(j, j)];
    }
    let n_dropped = dropped.iter().filter(|&&d| d).count();
    (x, n_dropped)
}

/// Fits the chosen variant by least squares and forecasts the horizon with
/// the supplied temperature paths.
pub fn vanilla_fit_forecast(variant: VanillaVariant, inputs: &BenchmarkInputs) -> Result<Vec<f64>> {
    let n = inputs.y.len();
    let h = inputs.horizon;
    let s = inputs.s;
    let temp_inputs = variant.temp_inputs();
    if temp_inputs >= 1 && inputs.temp_actual.is_none() {
        return Err(Error::invalid("variant needs actual temperatures"));
    }
    if temp_inputs == 3 && (inputs.temp1.is_none() || inputs.temp2.is_none()) {
        return Err(Error::invalid("variant needs smoothed temperatures"));
    }
    let layout = VanillaLayout::new(s, temp_inputs, n);
    let p = layout.ncols;

    let temps_at = |t: usize| -> Vec<f64> {
        let mut v = Vec::with_capacity(3);
        if temp_inputs >= 1 {
            v.push(inputs.temp_actual.unwrap()[t]);
        }
        if temp_inputs == 3 {
            v.push(inputs.temp1.unwrap()[t]);
            v.push(inputs.temp2.unwrap()[t]);
        }
        v
    };

    let mut g = DMatrix::<f64>::zeros(p, p);
    let mut bvec = DVector::<f64>::zeros(p);
    let mut row = RowBuilder { entries: Vec::with_capacity(40) };
    for t in 0..n {
        let cal = &inputs.cal[t];
        row.entries.clear();
        layout.fill_row(
            &mut row,
            t,
            cal.date.month(),
            cal.how / s as u32,
            cal.hod as usize,
            &temps_at(t),
        );
        for (ai, &(ca, va)) in row.entries.iter().enumerate() {
            bvec[ca] += va * inputs.y[t];
            for &(cb, vb) in &row.entries[ai..] {
                g[(cb.max(ca), cb.min(ca))] += va * vb;
            }
        }
    }
    for j in 0..p {
        for i in j + 1..p {
            g[(j, i)] = g[(i, j)];
        }
    }
    let (coef, n_dropped) = solve_with_drops(&g, &bvec);
    if n_dropped > 0 {
        log::debug!("dropped {n_dropped} aliased columns");
    }

    let mut out = Vec::with_capacity(h);
    for j in 0..h {
        let t = n + j;
        let cal = &inputs.cal[t];
        row.entries.clear();
        layout.fill_row(
            &mut row,
            t,
            cal.date.month(),
            cal.how / s as u32,
            cal.hod as usize,
            &temps_at(t),
        );
        out.push(row.entries.iter().map(|&(c, v)| v * coef[c]).sum());
    }
    Ok(out)
}
