//! A single-hidden-layer network on the load covariates: sigmoid hidden
//! units and a linear output, trained by mini-batch gradient descent with
//! momentum under a fixed seed so runs are bit-reproducible.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::BenchmarkInputs;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct FnnConfig {
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Learning-rate halving interval in epochs.
    pub decay_every: usize,
    pub max_restarts: usize,
}

impl Default for FnnConfig {
    fn default() -> Self {
        // Tuned so the tiny network actually escapes its near-linear
        // initialization: smaller rates plateau long before the sigmoids
        // bend, independent of epoch count.
        FnnConfig {
            epochs: 500,
            batch: 256,
            learning_rate: 0.5,
            momentum: 0.9,
            decay_every: 150,
            max_restarts: 3,
        }
    }
}

struct Net {
    w1: Vec<f64>, // hidden x inputs
    b1: Vec<f64>,
    w2: Vec<f64>, // hidden
    b2: f64,
    inputs: usize,
    hidden: usize,
}

impl Net {
    fn init(inputs: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Net {
        let bound1 = 1.0 / (inputs as f64).sqrt();
        let bound2 = 1.0 / (hidden as f64).sqrt();
        Net {
            w1: (0..hidden * inputs).map(|_| rng.gen_range(-bound1..bound1)).collect(),
            b1: (0..hidden).map(|_| rng.gen_range(-bound1..bound1)).collect(),
            w2: (0..hidden).map(|_| rng.gen_range(-bound2..bound2)).collect(),
            b2: 0.0,
            inputs,
            hidden,
        }
    }

    fn forward(&self, x: &[f64], act: &mut [f64]) -> f64 {
        let mut out = self.b2;
        for j in 0..self.hidden {
            let mut z = self.b1[j];
            let row = &self.w1[j * self.inputs..(j + 1) * self.inputs];
            for (w, xi) in row.iter().zip(x) {
                z += w * xi;
            }
            let a = 1.0 / (1.0 + (-z).exp());
            act[j] = a;
            out += self.w2[j] * a;
        }
        out
    }
}

fn min_max(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(hi > lo) {
        hi = lo + 1.0;
    }
    (lo, hi)
}

/// Trains on the eight standard inputs and forecasts the horizon.
///
/// Inputs and the target are min-max scaled to `[0, 1]` on the training
/// range. A non-finite epoch loss restarts training with a halved learning
/// rate, at most `max_restarts` times.
pub fn fnn_fit_forecast(inputs: &BenchmarkInputs, cfg: &FnnConfig, seed: u64) -> Result<Vec<f64>> {
    let n = inputs.y.len();
    let h = inputs.horizon;
    let (t1, t2) = match (inputs.temp1, inputs.temp2) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::invalid("network needs both smoothed temperatures")),
    };
    let total = n + h;
    if t1.len() < total || t2.len() < total || inputs.hldp.len() < total {
        return Err(Error::invalid("feature slices must cover the horizon"));
    }

    let feature_row = |t: usize| -> [f64; 8] {
        let cal = &inputs.cal[t];
        [
            t1[t],
            t2[t],
            cal.hod as f64,
            cal.how as f64,
            cal.hoy as f64,
            inputs.hldp[t],
            inputs.hldw_max[t],
            inputs.hldf_max[t],
        ]
    };

    // Scaling from the training range.
    let m = 8usize;
    let hidden = m / 2 + 1;
    let mut lo = [0.0f64; 8];
    let mut hi = [0.0f64; 8];
    for k in 0..m {
        let col: Vec<f64> = (0..n).map(|t| feature_row(t)[k]).collect();
        let (l, h) = min_max(&col);
        lo[k] = l;
        hi[k] = h;
    }
    let (ylo, yhi) = min_max(inputs.y);
    let scale_x = |raw: &[f64; 8]| -> [f64; 8] {
        let mut out = [0.0; 8];
        for k in 0..m {
            out[k] = ((raw[k] - lo[k]) / (hi[k] - lo[k])).clamp(0.0, 1.0);
        }
        out
    };

    let mut lr = cfg.learning_rate;
    for attempt in 0..=cfg.max_restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt as u64));
        let mut net = Net::init(m, hidden, &mut rng);
        let mut v_w1 = vec![0.0f64; net.w1.len()];
        let mut v_b1 = vec![0.0f64; hidden];
        let mut v_w2 = vec![0.0f64; hidden];
        let mut v_b2 = 0.0f64;
        let mut order: Vec<usize> = (0..n).collect();
        let mut act = vec![0.0f64; hidden];
        let mut diverged = false;

        for epoch in 0..cfg.epochs {
            let rate = lr * 0.5f64.powi((epoch / cfg.decay_every) as i32);
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for chunk in order.chunks(cfg.batch) {
                let scale = 1.0 / chunk.len() as f64;
                let mut g_w1 = vec![0.0f64; net.w1.len()];
                let mut g_b1 = vec![0.0f64; hidden];
                let mut g_w2 = vec![0.0f64; hidden];
                let mut g_b2 = 0.0f64;
                for &t in chunk {
                    let x = scale_x(&feature_row(t));
                    let target = (inputs.y[t] - ylo) / (yhi - ylo);
                    let out = net.forward(&x, &mut act);
                    let err = out - target;
                    epoch_loss += err * err;
                    let de = 2.0 * err * scale;
                    g_b2 += de;
                    for j in 0..hidden {
                        g_w2[j] += de * act[j];
                        let da = de * net.w2[j] * act[j] * (1.0 - act[j]);
                        g_b1[j] += da;
                        let row = &mut g_w1[j * m..(j + 1) * m];
                        for (gk, xk) in row.iter_mut().zip(&x) {
                            *gk += da * xk;
                        }
                    }
                }
                for (v, g) in v_w1.iter_mut().zip(&g_w1) {
                    *v = cfg.momentum * *v - rate * g;
                }
                for (w, v) in net.w1.iter_mut().zip(&v_w1) {
                    *w += v;
                }
                for j in 0..hidden {
                    v_b1[j] = cfg.momentum * v_b1[j] - rate * g_b1[j];
                    net.b1[j] += v_b1[j];
                    v_w2[j] = cfg.momentum * v_w2[j] - rate * g_w2[j];
                    net.w2[j] += v_w2[j];
                }
                v_b2 = cfg.momentum * v_b2 - rate * g_b2;
                net.b2 += v_b2;
            }
            if !epoch_loss.is_finite() {
                diverged = true;
                break;
            }
        }
        if diverged {
            lr *= 0.5;
            log::warn!("training diverged; restarting with learning rate {lr}");
            continue;
        }

        let mut out = Vec::with_capacity(h);
        for j in 0..h {
            let x = scale_x(&feature_row(n + j));
            let scaled = net.forward(&x, &mut act);
            out.push(ylo + scaled * (yhi - ylo));
        }
        return Ok(out);
    }
    Err(Error::numerical("fnn", "training diverged after all restarts"))
}
