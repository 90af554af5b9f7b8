//! Independent reference implementations shared by the integration tests.
//! Nothing here calls back into the code it checks, apart from reading raw
//! weights and pool labels.
#![allow(dead_code)]

use nudge_core::explain::ExplanationConfig;
use nudge_core::user_model::{ContextFeatures, UserModelParams};
use nudge_core::ExplanationPool;
use rand::Rng;

/// Plain feature layout: 8 context values then (shown, emphasized) per label
/// in bullish, neutral, bearish order.
pub fn features(pool: &ExplanationPool, grid_len: usize, c: &ContextFeatures, x: &ExplanationConfig) -> Vec<f64> {
    let scale = (grid_len - 1) as f64;
    let mut v = vec![
        c.forecast.p_bullish,
        c.forecast.p_neutral,
        c.forecast.p_bearish,
        c.position_index as f64 / scale,
        c.last_decision_index as f64 / scale,
        c.day_fraction,
        10.0 * c.trailing_return_5d,
        c.assets_ratio - 1.0,
    ];
    let mut bits = [0.0f64; 6];
    for e in &x.entries {
        let label = pool.get(&e.id).expect("id in pool").label.index();
        if e.shown || e.emphasized {
            bits[2 * label] = 1.0;
        }
        if e.emphasized {
            bits[2 * label + 1] = 1.0;
        }
    }
    v.extend(bits);
    v
}

/// One-hidden-layer tanh network with a softmax head, written out longhand.
pub fn forward(p: &UserModelParams, x: &[f64]) -> Vec<f64> {
    let (inp, hid, out) = (p.input_dim(), p.hidden_dim(), p.output_dim());
    let (w1, b1, w2, b2) = (p.w1(), p.b1(), p.w2(), p.b2());
    let mut h = vec![0.0; hid];
    for j in 0..hid {
        let mut s = 0.0;
        for i in 0..inp {
            s += w1[j * inp + i] * x[i];
        }
        h[j] = (b1[j] + s).tanh();
    }
    let mut z = vec![0.0; out];
    for k in 0..out {
        let mut s = 0.0;
        for j in 0..hid {
            s += w2[k * hid + j] * h[j];
        }
        z[k] = b2[k] + s;
    }
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let total: f64 = e.iter().sum();
    e.iter().map(|v| v / total).collect()
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]).abs();
    }
    s
}

/// Exhaustive minimizer; the first configuration wins ties.
pub fn brute_force(
    pool: &ExplanationPool,
    params: &UserModelParams,
    policy: &[f64],
    c: &ContextFeatures,
    configs: &[ExplanationConfig],
) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for (i, x) in configs.iter().enumerate() {
        let d = l1(&forward(params, &features(pool, policy.len(), c, x)), policy);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// The eight DynEmph configurations of a three-label pool, built directly.
pub fn dynemph_configs(pool: &ExplanationPool) -> Vec<ExplanationConfig> {
    let mut ids: Vec<String> = pool.entries().iter().map(|e| e.id.clone()).collect();
    ids.sort();
    let mut out: Vec<ExplanationConfig> = (0..8u32)
        .map(|mask| ExplanationConfig {
            entries: ids
                .iter()
                .enumerate()
                .map(|(i, id)| nudge_core::explain::ConfigEntry { id: id.clone(), shown: true, emphasized: mask >> i & 1 == 1 })
                .collect(),
        })
        .collect();
    out.sort();
    out
}

pub fn random_context<R: Rng>(rng: &mut R, grid_len: usize) -> ContextFeatures {
    let raw: [f64; 3] = [rng.random(), rng.random(), rng.random()];
    let s: f64 = raw.iter().sum::<f64>().max(1e-12);
    let forecast = nudge_core::ForecastDistribution { p_bullish: raw[0] / s, p_neutral: raw[1] / s, p_bearish: 1.0 - raw[0] / s - raw[1] / s };
    ContextFeatures {
        forecast,
        position_index: rng.random_range(0..grid_len),
        last_decision_index: rng.random_range(0..grid_len),
        day_fraction: rng.random_range(0..45) as f64 / 45.0,
        trailing_return_5d: rng.random_range(-0.1..0.1),
        assets_ratio: rng.random_range(0.7..1.3),
    }
}

/// Random network with non-zero biases so every configuration scores
/// differently.
pub fn random_params<R: Rng>(rng: &mut R, input: usize, hidden: usize, output: usize) -> UserModelParams {
    let mut p = UserModelParams::zeros(input, hidden, output);
    for v in p.theta_mut() {
        *v = rng.random_range(-1.5..1.5);
    }
    p
}

/// Random policy distribution: a tempered softmax or, now and then, one-hot.
pub fn random_policy<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    if rng.random_bool(0.2) {
        let mut p = vec![0.0; n];
        p[rng.random_range(0..n)] = 1.0;
        return p;
    }
    let t: f64 = rng.random_range(0.1..3.0);
    let z: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0) / t).collect();
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}
