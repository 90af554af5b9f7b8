//! Learned predictor of the user's next decision given context and the
//! explanation configuration: a one-hidden-layer tanh network with a softmax
//! over the position grid, trained by cross-entropy.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::distribution::DecisionDistribution;
use crate::error::{Error, Result};
use crate::explain::{ExplanationConfig, ExplanationPool};
use crate::forecast::{ForecastClass, ForecastDistribution};
use crate::record::InteractionRecord;
use crate::seed::{self, stream};

pub const PARAMS_FORMAT: &str = "nudge-user-model";
pub const PARAMS_VERSION: u32 = 1;

/// Observable context of a decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextFeatures {
    pub forecast: ForecastDistribution,
    /// Grid index nearest to the user's stock fraction before the order.
    pub position_index: usize,
    pub last_decision_index: usize,
    /// `day / num_days`.
    pub day_fraction: f64,
    pub trailing_return_5d: f64,
    /// Total assets over initial cash.
    pub assets_ratio: f64,
}

/// Number of context features ahead of the explanation bits.
pub const CONTEXT_DIM: usize = 8;

/// Maps configurations onto the fixed feature layout:
///
/// ```text
/// [p_bullish, p_neutral, p_bearish,
///  position_index / (grid-1), last_decision_index / (grid-1),
///  day_fraction, 10 * trailing_return_5d, assets_ratio - 1,
///  bullish.shown, bullish.emph, neutral.shown, neutral.emph, bearish.shown, bearish.emph]
/// ```
///
/// With several explanations per label the label bits are the OR over them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureEncoder {
    labels: BTreeMap<String, ForecastClass>,
    grid_len: usize,
}

impl FeatureEncoder {
    pub fn new(pool: &ExplanationPool, grid_len: usize) -> Self {
        let labels = pool.entries().iter().map(|e| (e.id.clone(), e.label)).collect();
        Self { labels, grid_len }
    }

    pub fn dim(&self) -> usize {
        CONTEXT_DIM + 2 * ForecastClass::ALL.len()
    }

    pub fn grid_len(&self) -> usize {
        self.grid_len
    }

    pub fn featurize(&self, c: &ContextFeatures, x: &ExplanationConfig) -> Vec<f64> {
        self.featurize_with_strength(c, x, 1.0)
    }

    /// `strength` scales the emphasis bits (nudge-strength hook).
    pub fn featurize_with_strength(&self, c: &ContextFeatures, x: &ExplanationConfig, strength: f64) -> Vec<f64> {
        let x = if x.is_canonical() { x.clone() } else { ExplanationConfig::canonical(x.entries.clone()) };
        let scale = (self.grid_len.max(2) - 1) as f64;
        let mut v = Vec::with_capacity(self.dim());
        v.extend(c.forecast.as_array());
        v.push(c.position_index as f64 / scale);
        v.push(c.last_decision_index as f64 / scale);
        v.push(c.day_fraction);
        v.push(10.0 * c.trailing_return_5d);
        v.push(c.assets_ratio - 1.0);
        let mut bits = [[0.0f64; 2]; 3];
        for e in &x.entries {
            if let Some(label) = self.labels.get(&e.id) {
                let b = &mut bits[label.index()];
                if e.shown {
                    b[0] = 1.0;
                }
                if e.emphasized {
                    b[1] = strength;
                }
            }
        }
        for b in bits {
            v.extend(b);
        }
        v
    }
}

/// Network weights, flattened as `[w1 (hidden x input), b1, w2 (output x hidden), b2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UserModelParams {
    input: usize,
    hidden: usize,
    output: usize,
    theta: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    format: String,
    version: u32,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl UserModelParams {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        let n = hidden * input + hidden + output * hidden + output;
        Self { input, hidden, output, theta: vec![0.0; n] }
    }

    /// Gaussian init scaled by `1/sqrt(fan_in)`, zero biases.
    pub fn random(input: usize, hidden: usize, output: usize, seed: u64) -> Self {
        let mut p = Self::zeros(input, hidden, output);
        let mut rng = seed::rng(seed);
        let n1 = Normal::new(0.0, 1.0 / (input as f64).sqrt()).expect("normal");
        let n2 = Normal::new(0.0, 1.0 / (hidden as f64).sqrt()).expect("normal");
        let (w1, w2) = (p.w1_range(), p.w2_range());
        for v in &mut p.theta[w1] {
            *v = n1.sample(&mut rng);
        }
        for v in &mut p.theta[w2] {
            *v = n2.sample(&mut rng);
        }
        p
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn output_dim(&self) -> usize {
        self.output
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    fn w1_range(&self) -> std::ops::Range<usize> {
        0..self.hidden * self.input
    }
    fn b1_range(&self) -> std::ops::Range<usize> {
        let s = self.hidden * self.input;
        s..s + self.hidden
    }
    fn w2_range(&self) -> std::ops::Range<usize> {
        let s = self.b1_range().end;
        s..s + self.output * self.hidden
    }
    fn b2_range(&self) -> std::ops::Range<usize> {
        let s = self.w2_range().end;
        s..s + self.output
    }

    pub fn w1(&self) -> &[f64] {
        &self.theta[self.w1_range()]
    }
    pub fn b1(&self) -> &[f64] {
        &self.theta[self.b1_range()]
    }
    pub fn w2(&self) -> &[f64] {
        &self.theta[self.w2_range()]
    }
    pub fn b2(&self) -> &[f64] {
        &self.theta[self.b2_range()]
    }
    pub fn b2_mut(&mut self) -> &mut [f64] {
        let r = self.b2_range();
        &mut self.theta[r]
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|v| v.is_finite())
    }

    fn hidden_activations(&self, x: &[f64]) -> Vec<f64> {
        let (w1, b1) = (self.w1(), self.b1());
        (0..self.hidden)
            .map(|j| {
                let row = &w1[j * self.input..(j + 1) * self.input];
                (b1[j] + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>()).tanh()
            })
            .collect()
    }

    fn logits(&self, h: &[f64]) -> Vec<f64> {
        let (w2, b2) = (self.w2(), self.b2());
        (0..self.output)
            .map(|k| {
                let row = &w2[k * self.hidden..(k + 1) * self.hidden];
                b2[k] + row.iter().zip(h).map(|(w, hj)| w * hj).sum::<f64>()
            })
            .collect()
    }

    /// Softmax output for an already featurized input.
    pub fn predict_features(&self, x: &[f64]) -> Result<DecisionDistribution> {
        if x.len() != self.input {
            return Err(Error::Contract(format!("expected {} features, got {}", self.input, x.len())));
        }
        let h = self.hidden_activations(x);
        let logits = self.logits(&h);
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::Numeric { message: "non-finite logits".into(), input: format!("{x:?}") });
        }
        Ok(DecisionDistribution::softmax(&logits))
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ParamsFile {
            format: PARAMS_FORMAT.into(),
            version: PARAMS_VERSION,
            layers: vec![
                LayerFile { rows: self.hidden, cols: self.input, weights: self.w1().to_vec(), bias: self.b1().to_vec() },
                LayerFile { rows: self.output, cols: self.hidden, weights: self.w2().to_vec(), bias: self.b2().to_vec() },
            ],
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ParamsFile = serde_json::from_str(text)?;
        if file.format != PARAMS_FORMAT || file.version != PARAMS_VERSION {
            return Err(Error::Data(format!("unsupported user-model format {} v{}", file.format, file.version)));
        }
        let [l1, l2] = <[LayerFile; 2]>::try_from(file.layers).map_err(|_| Error::Data("expected two layers".into()))?;
        if l2.cols != l1.rows
            || l1.weights.len() != l1.rows * l1.cols
            || l1.bias.len() != l1.rows
            || l2.weights.len() != l2.rows * l2.cols
            || l2.bias.len() != l2.rows
        {
            return Err(Error::Data("inconsistent layer shapes".into()));
        }
        let mut theta = l1.weights;
        theta.extend(l1.bias);
        theta.extend(l2.weights);
        theta.extend(l2.bias);
        let p = Self { input: l1.cols, hidden: l1.rows, output: l2.rows, theta };
        if !p.is_finite() {
            return Err(Error::Data("non-finite weights".into()));
        }
        Ok(p)
    }
}

/// Supervised example: featurized `(c, x)` and the grid index of `d_u`.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: usize,
}

/// Mean cross-entropy plus `l2/2 * ||W||^2` (biases unpenalized) and its gradient.
pub fn loss_and_gradient(params: &UserModelParams, batch: &[Example], l2: f64) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; params.theta.len()];
    let (w1r, b1r, w2r, b2r) = (params.w1_range(), params.b1_range(), params.w2_range(), params.b2_range());
    let (hid, inp, out) = (params.hidden, params.input, params.output);
    let n = batch.len().max(1) as f64;
    let mut loss = 0.0;
    let w2 = params.w2();
    let mut dz = vec![0.0; hid];
    for ex in batch {
        let h = params.hidden_activations(&ex.features);
        let probs = crate::distribution::softmax(&params.logits(&h));
        loss -= probs[ex.label].max(f64::MIN_POSITIVE).ln();
        dz.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..out {
            let d = (probs[k] - if k == ex.label { 1.0 } else { 0.0 }) / n;
            grad[b2r.start + k] += d;
            let row = w2r.start + k * hid;
            for j in 0..hid {
                grad[row + j] += d * h[j];
                dz[j] += d * w2[k * hid + j];
            }
        }
        for j in 0..hid {
            let d = dz[j] * (1.0 - h[j] * h[j]);
            grad[b1r.start + j] += d;
            let row = w1r.start + j * inp;
            for (i, xi) in ex.features.iter().enumerate() {
                grad[row + i] += d * xi;
            }
        }
    }
    loss /= n;
    let mut reg = 0.0;
    for r in [w1r, w2r] {
        for i in r {
            let w = params.theta[i];
            reg += w * w;
            grad[i] += l2 * w;
        }
    }
    (loss + 0.5 * l2 * reg, grad)
}

/// Mean cross-entropy without the penalty.
pub fn cross_entropy(params: &UserModelParams, data: &[Example]) -> f64 {
    let n = data.len().max(1) as f64;
    data.iter()
        .map(|ex| {
            let h = params.hidden_activations(&ex.features);
            let p = crate::distribution::softmax(&params.logits(&h));
            -p[ex.label].max(f64::MIN_POSITIVE).ln()
        })
        .sum::<f64>()
        / n
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UserModelHyper {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Zero (or anything at least the sample count) selects full-batch
    /// gradient descent with backtracking.
    pub batch_size: usize,
    pub l2: f64,
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for UserModelHyper {
    fn default() -> Self {
        Self { hidden: 24, learning_rate: 0.01, epochs: 40, batch_size: 64, l2: 1e-4, holdout_fraction: 0.2, seed: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub epochs: Vec<EpochLoss>,
    pub train_sessions: usize,
    pub holdout_sessions: usize,
    pub train_examples: usize,
    pub holdout_examples: usize,
}

impl TrainingReport {
    pub fn final_val_loss(&self) -> Option<f64> {
        self.epochs.last().and_then(|e| e.val_loss)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["epoch", "train_loss", "val_loss"])?;
        for e in &self.epochs {
            w.write_record([e.epoch.to_string(), e.train_loss.to_string(), e.val_loss.map_or(String::new(), |v| v.to_string())])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, theta: &mut [f64], grad: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for i in 0..theta.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            theta[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
        }
    }
}

/// Trains on featurized examples grouped by episode; an episode-level split
/// keeps a user's whole trajectory on one side of the held-out boundary.
pub fn train_on_examples(
    groups: &[(String, Vec<Example>)],
    input: usize,
    output: usize,
    hyper: &UserModelHyper,
) -> Result<(UserModelParams, TrainingReport)> {
    let total: usize = groups.iter().map(|g| g.1.len()).sum();
    if total == 0 {
        return Err(Error::Data("no interaction records to train on".into()));
    }
    if let Some(bad) = groups.iter().flat_map(|g| &g.1).find(|e| e.label >= output || e.features.len() != input) {
        return Err(Error::Data(format!("example off the grid or mis-shaped: label {}", bad.label)));
    }
    let mut rng = seed::stream_rng(hyper.seed, stream::USER_MODEL);
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.shuffle(&mut rng);
    let n_hold = if groups.len() >= 2 {
        ((groups.len() as f64 * hyper.holdout_fraction).round() as usize).clamp(usize::from(hyper.holdout_fraction > 0.0), groups.len() - 1)
    } else {
        0
    };
    let hold_ids: BTreeSet<usize> = order[..n_hold].iter().copied().collect();
    let mut train = Vec::new();
    let mut hold = Vec::new();
    for (i, g) in groups.iter().enumerate() {
        if hold_ids.contains(&i) {
            hold.extend(g.1.iter().cloned());
        } else {
            train.extend(g.1.iter().cloned());
        }
    }

    let mut params = UserModelParams::random(input, hyper.hidden, output, seed::derive(hyper.seed, 1));
    let mut epochs = Vec::with_capacity(hyper.epochs);
    let full_batch = hyper.batch_size == 0 || hyper.batch_size >= train.len();
    let mut adam = Adam::new(params.theta.len());
    let mut lr = hyper.learning_rate;
    let mut idx: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..hyper.epochs {
        if full_batch {
            let (loss, grad) = loss_and_gradient(&params, &train, hyper.l2);
            let mut accepted = false;
            for _ in 0..60 {
                let mut trial = params.clone();
                for (t, g) in trial.theta.iter_mut().zip(&grad) {
                    *t -= lr * g;
                }
                let (trial_loss, _) = loss_and_gradient(&trial, &train, hyper.l2);
                if trial_loss.is_finite() && trial_loss <= loss {
                    params = trial;
                    accepted = true;
                    lr *= 1.2;
                    break;
                }
                lr *= 0.5;
            }
            if !accepted {
                lr = hyper.learning_rate;
            }
        } else {
            idx.shuffle(&mut rng);
            for chunk in idx.chunks(hyper.batch_size) {
                let batch: Vec<Example> = chunk.iter().map(|&i| train[i].clone()).collect();
                let (_, grad) = loss_and_gradient(&params, &batch, hyper.l2);
                adam.step(&mut params.theta, &grad, hyper.learning_rate);
            }
        }
        if !params.is_finite() {
            return Err(Error::Training(format!("non-finite user-model weights after epoch {epoch}")));
        }
        let train_loss = loss_and_gradient(&params, &train, hyper.l2).0;
        let val_loss = (!hold.is_empty()).then(|| cross_entropy(&params, &hold));
        epochs.push(EpochLoss { epoch, train_loss, val_loss });
    }
    let report = TrainingReport {
        epochs,
        train_sessions: groups.len() - n_hold,
        holdout_sessions: n_hold,
        train_examples: train.len(),
        holdout_examples: hold.len(),
    };
    Ok((params, report))
}

/// Groups records by session and featurizes them.
pub fn examples_from_records(records: &[InteractionRecord], encoder: &FeatureEncoder) -> Result<Vec<(String, Vec<Example>)>> {
    let mut groups: BTreeMap<String, Vec<Example>> = BTreeMap::new();
    for r in records {
        if r.decision_index >= encoder.grid_len() {
            return Err(Error::Data(format!("decision index {} off the grid", r.decision_index)));
        }
        groups
            .entry(r.session_id.clone())
            .or_default()
            .push(Example { features: encoder.featurize(&r.context, &r.config), label: r.decision_index });
    }
    Ok(groups.into_iter().collect())
}

/// Trained user model bundled with its feature encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct UserModel {
    pub params: UserModelParams,
    pub encoder: FeatureEncoder,
    /// Multiplier on emphasis bits at scoring time; 1.0 leaves them as trained.
    pub strength: f64,
}

impl UserModel {
    pub fn new(params: UserModelParams, encoder: FeatureEncoder) -> Result<Self> {
        if params.input_dim() != encoder.dim() || params.output_dim() != encoder.grid_len() {
            return Err(Error::Configuration(format!(
                "user model shape {}x{} does not match encoder {}x{}",
                params.input_dim(),
                params.output_dim(),
                encoder.dim(),
                encoder.grid_len()
            )));
        }
        Ok(Self { params, encoder, strength: 1.0 })
    }

    pub fn predict(&self, c: &ContextFeatures, x: &ExplanationConfig) -> Result<DecisionDistribution> {
        predict(&self.params, &self.encoder.featurize_with_strength(c, x, self.strength))
    }
}

pub fn predict(params: &UserModelParams, features: &[f64]) -> Result<DecisionDistribution> {
    params.predict_features(features)
}

pub fn train_user_model(
    records: &[InteractionRecord],
    encoder: &FeatureEncoder,
    hyper: &UserModelHyper,
) -> Result<(UserModel, TrainingReport)> {
    let groups = examples_from_records(records, encoder)?;
    let (params, report) = train_on_examples(&groups, encoder.dim(), encoder.grid_len(), hyper)?;
    Ok((UserModel::new(params, encoder.clone())?, report))
}

pub fn save_params(params: &UserModelParams, path: &Path) -> Result<()> {
    std::fs::write(path, params.to_json()?)?;
    Ok(())
}

pub fn load_params(path: &Path) -> Result<UserModelParams> {
    UserModelParams::from_json(&std::fs::read_to_string(path)?)
}
