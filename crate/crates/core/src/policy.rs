//! The AI suggestion policy: tabular Q-learning over a coarse market state,
//! exposed as a Boltzmann distribution over the position grid.
//!
//! The policy keeps its own shadow position (its previous suggestion), so its
//! suggestions never depend on what the user actually did.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::distribution::{argmax, softmax, DecisionDistribution};
use crate::error::{Error, Result};
use crate::forecast::{forecast_episode, ForecastClass, ForecastDistribution, ForecastParams};
use crate::market::{
    apply_target_position, generate_series, EpisodeConfig, PortfolioState, PositionGrid, PositionTarget, PriceSeries,
    SeriesParams,
};
use crate::seed::{self, stream};

pub const QTABLE_FORMAT: &str = "nudge-qtable";
pub const QTABLE_VERSION: u32 = 1;

const CONFIDENCE_BUCKETS: u8 = 3;
const REMAINING_BUCKETS: u8 = 3;

/// What the policy sees of the context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PolicyStateKey {
    pub class: ForecastClass,
    /// Tercile of the top forecast probability over [1/3, 1].
    pub confidence: u8,
    /// Grid index of the policy's current position.
    pub position: usize,
    /// Coarse bucket of days remaining, 0 = end of episode.
    pub remaining: u8,
}

impl PolicyStateKey {
    pub fn new(forecast: &ForecastDistribution, position: usize, day: usize, num_days: usize) -> Self {
        let top = forecast.prob(forecast.argmax());
        let t = ((top - 1.0 / 3.0) / (2.0 / 3.0)).clamp(0.0, 1.0);
        let confidence = ((t * CONFIDENCE_BUCKETS as f64) as u8).min(CONFIDENCE_BUCKETS - 1);
        let left = num_days.saturating_sub(day + 1);
        let remaining = ((left * REMAINING_BUCKETS as usize) / num_days.max(1)) as u8;
        Self {
            class: forecast.argmax(),
            confidence,
            position,
            remaining: remaining.min(REMAINING_BUCKETS - 1),
        }
    }
}

/// State-action values, stored only for visited states.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    grid: PositionGrid,
    values: BTreeMap<PolicyStateKey, Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QTableFile {
    format: String,
    version: u32,
    grid: PositionGrid,
    states: Vec<QTableEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QTableEntry {
    key: PolicyStateKey,
    q: Vec<f64>,
}

impl QTable {
    pub fn new(grid: PositionGrid) -> Self {
        Self { grid, values: BTreeMap::new() }
    }

    pub fn grid(&self) -> &PositionGrid {
        &self.grid
    }

    pub fn num_states(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, key: &PolicyStateKey) -> Option<&[f64]> {
        self.values.get(key).map(Vec::as_slice)
    }

    fn entry(&mut self, key: PolicyStateKey) -> &mut Vec<f64> {
        let n = self.grid.len();
        self.values.entry(key).or_insert_with(|| vec![0.0; n])
    }

    pub fn set(&mut self, key: PolicyStateKey, q: Vec<f64>) -> Result<()> {
        if q.len() != self.grid.len() {
            return Err(Error::Contract(format!("expected {} action values, got {}", self.grid.len(), q.len())));
        }
        self.values.insert(key, q);
        Ok(())
    }

    fn max_value(&self, key: &PolicyStateKey) -> f64 {
        self.values.get(key).map_or(0.0, |q| q.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn to_json(&self) -> Result<String> {
        let file = QTableFile {
            format: QTABLE_FORMAT.into(),
            version: QTABLE_VERSION,
            grid: self.grid.clone(),
            states: self.values.iter().map(|(k, q)| QTableEntry { key: *k, q: q.clone() }).collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: QTableFile = serde_json::from_str(text)?;
        if file.format != QTABLE_FORMAT || file.version != QTABLE_VERSION {
            return Err(Error::Data(format!("unsupported q-table format {} v{}", file.format, file.version)));
        }
        let mut table = QTable::new(file.grid);
        for e in file.states {
            if e.q.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("non-finite value for state {:?}", e.key)));
            }
            table.set(e.key, e.q)?;
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Boltzmann distribution over grid actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDistribution {
    pub probs: DecisionDistribution,
    /// Set when the state was never visited during training.
    pub unseen: bool,
}

/// `temperature == 0` is the greedy limit (one-hot, lowest index on ties).
pub fn policy_distribution(q: &QTable, state: &PolicyStateKey, temperature: f64) -> Result<PolicyDistribution> {
    if !(temperature.is_finite() && temperature >= 0.0) {
        return Err(Error::parameter("temperature", "must be finite and positive"));
    }
    let n = q.grid.len();
    let Some(values) = q.get(state) else {
        return Ok(PolicyDistribution { probs: DecisionDistribution::uniform(n), unseen: true });
    };
    let probs = if temperature == 0.0 {
        DecisionDistribution::one_hot(n, argmax(values))
    } else {
        let scaled: Vec<f64> = values.iter().map(|v| v / temperature).collect();
        DecisionDistribution::from_normalized(softmax(&scaled))
    };
    Ok(PolicyDistribution { probs, unseen: false })
}

/// Grid point with the highest probability, lowest index on ties.
pub fn suggested_decision(dist: &DecisionDistribution, grid: &PositionGrid) -> PositionTarget {
    grid.target(dist.argmax())
}

/// Greedy action read straight from the Q-values. Agrees with
/// [`suggested_decision`] for every positive temperature.
pub fn greedy_index(q: &QTable, state: &PolicyStateKey) -> usize {
    q.get(state).map_or(0, argmax)
}

/// Market the policy is trained on.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainingMarket {
    /// Fresh seeded series per training episode.
    Generated(SeriesParams),
    /// The same series every episode.
    Fixed(PriceSeries),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    pub episode: EpisodeConfig,
    pub market: TrainingMarket,
    pub forecast: ForecastParams,
}

/// Learning-rate / discount / exploration schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QLearningParams {
    pub episodes: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub seed: u64,
}

impl Default for QLearningParams {
    fn default() -> Self {
        Self { episodes: 4000, alpha: 0.05, gamma: 0.3, epsilon_start: 1.0, epsilon_end: 0.05, seed: 17 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub episodes: usize,
    pub states_visited: usize,
    /// Mean per-episode return (in units of initial cash) per tenth of training.
    pub curve: Vec<f64>,
}

fn epsilon_at(p: &QLearningParams, episode: usize) -> f64 {
    if p.episodes <= 1 {
        return p.epsilon_end;
    }
    let t = episode as f64 / (p.episodes - 1) as f64;
    p.epsilon_start + (p.epsilon_end - p.epsilon_start) * t
}

/// Series used for training episode `index`.
pub fn training_series(spec: &SimSpec, seed: u64, index: usize) -> Result<PriceSeries> {
    match &spec.market {
        TrainingMarket::Fixed(s) => Ok(s.clone()),
        TrainingMarket::Generated(params) => {
            let params = SeriesParams { length: params.length.max(spec.episode.num_days + 1), ..*params };
            generate_series(seed::derive_indexed(seed, stream::SERIES, index as u64), &params)
        }
    }
}

/// Tabular Q-learning; reward is the daily change in total assets divided by
/// the initial cash, with no terminal bonus.
pub fn train_policy(spec: &SimSpec, hyper: &QLearningParams) -> Result<(QTable, TrainingSummary)> {
    let grid = spec.episode.position_grid.clone();
    let n_actions = grid.len();
    let num_days = spec.episode.num_days;
    let cash0 = spec.episode.initial_cash;
    spec.forecast.validate()?;
    let mut q = QTable::new(grid.clone());
    let mut rng = seed::stream_rng(hyper.seed, stream::POLICY);
    let mut returns = Vec::with_capacity(hyper.episodes);

    for ep in 0..hyper.episodes {
        let series = training_series(spec, hyper.seed, ep)?;
        if series.len() < num_days + spec.forecast.horizon {
            return Err(Error::Data(format!("series of length {} too short for {num_days} days", series.len())));
        }
        let mut frng = seed::rng(seed::derive_indexed(hyper.seed, stream::FORECAST, ep as u64));
        let forecasts = forecast_episode(&series, num_days, &spec.forecast, &mut frng)?;
        let eps = epsilon_at(hyper, ep);
        let mut state = PortfolioState::with_cash(cash0);
        let mut position = 0usize;
        let mut ep_return = 0.0;

        for day in 0..num_days {
            let key = PolicyStateKey::new(&forecasts[day], position, day, num_days);
            let explore: f64 = rng.random();
            let random_action: usize = rng.random_range(0..n_actions);
            let action = if explore < eps { random_action } else { greedy_index(&q, &key) };

            let price = series.open(day)?;
            let before = state.total_assets(price);
            state = apply_target_position(&state, grid.target(action), price);
            let after = state.total_assets(series.open(day + 1)?);
            let reward = (after - before) / cash0;
            ep_return += reward;

            let future = if day + 1 < num_days {
                let next = PolicyStateKey::new(&forecasts[day + 1], action, day + 1, num_days);
                hyper.gamma * q.max_value(&next)
            } else {
                0.0
            };
            let row = q.entry(key);
            let updated = row[action] + hyper.alpha * (reward + future - row[action]);
            if !updated.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite Q at episode {ep}, day {day}, state {key:?}, action {action}: reward {reward}, future {future}"
                )));
            }
            row[action] = updated;
            position = action;
        }
        returns.push(ep_return);
    }

    let chunks = 10.min(returns.len().max(1));
    let size = returns.len().div_ceil(chunks).max(1);
    let curve = returns.chunks(size).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    let summary = TrainingSummary { episodes: hyper.episodes, states_visited: q.num_states(), curve };
    Ok((q, summary))
}
