//! Single-instrument trading simulator: price generation, the position grid,
//! and portfolio accounting.
//!
//! Orders fill at the day's opening price with fractional shares and no fees,
//! so any grid target is reachable and rebalancing conserves wealth exactly
//! up to floating-point rounding.

use std::io::{Read, Write};

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};
use crate::seed;

/// Tolerance used when matching a fraction against grid points.
pub const GRID_TOLERANCE: f64 = 1e-9;

/// Ordered set of admissible position fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PositionGrid(Vec<f64>);

impl PositionGrid {
    pub fn new(fractions: Vec<f64>) -> Result<Self> {
        if let Some(err) = Self::check(&fractions) {
            return Err(Error::Validation(vec![err]));
        }
        Ok(Self(fractions))
    }

    /// Evenly spaced grid `{0, 1/steps, ..., 1}`.
    pub fn uniform(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::parameter("steps", "must be at least 1"));
        }
        Self::new((0..=steps).map(|i| i as f64 / steps as f64).collect())
    }

    fn check(fractions: &[f64]) -> Option<FieldError> {
        let field = "episode.position_grid";
        if fractions.len() < 2 {
            return Some(FieldError::new(field, "needs at least two points"));
        }
        if fractions.iter().any(|f| !f.is_finite()) {
            return Some(FieldError::new(field, "entries must be finite"));
        }
        if fractions.windows(2).any(|w| w[1] <= w[0]) {
            return Some(FieldError::new(field, "must be strictly increasing"));
        }
        let (first, last) = (fractions[0], fractions[fractions.len() - 1]);
        if first.abs() > GRID_TOLERANCE || (last - 1.0).abs() > GRID_TOLERANCE {
            return Some(FieldError::new(field, "must span [0, 1]"));
        }
        None
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn fractions(&self) -> &[f64] {
        &self.0
    }

    pub fn fraction(&self, index: usize) -> f64 {
        self.0[index]
    }

    pub fn target(&self, index: usize) -> PositionTarget {
        PositionTarget(self.0[index])
    }

    /// Exact grid membership (within [`GRID_TOLERANCE`]).
    pub fn index_of(&self, fraction: f64) -> Option<usize> {
        self.0.iter().position(|g| (g - fraction).abs() <= GRID_TOLERANCE)
    }

    /// Nearest grid point, lowest index on ties.
    pub fn nearest_index(&self, fraction: f64) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, g) in self.0.iter().enumerate() {
            let d = (g - fraction).abs();
            if d < best_dist {
                best = i;
                best_dist = d;
            }
        }
        best
    }

    pub fn validate_target(&self, fraction: f64) -> Result<PositionTarget> {
        self.index_of(fraction)
            .map(|i| self.target(i))
            .ok_or_else(|| Error::Protocol(format!("fraction {fraction} is not on the position grid")))
    }
}

impl Default for PositionGrid {
    fn default() -> Self {
        Self::uniform(10).expect("uniform grid")
    }
}

impl TryFrom<Vec<f64>> for PositionGrid {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PositionGrid> for Vec<f64> {
    fn from(g: PositionGrid) -> Self {
        g.0
    }
}

/// Target stock value as a fraction of total assets after the day's order.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PositionTarget(pub f64);

impl PositionTarget {
    pub fn fraction(self) -> f64 {
        self.0
    }
}

/// Per-day opening prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    opens: Vec<f64>,
}

impl PriceSeries {
    pub fn new(opens: Vec<f64>) -> Result<Self> {
        if opens.is_empty() {
            return Err(Error::parameter("opens", "series is empty"));
        }
        if let Some((i, p)) = opens.iter().enumerate().find(|(_, p)| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::parameter("opens", format!("price at day {i} is not positive: {p}")));
        }
        Ok(Self { opens })
    }

    pub fn opens(&self) -> &[f64] {
        &self.opens
    }

    pub fn len(&self) -> usize {
        self.opens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.opens.is_empty()
    }

    pub fn open(&self, day: usize) -> Result<f64> {
        self.opens
            .get(day)
            .copied()
            .ok_or_else(|| Error::Index(format!("day {day} outside series of length {}", self.opens.len())))
    }

    /// Simple return from `day` to `day + horizon`.
    pub fn forward_return(&self, day: usize, horizon: usize) -> Result<f64> {
        let now = self.open(day)?;
        let later = self.open(day + horizon)?;
        Ok(later / now - 1.0)
    }

    /// Return over the trailing `window` days ending at `day`; shorter
    /// histories use what is available, day 0 yields 0.
    pub fn trailing_return(&self, day: usize, window: usize) -> f64 {
        let day = day.min(self.opens.len() - 1);
        let start = day.saturating_sub(window);
        self.opens[day] / self.opens[start] - 1.0
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["day", "open"])?;
        for (day, open) in self.opens.iter().enumerate() {
            w.write_record([day.to_string(), open.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            day: usize,
            open: f64,
        }
        let mut opens = Vec::new();
        for (i, row) in csv::Reader::from_reader(reader).deserialize::<Row>().enumerate() {
            let row = row?;
            if row.day != i {
                return Err(Error::Data(format!("expected day {i}, found day {}", row.day)));
            }
            opens.push(row.open);
        }
        Self::new(opens)
    }
}

/// Two-state drift regime (bull/bear) with Markov switching.
///
/// The states may differ in both drift and persistence, which allows slow
/// rallies interrupted by short, steep declines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeParams {
    /// Per-day log drift added in the bull state.
    pub bull_drift: f64,
    /// Per-day log drift added in the bear state.
    pub bear_drift: f64,
    /// Daily probability of leaving the bull state.
    pub bull_to_bear: f64,
    /// Daily probability of leaving the bear state.
    pub bear_to_bull: f64,
}

impl RegimeParams {
    /// Stationary probability of the bull state.
    pub fn bull_share(&self) -> f64 {
        let total = self.bull_to_bear + self.bear_to_bull;
        if total == 0.0 {
            0.5
        } else {
            self.bear_to_bull / total
        }
    }
}

/// Parameters of the synthetic log-normal price process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeriesParams {
    pub start: f64,
    /// Per-day log drift.
    pub drift: f64,
    /// Per-day log-return standard deviation.
    pub volatility: f64,
    pub length: usize,
    pub regime: Option<RegimeParams>,
}

impl Default for SeriesParams {
    fn default() -> Self {
        Self {
            start: 1000.0,
            drift: 0.0,
            volatility: 0.006,
            length: 46,
            regime: Some(RegimeParams { bull_drift: 0.007, bear_drift: -0.05, bull_to_bear: 0.25, bear_to_bull: 0.8 }),
        }
    }
}

impl SeriesParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.volatility.is_finite() && self.volatility >= 0.0) {
            return Err(Error::parameter("volatility", "must be finite and non-negative"));
        }
        if self.length == 0 {
            return Err(Error::parameter("length", "must be at least 1"));
        }
        if !(self.start.is_finite() && self.start > 0.0) {
            return Err(Error::parameter("start", "must be positive"));
        }
        if !self.drift.is_finite() {
            return Err(Error::parameter("drift", "must be finite"));
        }
        if let Some(r) = self.regime {
            if !(r.bull_drift.is_finite() && r.bear_drift.is_finite()) {
                return Err(Error::parameter("regime", "drifts must be finite"));
            }
            if !(0.0..=1.0).contains(&r.bull_to_bear) || !(0.0..=1.0).contains(&r.bear_to_bull) {
                return Err(Error::parameter("regime", "switch probabilities must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Generates a seeded price path.
///
/// The initial regime is drawn from the stationary distribution; each step
/// then draws exactly one uniform (regime switch) and one standard normal,
/// so the path is a pure function of `(seed, params)`.
pub fn generate_series(seed: u64, params: &SeriesParams) -> Result<PriceSeries> {
    params.validate()?;
    let mut rng = seed::rng(seed);
    let start: f64 = rng.random();
    let mut bull = start < params.regime.map_or(0.5, |r| r.bull_share());
    let mut opens = Vec::with_capacity(params.length);
    let mut price = params.start;
    opens.push(price);
    for _ in 1..params.length {
        let u: f64 = rng.random();
        let z: f64 = StandardNormal.sample(&mut rng);
        let regime_drift = match params.regime {
            Some(r) => {
                if u < if bull { r.bull_to_bear } else { r.bear_to_bull } {
                    bull = !bull;
                }
                if bull {
                    r.bull_drift
                } else {
                    r.bear_drift
                }
            }
            None => 0.0,
        };
        price *= (params.drift + regime_drift + params.volatility * z).exp();
        opens.push(price);
    }
    PriceSeries::new(opens)
}

/// Cash and share holdings on a given day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortfolioState {
    pub cash: f64,
    pub shares: f64,
    pub day: usize,
}

impl PortfolioState {
    pub fn with_cash(cash: f64) -> Self {
        Self { cash, shares: 0.0, day: 0 }
    }

    pub fn total_assets(&self, price: f64) -> f64 {
        total_assets(self, price)
    }

    /// Current stock value as a fraction of total assets.
    pub fn stock_fraction(&self, price: f64) -> f64 {
        let total = self.total_assets(price);
        if total <= 0.0 {
            0.0
        } else {
            self.shares * price / total
        }
    }
}

pub fn total_assets(state: &PortfolioState, price: f64) -> f64 {
    state.cash + state.shares * price
}

/// Rebalances so that stock value equals `target` of total assets at `price`.
pub fn apply_target_position(state: &PortfolioState, target: PositionTarget, price: f64) -> PortfolioState {
    debug_assert!(price > 0.0);
    let total = total_assets(state, price);
    let current = state.shares * price;
    let desired = target.fraction() * total;
    if (desired - current).abs() <= f64::EPSILON * total {
        return *state;
    }
    let shares = desired / price;
    let cash = (total - desired).max(0.0);
    PortfolioState { cash, shares, day: state.day }
}

/// Episode-level settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeConfig {
    pub initial_cash: f64,
    pub num_days: usize,
    pub position_grid: PositionGrid,
    pub rng_seed: u64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self { initial_cash: 1_000_000.0, num_days: 45, position_grid: PositionGrid::default(), rng_seed: 0 }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Vec<FieldError> {
        let mut errs = Vec::new();
        if !(self.initial_cash.is_finite() && self.initial_cash > 0.0) {
            errs.push(FieldError::new("episode.initial_cash", "must be positive"));
        }
        if self.num_days == 0 {
            errs.push(FieldError::new("episode.num_days", "must be at least 1"));
        }
        if let Some(e) = PositionGrid::check(self.position_grid.fractions()) {
            errs.push(e);
        }
        errs
    }
}
