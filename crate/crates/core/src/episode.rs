//! The day-step loop shared by batch simulation and live sessions.
//!
//! Each day is planned once (forecast, policy suggestion, explanation
//! configuration, rendered payload) and then closed by exactly one order.
//! Planning is idempotent until the order arrives.

use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::distribution::DecisionDistribution;
use crate::error::{Error, Result};
use crate::explain::{render, DisplayItem, Explanation, ExplanationConfig, ExplanationPool, PriceContext, TemplateGenerator};
use crate::forecast::{forecast_episode, ForecastDistribution, ForecastParams};
use crate::market::{apply_target_position, generate_series, EpisodeConfig, PortfolioState, PositionGrid, PositionTarget, PriceSeries, SeriesParams};
use crate::nudge::{DecisionModel, NudgeDecision, NudgeEngine};
use crate::policy::{policy_distribution, PolicyStateKey, QTable};
use crate::record::InteractionRecord;
use crate::seed::{self, stream, Rng};
use crate::user_model::ContextFeatures;

/// Days of price history carried in each record.
pub const PRICE_WINDOW: usize = 20;
/// Window of the trailing return feature.
pub const TRAILING_DAYS: usize = 5;

/// What a decision source sees on a given day.
pub struct AgentView<'a> {
    pub day: usize,
    pub num_days: usize,
    /// Policy suggestion. Synthetic users use it as their stand-in for
    /// "following the AI"; live users never see it.
    pub suggested: PositionTarget,
    pub forecast: &'a ForecastDistribution,
    pub payload: &'a [DisplayItem],
    pub last_decision_index: usize,
    pub grid: &'a PositionGrid,
}

pub trait Agent {
    fn decide(&mut self, view: &AgentView<'_>) -> PositionTarget;
}

/// Always the same position.
pub struct ConstantAgent(pub PositionTarget);

impl Agent for ConstantAgent {
    fn decide(&mut self, _: &AgentView<'_>) -> PositionTarget {
        self.0
    }
}

/// Follows the policy's suggestion exactly.
pub struct PolicyAgent;

impl Agent for PolicyAgent {
    fn decide(&mut self, view: &AgentView<'_>) -> PositionTarget {
        view.suggested
    }
}

/// Replays a fixed decision sequence.
pub struct ScriptedAgent {
    decisions: Vec<f64>,
}

impl ScriptedAgent {
    pub fn new(decisions: Vec<f64>) -> Self {
        Self { decisions }
    }
}

impl Agent for ScriptedAgent {
    fn decide(&mut self, view: &AgentView<'_>) -> PositionTarget {
        PositionTarget(self.decisions.get(view.day).copied().unwrap_or(f64::NAN))
    }
}

/// Market, forecasts and explanation pool of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSetup {
    pub config: EpisodeConfig,
    pub series: PriceSeries,
    pub forecasts: Vec<ForecastDistribution>,
    pub pool: ExplanationPool,
}

impl EpisodeSetup {
    /// Seeded market and forecasts derived from `config.rng_seed`.
    pub fn generate(config: EpisodeConfig, market: &SeriesParams, forecast: &ForecastParams, pool: ExplanationPool) -> Result<Self> {
        let params = SeriesParams { length: market.length.max(config.num_days + forecast.horizon), ..*market };
        let series = generate_series(seed::derive(config.rng_seed, stream::SERIES), &params)?;
        Self::with_series(config, series, forecast, pool)
    }

    pub fn with_series(config: EpisodeConfig, series: PriceSeries, forecast: &ForecastParams, pool: ExplanationPool) -> Result<Self> {
        forecast.validate()?;
        if series.len() < config.num_days + forecast.horizon {
            return Err(Error::Data(format!(
                "series of length {} too short for {} days with horizon {}",
                series.len(),
                config.num_days,
                forecast.horizon
            )));
        }
        let mut rng = seed::stream_rng(config.rng_seed, stream::FORECAST);
        let forecasts = forecast_episode(&series, config.num_days, forecast, &mut rng)?;
        Ok(Self { config, series, forecasts, pool })
    }

    /// Final assets of a user who holds a full position throughout.
    pub fn buy_and_hold_final(&self) -> f64 {
        let o = self.series.opens();
        self.config.initial_cash * o[self.config.num_days] / o[0]
    }
}

/// Policy handle shared read-only between episodes.
#[derive(Clone)]
pub struct PolicyHandle {
    pub table: Arc<QTable>,
    pub temperature: f64,
}

/// Chooses the explanation configuration each day.
pub enum Nudger {
    Fixed(ExplanationConfig),
    /// Uniformly random candidate per day (used to collect training logs).
    Random { configs: Vec<ExplanationConfig>, rng: Rng },
    Engine(NudgeEngine<Arc<dyn DecisionModel + Send + Sync>>),
}

impl Nudger {
    pub fn random(configs: Vec<ExplanationConfig>, seed: u64) -> Self {
        Nudger::Random { configs, rng: seed::stream_rng(seed, stream::NUDGE) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Clock {
    /// Timestamp = day index; keeps batch logs byte-reproducible.
    Logical,
    Wall,
}

impl Clock {
    fn now(self, day: usize) -> u64 {
        match self {
            Clock::Logical => day as u64,
            Clock::Wall => SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64),
        }
    }
}

/// Everything decided for a day before the order.
#[derive(Debug, Clone, PartialEq)]
pub struct DayPlan {
    pub day: usize,
    pub open: f64,
    pub trailing_prices: Vec<f64>,
    pub forecast: ForecastDistribution,
    pub explanations: Vec<Explanation>,
    pub context: ContextFeatures,
    pub policy: DecisionDistribution,
    pub policy_unseen: bool,
    pub suggested_index: usize,
    pub nudge: Option<NudgeDecision>,
    pub config: ExplanationConfig,
    pub payload: Vec<DisplayItem>,
}

pub struct Episode {
    setup: Arc<EpisodeSetup>,
    policy: PolicyHandle,
    nudger: Nudger,
    session_id: String,
    clock: Clock,
    state: PortfolioState,
    day: usize,
    policy_position: usize,
    last_decision: usize,
    plan: Option<DayPlan>,
    records: Vec<InteractionRecord>,
}

impl Episode {
    pub fn new(setup: Arc<EpisodeSetup>, policy: PolicyHandle, nudger: Nudger, session_id: impl Into<String>, clock: Clock) -> Result<Self> {
        if policy.table.grid() != &setup.config.position_grid {
            return Err(Error::Configuration("policy grid differs from the episode grid".into()));
        }
        let state = PortfolioState::with_cash(setup.config.initial_cash);
        Ok(Self {
            setup,
            policy,
            nudger,
            session_id: session_id.into(),
            clock,
            state,
            day: 0,
            policy_position: 0,
            last_decision: 0,
            plan: None,
            records: Vec::new(),
        })
    }

    pub fn setup(&self) -> &EpisodeSetup {
        &self.setup
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn day(&self) -> usize {
        self.day
    }

    pub fn is_finished(&self) -> bool {
        self.day >= self.setup.config.num_days
    }

    pub fn state(&self) -> PortfolioState {
        self.state
    }

    pub fn records(&self) -> &[InteractionRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<InteractionRecord> {
        self.records
    }

    /// Current total assets at today's open (or the final open when done).
    pub fn total_assets(&self) -> f64 {
        let day = self.day.min(self.setup.series.len() - 1);
        self.state.total_assets(self.setup.series.opens()[day])
    }

    /// Plans the current day; repeated calls return the same plan.
    pub fn plan(&mut self) -> Result<&DayPlan> {
        if self.is_finished() {
            return Err(Error::State("episode finished".into()));
        }
        if self.plan.is_none() {
            let plan = self.compute_plan()?;
            self.plan = Some(plan);
        }
        Ok(self.plan.as_ref().expect("plan just set"))
    }

    fn compute_plan(&mut self) -> Result<DayPlan> {
        let setup = &self.setup;
        let cfg = &setup.config;
        let grid = &cfg.position_grid;
        let day = self.day;
        let opens = setup.series.opens();
        let open = opens[day];
        let forecast = setup.forecasts[day];
        let trailing_return = setup.series.trailing_return(day, TRAILING_DAYS);

        let key = PolicyStateKey::new(&forecast, self.policy_position, day, cfg.num_days);
        let pd = policy_distribution(&self.policy.table, &key, self.policy.temperature)?;
        let suggested_index = pd.probs.argmax();

        let context = ContextFeatures {
            forecast,
            position_index: grid.nearest_index(self.state.stock_fraction(open)),
            last_decision_index: self.last_decision,
            day_fraction: day as f64 / cfg.num_days as f64,
            trailing_return_5d: trailing_return,
            assets_ratio: self.state.total_assets(open) / cfg.initial_cash,
        };
        let explanations =
            setup.pool.generate(&TemplateGenerator, &forecast, &PriceContext { open, trailing_return_5d: trailing_return });

        let (config, nudge) = match &mut self.nudger {
            Nudger::Fixed(c) => (c.clone(), None),
            Nudger::Random { configs, rng } => {
                let c = configs.choose(rng).ok_or_else(|| Error::Configuration("no candidate configurations".into()))?;
                (c.clone(), None)
            }
            Nudger::Engine(engine) => {
                let decision = engine.nudge_step(&context, &pd.probs)?;
                (decision.chosen.clone(), Some(decision))
            }
        };
        let payload = render(&explanations, &config)?;
        Ok(DayPlan {
            day,
            open,
            trailing_prices: opens[day.saturating_sub(PRICE_WINDOW - 1)..=day].to_vec(),
            forecast,
            explanations,
            context,
            policy: pd.probs,
            policy_unseen: pd.unseen,
            suggested_index,
            nudge,
            config,
            payload,
        })
    }

    /// Closes the current day with `fraction` and advances.
    pub fn submit(&mut self, fraction: f64) -> Result<&InteractionRecord> {
        self.plan()?;
        let grid = &self.setup.config.position_grid;
        let decision_index = grid
            .index_of(fraction)
            .ok_or_else(|| Error::Protocol(format!("decision {fraction} is not on the position grid")))?;
        let plan = self.plan.take().expect("planned above");
        let opens = self.setup.series.opens();
        let state_after = apply_target_position(&self.state, grid.target(decision_index), plan.open);
        let assets_after = state_after.total_assets(opens[plan.day + 1]);
        let (nudge_distance, audit) = match plan.nudge {
            Some(n) => (Some(n.distance), Some(n.scored)),
            None => (None, None),
        };
        let record = InteractionRecord {
            session_id: self.session_id.clone(),
            day: plan.day,
            open: plan.open,
            trailing_prices: plan.trailing_prices,
            forecast: plan.forecast,
            context: plan.context,
            config: plan.config,
            payload: plan.payload,
            nudge_distance,
            audit,
            policy: plan.policy,
            policy_unseen: plan.policy_unseen,
            suggested: grid.fraction(plan.suggested_index),
            suggested_index: plan.suggested_index,
            decision: grid.fraction(decision_index),
            decision_index,
            state_after,
            assets_after,
            timestamp_ms: self.clock.now(plan.day),
        };
        self.state = PortfolioState { day: plan.day + 1, ..state_after };
        self.policy_position = plan.suggested_index;
        self.last_decision = decision_index;
        self.day += 1;
        self.records.push(record);
        Ok(self.records.last().expect("just pushed"))
    }

    /// Plans and closes one day with `agent`.
    pub fn step(&mut self, agent: &mut dyn Agent) -> Result<&InteractionRecord> {
        self.plan()?;
        let setup = self.setup.clone();
        let plan = self.plan.as_ref().expect("planned above");
        let grid = &setup.config.position_grid;
        let view = AgentView {
            day: plan.day,
            num_days: setup.config.num_days,
            suggested: grid.target(plan.suggested_index),
            forecast: &plan.forecast,
            payload: &plan.payload,
            last_decision_index: self.last_decision,
            grid,
        };
        let target = agent.decide(&view);
        self.submit(target.fraction())
    }
}

/// Runs a whole episode with a synthetic agent.
pub fn run_episode(
    setup: Arc<EpisodeSetup>,
    policy: PolicyHandle,
    nudger: Nudger,
    agent: &mut dyn Agent,
    session_id: &str,
) -> Result<Vec<InteractionRecord>> {
    let mut ep = Episode::new(setup, policy, nudger, session_id, Clock::Logical)?;
    while !ep.is_finished() {
        ep.step(agent)?;
    }
    Ok(ep.into_records())
}

/// Asset trajectory (`assets_after` per day) of a log.
pub fn asset_trajectory(records: &[InteractionRecord]) -> Vec<f64> {
    records.iter().map(|r| r.assets_after).collect()
}

/// Re-runs the stored decisions of `records` against the same setup and
/// policy; returns the regenerated log.
pub fn replay(setup: Arc<EpisodeSetup>, policy: PolicyHandle, nudger: Nudger, records: &[InteractionRecord]) -> Result<Vec<InteractionRecord>> {
    let session = records.first().map_or("replay", |r| r.session_id.as_str()).to_string();
    let mut agent = ScriptedAgent::new(records.iter().map(|r| r.decision).collect());
    let mut ep = Episode::new(setup, policy, nudger, session, Clock::Logical)?;
    for _ in records {
        ep.step(&mut agent)?;
    }
    Ok(ep.into_records())
}
