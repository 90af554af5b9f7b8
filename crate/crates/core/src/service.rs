//! Batch runs, the experiment pipeline and live session management.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::analysis::{analyze_sessions, corrcoef, write_report, ClusterReport, Correlation};
use crate::archetype::{generate_cohort, CohortMember};
use crate::config::{ExperimentConfig, NudgeMode};
use crate::episode::{asset_trajectory, run_episode, Clock, Episode, EpisodeSetup, Nudger, PolicyHandle, PRICE_WINDOW};
use crate::error::{Error, FieldError, Result};
use crate::explain::{enumerate_configs, BiasingMode, DisplayItem, ExplanationConfig, ExplanationPool};
use crate::forecast::ForecastDistribution;
use crate::market::{EpisodeConfig, PriceSeries};
use crate::nudge::{DecisionModel, NudgeEngine};
use crate::policy::{train_policy, QTable, SimSpec, TrainingMarket, TrainingSummary};
use crate::record::{append_jsonl, write_jsonl, InteractionRecord};
use crate::seed::{self, stream};
use crate::user_model::{load_params, save_params, train_user_model, FeatureEncoder, TrainingReport, UserModel};

/// Environment variable naming the artifact directory.
pub const ARTIFACTS_ENV: &str = "NUDGE_XAI_ARTIFACTS";
pub const POLICY_FILE: &str = "policy.json";
pub const USER_MODEL_FILE: &str = "user_model.json";

/// Config value, then the environment variable, then `./artifacts`.
pub fn artifacts_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.artifacts
        .clone()
        .or_else(|| std::env::var_os(ARTIFACTS_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("artifacts"))
}

/// Trained models an episode needs.
#[derive(Clone)]
pub struct Artifacts {
    pub policy: Arc<QTable>,
    pub user_model: Option<Arc<UserModel>>,
}

fn needs_user_model(mode: NudgeMode) -> bool {
    matches!(mode, NudgeMode::DynEmph | NudgeMode::XSelector)
}

impl Artifacts {
    /// Loads what `cfg.nudge.mode` requires from `dir`; every missing file is
    /// named in the error.
    pub fn load(cfg: &ExperimentConfig, dir: &Path) -> Result<Self> {
        let policy_path = dir.join(POLICY_FILE);
        let model_path = dir.join(USER_MODEL_FILE);
        let want_model = needs_user_model(cfg.nudge.mode);
        let mut missing = Vec::new();
        if !policy_path.is_file() {
            missing.push(policy_path.display().to_string());
        }
        if want_model && !model_path.is_file() {
            missing.push(model_path.display().to_string());
        }
        if !missing.is_empty() {
            return Err(Error::MissingArtifacts(missing));
        }
        let policy = Arc::new(QTable::load(&policy_path)?);
        let user_model = if want_model {
            let encoder = FeatureEncoder::new(&cfg.pool()?, cfg.episode.position_grid.len());
            let mut model = UserModel::new(load_params(&model_path)?, encoder)?;
            model.strength = cfg.nudge.strength;
            Some(Arc::new(model))
        } else {
            None
        };
        Ok(Self { policy, user_model })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.policy.save(&dir.join(POLICY_FILE))?;
        if let Some(m) = &self.user_model {
            save_params(&m.params, &dir.join(USER_MODEL_FILE))?;
        }
        Ok(())
    }
}

fn fixed_series(cfg: &ExperimentConfig) -> Result<Option<PriceSeries>> {
    match &cfg.series_csv {
        Some(p) => Ok(Some(PriceSeries::read_csv(std::fs::File::open(p)?)?)),
        None => Ok(None),
    }
}

pub fn sim_spec(cfg: &ExperimentConfig) -> Result<SimSpec> {
    let market = match fixed_series(cfg)? {
        Some(s) => TrainingMarket::Fixed(s),
        None => TrainingMarket::Generated(cfg.market),
    };
    Ok(SimSpec { episode: cfg.episode.clone(), market, forecast: cfg.forecast })
}

/// Market and forecasts for an episode keyed by `rng_seed`.
pub fn episode_setup(cfg: &ExperimentConfig, rng_seed: u64) -> Result<EpisodeSetup> {
    let config = EpisodeConfig { rng_seed, ..cfg.episode.clone() };
    let pool = cfg.pool()?;
    match fixed_series(cfg)? {
        Some(series) => EpisodeSetup::with_series(config, series, &cfg.forecast, pool),
        None => EpisodeSetup::generate(config, &cfg.market, &cfg.forecast, pool),
    }
}

/// Candidate set used by the random nudger: the emphasis space, or the
/// selection space in X-Selector mode.
fn random_candidates(cfg: &ExperimentConfig, pool: &ExplanationPool) -> Result<Vec<ExplanationConfig>> {
    let mode = match cfg.nudge.mode {
        NudgeMode::XSelector => BiasingMode::XSelector { budget: cfg.nudge.budget },
        _ => BiasingMode::DynEmph,
    };
    enumerate_configs(pool, mode)
}

/// Builds the day-by-day configuration chooser for `cfg.nudge.mode`.
pub fn build_nudger(cfg: &ExperimentConfig, pool: &ExplanationPool, artifacts: &Artifacts, seed: u64) -> Result<Nudger> {
    match cfg.nudge.mode {
        NudgeMode::None => Ok(Nudger::Fixed(ExplanationConfig::plain(pool))),
        NudgeMode::Random => Ok(Nudger::random(random_candidates(cfg, pool)?, seed)),
        NudgeMode::DynEmph | NudgeMode::XSelector => {
            let model = artifacts
                .user_model
                .clone()
                .ok_or_else(|| Error::MissingArtifacts(vec![USER_MODEL_FILE.to_string()]))?;
            let model: Arc<dyn DecisionModel + Send + Sync> = model;
            let mode = cfg.nudge.biasing_mode().expect("engine modes have a biasing mode");
            Ok(Nudger::Engine(NudgeEngine::new(model, pool, mode, cfg.nudge.search)?))
        }
    }
}

fn policy_handle(cfg: &ExperimentConfig, artifacts: &Artifacts) -> PolicyHandle {
    PolicyHandle { table: artifacts.policy.clone(), temperature: cfg.policy.temperature }
}

pub fn train_policy_for(cfg: &ExperimentConfig) -> Result<(QTable, TrainingSummary)> {
    train_policy(&sim_spec(cfg)?, &cfg.policy.hyper())
}

/// Runs every cohort member through one episode on the shared market.
///
/// Session ids are the member ids; member `i` seeds a random nudger with its
/// own agent seed.
pub fn simulate_cohort(cfg: &ExperimentConfig, artifacts: &Artifacts) -> Result<Vec<Vec<InteractionRecord>>> {
    let members = generate_cohort(&cfg.cohort);
    let setup = Arc::new(episode_setup(cfg, cfg.episode.rng_seed)?);
    run_members(cfg, artifacts, &setup, &members, "")
}

fn run_members(
    cfg: &ExperimentConfig,
    artifacts: &Artifacts,
    setup: &Arc<EpisodeSetup>,
    members: &[CohortMember],
    suffix: &str,
) -> Result<Vec<Vec<InteractionRecord>>> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(members.len().max(1));
    let chunk = members.len().div_ceil(threads.max(1)).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = members
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter()
                        .map(|m| {
                            let nudger = build_nudger(cfg, &setup.pool, artifacts, m.seed)?;
                            let mut agent = m.agent();
                            run_episode(setup.clone(), policy_handle(cfg, artifacts), nudger, &mut agent, &format!("{}{suffix}", m.id))
                        })
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        let mut out = Vec::with_capacity(members.len());
        for h in handles {
            out.extend(h.join().expect("simulation thread panicked")?);
        }
        Ok(out)
    })
}

/// Random-configuration logs for user-model training: every member plays
/// `episodes_per_agent` episodes on independently seeded markets.
pub fn collect_training_logs(cfg: &ExperimentConfig, policy: Arc<QTable>) -> Result<Vec<InteractionRecord>> {
    let members = generate_cohort(&cfg.cohort);
    let collection = ExperimentConfig { nudge: crate::config::NudgeConfig { mode: NudgeMode::Random, ..cfg.nudge }, ..cfg.clone() };
    let artifacts = Artifacts { policy, user_model: None };
    let mut out = Vec::new();
    for r in 0..cfg.training_logs.episodes_per_agent {
        let seed = seed::derive_indexed(cfg.training_logs.seed, stream::LOGS, r as u64);
        let setup = Arc::new(episode_setup(&collection, seed)?);
        let reseeded: Vec<CohortMember> = members
            .iter()
            .map(|m| CohortMember { seed: seed::derive_indexed(m.seed, stream::LOGS, r as u64), ..m.clone() })
            .collect();
        for session in run_members(&collection, &artifacts, &setup, &reseeded, &format!("-log{r:02}"))? {
            out.extend(session);
        }
    }
    Ok(out)
}

pub fn train_user_model_for(cfg: &ExperimentConfig, records: &[InteractionRecord]) -> Result<(UserModel, TrainingReport)> {
    let encoder = FeatureEncoder::new(&cfg.pool()?, cfg.episode.position_grid.len());
    let (mut model, report) = train_user_model(records, &encoder, &cfg.user_model)?;
    model.strength = cfg.nudge.strength;
    Ok((model, report))
}

/// Writes one `<session>.jsonl` file per session.
pub fn write_sessions(dir: &Path, sessions: &[Vec<InteractionRecord>]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(sessions.len());
    for s in sessions {
        let id = s.first().map_or("empty", |r| r.session_id.as_str());
        let path = dir.join(format!("{id}.jsonl"));
        write_jsonl(&path, s)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Re-runs a stored session with the same seeds; `nudger_seed` only matters
/// in random mode.
pub fn replay_session(cfg: &ExperimentConfig, artifacts: &Artifacts, records: &[InteractionRecord], nudger_seed: u64) -> Result<Vec<InteractionRecord>> {
    let setup = Arc::new(episode_setup(cfg, cfg.episode.rng_seed)?);
    let nudger = build_nudger(cfg, &setup.pool, artifacts, nudger_seed)?;
    crate::episode::replay(setup, policy_handle(cfg, artifacts), nudger, records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub policy: TrainingSummary,
    pub user_model: TrainingReport,
    pub training_records: usize,
    pub sessions: usize,
    pub report: ClusterReport,
}

/// Policy training, log collection, user-model training, a nudged cohort run
/// and the cluster analysis. Artifacts, logs and the report go under `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentOutcome> {
    let (table, policy_summary) = train_policy_for(cfg)?;
    let policy = Arc::new(table);
    let logs = collect_training_logs(cfg, policy.clone())?;
    let (model, um_report) = train_user_model_for(cfg, &logs)?;
    let artifacts = Artifacts { policy, user_model: Some(Arc::new(model)) };
    artifacts.save(&out.join("artifacts"))?;
    um_report.write_csv(std::fs::File::create(out.join("artifacts").join("user_model_training.csv"))?)?;
    write_jsonl(&out.join("training_logs.jsonl"), &logs)?;

    let sessions = simulate_cohort(cfg, &artifacts)?;
    write_sessions(&out.join("sessions"), &sessions)?;
    let report = analyze_sessions(&sessions, &cfg.analysis)?;
    write_report(&out.join("report"), &report)?;
    Ok(ExperimentOutcome {
        policy: policy_summary,
        user_model: um_report,
        training_records: logs.len(),
        sessions: sessions.len(),
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionMode {
    Archetype,
    Human,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionStatus {
    Active,
    Finished,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    /// Market seed; the configured episode seed when absent.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub mode: SessionMode,
    pub status: SessionStatus,
    pub day: usize,
    pub num_days: usize,
    pub assets: f64,
}

/// What the participant sees. Carries no policy output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayView {
    pub session_id: String,
    pub day: usize,
    pub num_days: usize,
    pub prices: Vec<f64>,
    pub forecast: ForecastDistribution,
    pub explanations: Vec<DisplayItem>,
    pub position: f64,
    pub cash: f64,
    pub shares: f64,
    pub assets: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderRequest {
    pub day: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub day: usize,
    pub assets: f64,
    pub status: SessionStatus,
    pub next_day: Option<usize>,
    pub summary: Option<SessionSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub final_assets: f64,
    pub profit: f64,
    pub correlation: Option<Correlation>,
    pub decisions: Vec<f64>,
    pub suggested: Vec<f64>,
    pub assets: Vec<f64>,
    pub buy_and_hold_final: f64,
    pub initial_cash: f64,
}

struct Session {
    mode: SessionMode,
    episode: Episode,
    nudger_seed: u64,
    market_seed: u64,
}

impl Session {
    fn status(&self) -> SessionStatus {
        if self.episode.is_finished() {
            SessionStatus::Finished
        } else {
            SessionStatus::Active
        }
    }

    fn info(&self) -> SessionInfo {
        SessionInfo {
            session_id: self.episode.session_id().to_string(),
            mode: self.mode,
            status: self.status(),
            day: self.episode.day(),
            num_days: self.episode.setup().config.num_days,
            assets: self.episode.total_assets(),
        }
    }

    fn summary(&self) -> Result<SessionSummary> {
        let records = self.episode.records();
        let decisions: Vec<f64> = records.iter().map(|r| r.decision).collect();
        let suggested: Vec<f64> = records.iter().map(|r| r.suggested).collect();
        let setup = self.episode.setup();
        let final_assets = self.episode.total_assets();
        Ok(SessionSummary {
            session_id: self.episode.session_id().to_string(),
            final_assets,
            profit: final_assets - setup.config.initial_cash,
            correlation: if decisions.len() >= 2 { Some(corrcoef(&decisions, &suggested)?) } else { None },
            decisions,
            suggested,
            assets: asset_trajectory(records),
            buy_and_hold_final: setup.buy_and_hold_final(),
            initial_cash: setup.config.initial_cash,
        })
    }
}

/// Live sessions; each one is mutated under its own lock.
pub struct SessionManager {
    cfg: ExperimentConfig,
    artifacts_dir: PathBuf,
    log_dir: Option<PathBuf>,
    artifacts: Mutex<Option<Artifacts>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
}

impl SessionManager {
    pub fn new(cfg: ExperimentConfig, log_dir: Option<PathBuf>) -> Result<Self> {
        cfg.check()?;
        if let Some(d) = &log_dir {
            std::fs::create_dir_all(d)?;
        }
        let artifacts_dir = artifacts_dir(&cfg);
        Ok(Self { cfg, artifacts_dir, log_dir, artifacts: Mutex::new(None), sessions: RwLock::new(HashMap::new()) })
    }

    /// Uses already-loaded artifacts instead of reading them from disk.
    pub fn with_artifacts(cfg: ExperimentConfig, artifacts: Artifacts, log_dir: Option<PathBuf>) -> Result<Self> {
        let m = Self::new(cfg, log_dir)?;
        *m.artifacts.lock().expect("artifact lock") = Some(artifacts);
        Ok(m)
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    fn artifacts(&self) -> Result<Artifacts> {
        let mut slot = self.artifacts.lock().expect("artifact lock");
        if slot.is_none() {
            *slot = Some(Artifacts::load(&self.cfg, &self.artifacts_dir)?);
        }
        Ok(slot.clone().expect("just loaded"))
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("session {id}")))
    }

    pub fn create_session(&self, req: &CreateSession) -> Result<SessionInfo> {
        let artifacts = self.artifacts()?;
        let market_seed = req.seed.unwrap_or(self.cfg.episode.rng_seed);
        let setup = Arc::new(episode_setup(&self.cfg, market_seed)?);
        let id = uuid::Uuid::new_v4().to_string();
        let nudger_seed = seed::derive(market_seed, stream::NUDGE) ^ uuid::Uuid::parse_str(&id).map_or(0, |u| u.as_u64_pair().0);
        let nudger = build_nudger(&self.cfg, &setup.pool, &artifacts, nudger_seed)?;
        let episode = Episode::new(setup, policy_handle(&self.cfg, &artifacts), nudger, id.clone(), Clock::Wall)?;
        let session = Session { mode: SessionMode::Human, episode, nudger_seed, market_seed };
        let info = session.info();
        self.sessions.write().expect("session map lock").insert(id, Arc::new(Mutex::new(session)));
        Ok(info)
    }

    pub fn info(&self, id: &str) -> Result<SessionInfo> {
        Ok(self.session(id)?.lock().expect("session lock").info())
    }

    pub fn day_view(&self, id: &str) -> Result<DayView> {
        let handle = self.session(id)?;
        let mut s = handle.lock().expect("session lock");
        let plan = s.episode.plan()?.clone();
        let state = s.episode.state();
        let setup = s.episode.setup();
        let opens = setup.series.opens();
        Ok(DayView {
            session_id: id.to_string(),
            day: plan.day,
            num_days: setup.config.num_days,
            prices: opens[plan.day.saturating_sub(PRICE_WINDOW - 1)..=plan.day].to_vec(),
            forecast: plan.forecast,
            explanations: plan.payload,
            position: state.stock_fraction(plan.open),
            cash: state.cash,
            shares: state.shares,
            assets: state.total_assets(plan.open),
        })
    }

    pub fn post_order(&self, id: &str, order: &OrderRequest) -> Result<StepResult> {
        let handle = self.session(id)?;
        let mut s = handle.lock().expect("session lock");
        if s.episode.is_finished() {
            return Err(Error::Conflict(format!("session {id} is finished")));
        }
        if order.day != s.episode.day() {
            return Err(Error::Conflict(format!("order for day {} but the session is on day {}", order.day, s.episode.day())));
        }
        if s.episode.setup().config.position_grid.index_of(order.fraction).is_none() {
            return Err(Error::Validation(vec![FieldError::new("fraction", format!("{} is not on the position grid", order.fraction))]));
        }
        let record = s.episode.submit(order.fraction)?.clone();
        if let Some(dir) = &self.log_dir {
            append_jsonl(&dir.join(format!("{id}.jsonl")), &record)?;
        }
        let finished = s.episode.is_finished();
        Ok(StepResult {
            day: record.day,
            assets: record.assets_after,
            status: s.status(),
            next_day: (!finished).then(|| s.episode.day()),
            summary: if finished { Some(s.summary()?) } else { None },
        })
    }

    pub fn summary(&self, id: &str) -> Result<SessionSummary> {
        let handle = self.session(id)?;
        let s = handle.lock().expect("session lock");
        if !s.episode.is_finished() {
            return Err(Error::State(format!("session {id} is still active")));
        }
        s.summary()
    }

    /// Full log of a finished session.
    pub fn replay(&self, id: &str) -> Result<Vec<InteractionRecord>> {
        let handle = self.session(id)?;
        let s = handle.lock().expect("session lock");
        if !s.episode.is_finished() {
            return Err(Error::State(format!("session {id} is still active")));
        }
        Ok(s.episode.records().to_vec())
    }

    /// Regenerates a session's log from its seeds and recorded orders.
    pub fn rerun(&self, id: &str) -> Result<Vec<InteractionRecord>> {
        let handle = self.session(id)?;
        let s = handle.lock().expect("session lock");
        let cfg = ExperimentConfig { episode: EpisodeConfig { rng_seed: s.market_seed, ..self.cfg.episode.clone() }, ..self.cfg.clone() };
        replay_session(&cfg, &self.artifacts()?, s.episode.records(), s.nudger_seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::QLearningParams;

    fn small() -> (ExperimentConfig, Artifacts) {
        let cfg = ExperimentConfig { nudge: crate::config::NudgeConfig { mode: NudgeMode::None, ..Default::default() }, ..Default::default() };
        let spec = sim_spec(&cfg).unwrap();
        let (q, _) = train_policy(&spec, &QLearningParams { episodes: 50, ..Default::default() }).unwrap();
        (cfg, Artifacts { policy: Arc::new(q), user_model: None })
    }

    #[test]
    fn missing_artifacts_are_named() {
        let dir = tempfile::tempdir().unwrap();
        let err = Artifacts::load(&ExperimentConfig::default(), dir.path()).err().unwrap();
        let Error::MissingArtifacts(names) = err else { panic!("{err}") };
        assert_eq!(names.len(), 2);
        assert!(names[0].ends_with(POLICY_FILE) && names[1].ends_with(USER_MODEL_FILE));
    }

    #[test]
    fn session_lifecycle() {
        let (cfg, artifacts) = small();
        let logs = tempfile::tempdir().unwrap();
        let m = SessionManager::with_artifacts(cfg, artifacts, Some(logs.path().to_path_buf())).unwrap();
        let a = m.create_session(&CreateSession::default()).unwrap();
        let b = m.create_session(&CreateSession::default()).unwrap();
        assert_ne!(a.session_id, b.session_id);
        assert_eq!((a.day, a.assets, a.status), (0, 1_000_000.0, SessionStatus::Active));

        let v1 = m.day_view(&a.session_id).unwrap();
        let v2 = m.day_view(&a.session_id).unwrap();
        assert_eq!(v1, v2);
        assert_eq!(v1.explanations.len(), 3);
        let body = serde_json::to_value(&v1).unwrap();
        let keys: Vec<&String> = body.as_object().unwrap().keys().collect();
        assert!(keys.iter().all(|k| !k.contains("suggest") && !k.contains("policy")), "{keys:?}");

        let bad = m.post_order(&a.session_id, &OrderRequest { day: 0, fraction: 0.55 });
        assert!(matches!(bad, Err(Error::Validation(_))));
        assert!(matches!(m.summary(&a.session_id), Err(Error::State(_))));
        for day in 0..45 {
            let r = m.post_order(&a.session_id, &OrderRequest { day, fraction: (day % 11) as f64 / 10.0 }).unwrap();
            assert_eq!(r.status == SessionStatus::Finished, day == 44);
        }
        let again = m.post_order(&a.session_id, &OrderRequest { day: 44, fraction: 0.0 });
        assert!(matches!(again, Err(Error::Conflict(_))));
        assert!(matches!(m.day_view(&a.session_id), Err(Error::State(_))));

        let log = m.replay(&a.session_id).unwrap();
        assert_eq!(log.len(), 45);
        let stored = crate::record::read_jsonl(&logs.path().join(format!("{}.jsonl", a.session_id))).unwrap();
        assert_eq!(stored, log);
        let rerun = m.rerun(&a.session_id).unwrap();
        assert_eq!(asset_trajectory(&rerun), asset_trajectory(&log));
        let summary = m.summary(&a.session_id).unwrap();
        assert_eq!(summary.final_assets, log[44].assets_after);
    }

    #[test]
    fn double_post_conflicts() {
        let (cfg, artifacts) = small();
        let m = SessionManager::with_artifacts(cfg, artifacts, None).unwrap();
        let s = m.create_session(&CreateSession::default()).unwrap();
        m.post_order(&s.session_id, &OrderRequest { day: 0, fraction: 0.5 }).unwrap();
        let again = m.post_order(&s.session_id, &OrderRequest { day: 0, fraction: 0.5 });
        assert!(matches!(again, Err(Error::Conflict(_))));
        assert!(matches!(m.day_view("nope"), Err(Error::NotFound(_))));
    }
}
