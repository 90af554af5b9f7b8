//! Experiment configuration file.
//!
//! Every section is optional and falls back to the defaults; unknown keys are
//! rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisParams;
use crate::archetype::CohortSpec;
use crate::error::{Error, FieldError, Result};
use crate::explain::{BiasingMode, ExplanationPool};
use crate::forecast::ForecastParams;
use crate::market::{EpisodeConfig, SeriesParams};
use crate::nudge::SearchParams;
use crate::policy::QLearningParams;
use crate::user_model::UserModelHyper;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NudgeMode {
    /// Every explanation shown, none emphasized.
    None,
    /// A uniformly random candidate each day.
    Random,
    DynEmph,
    XSelector,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConfig {
    pub episodes: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub seed: u64,
    /// Boltzmann temperature of the served distribution; 0 is greedy.
    pub temperature: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        let q = QLearningParams::default();
        Self {
            episodes: q.episodes,
            alpha: q.alpha,
            gamma: q.gamma,
            epsilon_start: q.epsilon_start,
            epsilon_end: q.epsilon_end,
            seed: q.seed,
            temperature: 0.0,
        }
    }
}

impl PolicyConfig {
    pub fn hyper(&self) -> QLearningParams {
        QLearningParams {
            episodes: self.episodes,
            alpha: self.alpha,
            gamma: self.gamma,
            epsilon_start: self.epsilon_start,
            epsilon_end: self.epsilon_end,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NudgeConfig {
    pub mode: NudgeMode,
    /// Maximum shown explanations in X-Selector mode.
    pub budget: usize,
    pub search: SearchParams,
    /// Multiplier on emphasis features when scoring candidates.
    pub strength: f64,
}

impl Default for NudgeConfig {
    fn default() -> Self {
        Self { mode: NudgeMode::DynEmph, budget: 2, search: SearchParams::default(), strength: 1.0 }
    }
}

impl NudgeConfig {
    pub fn biasing_mode(&self) -> Option<BiasingMode> {
        match self.mode {
            NudgeMode::DynEmph => Some(BiasingMode::DynEmph),
            NudgeMode::XSelector => Some(BiasingMode::XSelector { budget: self.budget }),
            NudgeMode::None | NudgeMode::Random => None,
        }
    }
}

/// How the user-model training logs are collected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogCollection {
    /// Random-configuration episodes per cohort member.
    pub episodes_per_agent: usize,
    pub seed: u64,
}

impl Default for LogCollection {
    fn default() -> Self {
        Self { episodes_per_agent: 4, seed: 99 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub episode: EpisodeConfig,
    pub market: SeriesParams,
    /// Optional CSV (`day,open`) used instead of the generated series.
    pub series_csv: Option<PathBuf>,
    pub forecast: ForecastParams,
    pub policy: PolicyConfig,
    pub user_model: UserModelHyper,
    pub training_logs: LogCollection,
    pub nudge: NudgeConfig,
    pub cohort: CohortSpec,
    pub analysis: AnalysisParams,
    /// JSON explanation pool; the built-in three-entry pool when absent.
    pub explanations: Option<PathBuf>,
    /// Directory holding `policy.json` and `user_model.json`.
    pub artifacts: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            episode: EpisodeConfig { rng_seed: 7, ..EpisodeConfig::default() },
            market: SeriesParams::default(),
            series_csv: None,
            forecast: ForecastParams::default(),
            policy: PolicyConfig::default(),
            user_model: UserModelHyper::default(),
            training_logs: LogCollection::default(),
            nudge: NudgeConfig::default(),
            cohort: CohortSpec::default(),
            analysis: AnalysisParams::default(),
            explanations: None,
            artifacts: None,
        }
    }
}

fn unit(errs: &mut Vec<FieldError>, field: &str, v: f64) {
    if !(0.0..=1.0).contains(&v) {
        errs.push(FieldError::new(field, "must lie in [0, 1]"));
    }
}

fn positive(errs: &mut Vec<FieldError>, field: &str, v: f64) {
    if !(v.is_finite() && v > 0.0) {
        errs.push(FieldError::new(field, "must be positive"));
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Reads a TOML file, or JSON when the extension is `.json`; paths inside
    /// it are taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = if path.extension().is_some_and(|e| e == "json") { Self::from_json(&text)? } else { Self::from_toml(&text)? };
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.explanations, &mut cfg.artifacts, &mut cfg.series_csv].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        let errs = self.validate();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }

    pub fn validate(&self) -> Vec<FieldError> {
        let mut errs = self.episode.validate();
        if let Err(Error::Parameter { field, message }) = self.market.validate() {
            errs.push(FieldError::new(format!("market.{field}"), message));
        }
        if let Err(Error::Parameter { field, message }) = self.forecast.validate() {
            errs.push(FieldError::new(field, message));
        }
        let p = &self.policy;
        unit(&mut errs, "policy.alpha", p.alpha);
        unit(&mut errs, "policy.gamma", p.gamma);
        unit(&mut errs, "policy.epsilon_start", p.epsilon_start);
        unit(&mut errs, "policy.epsilon_end", p.epsilon_end);
        if !(p.temperature.is_finite() && p.temperature >= 0.0) {
            errs.push(FieldError::new("policy.temperature", "must be non-negative"));
        }
        let u = &self.user_model;
        if u.hidden == 0 {
            errs.push(FieldError::new("user_model.hidden", "must be at least 1"));
        }
        positive(&mut errs, "user_model.learning_rate", u.learning_rate);
        if !(u.l2.is_finite() && u.l2 >= 0.0) {
            errs.push(FieldError::new("user_model.l2", "must be non-negative"));
        }
        if !(0.0..1.0).contains(&u.holdout_fraction) {
            errs.push(FieldError::new("user_model.holdout_fraction", "must lie in [0, 1)"));
        }
        if self.nudge.mode == NudgeMode::XSelector && self.nudge.budget == 0 {
            errs.push(FieldError::new("nudge.budget", "must be at least 1"));
        }
        if self.nudge.search.beam_width == 0 {
            errs.push(FieldError::new("nudge.search.beam_width", "must be at least 1"));
        }
        if !(self.nudge.strength.is_finite() && self.nudge.strength >= 0.0) {
            errs.push(FieldError::new("nudge.strength", "must be non-negative"));
        }
        if !(self.cohort.jitter.is_finite() && (0.0..1.0).contains(&self.cohort.jitter)) {
            errs.push(FieldError::new("cohort.jitter", "must lie in [0, 1)"));
        }
        if self.cohort.counts.total() == 0 {
            errs.push(FieldError::new("cohort.counts", "cohort is empty"));
        }
        if self.analysis.kmeans.k == 0 {
            errs.push(FieldError::new("analysis.kmeans.k", "must be at least 1"));
        }
        if self.analysis.n_components == 0 {
            errs.push(FieldError::new("analysis.n_components", "must be at least 1"));
        }
        errs
    }

    pub fn pool(&self) -> Result<ExplanationPool> {
        match &self.explanations {
            Some(p) => ExplanationPool::load(p),
            None => Ok(ExplanationPool::default()),
        }
    }
}
