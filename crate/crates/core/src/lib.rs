//! Explanation-biasing decision support for a simulated trading task.
//!
//! A Q-learned policy suggests a position each day, a learned user model
//! predicts how a participant responds to a given set of displayed (and
//! emphasized) explanations, and the nudge engine picks the configuration
//! whose predicted response lies closest to the suggestion. Synthetic
//! archetype users and a trajectory-clustering pipeline close the loop.

pub mod analysis;
pub mod archetype;
pub mod config;
pub mod distribution;
pub mod episode;
pub mod error;
pub mod explain;
pub mod forecast;
pub mod market;
pub mod nudge;
pub mod policy;
pub mod record;
pub mod seed;
pub mod service;
pub mod user_model;

pub use archetype::{ArchetypeKind, ArchetypeParams, CohortSpec};
pub use config::{ExperimentConfig, NudgeMode};
pub use distribution::DecisionDistribution;
pub use episode::{Episode, EpisodeSetup, Nudger, PolicyHandle};
pub use error::{Error, FieldError, Result};
pub use explain::{BiasingMode, ExplanationConfig, ExplanationPool};
pub use forecast::{ForecastClass, ForecastDistribution};
pub use market::{EpisodeConfig, PortfolioState, PositionGrid, PositionTarget, PriceSeries};
pub use nudge::{expected_distance, select_config, NudgeDecision, NudgeEngine};
pub use policy::QTable;
pub use record::InteractionRecord;
pub use user_model::{ContextFeatures, UserModel};
