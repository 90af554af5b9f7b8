//! Synthetic users for the four behavioural clusters.
//!
//! Each decision runs: base rule for the kind, Gaussian jitter in grid-index
//! units, pull toward the AI suggestion when the displayed emphasis backs
//! the forecast's top class, then rounding onto the grid. Every call consumes
//! exactly one uniform and one normal draw, so paired runs that differ only
//! in the explanation configuration share their noise.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::episode::{Agent, AgentView};
use crate::error::{Error, Result};
use crate::explain::DisplayItem;
use crate::forecast::{ForecastClass, ForecastDistribution};
use crate::market::PositionTarget;
use crate::seed::{self, stream, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ArchetypeKind {
    AIAligned,
    Delayed,
    Cautious,
    Contrarian,
}

impl ArchetypeKind {
    /// Cohort order: AI-aligned, Delayed, Cautious, Contrarian.
    pub const ALL: [ArchetypeKind; 4] =
        [ArchetypeKind::AIAligned, ArchetypeKind::Delayed, ArchetypeKind::Cautious, ArchetypeKind::Contrarian];

    pub fn name(self) -> &'static str {
        match self {
            ArchetypeKind::AIAligned => "AI-aligned",
            ArchetypeKind::Delayed => "Delayed",
            ArchetypeKind::Cautious => "Cautious",
            ArchetypeKind::Contrarian => "Contrarian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchetypeParams {
    pub kind: ArchetypeKind,
    /// Fraction of the gap to the suggestion closed under supportive emphasis.
    pub susceptibility: f64,
    /// Days of delay (Delayed).
    pub lag: usize,
    /// Standard deviation of the jitter, in grid steps.
    pub noise: f64,
    /// Maximum position (Cautious).
    pub cap: f64,
    /// Probability of trading on a given day (Cautious).
    pub trade_prob: f64,
    /// Per-day growth of reliance on the suggestion (Contrarian).
    pub reliance_drift: f64,
}

impl ArchetypeParams {
    /// Committed defaults, tuned so the cohort reproduces the cluster
    /// orderings on the default market.
    pub fn default_for(kind: ArchetypeKind) -> Self {
        let base = Self { kind, susceptibility: 0.0, lag: 0, noise: 0.0, cap: 1.0, trade_prob: 1.0, reliance_drift: 0.0 };
        match kind {
            ArchetypeKind::AIAligned => Self { susceptibility: 0.5, noise: 1.0, ..base },
            ArchetypeKind::Delayed => Self { susceptibility: 0.4, noise: 0.3, lag: 3, ..base },
            ArchetypeKind::Cautious => Self { susceptibility: 0.3, noise: 0.6, cap: 0.1, trade_prob: 0.3, ..base },
            ArchetypeKind::Contrarian => Self { susceptibility: 0.2, noise: 1.0, reliance_drift: 0.005, ..base },
        }
    }

    /// Noiseless, unsusceptible version of a kind.
    pub fn exact(kind: ArchetypeKind) -> Self {
        Self { susceptibility: 0.0, noise: 0.0, ..Self::default_for(kind) }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64, name: &str| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::parameter(name, "must lie in [0, 1]"))
            }
        };
        unit(self.susceptibility, "susceptibility")?;
        unit(self.cap, "cap")?;
        unit(self.trade_prob, "trade_prob")?;
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::parameter("noise", "must be non-negative"));
        }
        if !(self.reliance_drift.is_finite() && self.reliance_drift >= 0.0) {
            return Err(Error::parameter("reliance_drift", "must be non-negative"));
        }
        Ok(())
    }
}

/// How strongly the displayed explanations back the forecast's top class,
/// in `[0, 1]`.
///
/// With emphasis present it is the share of emphasized items that carry the
/// top label. Without emphasis, a proper subset of labels on display acts as
/// the highlight (X-Selector); showing everything or nothing exerts no pull.
pub fn focus_weight(payload: &[DisplayItem], forecast: &ForecastDistribution) -> f64 {
    let top = forecast.argmax();
    let share = |items: &mut dyn Iterator<Item = &DisplayItem>| {
        let (mut n, mut hit) = (0usize, 0usize);
        for it in items {
            n += 1;
            if it.label == top {
                hit += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            hit as f64 / n as f64
        }
    };
    if payload.iter().any(|i| i.emphasized) {
        return share(&mut payload.iter().filter(|i| i.emphasized));
    }
    let mut labels: Vec<ForecastClass> = payload.iter().map(|i| i.label).collect();
    labels.sort();
    labels.dedup();
    if labels.is_empty() || labels.len() == ForecastClass::ALL.len() {
        return 0.0;
    }
    share(&mut payload.iter())
}

/// Stateful synthetic user.
#[derive(Debug, Clone)]
pub struct ArchetypeAgent {
    pub params: ArchetypeParams,
    rng: Rng,
    suggestions: Vec<f64>,
}

impl ArchetypeAgent {
    pub fn new(params: ArchetypeParams, seed: u64) -> Self {
        Self { params, rng: seed::rng(seed), suggestions: Vec::new() }
    }

    /// Mixing weight on the suggestion for Contrarian users.
    pub fn reliance(&self, day: usize) -> f64 {
        (self.params.reliance_drift * day as f64).min(1.0)
    }
}

impl Agent for ArchetypeAgent {
    fn decide(&mut self, view: &AgentView<'_>) -> PositionTarget {
        let p = &self.params;
        let grid = view.grid;
        let steps = (grid.len() - 1) as f64;
        let suggestion = view.suggested.fraction();
        self.suggestions.push(suggestion);
        let u: f64 = self.rng.random();
        let z: f64 = StandardNormal.sample(&mut self.rng);

        let base = match p.kind {
            ArchetypeKind::AIAligned => suggestion,
            ArchetypeKind::Cautious => {
                if u >= p.trade_prob {
                    return grid.target(view.last_decision_index);
                }
                suggestion.min(p.cap)
            }
            ArchetypeKind::Delayed => {
                if view.day < p.lag {
                    return grid.target(view.last_decision_index);
                }
                self.suggestions[view.day - p.lag]
            }
            ArchetypeKind::Contrarian => {
                let w = self.reliance(view.day);
                w * suggestion + (1.0 - w) * (1.0 - suggestion)
            }
        };
        let jittered = base * steps + p.noise * z;
        let pull = p.susceptibility * focus_weight(view.payload, view.forecast);
        let pulled = jittered + pull * (suggestion * steps - jittered);
        let upper = match p.kind {
            ArchetypeKind::Cautious => (p.cap * steps).floor(),
            _ => steps,
        };
        let index = pulled.round().clamp(0.0, upper) as usize;
        grid.target(grid.nearest_index(index as f64 / steps))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortCounts {
    pub ai_aligned: usize,
    pub delayed: usize,
    pub cautious: usize,
    pub contrarian: usize,
}

impl Default for CohortCounts {
    fn default() -> Self {
        Self { ai_aligned: 16, delayed: 14, cautious: 10, contrarian: 11 }
    }
}

impl CohortCounts {
    pub fn get(&self, kind: ArchetypeKind) -> usize {
        match kind {
            ArchetypeKind::AIAligned => self.ai_aligned,
            ArchetypeKind::Delayed => self.delayed,
            ArchetypeKind::Cautious => self.cautious,
            ArchetypeKind::Contrarian => self.contrarian,
        }
    }

    pub fn total(&self) -> usize {
        ArchetypeKind::ALL.iter().map(|k| self.get(*k)).sum()
    }
}

/// Per-agent parameter spread around the kind defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CohortSpec {
    pub counts: CohortCounts,
    pub seed: u64,
    /// Relative half-width of the uniform jitter on continuous parameters.
    /// The lag is an integer and stays at the kind default.
    pub jitter: f64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self { counts: CohortCounts::default(), seed: 2024, jitter: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortMember {
    pub id: String,
    pub params: ArchetypeParams,
    pub seed: u64,
}

impl CohortMember {
    pub fn agent(&self) -> ArchetypeAgent {
        ArchetypeAgent::new(self.params, self.seed)
    }
}

pub fn generate_cohort(spec: &CohortSpec) -> Vec<CohortMember> {
    let mut rng = seed::stream_rng(spec.seed, stream::COHORT);
    let spread = Uniform::new_inclusive(-spec.jitter.abs(), spec.jitter.abs()).expect("finite jitter");
    let mut out = Vec::with_capacity(spec.counts.total());
    let mut n = 0u64;
    for kind in ArchetypeKind::ALL {
        for i in 0..spec.counts.get(kind) {
            let d = ArchetypeParams::default_for(kind);
            let mut scale = |v: f64| v * (1.0 + spread.sample(&mut rng));
            let params = ArchetypeParams {
                kind,
                susceptibility: scale(d.susceptibility).clamp(0.0, 1.0),
                noise: scale(d.noise).max(0.0),
                cap: scale(d.cap).clamp(0.0, 1.0),
                trade_prob: scale(d.trade_prob).clamp(0.0, 1.0),
                reliance_drift: scale(d.reliance_drift).max(0.0),
                lag: d.lag,
            };
            out.push(CohortMember {
                id: format!("{}-{:02}", kind.name().to_lowercase(), i),
                params,
                seed: seed::derive_indexed(spec.seed, stream::AGENT, n),
            });
            n += 1;
        }
    }
    out
}
