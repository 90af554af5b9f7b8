//! Configuration selection: pick the explanation configuration whose
//! predicted decision distribution is closest (L1) to the policy's.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::distribution::DecisionDistribution;
use crate::error::{Error, Result};
use crate::explain::{enumerate_configs, BiasingMode, ExplanationConfig, ExplanationPool};
use crate::user_model::{ContextFeatures, UserModel};

/// `sum_d |user(d) - policy(d)|`, in `[0, 2]`.
pub fn expected_distance(user: &DecisionDistribution, policy: &DecisionDistribution) -> Result<f64> {
    if user.len() != policy.len() {
        return Err(Error::Contract(format!("grid mismatch: {} vs {} bins", user.len(), policy.len())));
    }
    Ok(user.probs().iter().zip(policy.probs()).map(|(u, p)| (u - p).abs()).sum())
}

/// Anything that predicts the user's decision distribution.
pub trait DecisionModel {
    fn predict(&self, c: &ContextFeatures, x: &ExplanationConfig) -> Result<DecisionDistribution>;
}

impl DecisionModel for UserModel {
    fn predict(&self, c: &ContextFeatures, x: &ExplanationConfig) -> Result<DecisionDistribution> {
        UserModel::predict(self, c, x)
    }
}

impl<M: DecisionModel + ?Sized> DecisionModel for &M {
    fn predict(&self, c: &ContextFeatures, x: &ExplanationConfig) -> Result<DecisionDistribution> {
        (**self).predict(c, x)
    }
}

impl<M: DecisionModel + ?Sized> DecisionModel for std::sync::Arc<M> {
    fn predict(&self, c: &ContextFeatures, x: &ExplanationConfig) -> Result<DecisionDistribution> {
        (**self).predict(c, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchParams {
    /// Above this many candidates the search switches to beam search.
    pub exhaustive_limit: usize,
    pub beam_width: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self { exhaustive_limit: 4096, beam_width: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredConfig {
    pub config: ExplanationConfig,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NudgeDecision {
    pub chosen: ExplanationConfig,
    pub distance: f64,
    /// Every evaluated candidate, in evaluation order.
    pub scored: Vec<ScoredConfig>,
    pub exhaustive: bool,
}

/// Selects the first configuration (in the given canonical order) that
/// minimizes the distance between the predicted user distribution and
/// `policy`.
pub fn select_config<M: DecisionModel + ?Sized>(
    model: &M,
    policy: &DecisionDistribution,
    c: &ContextFeatures,
    configs: &[ExplanationConfig],
    search: &SearchParams,
) -> Result<NudgeDecision> {
    if configs.is_empty() {
        return Err(Error::Contract("no candidate configurations".into()));
    }
    if configs.len() <= search.exhaustive_limit {
        let mut scored = Vec::with_capacity(configs.len());
        let mut best = 0;
        for (i, x) in configs.iter().enumerate() {
            let d = expected_distance(&model.predict(c, x)?, policy)?;
            if d < scored.get(best).map_or(f64::INFINITY, |s: &ScoredConfig| s.distance) {
                best = i;
            }
            scored.push(ScoredConfig { config: x.clone(), distance: d });
        }
        let distance = scored[best].distance;
        return Ok(NudgeDecision { chosen: configs[best].clone(), distance, scored, exhaustive: true });
    }
    beam_search(model, policy, c, configs, search)
}

/// Configurations one flag flip away, respecting `emphasized => shown`.
fn neighbours(x: &ExplanationConfig) -> Vec<ExplanationConfig> {
    let mut out = Vec::with_capacity(2 * x.entries.len());
    for i in 0..x.entries.len() {
        let mut a = x.clone();
        a.entries[i].shown = !a.entries[i].shown;
        if !a.entries[i].shown {
            a.entries[i].emphasized = false;
        }
        out.push(a);
        let mut b = x.clone();
        b.entries[i].emphasized = !b.entries[i].emphasized;
        if b.entries[i].emphasized {
            b.entries[i].shown = true;
        }
        out.push(b);
    }
    out
}

fn beam_search<M: DecisionModel + ?Sized>(
    model: &M,
    policy: &DecisionDistribution,
    c: &ContextFeatures,
    configs: &[ExplanationConfig],
    search: &SearchParams,
) -> Result<NudgeDecision> {
    let rank: HashMap<&ExplanationConfig, usize> = configs.iter().enumerate().map(|(i, x)| (x, i)).collect();
    let width = search.beam_width.max(1);
    let mut scored: Vec<ScoredConfig> = Vec::new();
    let mut seen: HashSet<usize> = HashSet::new();
    let score = |i: usize, scored: &mut Vec<ScoredConfig>| -> Result<(usize, f64)> {
        let d = expected_distance(&model.predict(c, &configs[i])?, policy)?;
        scored.push(ScoredConfig { config: configs[i].clone(), distance: d });
        Ok((i, d))
    };

    let by_distance = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    seen.insert(0);
    let mut beam = vec![score(0, &mut scored)?];
    let mut best = beam[0];
    loop {
        let mut fresh = Vec::new();
        for &(i, _) in &beam {
            for n in neighbours(&configs[i]) {
                if let Some(&j) = rank.get(&n) {
                    if seen.insert(j) {
                        fresh.push(score(j, &mut scored)?);
                    }
                }
            }
        }
        if fresh.is_empty() {
            break;
        }
        let mut pool: Vec<(usize, f64)> = beam.iter().copied().chain(fresh).collect();
        pool.sort_by(by_distance);
        pool.truncate(width);
        let improved = by_distance(&pool[0], &best).is_lt();
        if improved {
            best = pool[0];
        }
        if !improved && pool == beam {
            break;
        }
        beam = pool;
    }
    Ok(NudgeDecision { chosen: configs[best.0].clone(), distance: best.1, scored, exhaustive: false })
}

/// Per-day nudge selection with a fixed candidate set.
pub struct NudgeEngine<M> {
    pub model: M,
    pub configs: Vec<ExplanationConfig>,
    pub search: SearchParams,
}

impl<M: DecisionModel> NudgeEngine<M> {
    pub fn new(model: M, pool: &ExplanationPool, mode: BiasingMode, search: SearchParams) -> Result<Self> {
        Ok(Self { model, configs: enumerate_configs(pool, mode)?, search })
    }

    pub fn nudge_step(&self, c: &ContextFeatures, policy: &DecisionDistribution) -> Result<NudgeDecision> {
        select_config(&self.model, policy, c, &self.configs, &self.search)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::ConfigEntry;
    use crate::forecast::{ForecastClass, ForecastDistribution};

    fn ctx() -> ContextFeatures {
        ContextFeatures {
            forecast: ForecastDistribution::mixture(ForecastClass::Neutral, 0.5),
            position_index: 0,
            last_decision_index: 0,
            day_fraction: 0.0,
            trailing_return_5d: 0.0,
            assets_ratio: 1.0,
        }
    }

    struct Constant(DecisionDistribution);
    impl DecisionModel for Constant {
        fn predict(&self, _: &ContextFeatures, _: &ExplanationConfig) -> Result<DecisionDistribution> {
            Ok(self.0.clone())
        }
    }

    /// Matches `target` exactly under `special`, uniform otherwise.
    struct MatchOn {
        special: ExplanationConfig,
        target: DecisionDistribution,
    }
    impl DecisionModel for MatchOn {
        fn predict(&self, _: &ContextFeatures, x: &ExplanationConfig) -> Result<DecisionDistribution> {
            Ok(if *x == self.special { self.target.clone() } else { DecisionDistribution::uniform(self.target.len()) })
        }
    }

    /// Distance decreases with the number of emphasized entries.
    struct CountEmph;
    impl DecisionModel for CountEmph {
        fn predict(&self, _: &ContextFeatures, x: &ExplanationConfig) -> Result<DecisionDistribution> {
            let k = x.entries.iter().filter(|e| e.emphasized).count() as f64;
            let p = (0.1 + 0.05 * k).min(1.0);
            DecisionDistribution::new(vec![p, 1.0 - p])
        }
    }

    fn d(v: &[f64]) -> DecisionDistribution {
        DecisionDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn distance_examples() {
        let a = d(&[0.2, 0.3, 0.5]);
        assert_eq!(expected_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(expected_distance(&d(&[1.0, 0.0]), &d(&[0.0, 1.0])).unwrap(), 2.0);
        let x = expected_distance(&d(&[0.5, 0.5, 0.0]), &d(&[0.25, 0.25, 0.5])).unwrap();
        assert!((x - 1.0).abs() < 1e-15);
        assert!(matches!(expected_distance(&d(&[1.0]), &d(&[0.5, 0.5])), Err(Error::Contract(_))));
    }

    #[test]
    fn constant_model_picks_first() {
        let pool = ExplanationPool::default();
        let configs = enumerate_configs(&pool, BiasingMode::DynEmph).unwrap();
        let m = Constant(DecisionDistribution::uniform(11));
        let pi = DecisionDistribution::one_hot(11, 10);
        let out = select_config(&m, &pi, &ctx(), &configs, &SearchParams::default()).unwrap();
        assert_eq!(out.chosen, configs[0]);
        assert_eq!(out.scored.len(), 8);
        assert!(out.scored.iter().all(|s| s.distance == out.distance));
    }

    #[test]
    fn perfect_guidance_config_is_chosen() {
        let pool = ExplanationPool::default();
        let configs = enumerate_configs(&pool, BiasingMode::DynEmph).unwrap();
        let pi = d(&[0.0, 0.0, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.2, 0.0, 0.7]);
        for special in &configs {
            let m = MatchOn { special: special.clone(), target: pi.clone() };
            let out = select_config(&m, &pi, &ctx(), &configs, &SearchParams::default()).unwrap();
            assert_eq!(&out.chosen, special);
            assert_eq!(out.distance, 0.0);
        }
    }

    #[test]
    fn empty_candidates() {
        let m = Constant(DecisionDistribution::uniform(2));
        let e = select_config(&m, &DecisionDistribution::uniform(2), &ctx(), &[], &SearchParams::default());
        assert!(matches!(e, Err(Error::Contract(_))));
    }

    #[test]
    fn engine_audit_lists_every_candidate() {
        let pool = ExplanationPool::default();
        let m = Constant(DecisionDistribution::uniform(11));
        let engine = NudgeEngine::new(m, &pool, BiasingMode::DynEmph, SearchParams::default()).unwrap();
        let out = engine.nudge_step(&ctx(), &DecisionDistribution::uniform(11)).unwrap();
        assert_eq!(out.scored.len(), 8);
        let zero = NudgeEngine::new(
            Constant(DecisionDistribution::uniform(11)),
            &pool,
            BiasingMode::XSelector { budget: 0 },
            SearchParams::default(),
        )
        .unwrap();
        let out = zero.nudge_step(&ctx(), &DecisionDistribution::uniform(11)).unwrap();
        assert_eq!(out.chosen, ExplanationConfig::hidden(&pool));
        assert_eq!(out.scored.len(), 1);
    }

    #[test]
    fn beam_search_improves_on_default() {
        // Emphasis-only space over six entries: 64 configs; force beam mode.
        let configs: Vec<ExplanationConfig> = (0u32..64)
            .map(|mask| {
                ExplanationConfig::canonical(
                    (0..6).map(|i| ConfigEntry { id: format!("e{i}"), shown: true, emphasized: mask >> i & 1 == 1 }).collect(),
                )
            })
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let pi = d(&[1.0, 0.0]);
        let search = SearchParams { exhaustive_limit: 8, beam_width: 4 };
        let beam = select_config(&CountEmph, &pi, &ctx(), &configs, &search).unwrap();
        let exact = select_config(&CountEmph, &pi, &ctx(), &configs, &SearchParams::default()).unwrap();
        assert!(!beam.exhaustive);
        assert!(beam.distance <= beam.scored[0].distance);
        assert!((beam.distance - exact.distance).abs() < 1e-12);
        assert!(beam.chosen.entries.iter().all(|e| e.emphasized));
    }

    proptest::proptest! {
        #[test]
        fn distance_bounds(a in proptest::collection::vec(0.0f64..1.0, 11), b in proptest::collection::vec(0.0f64..1.0, 11)) {
            let norm = |v: Vec<f64>| { let s: f64 = v.iter().sum::<f64>() + 1e-12; DecisionDistribution::softmax(&v.iter().map(|x| (x / s).ln()).collect::<Vec<_>>()) };
            let (a, b) = (norm(a), norm(b));
            let x = expected_distance(&a, &b).unwrap();
            proptest::prop_assert!((0.0..=2.0).contains(&x));
            proptest::prop_assert_eq!(expected_distance(&a, &a).unwrap(), 0.0);
            proptest::prop_assert_eq!(x, expected_distance(&b, &a).unwrap());
        }
    }
}
