//! Seeded fixtures for the kernel benchmarks.

use nudge_core::explain::{enumerate_configs, BiasingMode, ExplanationConfig};
use nudge_core::user_model::{ContextFeatures, FeatureEncoder, UserModel, UserModelParams};
use nudge_core::{seed, DecisionDistribution, ExplanationPool, ForecastDistribution};
use rand::Rng;

pub const GRID: usize = 11;

pub struct NudgeFixture {
    pub model: UserModel,
    pub policy: DecisionDistribution,
    pub context: ContextFeatures,
    pub configs: Vec<ExplanationConfig>,
}

pub fn nudge_fixture(mode: BiasingMode, hidden: usize) -> NudgeFixture {
    let pool = ExplanationPool::default();
    let encoder = FeatureEncoder::new(&pool, GRID);
    let params = UserModelParams::random(encoder.dim(), hidden, GRID, 5);
    let mut rng = seed::rng(5);
    let z: Vec<f64> = (0..GRID).map(|_| rng.random_range(-1.0..1.0f64).exp()).collect();
    let total: f64 = z.iter().sum();
    NudgeFixture {
        model: UserModel::new(params, encoder).expect("fixture model"),
        policy: DecisionDistribution::new(z.iter().map(|v| v / total).collect()).expect("fixture policy"),
        context: ContextFeatures {
            forecast: ForecastDistribution { p_bullish: 0.5, p_neutral: 0.3, p_bearish: 0.2 },
            position_index: 4,
            last_decision_index: 6,
            day_fraction: 0.4,
            trailing_return_5d: 0.01,
            assets_ratio: 1.02,
        },
        configs: enumerate_configs(&pool, mode).expect("fixture configs"),
    }
}

/// `k` Gaussian-ish blobs of `per` points in `dim` dimensions.
pub fn blobs(k: usize, per: usize, dim: usize, seed_value: u64) -> Vec<Vec<f64>> {
    let mut rng = seed::rng(seed_value);
    let centres: Vec<Vec<f64>> = (0..k).map(|_| (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
    let mut out = Vec::with_capacity(k * per);
    for c in &centres {
        for _ in 0..per {
            out.push(c.iter().map(|m| m + rng.random_range(-1.0..1.0) + rng.random_range(-1.0..1.0)).collect());
        }
    }
    out
}
