mod common;

use std::sync::Arc;

use nalgebra::DMatrix;
use nudge_core::analysis::{kmeans, pca, KMeansParams};
use nudge_core::episode::{run_episode, Agent, AgentView};
use nudge_core::explain::enumerate_configs;
use nudge_core::forecast::ForecastParams;
use nudge_core::market::{PositionGrid, PriceSeries, SeriesParams};
use nudge_core::policy::{greedy_index, train_policy, PolicyStateKey, QLearningParams, SimSpec, TrainingMarket};
use nudge_core::seed;
use nudge_core::user_model::{cross_entropy, loss_and_gradient, train_user_model, Example, FeatureEncoder, UserModelHyper};
use nudge_core::*;
use rand::Rng;

fn two_day_q_star(opens: &[f64], gamma: f64, grid: &PositionGrid) -> (Vec<f64>, Vec<Vec<f64>>) {
    // Rewards are wealth changes over initial cash; day-1 wealth depends on
    // the day-0 fraction, which the policy state carries as its position.
    let r0 = opens[1] / opens[0] - 1.0;
    let r1 = opens[2] / opens[1] - 1.0;
    let g = grid.fractions();
    let day1: Vec<Vec<f64>> = g.iter().map(|&p| g.iter().map(|&a| (1.0 + p * r0) * a * r1).collect()).collect();
    let day0 = g
        .iter()
        .enumerate()
        .map(|(i, &a)| a * r0 + gamma * day1[i].iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    (day0, day1)
}

fn argmax(v: &[f64]) -> usize {
    let mut b = 0;
    for i in 1..v.len() {
        if v[i] > v[b] {
            b = i;
        }
    }
    b
}

#[test]
fn two_day_policy_matches_value_iteration() {
    for opens in [vec![1000.0, 1100.0, 1210.0], vec![1000.0, 1100.0, 990.0], vec![1000.0, 900.0, 990.0]] {
        let series = PriceSeries::new(opens.clone()).unwrap();
        let episode = EpisodeConfig { num_days: 2, ..Default::default() };
        let forecast = ForecastParams { accuracy: 1.0, ..Default::default() };
        let spec = SimSpec { episode: episode.clone(), market: TrainingMarket::Fixed(series.clone()), forecast };
        let hyper = QLearningParams { episodes: 3000, alpha: 0.2, ..Default::default() };
        let (q, _) = train_policy(&spec, &hyper).unwrap();

        let grid = &episode.position_grid;
        let (q0, q1) = two_day_q_star(&opens, hyper.gamma, grid);
        let f0 = ForecastDistribution::mixture(classify(opens[1] / opens[0] - 1.0), 1.0);
        let f1 = ForecastDistribution::mixture(classify(opens[2] / opens[1] - 1.0), 1.0);
        let a0 = greedy_index(&q, &PolicyStateKey::new(&f0, 0, 0, 2));
        assert_eq!(a0, argmax(&q0), "day 0 for {opens:?}");
        let a1 = greedy_index(&q, &PolicyStateKey::new(&f1, a0, 1, 2));
        assert_eq!(a1, argmax(&q1[a0]), "day 1 for {opens:?}");
        let learned = q.get(&PolicyStateKey::new(&f1, a0, 1, 2)).unwrap();
        assert!((learned[a1] - q1[a0][a1]).abs() < 1e-3, "{} vs {}", learned[a1], q1[a0][a1]);
    }
}

fn classify(r: f64) -> ForecastClass {
    if r > 0.02 {
        ForecastClass::Bullish
    } else if r < -0.02 {
        ForecastClass::Bearish
    } else {
        ForecastClass::Neutral
    }
}

#[test]
fn bullish_days_go_all_in() {
    let opens = [1000.0, 1100.0, 1210.0];
    let (q0, q1) = two_day_q_star(&opens, 0.3, &PositionGrid::default());
    assert_eq!(argmax(&q0), 10);
    assert!(q1.iter().all(|row| argmax(row) == 10));
}

#[test]
fn pca_matches_dense_eigensolver() {
    let mut rng = seed::rng(11);
    for trial in 0..50 {
        let rows: Vec<Vec<f64>> = (0..10).map(|_| (0..6).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
        let fit = pca(&rows, 4).unwrap();

        let m = DMatrix::from_fn(10, 6, |i, j| rows[i][j]);
        let mean = m.row_mean();
        let centered = DMatrix::from_fn(10, 6, |i, j| m[(i, j)] - mean[j]);
        let cov = centered.transpose() * &centered / 9.0;
        let mut eig: Vec<f64> = cov.symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));

        for k in 0..4 {
            assert!((fit.explained_variance[k] - eig[k]).abs() < 1e-8, "trial {trial} axis {k}: {} vs {}", fit.explained_variance[k], eig[k]);
            for l in 0..4 {
                let dot: f64 = fit.components[k].iter().zip(&fit.components[l]).map(|(a, b)| a * b).sum();
                let want = if k == l { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-8, "trial {trial}: <{k},{l}> = {dot}");
            }
            let top = fit.components[k].iter().cloned().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            assert!(top > 0.0);
        }
    }
}

#[test]
fn kmeans_inertia_is_monotone_and_seeded() {
    let mut rng = seed::rng(3);
    let pts: Vec<Vec<f64>> = (0..60).map(|i| vec![(i % 3) as f64 * 4.0 + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
    for s in 0..20 {
        let p = KMeansParams { k: 4, seed: s, ..Default::default() };
        let a = kmeans(&pts, &p).unwrap();
        assert!(a.inertia_history.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{:?}", a.inertia_history);
        assert_eq!(kmeans(&pts, &p).unwrap(), a);
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = seed::rng(21);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let params = common::random_params(&mut rng, 14, 6, 11);
        let batch: Vec<Example> = (0..8)
            .map(|_| Example { features: (0..14).map(|_| rng.random_range(-1.0..1.0)).collect(), label: rng.random_range(0..11) })
            .collect();
        let l2 = 1e-3;
        let (_, grad) = loss_and_gradient(&params, &batch, l2);
        for i in 0..params.theta().len() {
            let eps = 1e-5;
            let mut up = params.clone();
            up.theta_mut()[i] += eps;
            let mut down = params.clone();
            down.theta_mut()[i] -= eps;
            let numeric = (loss_and_gradient(&up, &batch, l2).0 - loss_and_gradient(&down, &batch, l2).0) / (2.0 * eps);
            let rel = (grad[i] - numeric).abs() / grad[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn predictions_are_distributions() {
    let mut rng = seed::rng(8);
    for _ in 0..1000 {
        let params = common::random_params(&mut rng, 14, 5, 11);
        let x: Vec<f64> = (0..14).map(|_| rng.random_range(-5.0..5.0)).collect();
        let p = params.predict_features(&x).unwrap();
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

struct Uniform(seed::Rng);

impl Agent for Uniform {
    fn decide(&mut self, view: &AgentView<'_>) -> market::PositionTarget {
        view.grid.target(self.0.random_range(0..view.grid.len()))
    }
}

#[test]
fn uniform_agent_is_unpredictable() {
    let pool = ExplanationPool::default();
    let policy = PolicyHandle { table: Arc::new(QTable::new(PositionGrid::default())), temperature: 0.0 };
    let configs = enumerate_configs(&pool, BiasingMode::DynEmph).unwrap();
    let mut records = Vec::new();
    for i in 0..160u64 {
        let cfg = EpisodeConfig { rng_seed: 500 + i, ..Default::default() };
        let setup = Arc::new(EpisodeSetup::generate(cfg, &SeriesParams::default(), &ForecastParams::default(), pool.clone()).unwrap());
        let nudger = Nudger::random(configs.clone(), i);
        records.extend(run_episode(setup, policy.clone(), nudger, &mut Uniform(seed::rng(900 + i)), &format!("u{i:03}")).unwrap());
    }
    let encoder = FeatureEncoder::new(&pool, 11);
    let (_, report) = train_user_model(&records, &encoder, &UserModelHyper::default()).unwrap();
    let val = report.final_val_loss().unwrap();
    let ln11 = 11f64.ln();
    assert!((val - ln11).abs() / ln11 < 0.02, "held-out loss {val} vs ln 11 = {ln11}");
}

#[test]
fn cross_entropy_of_zero_model_is_ln_grid() {
    let p = user_model::UserModelParams::zeros(14, 3, 11);
    let data = vec![Example { features: vec![0.5; 14], label: 4 }];
    assert!((cross_entropy(&p, &data) - 11f64.ln()).abs() < 1e-12);
}

#[test]
fn select_config_equals_brute_force() {
    let pool = ExplanationPool::default();
    let configs = enumerate_configs(&pool, BiasingMode::DynEmph).unwrap();
    assert_eq!(configs, common::dynemph_configs(&pool));
    let encoder = FeatureEncoder::new(&pool, 11);
    let mut rng = seed::rng(99);
    for _ in 0..1000 {
        let params = common::random_params(&mut rng, encoder.dim(), 8, 11);
        let model = UserModel::new(params.clone(), encoder.clone()).unwrap();
        let c = common::random_context(&mut rng, 11);
        let policy = common::random_policy(&mut rng, 11);
        let pd = DecisionDistribution::new(policy.clone()).unwrap();
        let got = select_config(&model, &pd, &c, &configs, &Default::default()).unwrap();
        let (i, d) = common::brute_force(&pool, &params, &policy, &c, &configs);
        assert_eq!(got.chosen, configs[i]);
        assert_eq!(got.distance, d);
    }
}
