//! Three-class next-return forecasts with a tunable reliability knob.

use std::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::PriceSeries;
use crate::seed::Rng;

/// Forecast class of a forward return. Declaration order is the display
/// order used everywhere (bullish, neutral, bearish).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForecastClass {
    Bullish,
    Neutral,
    Bearish,
}

impl ForecastClass {
    pub const ALL: [ForecastClass; 3] = [ForecastClass::Bullish, ForecastClass::Neutral, ForecastClass::Bearish];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ForecastClass::Bullish => "bullish",
            ForecastClass::Neutral => "neutral",
            ForecastClass::Bearish => "bearish",
        }
    }
}

impl fmt::Display for ForecastClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ForecastClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bullish" => Ok(ForecastClass::Bullish),
            "neutral" => Ok(ForecastClass::Neutral),
            "bearish" => Ok(ForecastClass::Bearish),
            other => Err(Error::parameter("label", format!("unknown forecast class `{other}`"))),
        }
    }
}

/// Probabilities over (bullish, neutral, bearish).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastDistribution {
    pub p_bullish: f64,
    pub p_neutral: f64,
    pub p_bearish: f64,
}

impl ForecastDistribution {
    pub fn new(p_bullish: f64, p_neutral: f64, p_bearish: f64) -> Result<Self> {
        let d = Self { p_bullish, p_neutral, p_bearish };
        let probs = d.as_array();
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::parameter("forecast", format!("not a probability distribution: {probs:?}")));
        }
        Ok(d)
    }

    pub fn uniform() -> Self {
        Self { p_bullish: 1.0 / 3.0, p_neutral: 1.0 / 3.0, p_bearish: 1.0 / 3.0 }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.p_bullish, self.p_neutral, self.p_bearish]
    }

    pub fn prob(&self, class: ForecastClass) -> f64 {
        self.as_array()[class.index()]
    }

    /// Most probable class, lowest index (bullish first) on ties.
    pub fn argmax(&self) -> ForecastClass {
        let p = self.as_array();
        let mut best = 0;
        for i in 1..3 {
            if p[i] > p[best] {
                best = i;
            }
        }
        ForecastClass::ALL[best]
    }

    /// Mixture `accuracy * onehot(class) + (1 - accuracy) * uniform`.
    pub fn mixture(class: ForecastClass, accuracy: f64) -> Self {
        let noise = (1.0 - accuracy) / 3.0;
        let mut p = [noise; 3];
        p[class.index()] += accuracy;
        Self { p_bullish: p[0], p_neutral: p[1], p_bearish: p[2] }
    }
}

/// Return thresholds separating the three classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub up: f64,
    pub down: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { up: 0.02, down: -0.02 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForecastParams {
    pub accuracy: f64,
    pub horizon: usize,
    pub thresholds: Thresholds,
}

impl Default for ForecastParams {
    fn default() -> Self {
        Self { accuracy: 0.7, horizon: 1, thresholds: Thresholds::default() }
    }
}

impl ForecastParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.accuracy) {
            return Err(Error::parameter("forecast.accuracy", "must lie in [0, 1]"));
        }
        if self.horizon == 0 {
            return Err(Error::parameter("forecast.horizon", "must be at least 1"));
        }
        if self.thresholds.down.partial_cmp(&self.thresholds.up) != Some(std::cmp::Ordering::Less) {
            return Err(Error::parameter("forecast.thresholds", "down must be below up"));
        }
        Ok(())
    }
}

// Relative slack so that returns computed as exactly +-2% in decimal
// (e.g. 1000 -> 1020) are not pushed across the boundary by rounding.
const BOUNDARY_SLACK: f64 = 1e-12;

/// Classifies a realized return; returns exactly on a threshold are neutral.
pub fn classify_return(ret: f64, thresholds: Thresholds) -> ForecastClass {
    if ret > thresholds.up + BOUNDARY_SLACK {
        ForecastClass::Bullish
    } else if ret < thresholds.down - BOUNDARY_SLACK {
        ForecastClass::Bearish
    } else {
        ForecastClass::Neutral
    }
}

pub fn true_class(series: &PriceSeries, day: usize, horizon: usize, thresholds: Thresholds) -> Result<ForecastClass> {
    let ret = series.forward_return(day, horizon)?;
    Ok(classify_return(ret, thresholds))
}

/// Noisy-oracle forecast.
///
/// With probability `accuracy` the forecaster's belief is the realized class,
/// otherwise it is drawn uniformly from the three classes; the reported
/// distribution mixes a one-hot on that belief with uniform noise. The
/// argmax therefore agrees with the truth with probability
/// `accuracy + (1 - accuracy) / 3`, and at accuracy 1 (resp. 0) the output
/// is the true one-hot (resp. uniform). Two uniforms are consumed per call.
pub fn forecast(series: &PriceSeries, day: usize, params: &ForecastParams, rng: &mut Rng) -> Result<ForecastDistribution> {
    let truth = true_class(series, day, params.horizon, params.thresholds)?;
    let u: f64 = rng.random();
    let pick: usize = rng.random_range(0..3);
    let belief = if u < params.accuracy { truth } else { ForecastClass::ALL[pick] };
    Ok(ForecastDistribution::mixture(belief, params.accuracy))
}

/// Forecasts for days `0..num_days` drawn from one stream.
pub fn forecast_episode(
    series: &PriceSeries,
    num_days: usize,
    params: &ForecastParams,
    rng: &mut Rng,
) -> Result<Vec<ForecastDistribution>> {
    (0..num_days).map(|day| forecast(series, day, params, rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn series(opens: &[f64]) -> PriceSeries {
        PriceSeries::new(opens.to_vec()).unwrap()
    }

    #[test]
    fn true_class_examples() {
        let t = Thresholds::default();
        assert_eq!(true_class(&series(&[1000.0, 1030.0]), 0, 1, t).unwrap(), ForecastClass::Bullish);
        assert_eq!(true_class(&series(&[1000.0, 1000.0]), 0, 1, t).unwrap(), ForecastClass::Neutral);
        assert_eq!(true_class(&series(&[1000.0, 979.0]), 0, 1, t).unwrap(), ForecastClass::Bearish);
    }

    #[test]
    fn boundaries_are_neutral() {
        let t = Thresholds::default();
        assert_eq!(true_class(&series(&[1000.0, 1020.0]), 0, 1, t).unwrap(), ForecastClass::Neutral);
        assert_eq!(true_class(&series(&[1000.0, 980.0]), 0, 1, t).unwrap(), ForecastClass::Neutral);
        assert_eq!(true_class(&series(&[50.0, 51.0]), 0, 1, t).unwrap(), ForecastClass::Neutral);
    }

    #[test]
    fn out_of_range_day() {
        let e = true_class(&series(&[1000.0, 1010.0]), 1, 1, Thresholds::default());
        assert!(matches!(e, Err(Error::Index(_))));
    }

    #[test]
    fn mixture_examples() {
        let d = ForecastDistribution::mixture(ForecastClass::Bullish, 1.0);
        assert_eq!(d.as_array(), [1.0, 0.0, 0.0]);
        let d = ForecastDistribution::mixture(ForecastClass::Bearish, 0.0);
        for p in d.as_array() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let d = ForecastDistribution::mixture(ForecastClass::Neutral, 0.7);
        let want = [0.1, 0.8, 0.1];
        for (p, w) in d.as_array().iter().zip(want) {
            assert!((p - w).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_and_uninformative_forecasts() {
        let s = series(&[1000.0, 1030.0]);
        let mut rng = seed::rng(1);
        for _ in 0..20 {
            let p = ForecastParams { accuracy: 1.0, ..Default::default() };
            assert_eq!(forecast(&s, 0, &p, &mut rng).unwrap().as_array(), [1.0, 0.0, 0.0]);
            let p = ForecastParams { accuracy: 0.0, ..Default::default() };
            let d = forecast(&s, 0, &p, &mut rng).unwrap();
            assert!(d.as_array().iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        }
    }

    #[test]
    fn top1_agreement_matches_closed_form() {
        let s = series(&[1000.0, 1000.0]);
        let alpha = 0.4;
        let p = ForecastParams { accuracy: alpha, ..Default::default() };
        let mut rng = seed::rng(99);
        let n = 60_000;
        let hits = (0..n)
            .filter(|_| forecast(&s, 0, &p, &mut rng).unwrap().argmax() == ForecastClass::Neutral)
            .count();
        let rate = hits as f64 / n as f64;
        let expected = alpha + (1.0 - alpha) / 3.0;
        let se = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((rate - expected).abs() < 4.0 * se, "rate {rate} expected {expected}");
    }

    proptest::proptest! {
        #[test]
        fn outputs_are_distributions(acc in 0.0f64..=1.0, c in 0usize..3) {
            let d = ForecastDistribution::mixture(ForecastClass::ALL[c], acc);
            proptest::prop_assert!(ForecastDistribution::new(d.p_bullish, d.p_neutral, d.p_bearish).is_ok());
        }

        #[test]
        fn true_class_mass_monotone_in_accuracy(a in 0.0f64..=1.0, b in 0.0f64..=1.0, c in 0usize..3) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let class = ForecastClass::ALL[c];
            let plo = ForecastDistribution::mixture(class, lo).prob(class);
            let phi = ForecastDistribution::mixture(class, hi).prob(class);
            proptest::prop_assert!(phi >= plo - 1e-15);
        }
    }
}
