use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability vector over the position grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DecisionDistribution(Vec<f64>);

/// Tolerance on the total mass of a distribution.
pub const MASS_TOLERANCE: f64 = 1e-9;

impl DecisionDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Contract("empty distribution".into()));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Contract(format!("negative or non-finite probability in {probs:?}")));
        }
        let mass: f64 = probs.iter().sum();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Contract(format!("distribution mass {mass} differs from 1")));
        }
        Ok(Self(probs))
    }

    /// Wraps a vector already known to be normalized.
    pub(crate) fn from_normalized(probs: Vec<f64>) -> Self {
        Self(probs)
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn one_hot(n: usize, index: usize) -> Self {
        let mut p = vec![0.0; n];
        p[index] = 1.0;
        Self(p)
    }

    /// Normalized softmax of `logits`, stabilized by the max logit.
    pub fn softmax(logits: &[f64]) -> Self {
        Self(softmax(logits))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest probability, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(DecisionDistribution::new(vec![0.5, 0.5]).is_ok());
        assert!(DecisionDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(DecisionDistribution::new(vec![-0.1, 1.1]).is_err());
        assert!(DecisionDistribution::new(vec![]).is_err());
    }

    #[test]
    fn argmax_tie_break_is_lowest_index() {
        assert_eq!(DecisionDistribution::uniform(11).argmax(), 0);
        assert_eq!(argmax(&[0.1, 0.4, 0.4, 0.1]), 1);
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let d = DecisionDistribution::softmax(&[0.0; 11]);
        assert!(d.probs().iter().all(|p| (p - 1.0 / 11.0).abs() < 1e-15));
    }
}
