//! Trajectory metrics: Pearson correlation (plain and sliding), absolute
//! error, adjusted Rand index and a paired one-sided t-test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Pearson correlation; `degenerate` marks a constant input, for which the
/// value is defined as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub value: f64,
    pub degenerate: bool,
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|v| *v == x[0])
}

pub fn corrcoef(a: &[f64], b: &[f64]) -> Result<Correlation> {
    if a.len() != b.len() {
        return Err(Error::Contract(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::Contract("correlation needs at least two points".into()));
    }
    if is_constant(a) || is_constant(b) {
        return Ok(Correlation { value: 0.0, degenerate: true });
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    Ok(Correlation { value: (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0), degenerate: false })
}

/// Correlation over every length-`window` slice; `T - window + 1` values.
pub fn moving_corrcoef(a: &[f64], b: &[f64], window: usize) -> Result<Vec<Correlation>> {
    if a.len() != b.len() {
        return Err(Error::Contract(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if window < 2 || window > a.len() {
        return Err(Error::Contract(format!("window {window} does not fit a series of length {}", a.len())));
    }
    (0..=a.len() - window).map(|s| corrcoef(&a[s..s + window], &b[s..s + window])).collect()
}

pub fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()).max(1) as f64;
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / n
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Contract("labelings differ in length".into()));
    }
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let c2 = |v: u64| (v * v.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().flatten().map(|&v| c2(v)).sum();
    let rows: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let total = c2(n as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = rows * cols / total;
    let max = 0.5 * (rows + cols);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub n: usize,
    pub mean_difference: f64,
    pub t: f64,
    /// One-sided p-value for `mean(x - y) > 0`.
    pub p_value: f64,
}

/// Paired one-sided t-test of `x > y`.
pub fn paired_t_test_greater(x: &[f64], y: &[f64]) -> Result<PairedTest> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Contract("paired test needs two equal-length samples of at least two".into()));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let n = d.len() as f64;
    let m = mean(&d);
    let sd = (d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if sd == 0.0 {
        let p = if m > 0.0 { 0.0 } else { 1.0 };
        return Ok(PairedTest { n: d.len(), mean_difference: m, t: f64::INFINITY * m.signum(), p_value: p });
    }
    let t = m / (sd / n.sqrt());
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).map_err(|e| Error::Numeric { message: e.to_string(), input: format!("n={n}") })?;
    Ok(PairedTest { n: d.len(), mean_difference: m, t, p_value: dist.sf(t) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corr_examples() {
        let a = [1.0, 2.0, 3.0, 5.0];
        assert!((corrcoef(&a, &a).unwrap().value - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        assert!((corrcoef(&a, &neg).unwrap().value + 1.0).abs() < 1e-12);
        // Hand computation: centered (-1,0,1) and (-7/3,-1/3,8/3);
        // r = 5 / sqrt(2 * 42/3) = 5 / sqrt(28) = 0.944911; with b=(2,4,7):
        // sum dx*dy = 5, sum dy^2 = 49/9+1/9+64/9 = 114/9 -> r = 5/sqrt(2*114/9) = 0.99340.
        let r = corrcoef(&[1.0, 2.0, 3.0], &[2.0, 4.0, 7.0]).unwrap().value;
        assert!((r - 0.9934).abs() < 1e-4, "{r}");
        assert!((r - 5.0 / (2.0f64 * 114.0 / 9.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn constant_input_is_flagged() {
        let c = corrcoef(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(c, Correlation { value: 0.0, degenerate: true });
        assert!(matches!(corrcoef(&[1.0, 2.0], &[1.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn moving_geometry() {
        let a: Vec<f64> = (0..45).map(|i| (i as f64 * 0.7).sin()).collect();
        let m = moving_corrcoef(&a, &a, 20).unwrap();
        assert_eq!(m.len(), 26);
        assert!(m.iter().all(|c| (c.value - 1.0).abs() < 1e-12));
        assert!(matches!(moving_corrcoef(&a[..10], &a[..10], 20), Err(Error::Contract(_))));
    }

    #[test]
    fn sign_flip_on_a_ramp_moves_monotonically() {
        // b follows a on the first half and mirrors it afterwards; windows
        // sliding across the flip go from +1 to -1 without reversing.
        let a: Vec<f64> = (0..45).map(|i| i as f64).collect();
        let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| if i < 22 { *x } else { 44.0 - *x }).collect();
        let m: Vec<f64> = moving_corrcoef(&a, &b, 20).unwrap().iter().map(|c| c.value).collect();
        assert!((m[0] - 1.0).abs() < 1e-12);
        assert!((m[m.len() - 1] + 1.0).abs() < 1e-12);
        assert!(m.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{m:?}");
    }

    #[test]
    fn ari_cases() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 1.0);
        let r = adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();
        assert!(r < 0.0);
        // Known value: sklearn adjusted_rand_score([0,0,0,1,1,1],[0,0,1,1,2,2]) = 0.24242...
        let r = adjusted_rand_index(&[0, 0, 0, 1, 1, 1], &[0, 0, 1, 1, 2, 2]).unwrap();
        assert!((r - 0.242_424_242_424_242_4).abs() < 1e-12, "{r}");
    }

    #[test]
    fn paired_test_detects_shift() {
        let y: Vec<f64> = (0..30).map(|i| (i as f64 * 1.3).sin()).collect();
        let x: Vec<f64> = y.iter().enumerate().map(|(i, v)| v + 0.2 + 0.05 * (i as f64).cos()).collect();
        let t = paired_t_test_greater(&x, &y).unwrap();
        assert!(t.p_value < 1e-6);
        let t = paired_t_test_greater(&y, &x).unwrap();
        assert!(t.p_value > 0.99);
    }

    proptest::proptest! {
        #[test]
        fn corr_is_symmetric_and_affine_invariant(
            a in proptest::collection::vec(-10.0f64..10.0, 5..30),
            seed in 0u64..1000, s in -5.0f64..5.0, t in -5.0f64..5.0
        ) {
            proptest::prop_assume!(s.abs() > 1e-3);
            let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| ((i as u64 * 31 + seed) % 17) as f64 + 0.1 * x).collect();
            let r = corrcoef(&a, &b).unwrap();
            let r2 = corrcoef(&b, &a).unwrap();
            proptest::prop_assert!((r.value - r2.value).abs() < 1e-12);
            let scaled: Vec<f64> = b.iter().map(|x| s * x + t).collect();
            let r3 = corrcoef(&a, &scaled).unwrap();
            if !r.degenerate {
                proptest::prop_assert!((r3.value - s.signum() * r.value).abs() < 1e-9);
            }
        }
    }
}
