//! Principal component analysis via a cyclic Jacobi eigensolver on the
//! sample covariance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigen-decomposition of a symmetric matrix (row-major `n x n`).
///
/// Returns eigenvalues in descending order and the matching unit
/// eigenvectors as rows.
pub fn symmetric_eigen(matrix: &[f64], n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    assert_eq!(matrix.len(), n * n);
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i * n + j].powi(2)).sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let (app, aqq) = (a[p * n + p], a[q * n + q]);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = order.iter().map(|&i| (0..n).map(|k| v[k * n + i]).collect()).collect();
    (values, vectors)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Unit principal axes, one per row.
    pub components: Vec<Vec<f64>>,
    /// Sample variance along each axis, non-increasing.
    pub explained_variance: Vec<f64>,
    /// Centered rows projected on the axes.
    pub transformed: Vec<Vec<f64>>,
    /// Number of axes with non-negligible variance.
    pub rank: usize,
    /// Set when fewer than the requested axes carry variance.
    pub rank_deficient: bool,
}

/// Fits PCA on `rows` (users x features), centering without scaling.
///
/// Each axis is oriented so that its largest-magnitude loading is positive.
/// When the data have fewer than `n_components` directions of variance the
/// remaining axes are still returned (orthonormal, zero variance) and
/// `rank_deficient` is set.
pub fn pca(rows: &[Vec<f64>], n_components: usize) -> Result<Pca> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::Data("matrix rows have different lengths".into()));
    }
    if n_components == 0 || n < n_components || p < n_components {
        return Err(Error::Contract(format!("cannot extract {n_components} components from a {n}x{p} matrix")));
    }
    let mean: Vec<f64> = (0..p).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let centered: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().zip(&mean).map(|(x, m)| x - m).collect()).collect();
    let denom = (n.max(2) - 1) as f64;
    let mut cov = vec![0.0; p * p];
    for i in 0..p {
        for j in i..p {
            let s = centered.iter().map(|r| r[i] * r[j]).sum::<f64>() / denom;
            cov[i * p + j] = s;
            cov[j * p + i] = s;
        }
    }
    let (values, vectors) = symmetric_eigen(&cov, p);
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
    let tol = 1e-12 * total.max(f64::MIN_POSITIVE);
    let rank = values.iter().filter(|v| **v > tol).count();

    let mut components = Vec::with_capacity(n_components);
    let mut explained = Vec::with_capacity(n_components);
    for (value, mut vec) in values.into_iter().zip(vectors).take(n_components) {
        let lead = vec.iter().enumerate().fold(0, |b, (i, x)| if x.abs() > vec[b].abs() { i } else { b });
        if vec[lead] < 0.0 {
            vec.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(vec);
        explained.push(if value > tol { value } else { 0.0 });
    }
    let transformed = centered
        .iter()
        .map(|r| components.iter().map(|c| c.iter().zip(r).map(|(a, b)| a * b).sum()).collect())
        .collect();
    Ok(Pca { mean, components, explained_variance: explained, transformed, rank, rank_deficient: rank < n_components })
}
