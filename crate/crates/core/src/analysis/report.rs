//! Cluster study over a set of session logs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::kmeans::{kmeans, KMeansParams};
use super::metrics::{corrcoef, mean, mean_abs_diff, moving_corrcoef, Correlation};
use super::pca::pca;
use crate::error::{Error, Result};
use crate::record::InteractionRecord;

/// Names for k = 4, in ascending order of mean absolute error.
pub const CLUSTER_NAMES: [&str; 4] = ["AI-aligned", "Delayed", "Cautious", "Contrarian"];

/// One session reduced to the series the analysis needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserTrajectory {
    pub session_id: String,
    /// `d_u` per day.
    pub decisions: Vec<f64>,
    /// `d_AI` per day.
    pub suggested: Vec<f64>,
    pub final_assets: f64,
}

impl UserTrajectory {
    pub fn from_records(records: &[InteractionRecord]) -> Result<Self> {
        let first = records.first().ok_or_else(|| Error::Data("empty session log".into()))?;
        if records.iter().any(|r| r.session_id != first.session_id) {
            return Err(Error::Data(format!("log mixes sessions (first is {})", first.session_id)));
        }
        Ok(Self {
            session_id: first.session_id.clone(),
            decisions: records.iter().map(|r| r.decision).collect(),
            suggested: records.iter().map(|r| r.suggested).collect(),
            final_assets: records.last().expect("non-empty").assets_after,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisParams {
    pub n_components: usize,
    pub kmeans: KMeansParams,
    pub moving_window: usize,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self { n_components: 4, kmeans: KMeansParams::default(), moving_window: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserMetrics {
    pub session_id: String,
    pub cluster: usize,
    pub mean_abs_error: f64,
    pub correlation: Correlation,
    pub final_assets: f64,
    pub moving_correlation: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub id: usize,
    pub name: String,
    pub size: usize,
    pub mean_trajectory: Vec<f64>,
    pub mean_suggested: Vec<f64>,
    pub mean_abs_error: f64,
    pub correlation: f64,
    pub final_assets: f64,
    pub moving_correlation: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub k: usize,
    pub users: Vec<UserMetrics>,
    pub clusters: Vec<ClusterSummary>,
    pub explained_variance: Vec<f64>,
    pub rank_deficient: bool,
    pub inertia: f64,
}

impl ClusterReport {
    pub fn labels(&self) -> Vec<usize> {
        self.users.iter().map(|u| u.cluster).collect()
    }

    pub fn cluster_by_name(&self, name: &str) -> Option<&ClusterSummary> {
        self.clusters.iter().find(|c| c.name == name)
    }
}

/// Names clusters from their `(mean abs error, correlation)` pairs.
///
/// For k = 4 the names follow ascending error, ties broken by descending
/// correlation; any other k gets `cluster-i`.
pub fn label_clusters(metrics: &[(f64, f64)]) -> Vec<String> {
    let k = metrics.len();
    if k != CLUSTER_NAMES.len() {
        return (0..k).map(|i| format!("cluster-{i}")).collect();
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| metrics[a].0.total_cmp(&metrics[b].0).then(metrics[b].1.total_cmp(&metrics[a].1)).then(a.cmp(&b)));
    let mut names = vec![String::new(); k];
    for (rank, &c) in order.iter().enumerate() {
        names[c] = CLUSTER_NAMES[rank].to_string();
    }
    names
}

fn column_mean(rows: &[&Vec<f64>]) -> Vec<f64> {
    let len = rows.first().map_or(0, |r| r.len());
    (0..len).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64).collect()
}

/// PCA, k-means and per-cluster metrics over equal-length trajectories.
pub fn analyze(users: &[UserTrajectory], params: &AnalysisParams) -> Result<ClusterReport> {
    let len = users.first().map_or(0, |u| u.decisions.len());
    if users.iter().any(|u| u.decisions.len() != len || u.suggested.len() != len) {
        return Err(Error::Data("trajectories differ in length".into()));
    }
    let matrix: Vec<Vec<f64>> = users.iter().map(|u| u.decisions.clone()).collect();
    let reduced = pca(&matrix, params.n_components)?;
    let clustering = kmeans(&reduced.transformed, &params.kmeans)?;
    let k = params.kmeans.k;

    let mut metrics = Vec::with_capacity(users.len());
    for (u, &cluster) in users.iter().zip(&clustering.labels) {
        let moving = if len >= params.moving_window {
            moving_corrcoef(&u.decisions, &u.suggested, params.moving_window)?.iter().map(|c| c.value).collect()
        } else {
            Vec::new()
        };
        metrics.push(UserMetrics {
            session_id: u.session_id.clone(),
            cluster,
            mean_abs_error: mean_abs_diff(&u.decisions, &u.suggested),
            correlation: corrcoef(&u.decisions, &u.suggested)?,
            final_assets: u.final_assets,
            moving_correlation: moving,
        });
    }

    let mut clusters = Vec::with_capacity(k);
    for id in 0..k {
        let members: Vec<usize> = (0..users.len()).filter(|&i| clustering.labels[i] == id).collect();
        let pick = |f: &dyn Fn(usize) -> f64| mean(&members.iter().map(|&i| f(i)).collect::<Vec<_>>());
        clusters.push(ClusterSummary {
            id,
            name: String::new(),
            size: members.len(),
            mean_trajectory: column_mean(&members.iter().map(|&i| &users[i].decisions).collect::<Vec<_>>()),
            mean_suggested: column_mean(&members.iter().map(|&i| &users[i].suggested).collect::<Vec<_>>()),
            mean_abs_error: pick(&|i| metrics[i].mean_abs_error),
            correlation: pick(&|i| metrics[i].correlation.value),
            final_assets: pick(&|i| metrics[i].final_assets),
            moving_correlation: column_mean(&members.iter().map(|&i| &metrics[i].moving_correlation).collect::<Vec<_>>()),
        });
    }
    let names = label_clusters(&clusters.iter().map(|c| (c.mean_abs_error, c.correlation)).collect::<Vec<_>>());
    for (c, n) in clusters.iter_mut().zip(names) {
        c.name = n;
    }
    Ok(ClusterReport {
        k,
        users: metrics,
        clusters,
        explained_variance: reduced.explained_variance,
        rank_deficient: reduced.rank_deficient,
        inertia: clustering.inertia,
    })
}

pub fn analyze_sessions(sessions: &[Vec<InteractionRecord>], params: &AnalysisParams) -> Result<ClusterReport> {
    let users = sessions.iter().map(|s| UserTrajectory::from_records(s)).collect::<Result<Vec<_>>>()?;
    analyze(&users, params)
}

/// Writes `report.json` and the CSV tables behind the cluster figures.
pub fn write_report(dir: &Path, report: &ClusterReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    let names: BTreeMap<usize, &str> = report.clusters.iter().map(|c| (c.id, c.name.as_str())).collect();

    let mut w = csv::Writer::from_path(dir.join("per_user.csv"))?;
    w.write_record(["session_id", "cluster", "name", "mean_abs_error", "correlation", "degenerate", "final_assets"])?;
    for u in &report.users {
        w.write_record([
            u.session_id.clone(),
            u.cluster.to_string(),
            names[&u.cluster].to_string(),
            u.mean_abs_error.to_string(),
            u.correlation.value.to_string(),
            u.correlation.degenerate.to_string(),
            u.final_assets.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("clusters.csv"))?;
    w.write_record(["cluster", "name", "size", "mean_abs_error", "correlation", "final_assets"])?;
    for c in &report.clusters {
        w.write_record([
            c.id.to_string(),
            c.name.clone(),
            c.size.to_string(),
            c.mean_abs_error.to_string(),
            c.correlation.to_string(),
            c.final_assets.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("abs_error.csv"))?;
    w.write_record(["name", "mean_abs_error"])?;
    for c in &report.clusters {
        w.write_record([c.name.clone(), c.mean_abs_error.to_string()])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("corr_assets.csv"))?;
    w.write_record(["session_id", "name", "correlation", "final_assets"])?;
    for u in &report.users {
        w.write_record([u.session_id.clone(), names[&u.cluster].to_string(), u.correlation.value.to_string(), u.final_assets.to_string()])?;
    }
    w.flush()?;

    let series = |file: &str, col: &dyn Fn(&ClusterSummary) -> &[f64], with_ai: bool| -> Result<()> {
        let mut w = csv::Writer::from_path(dir.join(file))?;
        let mut header = vec!["day".to_string()];
        header.extend(report.clusters.iter().map(|c| c.name.clone()));
        if with_ai {
            header.push("d_ai".into());
        }
        w.write_record(&header)?;
        let len = report.clusters.iter().map(|c| col(c).len()).max().unwrap_or(0);
        let all: Vec<&Vec<f64>> = report.clusters.iter().filter(|c| c.size > 0).map(|c| &c.mean_suggested).collect();
        let ai = column_mean(&all);
        for t in 0..len {
            let mut row = vec![t.to_string()];
            row.extend(report.clusters.iter().map(|c| col(c).get(t).map_or(String::new(), |v| v.to_string())));
            if with_ai {
                row.push(ai.get(t).map_or(String::new(), |v| v.to_string()));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    };
    series("mean_positions.csv", &|c| &c.mean_trajectory, true)?;
    series("moving_corr.csv", &|c| &c.moving_correlation, false)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_follow_error_order() {
        let names = label_clusters(&[(0.3, 0.0), (0.1, 0.0), (0.4, 0.0), (0.2, 0.0)]);
        assert_eq!(names, vec!["Cautious", "AI-aligned", "Contrarian", "Delayed"]);
        let names = label_clusters(&[(0.1, 0.0), (0.2, 0.0), (0.3, 0.0), (0.4, 0.0)]);
        assert_eq!(names, CLUSTER_NAMES.to_vec());
    }

    #[test]
    fn ties_prefer_higher_correlation() {
        let names = label_clusters(&[(0.2, 0.1), (0.2, 0.9), (0.5, 0.0), (0.6, 0.0)]);
        assert_eq!(names[1], "AI-aligned");
        assert_eq!(names[0], "Delayed");
    }

    #[test]
    fn other_k_gets_generic_names() {
        assert_eq!(label_clusters(&[(0.1, 0.0), (0.2, 0.0)]), vec!["cluster-0", "cluster-1"]);
    }

    #[test]
    fn separated_groups_are_named_by_error() {
        let ai: Vec<f64> = (0..30).map(|t| if (t / 5) % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let mut users = Vec::new();
        for g in 0..4 {
            for i in 0..5 {
                let decisions: Vec<f64> = match g {
                    0 => ai.clone(),
                    1 => (0..30).map(|t| if t < 1 { 0.0 } else { ai[t - 1] }).collect(),
                    2 => ai.iter().map(|a| a * 0.3).collect(),
                    _ => ai.iter().map(|a| 1.0 - a).collect(),
                };
                users.push(UserTrajectory {
                    session_id: format!("g{g}-{i}"),
                    decisions: decisions.iter().enumerate().map(|(t, d)| (d + 0.001 * ((t + i) % 3) as f64).min(1.0)).collect(),
                    suggested: ai.clone(),
                    final_assets: 1.0,
                });
            }
        }
        let report = analyze(&users, &AnalysisParams::default()).unwrap();
        for (i, u) in report.users.iter().enumerate() {
            let name = &report.clusters[u.cluster].name;
            assert_eq!(name, CLUSTER_NAMES[i / 5], "{}", u.session_id);
        }
        let dir = tempfile::tempdir().unwrap();
        write_report(dir.path(), &report).unwrap();
        for f in ["report.json", "per_user.csv", "clusters.csv", "abs_error.csv", "corr_assets.csv", "mean_positions.csv", "moving_corr.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
    }
}
