//! Post-hoc trajectory analysis.

pub mod kmeans;
pub mod metrics;
pub mod pca;
pub mod report;

pub use kmeans::{kmeans, KMeansParams, KMeansResult};
pub use metrics::{adjusted_rand_index, corrcoef, mean_abs_diff, moving_corrcoef, paired_t_test_greater, Correlation, PairedTest};
pub use pca::{pca, Pca};
pub use report::{analyze, analyze_sessions, label_clusters, write_report, AnalysisParams, ClusterReport, ClusterSummary, UserMetrics, UserTrajectory, CLUSTER_NAMES};
