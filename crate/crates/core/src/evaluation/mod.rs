//! Cold-start metrics, timing benchmark, clustering report and export.

mod cluster;
mod cold;
mod export;
mod metrics;
mod timing;

pub use cluster::{cluster_report, cosine, ClusterReport, LevelClusters, CLUSTER_PAIRS};
pub use cold::{evaluate_cold, rank_users, CandidateMode, EvalReport, KMetrics, Rankings};
pub use export::export_embeddings;
pub use metrics::{hit_rate_at_k, precision_at_k};
pub use timing::{compare_epoch_times, timing_benchmark, TimingReport, TimingRow, TimingSpec};
