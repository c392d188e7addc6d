//! Metrics, reports and the experiment runner.

pub mod config;
pub mod metrics;
pub mod pipeline;
pub mod report;

pub use config::{ExperimentConfig, ModelSpec, Track};
pub use metrics::{evaluate, f_beta, fpr, roc_auc, tpr, ConfusionCounts, MetricsReport, Prediction};
pub use pipeline::{run_experiment, ExperimentOutcome, TrainedPipeline};
pub use report::Report;
