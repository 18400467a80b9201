//! Experiment orchestration for jammer localization: metrics, bucketed and
//! geometry-split reports, prefix evaluation along trajectories, confidence
//! profiles, ablation grids and plot emission.

pub mod ablation;
pub mod config;
pub mod experiment;
pub mod metrics;
pub mod plots;
pub mod report;
pub mod runner;

pub use ablation::{run_ablation, AblationKind, AblationTable};
pub use experiment::{split_dataset, Experiment, Split};
pub use metrics::{DistanceBucket, Stats};
pub use report::{EvalReport, InstanceRecord, ReportMeta};
pub use runner::{
    confidence_profile, evaluate, evaluate_dynamic, evaluate_static, ConfidenceProfile, Predictor,
};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] jamloc_core::Error),
    #[error(transparent)]
    Nn(#[from] jamloc_nn::NnError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, EvalError>;
