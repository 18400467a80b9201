//! Graph neural regressors for jammer localization, built on a small
//! reverse-mode autograd tape.
//!
//! - [`tape`]: recorded forward ops and their gradients.
//! - [`layers`]: GAT, GCN, PNA and dense layers over [`layers::GraphInput`].
//! - [`model`]: baselines and the confidence-blended CAGE model.
//! - [`loss`], [`optim`], [`train`]: objectives, AdamW and the training loop.
//! - [`checkpoint`]: JSON persistence.

pub mod checkpoint;
pub mod layers;
pub mod loss;
pub mod model;
pub mod optim;
pub mod params;
pub mod tape;
pub mod train;

pub use checkpoint::{Checkpoint, Manifest};
pub use layers::{GraphInput, SnEdges};
pub use loss::LossKind;
pub use model::{
    Arch, CageOptions, ConfHead, ConfInput, ConfOut, Forward, Model, ModelConfig, Pooling,
    Prediction, RegInput,
};
pub use train::{train, EpochRecord, TrainConfig, TrainHistory};

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite value during training: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Core(#[from] jamloc_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;
