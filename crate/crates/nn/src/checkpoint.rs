//! Self-describing JSON checkpoints.

use std::path::Path;

use jamloc_core::graph::GraphConfig;
use serde::{Deserialize, Serialize};

use crate::model::{Model, ModelConfig};
use crate::params::ParamStore;
use crate::train::{TrainConfig, TrainHistory};
use crate::{NnError, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to reproduce a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub dataset_hash: String,
    pub train_size: usize,
    pub val_size: usize,
    pub train: TrainConfig,
    pub history: TrainHistory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub model: ModelConfig,
    pub graph: GraphConfig,
    pub params: ParamStore,
    pub manifest: Option<Manifest>,
}

impl Checkpoint {
    pub fn new(model: &Model, graph: GraphConfig, manifest: Option<Manifest>) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            model: model.config,
            graph,
            params: model.params.clone(),
            manifest,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(f, self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let c: Checkpoint = serde_json::from_reader(f)?;
        if c.version != CHECKPOINT_VERSION {
            return Err(NnError::Config(format!(
                "unsupported checkpoint version {}",
                c.version
            )));
        }
        Ok(c)
    }

    pub fn into_model(self) -> Result<Model> {
        Model::from_parts(self.model, self.params)
    }
}
