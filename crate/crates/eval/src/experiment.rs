//! Datasets, splits and one train-then-evaluate run.

use jamloc_core::graph::{GraphBuilder, GraphConfig, GraphMode};
use jamloc_core::scenario::{
    derive_seed, generate_static, Placement, ScenarioInstance, StaticGenConfig, Topology,
};
use jamloc_nn::checkpoint::{Checkpoint, Manifest};
use jamloc_nn::model::{Arch, Model, ModelConfig};
use jamloc_nn::{TrainConfig, TrainHistory};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::report::{EvalReport, ReportMeta};
use crate::runner::{evaluate, Predictor, DEFAULT_STRIDE};
use crate::Result;

pub const STATIC_PLACEMENTS: [Placement; 2] = [Placement::InsideRegion, Placement::OutsideRegion];

/// `per_cell` instances for every static topology and placement.
pub fn generate_static_grid(
    per_cell: usize,
    seed: u64,
    cfg: &StaticGenConfig,
) -> Result<Vec<ScenarioInstance>> {
    let mut out = Vec::with_capacity(per_cell * 8);
    let mut cell = 0u64;
    for topology in Topology::STATIC {
        for placement in STATIC_PLACEMENTS {
            out.extend(generate_static(
                topology,
                placement,
                per_cell,
                derive_seed(seed, cell),
                cfg,
            )?);
            cell += 1;
        }
    }
    Ok(out)
}

/// SHA-256 over the JSON lines of the instances.
pub fn dataset_hash(instances: &[ScenarioInstance]) -> String {
    let mut h = Sha256::new();
    for inst in instances {
        h.update(serde_json::to_vec(inst).expect("instances serialize"));
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

pub fn bytes_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn checkpoint_hash(c: &Checkpoint) -> String {
    bytes_hash(&serde_json::to_vec(c).expect("checkpoint serializes"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<ScenarioInstance>,
    pub val: Vec<ScenarioInstance>,
    pub test: Vec<ScenarioInstance>,
}

/// Seeded shuffle into 70 / 10 / 20 percent.
pub fn split_dataset(instances: &[ScenarioInstance], seed: u64) -> Split {
    let mut idx: Vec<usize> = (0..instances.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5B17)));
    let n = instances.len();
    let n_train = (n as f64 * 0.7).round() as usize;
    let n_val = ((n as f64 * 0.1).round() as usize).min(n - n_train);
    let pick = |r: &[usize]| r.iter().map(|&i| instances[i].clone()).collect::<Vec<_>>();
    Split {
        train: pick(&idx[..n_train]),
        val: pick(&idx[n_train..n_train + n_val]),
        test: pick(&idx[n_train + n_val..]),
    }
}

/// Graph, model and training settings of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub graph: GraphConfig,
    /// `in_dim` is replaced by the feature width of the data.
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub stride: usize,
}

impl Experiment {
    pub fn for_arch(arch: Arch) -> Self {
        Self {
            graph: GraphConfig::default(),
            model: ModelConfig::for_arch(arch, GraphMode::Static.feature_dim()),
            train: TrainConfig::for_arch(arch),
            stride: DEFAULT_STRIDE,
        }
    }

    pub fn effective_graph(&self) -> GraphConfig {
        GraphConfig {
            supernode: self.model.uses_supernode(),
            ..self.graph
        }
    }

    pub fn model_config(&self, instances: &[ScenarioInstance]) -> ModelConfig {
        let dynamic = instances.iter().any(|i| i.is_dynamic());
        let mode = if dynamic {
            GraphMode::Dynamic
        } else {
            GraphMode::Static
        };
        ModelConfig {
            in_dim: mode.feature_dim(),
            ..self.model
        }
    }

    pub fn fit(
        &self,
        train: &[ScenarioInstance],
        val: &[ScenarioInstance],
    ) -> Result<(Model, TrainHistory)> {
        let mut model = Model::new(self.model_config(train), self.train.seed)?;
        let builder = GraphBuilder::new(self.effective_graph());
        let history = jamloc_nn::train(&mut model, &builder, train, val, &self.train)?;
        Ok((model, history))
    }

    pub fn checkpoint(
        &self,
        model: &Model,
        history: TrainHistory,
        train: &[ScenarioInstance],
        val: &[ScenarioInstance],
    ) -> Checkpoint {
        let mut all = train.to_vec();
        all.extend_from_slice(val);
        Checkpoint::new(
            model,
            self.effective_graph(),
            Some(Manifest {
                seed: self.train.seed,
                dataset_hash: dataset_hash(&all),
                train_size: train.len(),
                val_size: val.len(),
                train: self.train.clone(),
                history,
            }),
        )
    }

    pub fn evaluate(&self, model: &Model, test: &[ScenarioInstance]) -> Result<EvalReport> {
        let meta = ReportMeta {
            dataset_hash: dataset_hash(test),
            checkpoint_hash: None,
            seed: Some(self.train.seed),
            stride: None,
        };
        evaluate(
            &Predictor::learned(model.clone(), self.effective_graph()),
            test,
            self.stride,
            meta,
        )
    }

    /// Trains on `split.train`/`split.val` and evaluates on `split.test`.
    pub fn run(&self, split: &Split) -> Result<(Model, TrainHistory, EvalReport)> {
        let (model, history) = self.fit(&split.train, &split.val)?;
        let report = self.evaluate(&model, &split.test)?;
        Ok((model, history, report))
    }
}
