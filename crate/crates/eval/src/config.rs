//! TOML run configuration shared by the CLI verbs.

use std::path::Path;

use jamloc_core::graph::{AugmentConfig, GraphConfig};
use jamloc_core::scenario::{DynamicGenConfig, StaticGenConfig};
use jamloc_nn::model::{Arch, CageOptions, ModelConfig, Pooling};
use jamloc_nn::{LossKind, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::experiment::Experiment;
use crate::runner::DEFAULT_STRIDE;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    #[default]
    Static,
    Dynamic,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateSection {
    pub kind: DataKind,
    /// Static: instances per topology and placement. Dynamic: trajectories.
    pub count: Option<usize>,
    pub static_config: Option<StaticGenConfig>,
    pub dynamic_config: Option<DynamicGenConfig>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    pub arch: Option<Arch>,
    pub layers: Option<usize>,
    pub width: Option<usize>,
    pub hidden_dim: Option<usize>,
    pub out_dim: Option<usize>,
    pub heads: Option<usize>,
    pub dropout: Option<f64>,
    pub pooling: Option<Pooling>,
    pub cage: Option<CageOptions>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub weight_decay: Option<f64>,
    pub warmup_fraction: Option<f64>,
    pub loss: Option<LossKind>,
    pub grad_clip: Option<f64>,
    pub augment: Option<AugmentConfig>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    pub stride: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub generate: GenerateSection,
    pub graph: Option<GraphConfig>,
    pub model: ModelSection,
    pub train: TrainSection,
    pub eval: EvalSection,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(toml::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Arch defaults with every configured key applied on top.
    pub fn experiment(&self, arch: Option<Arch>) -> Experiment {
        let arch = arch.or(self.model.arch).unwrap_or(Arch::Cage);
        let mut e = Experiment::for_arch(arch);
        if let Some(g) = self.graph {
            e.graph = g;
        }
        let m = &self.model;
        let mut mc: ModelConfig = e.model;
        if let Some(l) = m.layers {
            mc.layers = l;
        }
        if let Some(w) = m.width {
            mc.hidden_dim = w;
            mc.out_dim = w;
        }
        macro_rules! set {
            ($dst:expr, $src:expr) => {
                if let Some(v) = $src {
                    $dst = v;
                }
            };
        }
        set!(mc.hidden_dim, m.hidden_dim);
        set!(mc.out_dim, m.out_dim);
        set!(mc.heads, m.heads);
        set!(mc.dropout, m.dropout);
        set!(mc.pooling, m.pooling);
        set!(mc.cage, m.cage);
        e.model = mc;
        let t = &self.train;
        let mut tc: TrainConfig = e.train;
        set!(tc.epochs, t.epochs);
        set!(tc.lr, t.lr);
        set!(tc.batch_size, t.batch_size);
        set!(tc.weight_decay, t.weight_decay);
        set!(tc.warmup_fraction, t.warmup_fraction);
        set!(tc.augment, t.augment);
        tc.loss = t.loss.or(tc.loss);
        tc.grad_clip = t.grad_clip.or(tc.grad_clip);
        set!(tc.seed, self.seed);
        e.train = tc;
        e.stride = self.eval.stride.unwrap_or(DEFAULT_STRIDE);
        e
    }
}
