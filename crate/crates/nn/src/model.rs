//! Graph regressors and the confidence-blended model.

use std::sync::Arc;

use jamloc_core::graph::MeasurementGraph;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::layers::{dropout, GatLayer, GcnLayer, GraphInput, Linear, PnaLayer, SnEdges};
use crate::params::ParamStore;
use crate::tape::{Tape, Var};
use crate::{NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Mlp,
    Gcn,
    Gat,
    Pna,
    Cage,
}

impl Arch {
    pub const ALL: [Arch; 5] = [Arch::Mlp, Arch::Gcn, Arch::Gat, Arch::Pna, Arch::Cage];

    pub fn as_str(&self) -> &'static str {
        match self {
            Arch::Mlp => "mlp",
            Arch::Gcn => "gcn",
            Arch::Gat => "gat",
            Arch::Pna => "pna",
            Arch::Cage => "cage",
        }
    }
}

impl std::str::FromStr for Arch {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Arch::ALL
            .into_iter()
            .find(|a| a.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown architecture '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    Sum,
    Mean,
    Max,
    Attention,
}

impl std::str::FromStr for Pooling {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sum" => Ok(Pooling::Sum),
            "mean" => Ok(Pooling::Mean),
            "max" => Ok(Pooling::Max),
            "attention" | "att" => Ok(Pooling::Attention),
            other => Err(format!("unknown pooling '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfHead {
    Linear,
    Mlp3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfInput {
    Supernode,
    PooledWithSn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegInput {
    PooledWithoutSn,
    PooledWithSn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfOut {
    Single,
    Multiple,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CageOptions {
    pub sn_edges: SnEdges,
    pub conf_head: ConfHead,
    pub conf_in: ConfInput,
    pub reg_in: RegInput,
    pub conf_out: ConfOut,
    pub lambda: f64,
}

impl Default for CageOptions {
    fn default() -> Self {
        Self {
            sn_edges: SnEdges::Directed,
            conf_head: ConfHead::Mlp3,
            conf_in: ConfInput::Supernode,
            reg_in: RegInput::PooledWithoutSn,
            conf_out: ConfOut::Multiple,
            lambda: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub arch: Arch,
    pub in_dim: usize,
    pub layers: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
    pub heads: usize,
    pub dropout: f64,
    pub pooling: Pooling,
    #[serde(default)]
    pub cage: CageOptions,
    /// Average `log(d + 1)` of training in-degrees, used by PNA scalers.
    #[serde(default = "one")]
    pub pna_delta: f64,
}

fn one() -> f64 {
    1.0
}

impl ModelConfig {
    /// Tuned per-architecture defaults.
    pub fn for_arch(arch: Arch, in_dim: usize) -> Self {
        let (layers, hidden, out, heads) = match arch {
            Arch::Mlp => (8, 128, 64, 1),
            Arch::Gcn => (2, 512, 256, 1),
            Arch::Pna => (6, 64, 64, 1),
            Arch::Gat | Arch::Cage => (8, 128, 128, 4),
        };
        Self {
            arch,
            in_dim,
            layers,
            hidden_dim: hidden,
            out_dim: out,
            heads,
            dropout: if arch == Arch::Cage { 0.0 } else { 0.5 },
            pooling: Pooling::Max,
            cage: CageOptions::default(),
            pna_delta: 1.0,
        }
    }

    /// Same architecture with `layers` layers of width `width`.
    pub fn scaled(mut self, layers: usize, width: usize) -> Self {
        self.layers = layers;
        self.hidden_dim = width;
        self.out_dim = width;
        self
    }

    pub fn uses_supernode(&self) -> bool {
        self.arch == Arch::Cage
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden_dim == 0 || self.out_dim == 0 || self.in_dim == 0 {
            return Err(NnError::Config(format!("empty dimensions in {self:?}")));
        }
        if matches!(self.arch, Arch::Gat | Arch::Cage)
            && (self.heads == 0 || self.hidden_dim % self.heads != 0)
        {
            return Err(NnError::Config(format!(
                "hidden_dim {} is not divisible by {} heads",
                self.hidden_dim, self.heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(NnError::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Encoder {
    Mlp(Vec<Linear>),
    Gcn(Vec<GcnLayer>),
    Gat(Vec<GatLayer>),
    Pna(Vec<PnaLayer>),
}

#[derive(Debug, Clone)]
struct Confidence {
    layers: Vec<Linear>,
    outputs: usize,
}

/// A model and its parameters.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    encoder: Encoder,
    gate: Option<Linear>,
    head: Linear,
    confidence: Option<Confidence>,
}

/// Tape handles produced by one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub gnn: Var,
    pub alpha: Option<Var>,
    pub output: Var,
    /// Attention coefficients of every attention layer (`E×H`).
    pub attention: Vec<Var>,
}

/// Plain-number model outputs for one graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub output: [f64; 5],
    pub gnn: [f64; 5],
    pub alpha: Option<[f64; 5]>,
}

fn row5(a: &Array2<f64>) -> [f64; 5] {
    let mut out = [0.0; 5];
    out.copy_from_slice(&a.as_slice().expect("row")[..5]);
    out
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::default();
        let c = &config;
        let dims = |l: usize| -> (usize, usize) {
            let fan_in = if l == 0 { c.in_dim } else { c.hidden_dim };
            let fan_out = if l + 1 == c.layers {
                c.out_dim
            } else {
                c.hidden_dim
            };
            (fan_in, fan_out)
        };
        let encoder = match c.arch {
            Arch::Mlp => Encoder::Mlp(
                (0..c.layers)
                    .map(|l| {
                        let (i, o) = dims(l);
                        Linear::new(&mut store, &format!("mlp{l}"), i, o, &mut rng)
                    })
                    .collect(),
            ),
            Arch::Gcn => Encoder::Gcn(
                (0..c.layers)
                    .map(|l| {
                        let (i, o) = dims(l);
                        GcnLayer::new(&mut store, &format!("gcn{l}"), i, o, &mut rng)
                    })
                    .collect(),
            ),
            Arch::Pna => Encoder::Pna(
                (0..c.layers)
                    .map(|l| {
                        let (i, o) = dims(l);
                        PnaLayer::new(&mut store, &format!("pna{l}"), i, o, &mut rng)
                    })
                    .collect(),
            ),
            Arch::Gat | Arch::Cage => Encoder::Gat(
                (0..c.layers)
                    .map(|l| {
                        let fan_in = if l == 0 { c.in_dim } else { c.hidden_dim };
                        let last = l + 1 == c.layers;
                        let head_dim = if last {
                            c.out_dim
                        } else {
                            c.hidden_dim / c.heads
                        };
                        GatLayer::new(
                            &mut store,
                            &format!("gat{l}"),
                            fan_in,
                            c.heads,
                            head_dim,
                            !last,
                            &mut rng,
                        )
                    })
                    .collect(),
            ),
        };
        let gate = (c.pooling == Pooling::Attention)
            .then(|| Linear::new(&mut store, "pool_gate", c.out_dim, 1, &mut rng));
        let head = Linear::new(&mut store, "head", c.out_dim, 5, &mut rng);
        let confidence = (c.arch == Arch::Cage).then(|| {
            let outputs = match c.cage.conf_out {
                ConfOut::Single => 1,
                ConfOut::Multiple => 5,
            };
            let f = c.out_dim;
            let layers = match c.cage.conf_head {
                ConfHead::Linear => vec![Linear::new(&mut store, "conf0", f, outputs, &mut rng)],
                ConfHead::Mlp3 => vec![
                    Linear::new(&mut store, "conf0", f, f, &mut rng),
                    Linear::new(&mut store, "conf1", f, f, &mut rng),
                    Linear::new(&mut store, "conf2", f, outputs, &mut rng),
                ],
            };
            Confidence { layers, outputs }
        });
        Ok(Self {
            config,
            params: store,
            encoder,
            gate,
            head,
            confidence,
        })
    }

    /// Rebuilds a model around stored parameters.
    pub fn from_parts(config: ModelConfig, params: ParamStore) -> Result<Self> {
        let mut m = Self::new(config, 0)?;
        if m.params.len() != params.len()
            || m.params
                .ids()
                .any(|id| m.params.get(id).dim() != params.get(id).dim())
        {
            return Err(NnError::Config(
                "parameter shapes do not match the model configuration".into(),
            ));
        }
        m.params = params;
        Ok(m)
    }

    /// Converts a graph into model input, checking supernode requirements.
    pub fn prepare(&self, g: &MeasurementGraph) -> Result<GraphInput> {
        if g.features.cols != self.config.in_dim {
            return Err(NnError::Config(format!(
                "graph has {} features, model expects {}",
                g.features.cols, self.config.in_dim
            )));
        }
        let keep = self.config.uses_supernode();
        if keep && g.supernode_index.is_none() {
            return Err(NnError::Config(
                "model needs a supernode but the graph has none".into(),
            ));
        }
        Ok(GraphInput::new(g, keep, self.config.cage.sn_edges))
    }

    fn pool(&self, t: &mut Tape, h: Var, rows: &Arc<[usize]>) -> Var {
        match self.config.pooling {
            Pooling::Max => t.pool_max(h, rows),
            Pooling::Mean => t.pool_mean(h, rows.clone()),
            Pooling::Sum => t.pool_sum(h, rows.clone()),
            Pooling::Attention => {
                let gate = self
                    .gate
                    .as_ref()
                    .expect("gate exists for attention pooling");
                let g = gate.forward(t, h);
                let g = t.sigmoid(g);
                let weighted = t.row_mul(h, g);
                let num = t.pool_sum(weighted, rows.clone());
                let den = t.pool_sum(g, rows.clone());
                t.div_scalar(num, den)
            }
        }
    }

    /// Node embeddings after the encoder.
    fn encode(&self, t: &mut Tape, g: &GraphInput, attention: &mut Vec<Var>) -> Var {
        let mut h = t.constant(g.x.clone());
        match &self.encoder {
            Encoder::Mlp(ls) => {
                for l in ls {
                    let y = l.forward(t, h);
                    h = t.relu(y);
                }
            }
            Encoder::Gcn(ls) => {
                for l in ls {
                    h = l.forward(t, h, g);
                }
            }
            Encoder::Gat(ls) => {
                for l in ls {
                    let (y, a) = l.forward(t, h, g);
                    attention.push(a);
                    h = y;
                }
            }
            Encoder::Pna(ls) => {
                for l in ls {
                    h = l.forward(t, h, g, self.config.pna_delta);
                }
            }
        }
        h
    }

    /// Records the forward pass. `train_rng` enables dropout.
    pub fn forward(
        &self,
        t: &mut Tape,
        g: &GraphInput,
        train_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Forward> {
        self.forward_with_alpha(t, g, train_rng, None)
    }

    /// As [`Model::forward`], optionally overriding the confidence weights.
    pub fn forward_with_alpha(
        &self,
        t: &mut Tape,
        g: &GraphInput,
        train_rng: Option<&mut ChaCha8Rng>,
        forced_alpha: Option<[f64; 5]>,
    ) -> Result<Forward> {
        if g.measurement_rows.is_empty() {
            return Err(NnError::Config("graph without measurement nodes".into()));
        }
        let mut attention = Vec::new();
        let h = self.encode(t, g, &mut attention);
        let cage = self.config.arch == Arch::Cage;
        let reg_rows = if cage && self.config.cage.reg_in == RegInput::PooledWithSn {
            &g.all_rows
        } else {
            &g.measurement_rows
        };
        let mut pooled = self.pool(t, h, reg_rows);
        if let Some(rng) = train_rng {
            pooled = dropout(t, pooled, self.config.dropout, rng);
        }
        let gnn = self.head.forward(t, pooled);

        let Some(conf) = &self.confidence else {
            return Ok(Forward {
                gnn,
                alpha: None,
                output: gnn,
                attention,
            });
        };
        let sn = g
            .supernode
            .ok_or_else(|| NnError::Config("confidence head needs a supernode".into()))?;
        let alpha = match forced_alpha {
            Some(a) => t.constant(Array2::from_shape_vec((1, 5), a.to_vec()).expect("1x5")),
            None => {
                let mut z = match self.config.cage.conf_in {
                    ConfInput::Supernode => t.select_row(h, sn),
                    ConfInput::PooledWithSn => t.pool_max(h, &g.all_rows),
                };
                for (i, l) in conf.layers.iter().enumerate() {
                    z = l.forward(t, z);
                    if i + 1 < conf.layers.len() {
                        z = t.relu(z);
                    }
                }
                let a = t.sigmoid(z);
                if conf.outputs == 1 {
                    t.broadcast(a, 5)
                } else {
                    a
                }
            }
        };
        let wcl = t.constant(Array2::from_shape_vec((1, 5), g.wcl.to_vec()).expect("1x5"));
        let ones = t.constant(Array2::ones((1, 5)));
        let rest = t.sub(ones, alpha);
        let from_gnn = t.mul(alpha, gnn);
        let from_wcl = t.mul(rest, wcl);
        let output = t.add(from_gnn, from_wcl);
        Ok(Forward {
            gnn,
            alpha: Some(alpha),
            output,
            attention,
        })
    }

    pub fn predict(&self, g: &GraphInput) -> Result<Prediction> {
        let mut t = Tape::new(&self.params);
        let f = self.forward(&mut t, g, None)?;
        Ok(Prediction {
            output: row5(t.value(f.output)),
            gnn: row5(t.value(f.gnn)),
            alpha: f.alpha.map(|a| row5(t.value(a))),
        })
    }

    /// Predicts and decodes to metres: `(final, gnn-only)`.
    pub fn predict_graph(
        &self,
        g: &MeasurementGraph,
    ) -> Result<(Prediction, jamloc_core::Point, jamloc_core::Point)> {
        let input = self.prepare(g)?;
        let p = self.predict(&input)?;
        let decode = |a: [f64; 5]| g.decode(&jamloc_core::graph::AngularPosition::from_array(a));
        Ok((p, decode(p.output), decode(p.gnn)))
    }

    /// Weight and bias of the regression head.
    pub fn head_params(&self) -> (crate::params::ParamId, crate::params::ParamId) {
        (self.head.w, self.head.b)
    }

    pub fn confidence_output_params(
        &self,
    ) -> Option<(crate::params::ParamId, crate::params::ParamId)> {
        self.confidence.as_ref().map(|c| {
            let l = c.layers.last().expect("non-empty");
            (l.w, l.b)
        })
    }
}
