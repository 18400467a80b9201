//! Minibatch training with per-epoch graph rebuilding.

use std::time::Instant;

use jamloc_core::graph::{AugmentConfig, GraphBuilder};
use jamloc_core::scenario::{derive_seed, ScenarioInstance};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::layers::{pna_delta, GraphInput};
use crate::loss::{graph_loss, LossKind};
use crate::model::{Arch, Model};
use crate::optim::{AdamW, Schedule};
use crate::params::Gradients;
use crate::tape::Tape;
use crate::{NnError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub warmup_fraction: f64,
    pub seed: u64,
    pub augment: AugmentConfig,
    /// `None` picks `Cage` for the confidence model and `Gnn` otherwise.
    pub loss: Option<LossKind>,
    pub grad_clip: Option<f64>,
    pub verbose: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::for_arch(Arch::Cage)
    }
}

impl TrainConfig {
    pub fn for_arch(arch: Arch) -> Self {
        let (lr, batch_size) = match arch {
            Arch::Mlp => (0.0004, 16),
            Arch::Gcn => (0.0005, 32),
            Arch::Pna => (0.001, 128),
            Arch::Gat | Arch::Cage => (0.0007, 8),
        };
        Self {
            epochs: 300,
            lr,
            batch_size,
            weight_decay: 1e-5,
            warmup_fraction: 0.2,
            seed: 0,
            augment: AugmentConfig::default(),
            loss: None,
            grad_clip: None,
            verbose: false,
        }
    }

    pub fn loss_for(&self, arch: Arch) -> LossKind {
        self.loss.unwrap_or(if arch == Arch::Cage {
            LossKind::Cage
        } else {
            LossKind::Gnn
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

fn prepare_all(
    model: &Model,
    builder: &GraphBuilder,
    instances: &[ScenarioInstance],
) -> Result<Vec<GraphInput>> {
    instances
        .par_iter()
        .map(|inst| model.prepare(&builder.build(inst)?))
        .collect()
}

fn require_target(g: &GraphInput) -> Result<[f64; 5]> {
    g.target
        .ok_or_else(|| NnError::Config("training graph has no jammer target".into()))
}

/// Mean per-graph loss without dropout.
pub fn mean_loss(model: &Model, graphs: &[GraphInput], kind: LossKind) -> Result<f64> {
    if graphs.is_empty() {
        return Ok(f64::NAN);
    }
    let lambda = model.config.cage.lambda;
    let losses: Vec<f64> = graphs
        .par_iter()
        .map(|g| {
            let mut t = Tape::new(&model.params);
            let f = model.forward(&mut t, g, None)?;
            let l = graph_loss(&mut t, &f, require_target(g)?, kind, lambda, 1);
            Ok(t.scalar(l))
        })
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Trains in place and leaves the best-validation parameters in `model`.
pub fn train(
    model: &mut Model,
    builder: &GraphBuilder,
    train_set: &[ScenarioInstance],
    val_set: &[ScenarioInstance],
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    if train_set.is_empty() {
        return Err(NnError::Config("empty training set".into()));
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(NnError::Config(
            "batch size and epoch count must be positive".into(),
        ));
    }
    let kind = cfg.loss_for(model.config.arch);
    let lambda = model.config.cage.lambda;

    let clean_train = prepare_all(model, builder, train_set)?;
    if model.config.arch == Arch::Pna {
        model.config.pna_delta = pna_delta(&clean_train);
    }
    let val_graphs = prepare_all(model, builder, val_set)?;

    let batches_per_epoch = train_set.len().div_ceil(cfg.batch_size);
    let schedule = Schedule::new(cfg.lr, cfg.epochs * batches_per_epoch, cfg.warmup_fraction);
    let mut opt = AdamW::new(&model.params, cfg.weight_decay);
    let mut history = TrainHistory {
        best_val_loss: f64::INFINITY,
        ..Default::default()
    };
    let mut best_params = model.params.clone();
    let mut step = 0usize;
    let augmenting = !cfg.augment.is_identity();

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let epoch_seed = derive_seed(cfg.seed, epoch as u64);
        let rebuilt;
        let graphs: &[GraphInput] = if augmenting {
            let m: &Model = model;
            rebuilt = train_set
                .par_iter()
                .enumerate()
                .map(|(i, inst)| {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(epoch_seed, i as u64));
                    m.prepare(&builder.build_augmented(inst, &cfg.augment, &mut rng)?)
                })
                .collect::<Result<Vec<_>>>()?;
            &rebuilt
        } else {
            &clean_train
        };

        let mut order: Vec<usize> = (0..graphs.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed ^ 0x5EED));
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let m: &Model = model;
            let parts: Vec<(f64, Gradients)> = batch
                .par_iter()
                .map(|&i| {
                    let g = &graphs[i];
                    let mut t = Tape::new(&m.params);
                    let mut rng =
                        ChaCha8Rng::seed_from_u64(derive_seed(epoch_seed, (i as u64) << 20 | 1));
                    let f = m.forward(&mut t, g, Some(&mut rng))?;
                    let l = graph_loss(&mut t, &f, require_target(g)?, kind, lambda, batch.len());
                    Ok((t.scalar(l), t.backward(l)))
                })
                .collect::<Result<_>>()?;
            let mut grads = Gradients::zeros_like(&model.params);
            let mut loss = 0.0;
            for (l, g) in &parts {
                loss += l;
                grads.accumulate(g);
            }
            if !loss.is_finite() || !grads.is_finite() {
                return Err(NnError::NonFinite(format!(
                    "epoch {epoch} batch {b}: loss {loss}, gradient norm {}, instance seeds {:?}",
                    grads.norm(),
                    batch.iter().map(|&i| train_set[i].seed).collect::<Vec<_>>()
                )));
            }
            if let Some(clip) = cfg.grad_clip {
                let n = grads.norm();
                if n > clip {
                    grads.scale(clip / n);
                }
            }
            opt.step(&mut model.params, &grads, schedule.lr(step));
            step += 1;
            epoch_loss += loss;
        }
        let train_loss = epoch_loss / batches_per_epoch as f64;
        let val_loss = if val_graphs.is_empty() {
            train_loss
        } else {
            mean_loss(model, &val_graphs, kind)?
        };
        if !val_loss.is_finite() {
            return Err(NnError::NonFinite(format!(
                "epoch {epoch}: validation loss {val_loss}"
            )));
        }
        if val_loss < history.best_val_loss {
            history.best_val_loss = val_loss;
            history.best_epoch = epoch;
            best_params = model.params.clone();
        }
        let rec = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr: schedule.lr(step.saturating_sub(1)),
            seconds: started.elapsed().as_secs_f64(),
        };
        if cfg.verbose {
            eprintln!(
                "epoch {:>4}  train {:.5}  val {:.5}  lr {:.2e}  {:.1}s",
                rec.epoch, rec.train_loss, rec.val_loss, rec.lr, rec.seconds
            );
        }
        history.epochs.push(rec);
    }
    model.params = best_params;
    Ok(history)
}
