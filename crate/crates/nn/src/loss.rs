//! Training objectives.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::model::Forward;
use crate::tape::{Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Squared error of the regressor output alone.
    Gnn,
    /// Squared error of the blended output alone.
    Adapt,
    /// Average of both plus the confidence penalty.
    Cage,
}

impl std::str::FromStr for LossKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gnn" => Ok(LossKind::Gnn),
            "adapt" => Ok(LossKind::Adapt),
            "cage" => Ok(LossKind::Cage),
            other => Err(format!("unknown loss '{other}'")),
        }
    }
}

fn row(t: &mut Tape, v: [f64; 5]) -> Var {
    t.constant(Array2::from_shape_vec((1, 5), v.to_vec()).expect("1x5"))
}

fn sq_err(t: &mut Tape, target: Var, pred: Var) -> Var {
    let d = t.sub(target, pred);
    let d = t.square(d);
    t.sum_all(d)
}

/// One graph's contribution to the batch loss. Batch means are taken by
/// scaling with `1 / batch_size`; the confidence penalty is summed.
pub fn graph_loss(
    t: &mut Tape,
    f: &Forward,
    target: [f64; 5],
    kind: LossKind,
    lambda: f64,
    batch_size: usize,
) -> Var {
    let inv = 1.0 / batch_size as f64;
    let tv = row(t, target);
    let Some(alpha) = f.alpha else {
        let l = sq_err(t, tv, f.gnn);
        return t.scale(l, inv);
    };
    match kind {
        LossKind::Gnn => {
            let l = sq_err(t, tv, f.gnn);
            t.scale(l, inv)
        }
        LossKind::Adapt => {
            let l = sq_err(t, tv, f.output);
            t.scale(l, inv)
        }
        LossKind::Cage => {
            let lg = sq_err(t, tv, f.gnn);
            let la = sq_err(t, tv, f.output);
            let both = t.add(lg, la);
            let mut total = t.scale(both, 0.5 * inv);
            if lambda != 0.0 {
                let ones = row(t, [1.0; 5]);
                let pen = sq_err(t, ones, alpha);
                let pen = t.scale(pen, lambda);
                total = t.add(total, pen);
            }
            total
        }
    }
}

/// Plain evaluation of the batch loss, for checking and reporting.
#[derive(Debug, Clone, Copy)]
pub struct LossSample {
    pub gnn: [f64; 5],
    pub alpha: Option<[f64; 5]>,
    pub wcl: [f64; 5],
    pub target: [f64; 5],
}

pub fn batch_loss(batch: &[LossSample], kind: LossKind, lambda: f64) -> f64 {
    let b = batch.len() as f64;
    let sq =
        |a: &[f64; 5], c: &[f64; 5]| a.iter().zip(c).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let mut total = 0.0;
    for s in batch {
        let l_gnn = sq(&s.target, &s.gnn);
        let Some(alpha) = s.alpha else {
            total += l_gnn / b;
            continue;
        };
        let blend: [f64; 5] =
            std::array::from_fn(|k| alpha[k] * s.gnn[k] + (1.0 - alpha[k]) * s.wcl[k]);
        let l_adapt = sq(&s.target, &blend);
        total += match kind {
            LossKind::Gnn => l_gnn / b,
            LossKind::Adapt => l_adapt / b,
            LossKind::Cage => 0.5 * (l_gnn + l_adapt) / b + lambda * sq(&[1.0; 5], &alpha),
        };
    }
    total
}
