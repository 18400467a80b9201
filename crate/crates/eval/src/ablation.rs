//! Ablation grids sharing one dataset split and seed.

use jamloc_core::graph::{AugmentConfig, GraphMode};
use jamloc_core::sampling::{DownsampleConfig, DownsampleMethod};
use jamloc_nn::model::{ConfHead, ConfInput, ConfOut, Pooling, RegInput};
use jamloc_nn::{LossKind, SnEdges};
use serde::{Deserialize, Serialize};

use crate::experiment::{Experiment, Split};
use crate::report::{ALL, TRAJECTORY_MEAN};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationKind {
    K,
    Pooling,
    Augmentation,
    CageComponents,
    Downsampling,
    NodeFeatures,
}

impl AblationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AblationKind::K => "k",
            AblationKind::Pooling => "pooling",
            AblationKind::Augmentation => "augmentation",
            AblationKind::CageComponents => "cage_components",
            AblationKind::Downsampling => "downsampling",
            AblationKind::NodeFeatures => "node_features",
        }
    }
}

impl std::str::FromStr for AblationKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            AblationKind::K,
            AblationKind::Pooling,
            AblationKind::Augmentation,
            AblationKind::CageComponents,
            AblationKind::Downsampling,
            AblationKind::NodeFeatures,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| format!("unknown ablation '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationCell {
    pub label: String,
    pub experiment: Experiment,
}

fn cell(
    label: impl Into<String>,
    base: &Experiment,
    f: impl FnOnce(&mut Experiment),
) -> AblationCell {
    let mut experiment = base.clone();
    f(&mut experiment);
    AblationCell {
        label: label.into(),
        experiment,
    }
}

fn feature_mask(mode: GraphMode, names: &[&str]) -> u32 {
    mode.feature_names()
        .iter()
        .enumerate()
        .filter(|(_, n)| names.contains(n))
        .fold(0, |m, (c, _)| m | 1 << c)
}

/// Cells of one ablation, each a modified copy of `base`.
pub fn ablation_grid(kind: AblationKind, base: &Experiment, mode: GraphMode) -> Vec<AblationCell> {
    match kind {
        AblationKind::K => [3, 5, 7, 11]
            .into_iter()
            .map(|k| cell(format!("k={k}"), base, |e| e.graph.k = k))
            .collect(),
        AblationKind::Pooling => [
            ("max", Pooling::Max),
            ("mean", Pooling::Mean),
            ("sum", Pooling::Sum),
            ("attention", Pooling::Attention),
        ]
        .into_iter()
        .map(|(l, p)| cell(l, base, |e| e.model.pooling = p))
        .collect(),
        AblationKind::Augmentation => {
            let none = AugmentConfig {
                trajectory_crop: base.train.augment.trajectory_crop,
                ..AugmentConfig::none()
            };
            let with = |f: fn(&mut AugmentConfig)| {
                let mut a = none;
                f(&mut a);
                a
            };
            let grid: Vec<(String, AugmentConfig)> = vec![
                ("none".into(), none),
                (
                    "feature_noise p=1.0".into(),
                    with(|a| a.feature_noise = 1.0),
                ),
                (
                    "feature_noise p=0.5".into(),
                    with(|a| a.feature_noise = 0.5),
                ),
                (
                    "feature_noise p=0.1".into(),
                    with(|a| a.feature_noise = 0.1),
                ),
                ("drop_node p=0.5".into(), with(|a| a.drop_node = 0.5)),
                ("drop_node p=0.2".into(), with(|a| a.drop_node = 0.2)),
                ("drop_node p=0.1".into(), with(|a| a.drop_node = 0.1)),
                ("rotation p=0.5".into(), with(|a| a.rotation = 0.5)),
                ("crop p=0.5".into(), with(|a| a.crop = 0.5)),
                (
                    "crop+drop_node".into(),
                    with(|a| {
                        a.crop = 0.5;
                        a.drop_node = 0.2;
                    }),
                ),
                (
                    "drop_node+feature_noise".into(),
                    with(|a| {
                        a.drop_node = 0.2;
                        a.feature_noise = 0.5;
                    }),
                ),
                (
                    "crop+feature_noise".into(),
                    with(|a| {
                        a.crop = 0.5;
                        a.feature_noise = 0.5;
                    }),
                ),
            ];
            grid.into_iter()
                .map(|(l, a)| cell(l, base, |e| e.train.augment = a))
                .collect()
        }
        AblationKind::CageComponents => vec![
            cell("best", base, |_| {}),
            cell("sn_edges=undirected", base, |e| {
                e.model.cage.sn_edges = SnEdges::Undirected
            }),
            cell("sn_edges=none", base, |e| {
                e.model.cage.sn_edges = SnEdges::None
            }),
            cell("conf_head=linear", base, |e| {
                e.model.cage.conf_head = ConfHead::Linear
            }),
            cell("conf_out=single", base, |e| {
                e.model.cage.conf_out = ConfOut::Single
            }),
            cell("conf_in=pooled_with_sn", base, |e| {
                e.model.cage.conf_in = ConfInput::PooledWithSn
            }),
            cell("reg_in=pooled_with_sn", base, |e| {
                e.model.cage.reg_in = RegInput::PooledWithSn
            }),
            cell("loss=adapt", base, |e| e.train.loss = Some(LossKind::Adapt)),
        ],
        AblationKind::Downsampling => {
            let mut v = Vec::new();
            for (name, method) in [
                ("window", DownsampleMethod::WindowAveraging),
                ("binning", DownsampleMethod::SpatialBinning),
            ] {
                for target in [200, 600, 800, 1000] {
                    v.push(cell(format!("{name}/{target}"), base, |e| {
                        let bin = e.graph.downsample.map(|d| d.bin_size_m).unwrap_or(1.0);
                        e.graph.downsample = Some(DownsampleConfig {
                            method,
                            target_nodes: target,
                            bin_size_m: bin,
                        });
                    }));
                }
            }
            v
        }
        AblationKind::NodeFeatures => {
            let mut groups: Vec<(&str, Vec<&str>)> = vec![
                ("all", vec![]),
                (
                    "-angular",
                    vec!["r", "sin_theta", "cos_theta", "sin_phi", "cos_phi"],
                ),
                ("-cartesian", vec!["x", "y", "z"]),
                ("-noise_stats", vec!["median", "max", "delta_noise"]),
                (
                    "-wcent",
                    vec!["wcent_x", "wcent_y", "wcent_z", "wcent_dist"],
                ),
            ];
            if mode == GraphMode::Dynamic {
                groups.push(("-direction", vec!["dir_x", "dir_y", "dir_z"]));
                groups.push(("-delta_noise_temp", vec!["delta_noise_temp"]));
            }
            groups
                .into_iter()
                .map(|(l, names)| {
                    cell(l, base, |e| {
                        e.graph.zeroed_features = feature_mask(mode, &names)
                    })
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub ablation: String,
    pub cell: String,
    /// `ok` or the failure message.
    pub status: String,
    pub count: usize,
    pub rmse_m: Option<f64>,
    pub mae_m: Option<f64>,
    /// Trajectory-mean RMSE for dynamic data.
    pub trajectory_rmse_m: Option<f64>,
    pub gnn_rmse_m: Option<f64>,
    pub best_epoch: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, cell: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.cell == cell)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "ablation",
            "cell",
            "status",
            "count",
            "rmse_m",
            "mae_m",
            "trajectory_rmse_m",
            "gnn_rmse_m",
            "best_epoch",
        ])?;
        let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.ablation.clone(),
                r.cell.clone(),
                r.status.clone(),
                r.count.to_string(),
                f(r.rmse_m),
                f(r.mae_m),
                f(r.trajectory_rmse_m),
                f(r.gnn_rmse_m),
                r.best_epoch.map(|e| e.to_string()).unwrap_or_default(),
            ])?;
        }
        crate::report::finish(w)
    }
}

/// Runs one cell; failures become rows instead of errors.
pub fn run_cell(kind: AblationKind, cell: &AblationCell, split: &Split) -> AblationRow {
    let mut row = AblationRow {
        ablation: kind.as_str().into(),
        cell: cell.label.clone(),
        status: "ok".into(),
        count: 0,
        rmse_m: None,
        mae_m: None,
        trajectory_rmse_m: None,
        gnn_rmse_m: None,
        best_epoch: None,
    };
    match cell.experiment.run(split) {
        Ok((_, history, report)) => {
            let all = report.get(ALL);
            row.count = all.map_or(0, |s| s.count);
            row.rmse_m = all.map(|s| s.rmse);
            row.mae_m = all.map(|s| s.mae);
            row.trajectory_rmse_m = report.get(TRAJECTORY_MEAN).map(|s| s.rmse);
            row.gnn_rmse_m = report.get("gnn/all").map(|s| s.rmse);
            row.best_epoch = Some(history.best_epoch);
        }
        Err(e) => row.status = format!("failed: {e}"),
    }
    row
}

pub fn run_ablation(kind: AblationKind, base: &Experiment, split: &Split) -> AblationTable {
    let mode = if split.train.iter().any(|i| i.is_dynamic()) {
        GraphMode::Dynamic
    } else {
        GraphMode::Static
    };
    AblationTable {
        rows: ablation_grid(kind, base, mode)
            .iter()
            .map(|c| run_cell(kind, c, split))
            .collect(),
    }
}
