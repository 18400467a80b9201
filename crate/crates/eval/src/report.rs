//! Per-instance records and their aggregate tables.

use std::collections::BTreeMap;

use jamloc_core::scenario::{Placement, Topology};
use serde::{Deserialize, Serialize};

use crate::metrics::{DistanceBucket, Stats};
use crate::{EvalError, Result};

/// One evaluated instance, or one prefix checkpoint of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub instance: usize,
    /// Raw-sample prefix length for trajectory checkpoints.
    pub checkpoint: Option<usize>,
    pub estimator: String,
    pub error_m: f64,
    /// Error of the unblended regressor output, for confidence models.
    pub gnn_error_m: Option<f64>,
    pub alpha: Option<[f64; 5]>,
    pub placement: Placement,
    pub topology: Topology,
    pub min_jammer_distance_m: f64,
    pub max_noise_dbm: f64,
    pub sigma_db: f64,
    pub tx_power_dbm: f64,
    /// Nodes the estimator saw (after downsampling).
    pub node_count: usize,
    pub fallback: bool,
}

impl InstanceRecord {
    pub fn bucket(&self) -> DistanceBucket {
        DistanceBucket::of(self.min_jammer_distance_m)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub dataset_hash: String,
    pub checkpoint_hash: Option<String>,
    pub seed: Option<u64>,
    pub stride: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub meta: ReportMeta,
    pub records: Vec<InstanceRecord>,
    pub aggregates: BTreeMap<String, Stats>,
}

pub const ALL: &str = "all";
/// Mean over trajectories of each trajectory's checkpoint RMSE (and MAE).
pub const TRAJECTORY_MEAN: &str = "trajectory_mean";

pub fn bucket_key(b: DistanceBucket) -> String {
    format!("bucket={}", b.label())
}

pub fn placement_key(p: Placement) -> String {
    format!("placement={}", p.as_str())
}

pub fn topology_key(t: Topology) -> String {
    format!("topology={}", t.as_str())
}

pub fn cell_key(t: Topology, p: Placement) -> String {
    format!("{}/{}", t.as_str(), p.as_str())
}

fn insert(map: &mut BTreeMap<String, Stats>, key: String, errors: &[f64]) {
    if let Some(s) = Stats::of(errors) {
        map.insert(key, s);
    }
}

fn group<K: Ord>(
    records: &[InstanceRecord],
    key: impl Fn(&InstanceRecord) -> K,
    err: impl Fn(&InstanceRecord) -> Option<f64>,
) -> BTreeMap<K, Vec<f64>> {
    let mut m: BTreeMap<K, Vec<f64>> = BTreeMap::new();
    for r in records {
        if let Some(e) = err(r) {
            m.entry(key(r)).or_default().push(e);
        }
    }
    m
}

fn trajectory_mean(
    records: &[InstanceRecord],
    err: impl Fn(&InstanceRecord) -> Option<f64>,
) -> Option<Stats> {
    let per = group(records, |r| r.instance, err);
    let stats: Vec<Stats> = per.values().filter_map(|e| Stats::of(e)).collect();
    if stats.is_empty() {
        return None;
    }
    let n = stats.len() as f64;
    let rmse = stats.iter().map(|s| s.rmse).sum::<f64>() / n;
    let mae = stats.iter().map(|s| s.mae).sum::<f64>() / n;
    let var = stats.iter().map(|s| (s.rmse - rmse).powi(2)).sum::<f64>() / n;
    Some(Stats {
        count: stats.len(),
        rmse: rmse.max(mae),
        mae,
        error_std: var.sqrt(),
    })
}

/// Aggregates keyed by split. Errors of the unblended output get a `gnn/` prefix.
pub fn aggregate(records: &[InstanceRecord]) -> BTreeMap<String, Stats> {
    let mut out = BTreeMap::new();
    let dynamic = records.iter().any(|r| r.checkpoint.is_some());
    let sources: [(&str, &dyn Fn(&InstanceRecord) -> Option<f64>); 2] =
        [("", &|r| Some(r.error_m)), ("gnn/", &|r| r.gnn_error_m)];
    for (prefix, err) in sources {
        let all: Vec<f64> = records.iter().filter_map(err).collect();
        if all.is_empty() {
            continue;
        }
        insert(&mut out, format!("{prefix}{ALL}"), &all);
        if dynamic {
            for (b, e) in group(records, |r| r.bucket(), err) {
                insert(&mut out, format!("{prefix}{}", bucket_key(b)), &e);
            }
            if let Some(s) = trajectory_mean(records, err) {
                out.insert(format!("{prefix}{TRAJECTORY_MEAN}"), s);
            }
        } else {
            for (p, e) in group(records, |r| r.placement, err) {
                insert(&mut out, format!("{prefix}{}", placement_key(p)), &e);
            }
            for (t, e) in group(records, |r| r.topology, err) {
                insert(&mut out, format!("{prefix}{}", topology_key(t)), &e);
            }
            for ((t, p), e) in group(records, |r| (r.topology, r.placement), err) {
                insert(&mut out, format!("{prefix}{}", cell_key(t, p)), &e);
            }
        }
    }
    out
}

impl EvalReport {
    pub fn new(meta: ReportMeta, records: Vec<InstanceRecord>) -> Self {
        let aggregates = aggregate(&records);
        Self {
            meta,
            records,
            aggregates,
        }
    }

    pub fn get(&self, split: &str) -> Option<&Stats> {
        self.aggregates.get(split)
    }

    /// RMSE of a split, or an error naming it.
    pub fn rmse(&self, split: &str) -> Result<f64> {
        self.get(split)
            .map(|s| s.rmse)
            .ok_or_else(|| EvalError::Invalid(format!("report has no '{split}' split")))
    }

    pub fn fallback_count(&self) -> usize {
        self.records.iter().filter(|r| r.fallback).count()
    }

    /// RMSE ≥ MAE ≥ 0 on every split.
    pub fn check_invariants(&self) -> Result<()> {
        for (k, s) in &self.aggregates {
            if !(s.mae >= 0.0 && s.rmse >= s.mae) {
                return Err(EvalError::Invalid(format!(
                    "split '{k}': rmse {} < mae {}",
                    s.rmse, s.mae
                )));
            }
        }
        Ok(())
    }

    pub fn aggregates_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["split", "count", "rmse_m", "mae_m", "error_std_m"])?;
        for (k, s) in &self.aggregates {
            w.write_record([
                k.clone(),
                s.count.to_string(),
                s.rmse.to_string(),
                s.mae.to_string(),
                s.error_std.to_string(),
            ])?;
        }
        finish(w)
    }

    pub fn records_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "instance",
            "checkpoint",
            "estimator",
            "error_m",
            "gnn_error_m",
            "alpha_r",
            "alpha_sin_theta",
            "alpha_cos_theta",
            "alpha_sin_phi",
            "alpha_cos_phi",
            "placement",
            "topology",
            "min_jammer_distance_m",
            "max_noise_dbm",
            "sigma_db",
            "tx_power_dbm",
            "node_count",
            "fallback",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            let mut row = vec![
                r.instance.to_string(),
                r.checkpoint.map(|c| c.to_string()).unwrap_or_default(),
                r.estimator.clone(),
                r.error_m.to_string(),
                opt(r.gnn_error_m),
            ];
            row.extend((0..5).map(|k| opt(r.alpha.map(|a| a[k]))));
            row.extend([
                r.placement.as_str().to_string(),
                r.topology.as_str().to_string(),
                r.min_jammer_distance_m.to_string(),
                r.max_noise_dbm.to_string(),
                r.sigma_db.to_string(),
                r.tx_power_dbm.to_string(),
                r.node_count.to_string(),
                r.fallback.to_string(),
            ]);
            w.write_record(row)?;
        }
        finish(w)
    }
}

pub(crate) fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| EvalError::Invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| EvalError::Invalid(e.to_string()))
}
