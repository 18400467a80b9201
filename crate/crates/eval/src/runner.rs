//! Running estimators over datasets.

use jamloc_core::estimators::{estimate, wcl, Estimator, EstimatorContext};
use jamloc_core::graph::{GraphBuilder, GraphConfig};
use jamloc_core::sampling::DownsampleConfig;
use jamloc_core::scenario::ScenarioInstance;
use jamloc_core::Point;
use jamloc_nn::Model;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics::DistanceBucket;
use crate::report::{EvalReport, InstanceRecord, ReportMeta};
use crate::Result;

pub const DEFAULT_STRIDE: usize = 50;

/// Something that maps measurements to a jammer position.
#[derive(Debug, Clone)]
pub enum Predictor {
    Classical {
        estimator: Estimator,
        /// Applied to trajectories before estimation.
        downsample: Option<DownsampleConfig>,
    },
    Learned {
        model: Box<Model>,
        graph: GraphConfig,
    },
}

/// One prediction in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub position: Point,
    pub gnn_position: Option<Point>,
    pub alpha: Option<[f64; 5]>,
    pub node_count: usize,
    pub fallback: bool,
}

impl Predictor {
    pub fn classical(estimator: Estimator, graph: &GraphConfig) -> Self {
        Predictor::Classical {
            estimator,
            downsample: graph.downsample,
        }
    }

    pub fn learned(model: Model, graph: GraphConfig) -> Self {
        Predictor::Learned {
            model: Box::new(model),
            graph,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Predictor::Classical { estimator, .. } => estimator.as_str(),
            Predictor::Learned { model, .. } => model.config.arch.as_str(),
        }
    }

    /// Predicts from the first `len` raw samples of `instance`.
    pub fn predict(&self, instance: &ScenarioInstance, len: usize) -> Result<Outcome> {
        let raw = &instance.samples[..len.min(instance.samples.len())];
        match self {
            Predictor::Classical {
                estimator,
                downsample,
            } => {
                let samples = match (instance.is_dynamic(), downsample) {
                    (true, Some(ds)) => ds.apply(raw),
                    _ => raw.to_vec(),
                };
                let ctx = EstimatorContext::for_instance(instance);
                let r = match estimate(*estimator, &samples, &ctx) {
                    Ok(r) => r,
                    Err(_) => {
                        let mut r = wcl(&samples)?;
                        r.fallback = true;
                        r
                    }
                };
                Ok(Outcome {
                    position: r.position,
                    gnn_position: None,
                    alpha: None,
                    node_count: samples.len(),
                    fallback: r.fallback,
                })
            }
            Predictor::Learned { model, graph } => {
                let builder = GraphBuilder::new(*graph);
                let attempt = || -> Result<Outcome> {
                    let g = builder.build_prefix(instance, len)?;
                    let (p, position, gnn) = model.predict_graph(&g)?;
                    Ok(Outcome {
                        position,
                        gnn_position: p.alpha.map(|_| gnn),
                        alpha: p.alpha,
                        node_count: g.num_measurements,
                        fallback: false,
                    })
                };
                match attempt() {
                    Ok(o) => Ok(o),
                    Err(_) => {
                        let samples = builder.prepare_samples(instance, raw);
                        let r = wcl(&samples)?;
                        Ok(Outcome {
                            position: r.position,
                            gnn_position: None,
                            alpha: None,
                            node_count: samples.len(),
                            fallback: true,
                        })
                    }
                }
            }
        }
    }

    fn record(
        &self,
        index: usize,
        instance: &ScenarioInstance,
        len: usize,
        checkpoint: Option<usize>,
    ) -> Result<InstanceRecord> {
        let out = self.predict(instance, len)?;
        let seen = &instance.samples[..len.min(instance.samples.len())];
        let j = instance.jammer.position;
        let min_d = seen
            .iter()
            .map(|s| (s.position - j).norm())
            .fold(f64::INFINITY, f64::min);
        let max_noise = seen
            .iter()
            .map(|s| s.noise_dbm)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(InstanceRecord {
            instance: index,
            checkpoint,
            estimator: self.name().to_string(),
            error_m: (out.position - j).norm(),
            gnn_error_m: out.gnn_position.map(|g| (g - j).norm()),
            alpha: out.alpha,
            placement: instance.placement,
            topology: instance.topology,
            min_jammer_distance_m: min_d,
            max_noise_dbm: max_noise,
            sigma_db: instance.propagation.sigma,
            tx_power_dbm: instance.jammer.tx_power_dbm,
            node_count: out.node_count,
            fallback: out.fallback,
        })
    }
}

/// One record per instance, split by topology and placement.
pub fn evaluate_static(
    predictor: &Predictor,
    instances: &[ScenarioInstance],
    meta: ReportMeta,
) -> Result<EvalReport> {
    let records = instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| predictor.record(i, inst, inst.samples.len(), None))
        .collect::<Result<Vec<_>>>()?;
    let report = EvalReport::new(meta, records);
    report.check_invariants()?;
    Ok(report)
}

/// Raw-sample prefix lengths `stride, 2·stride, …` plus the full length.
pub fn checkpoints(len: usize, stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    let mut v: Vec<usize> = (1..)
        .map(|i| i * stride)
        .take_while(|&c| c < len)
        .filter(|&c| c >= 3)
        .collect();
    if len >= 3 {
        v.push(len);
    }
    v
}

/// One record per prefix checkpoint, bucketed by the closest approach so far.
pub fn evaluate_dynamic(
    predictor: &Predictor,
    instances: &[ScenarioInstance],
    stride: usize,
    meta: ReportMeta,
) -> Result<EvalReport> {
    let jobs: Vec<(usize, usize)> = instances
        .iter()
        .enumerate()
        .flat_map(|(i, inst)| {
            checkpoints(inst.samples.len(), stride)
                .into_iter()
                .map(move |c| (i, c))
        })
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(i, c)| predictor.record(i, &instances[i], c, Some(c)))
        .collect::<Result<Vec<_>>>()?;
    let report = EvalReport::new(
        ReportMeta {
            stride: Some(stride),
            ..meta
        },
        records,
    );
    report.check_invariants()?;
    Ok(report)
}

/// Dispatches on whether the dataset holds trajectories.
pub fn evaluate(
    predictor: &Predictor,
    instances: &[ScenarioInstance],
    stride: usize,
    meta: ReportMeta,
) -> Result<EvalReport> {
    if instances.iter().any(|i| i.is_dynamic()) {
        evaluate_dynamic(predictor, instances, stride, meta)
    } else {
        evaluate_static(predictor, instances, meta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidencePoint {
    pub instance: usize,
    pub checkpoint: Option<usize>,
    pub min_distance_m: f64,
    pub alpha: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketConfidence {
    pub bucket: DistanceBucket,
    pub count: usize,
    pub mean_alpha: [f64; 5],
}

impl BucketConfidence {
    /// Mean over the five components.
    pub fn overall(&self) -> f64 {
        self.mean_alpha.iter().sum::<f64>() / 5.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceProfile {
    pub points: Vec<ConfidencePoint>,
    pub buckets: Vec<BucketConfidence>,
}

impl ConfidenceProfile {
    pub fn from_report(report: &EvalReport) -> Self {
        let points: Vec<ConfidencePoint> = report
            .records
            .iter()
            .filter_map(|r| {
                r.alpha.map(|alpha| ConfidencePoint {
                    instance: r.instance,
                    checkpoint: r.checkpoint,
                    min_distance_m: r.min_jammer_distance_m,
                    alpha,
                })
            })
            .collect();
        let buckets = DistanceBucket::ALL
            .into_iter()
            .filter_map(|b| {
                let inside: Vec<&ConfidencePoint> = points
                    .iter()
                    .filter(|p| DistanceBucket::of(p.min_distance_m) == b)
                    .collect();
                if inside.is_empty() {
                    return None;
                }
                let n = inside.len() as f64;
                let mean_alpha =
                    std::array::from_fn(|k| inside.iter().map(|p| p.alpha[k]).sum::<f64>() / n);
                Some(BucketConfidence {
                    bucket: b,
                    count: inside.len(),
                    mean_alpha,
                })
            })
            .collect();
        Self { points, buckets }
    }

    pub fn bucket(&self, b: DistanceBucket) -> Option<&BucketConfidence> {
        self.buckets.iter().find(|x| x.bucket == b)
    }

    pub fn mean_alpha(&self) -> f64 {
        if self.points.is_empty() {
            return f64::NAN;
        }
        self.points
            .iter()
            .map(|p| p.alpha.iter().sum::<f64>() / 5.0)
            .sum::<f64>()
            / self.points.len() as f64
    }
}

/// α against minimum jammer distance along every checkpoint.
pub fn confidence_profile(
    predictor: &Predictor,
    instances: &[ScenarioInstance],
    stride: usize,
) -> Result<ConfidenceProfile> {
    let report = evaluate(predictor, instances, stride, ReportMeta::default())?;
    Ok(ConfidenceProfile::from_report(&report))
}
