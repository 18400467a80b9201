//! From scenario instances to model-ready graphs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::augment::{self, random_angle, rotate_point};
use super::{GraphMode, MeasurementGraph, NormalizationTransform};
use crate::sampling::DownsampleConfig;
use crate::scenario::{MeasurementSample, ScenarioInstance};
use crate::{Point, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphConfig {
    pub k: usize,
    pub knn_directed: bool,
    pub supernode: bool,
    /// Applied to dynamic instances only.
    pub downsample: Option<DownsampleConfig>,
    /// Radial scale for dynamic graphs; the area diagonal when unset.
    pub dynamic_r_scale: Option<f64>,
    /// Bit `c` set zeroes feature column `c` on every node.
    pub zeroed_features: u32,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            k: 3,
            knn_directed: false,
            supernode: true,
            downsample: Some(DownsampleConfig::default()),
            dynamic_r_scale: None,
            zeroed_features: 0,
        }
    }
}

/// Probabilities of each training-time perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub trajectory_crop: bool,
    pub drop_node: f64,
    pub feature_noise: f64,
    pub feature_noise_sigma: f64,
    pub crop: f64,
    pub rotation: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            trajectory_crop: true,
            drop_node: 0.2,
            feature_noise: 0.0,
            feature_noise_sigma: 0.01,
            crop: 0.0,
            rotation: 0.0,
        }
    }
}

impl AugmentConfig {
    pub fn none() -> Self {
        Self {
            trajectory_crop: false,
            drop_node: 0.0,
            feature_noise: 0.0,
            feature_noise_sigma: 0.01,
            crop: 0.0,
            rotation: 0.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        !self.trajectory_crop
            && self.drop_node <= 0.0
            && self.feature_noise <= 0.0
            && self.crop <= 0.0
            && self.rotation <= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GraphBuilder {
    pub config: GraphConfig,
}

impl GraphBuilder {
    pub fn new(config: GraphConfig) -> Self {
        Self { config }
    }

    pub fn mode(instance: &ScenarioInstance) -> GraphMode {
        if instance.is_dynamic() {
            GraphMode::Dynamic
        } else {
            GraphMode::Static
        }
    }

    /// Samples the graph is built from: downsampled for dynamic instances.
    pub fn prepare_samples(
        &self,
        instance: &ScenarioInstance,
        samples: &[MeasurementSample],
    ) -> Vec<MeasurementSample> {
        match (instance.is_dynamic(), self.config.downsample) {
            (true, Some(ds)) => ds.apply(samples),
            _ => samples.to_vec(),
        }
    }

    /// Evaluation graph of the whole instance.
    pub fn build(&self, instance: &ScenarioInstance) -> Result<MeasurementGraph> {
        let samples = self.prepare_samples(instance, &instance.samples);
        self.build_from_samples(instance, &samples, instance.jammer.position)
    }

    /// Graph of the first `len` raw samples, as seen at an online checkpoint.
    pub fn build_prefix(
        &self,
        instance: &ScenarioInstance,
        len: usize,
    ) -> Result<MeasurementGraph> {
        let samples = self.prepare_samples(
            instance,
            &instance.samples[..len.min(instance.samples.len())],
        );
        self.build_from_samples(instance, &samples, instance.jammer.position)
    }

    /// Graph over already-prepared samples; `jammer` becomes the target.
    pub fn build_from_samples(
        &self,
        instance: &ScenarioInstance,
        samples: &[MeasurementSample],
        jammer: Point,
    ) -> Result<MeasurementGraph> {
        let g = self.build_base(instance, samples, jammer)?;
        self.finish(g)
    }

    fn finish(&self, mut g: MeasurementGraph) -> Result<MeasurementGraph> {
        if self.config.supernode {
            g = g.attach_supernode()?;
        }
        let mask = self.config.zeroed_features;
        if mask != 0 {
            let cols = g.features.cols;
            for r in 0..g.features.rows {
                for (c, v) in g
                    .features
                    .row_mut(r)
                    .iter_mut()
                    .enumerate()
                    .take(cols.min(32))
                {
                    if mask >> c & 1 == 1 {
                        *v = 0.0;
                    }
                }
            }
        }
        Ok(g)
    }

    fn build_base(
        &self,
        instance: &ScenarioInstance,
        samples: &[MeasurementSample],
        jammer: Point,
    ) -> Result<MeasurementGraph> {
        let mode = Self::mode(instance);
        let positions: Vec<Point> = samples.iter().map(|s| s.position).collect();
        let noise: Vec<f64> = samples.iter().map(|s| s.noise_dbm).collect();
        let times: Vec<u64> = samples.iter().map(|s| s.time_index).collect();
        let transform = match mode {
            GraphMode::Static => NormalizationTransform::for_static_area(&instance.area)?,
            GraphMode::Dynamic => NormalizationTransform::for_dynamic_points(
                &positions,
                self.config
                    .dynamic_r_scale
                    .unwrap_or_else(|| instance.area.diagonal()),
            )?,
        };
        MeasurementGraph::build(
            positions,
            noise,
            &times,
            self.config.k,
            self.config.knn_directed,
            mode,
            transform,
            Some(jammer),
        )
    }

    /// Training graph with random perturbations. The supernode, if enabled,
    /// is attached after all of them.
    pub fn build_augmented<R: Rng + ?Sized>(
        &self,
        instance: &ScenarioInstance,
        aug: &AugmentConfig,
        rng: &mut R,
    ) -> Result<MeasurementGraph> {
        let cropped;
        let inst = if aug.trajectory_crop && instance.is_dynamic() {
            cropped = augment::trajectory_crop(instance, rng);
            &cropped
        } else {
            instance
        };
        let mut samples = self.prepare_samples(inst, &inst.samples);
        let mut jammer = inst.jammer.position;
        if aug.drop_node > 0.0 {
            samples = augment::drop_node(&samples, aug.drop_node, rng);
        }
        if aug.crop > 0.0 && rng.random_bool(aug.crop.min(1.0)) {
            samples = augment::crop(&samples, rng);
        }
        if aug.rotation > 0.0 && rng.random_bool(aug.rotation.min(1.0)) {
            let center = inst.area.center();
            let angle = random_angle(rng);
            samples = augment::rotate(&samples, &center, angle);
            jammer = rotate_point(&jammer, &center, angle);
        }
        let mut g = self.build_base(inst, &samples, jammer)?;
        if aug.feature_noise > 0.0 {
            augment::feature_noise(
                &mut g.features,
                aug.feature_noise,
                aug.feature_noise_sigma,
                rng,
            );
        }
        self.finish(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_static, Placement, StaticGenConfig, Topology};

    #[test]
    fn zeroed_features_are_zero_on_every_node() {
        let inst = &generate_static(
            Topology::Random,
            Placement::InsideRegion,
            1,
            3,
            &StaticGenConfig::default(),
        )
        .unwrap()[0];
        let full = GraphBuilder::new(GraphConfig::default())
            .build(inst)
            .unwrap();
        let masked = GraphBuilder::new(GraphConfig {
            zeroed_features: 0b110,
            ..GraphConfig::default()
        })
        .build(inst)
        .unwrap();
        for r in 0..full.features.rows {
            let (a, b) = (full.features.row(r), masked.features.row(r));
            assert_eq!((b[1], b[2]), (0.0, 0.0));
            assert_eq!(a[0], b[0]);
            assert_eq!(a[3..], b[3..]);
        }
    }
}
