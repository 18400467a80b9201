//! Training-time perturbations. All operate on sample lists before the graph
//! is built, except [`feature_noise`], which perturbs a finished feature matrix.

use std::f64::consts::TAU;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::scenario::{MeasurementSample, ScenarioInstance, DETECTION_THRESHOLD_DBM};
use crate::Point;

/// Attempts before an augmentation falls back to the identity.
const MAX_RETRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentKind {
    DropNode,
    FeatureNoise,
    Crop,
    Rotation,
}

impl std::str::FromStr for AugmentKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "drop_node" | "dropnode" => Ok(Self::DropNode),
            "feature_noise" => Ok(Self::FeatureNoise),
            "crop" => Ok(Self::Crop),
            "rotation" | "rotate" => Ok(Self::Rotation),
            other => Err(format!("unknown augmentation '{other}'")),
        }
    }
}

/// Removes each sample with probability `p`, redrawing the mask whenever
/// fewer than 3 would survive.
pub fn drop_node<R: Rng + ?Sized>(
    samples: &[MeasurementSample],
    p: f64,
    rng: &mut R,
) -> Vec<MeasurementSample> {
    if samples.len() < 3 || p <= 0.0 {
        return samples.to_vec();
    }
    for _ in 0..MAX_RETRIES {
        let kept: Vec<MeasurementSample> = samples
            .iter()
            .filter(|_| !rng.random_bool(p.min(1.0)))
            .copied()
            .collect();
        if kept.len() >= 3 {
            return kept;
        }
    }
    samples.to_vec()
}

/// Keeps the samples inside the bounding box spanned by the three
/// strongest samples and one uniformly chosen sample.
pub fn crop<R: Rng + ?Sized>(samples: &[MeasurementSample], rng: &mut R) -> Vec<MeasurementSample> {
    if samples.len() < 3 {
        return samples.to_vec();
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| {
        samples[b]
            .noise_dbm
            .total_cmp(&samples[a].noise_dbm)
            .then(a.cmp(&b))
    });
    let anchor = rng.random_range(0..samples.len());
    let corners = order[..3]
        .iter()
        .copied()
        .chain([anchor])
        .map(|i| samples[i].position);
    let (lo, hi) = corners.fold(
        (
            Point::repeat(f64::INFINITY),
            Point::repeat(f64::NEG_INFINITY),
        ),
        |(lo, hi), p| (lo.inf(&p), hi.sup(&p)),
    );
    samples
        .iter()
        .filter(|s| (0..3).all(|a| s.position[a] >= lo[a] && s.position[a] <= hi[a]))
        .copied()
        .collect()
}

/// Rotates `p` in the xy-plane by `angle` about `center`.
pub fn rotate_point(p: &Point, center: &Point, angle: f64) -> Point {
    let (s, c) = angle.sin_cos();
    let v = p - center;
    // written as an offset from p so a zero angle is exact
    p + Point::new((c - 1.0) * v.x - s * v.y, s * v.x + (c - 1.0) * v.y, 0.0)
}

pub fn rotate(samples: &[MeasurementSample], center: &Point, angle: f64) -> Vec<MeasurementSample> {
    samples
        .iter()
        .map(|s| {
            MeasurementSample::new(
                rotate_point(&s.position, center, angle),
                s.noise_dbm,
                s.time_index,
            )
        })
        .collect()
}

pub fn random_angle<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(0.0..TAU)
}

/// Adds `N(0, sigma_frac · column range)` noise with probability `p` to the
/// entries of up to half of the columns, chosen uniformly.
pub fn feature_noise<R: Rng + ?Sized>(
    features: &mut FeatureMatrix,
    p: f64,
    sigma_frac: f64,
    rng: &mut R,
) {
    if features.rows < 3 || features.cols < 2 || p <= 0.0 {
        return;
    }
    let count = rng.random_range(1..=features.cols / 2);
    for col in sample_indices(rng, features.cols, count).into_iter() {
        let (lo, hi) = (0..features.rows)
            .map(|i| features.get(i, col))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        let sigma = sigma_frac * (hi - lo);
        if !(sigma > 0.0) {
            continue;
        }
        let normal = Normal::new(0.0, sigma).expect("positive sigma");
        for i in 0..features.rows {
            if rng.random_bool(p.min(1.0)) {
                features.row_mut(i)[col] += normal.sample(rng);
            }
        }
    }
}

/// Random contiguous sub-trajectory with at least 3 samples at or above the
/// detection threshold; the full instance after repeated failures.
pub fn trajectory_crop<R: Rng + ?Sized>(
    instance: &ScenarioInstance,
    rng: &mut R,
) -> ScenarioInstance {
    let n = instance.samples.len();
    if !instance.is_dynamic() || n < 3 {
        return instance.clone();
    }
    for _ in 0..MAX_RETRIES {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        let window = &instance.samples[a.min(b)..=a.max(b)];
        if window
            .iter()
            .filter(|s| s.noise_dbm >= DETECTION_THRESHOLD_DBM)
            .count()
            >= 3
        {
            return instance.with_samples(window.to_vec());
        }
    }
    instance.clone()
}
