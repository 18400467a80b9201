//! Downsampling of dense trajectories before graph construction.
//!
//! Noise values are averaged in dBm, positions arithmetically.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::scenario::MeasurementSample;
use crate::{Error, Point, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DownsampleMethod {
    WindowAveraging,
    SpatialBinning,
}

impl std::str::FromStr for DownsampleMethod {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "window" | "window_averaging" => Ok(Self::WindowAveraging),
            "binning" | "spatial_binning" => Ok(Self::SpatialBinning),
            other => Err(format!("unknown downsampling method '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DownsampleConfig {
    pub method: DownsampleMethod,
    pub target_nodes: usize,
    pub bin_size_m: f64,
}

impl Default for DownsampleConfig {
    fn default() -> Self {
        Self {
            method: DownsampleMethod::SpatialBinning,
            target_nodes: 1000,
            bin_size_m: 1.0,
        }
    }
}

impl DownsampleConfig {
    pub fn new(method: DownsampleMethod, target_nodes: usize, bin_size_m: f64) -> Result<Self> {
        if target_nodes < 3 {
            return Err(Error::Graph(format!("target_nodes {target_nodes} < 3")));
        }
        if !(bin_size_m > 0.0) {
            return Err(Error::Graph(format!(
                "bin size {bin_size_m} must be positive"
            )));
        }
        Ok(Self {
            method,
            target_nodes,
            bin_size_m,
        })
    }

    pub fn apply(&self, samples: &[MeasurementSample]) -> Vec<MeasurementSample> {
        match self.method {
            DownsampleMethod::WindowAveraging => window_average(samples, self.target_nodes),
            DownsampleMethod::SpatialBinning => {
                spatial_bin_filter(samples, self.target_nodes, self.bin_size_m)
            }
        }
    }
}

#[derive(Default)]
struct Accumulator {
    position: Point,
    noise: f64,
    count: usize,
    first_time: u64,
}

impl Accumulator {
    fn push(&mut self, s: &MeasurementSample) {
        if self.count == 0 || s.time_index < self.first_time {
            self.first_time = s.time_index;
        }
        self.position += s.position;
        self.noise += s.noise_dbm;
        self.count += 1;
    }

    fn mean(&self) -> MeasurementSample {
        let n = self.count as f64;
        MeasurementSample::new(self.position / n, self.noise / n, self.first_time)
    }
}

/// Splits the sequence into `target_nodes` contiguous segments (the first
/// `len % target_nodes` segments take one extra sample) and averages each.
/// Inputs no longer than `target_nodes` are returned unchanged.
pub fn window_average(
    samples: &[MeasurementSample],
    target_nodes: usize,
) -> Vec<MeasurementSample> {
    let n = samples.len();
    if target_nodes == 0 || n <= target_nodes {
        return samples.to_vec();
    }
    let (base, rem) = (n / target_nodes, n % target_nodes);
    let mut out = Vec::with_capacity(target_nodes);
    let mut start = 0;
    for seg in 0..target_nodes {
        let len = base + usize::from(seg < rem);
        let mut acc = Accumulator::default();
        samples[start..start + len].iter().for_each(|s| acc.push(s));
        out.push(acc.mean());
        start += len;
    }
    out
}

/// Averages samples per origin-anchored cubic bin and keeps the
/// `target_nodes` bins with the highest mean noise, in descending noise order
/// (ties: earlier first sample wins).
pub fn spatial_bin_filter(
    samples: &[MeasurementSample],
    target_nodes: usize,
    bin_size_m: f64,
) -> Vec<MeasurementSample> {
    let mut bins: HashMap<[i64; 3], Accumulator> = HashMap::new();
    for s in samples {
        let key = [0, 1, 2].map(|a| (s.position[a] / bin_size_m).floor() as i64);
        bins.entry(key).or_default().push(s);
    }
    let mut out: Vec<MeasurementSample> = bins.values().map(Accumulator::mean).collect();
    out.sort_by(|a, b| {
        b.noise_dbm
            .total_cmp(&a.noise_dbm)
            .then(a.time_index.cmp(&b.time_index))
    });
    out.truncate(target_nodes);
    out
}
