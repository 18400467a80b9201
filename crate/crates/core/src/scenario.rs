//! Scenario instances and their generators.
//!
//! Static scenarios place 2D device topologies in `[0, 1500]²`; dynamic ones
//! fly a single device on an inward spiral around the jammer in
//! `[0, 500]² × [0, 50]`. Every instance derives its own ChaCha8 stream from
//! `(seed, index)`, so generation is parallel and reproducible.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, LogNormal, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::in_convex_hull_xy;
use crate::rf::{self, JammerConfig, PropagationParams};
use crate::{Bounds, Error, Point, Result};

/// A node counts as jammed when its noise floor exceeds ambient by this margin (dB).
pub const JAMMED_MARGIN_DB: f64 = 3.0;

/// At least one measurement must reach this level (dBm).
pub const DETECTION_THRESHOLD_DBM: f64 = -80.0;

/// Attempts per instance before generation gives up.
pub const RETRY_BUDGET: usize = 1000;

pub fn jammed_threshold_dbm() -> f64 {
    rf::AMBIENT_NOISE_DBM + JAMMED_MARGIN_DB
}

/// One `(position, noise floor)` observation. Serialized as `[x, y, z, noise, t]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "SampleRepr", into = "SampleRepr")]
pub struct MeasurementSample {
    pub position: Point,
    pub noise_dbm: f64,
    pub time_index: u64,
}

type SampleRepr = (f64, f64, f64, f64, u64);

impl From<SampleRepr> for MeasurementSample {
    fn from((x, y, z, noise_dbm, time_index): SampleRepr) -> Self {
        Self {
            position: Point::new(x, y, z),
            noise_dbm,
            time_index,
        }
    }
}

impl From<MeasurementSample> for SampleRepr {
    fn from(s: MeasurementSample) -> Self {
        (
            s.position.x,
            s.position.y,
            s.position.z,
            s.noise_dbm,
            s.time_index,
        )
    }
}

impl MeasurementSample {
    pub fn new(position: Point, noise_dbm: f64, time_index: u64) -> Self {
        Self {
            position,
            noise_dbm,
            time_index,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Circle,
    Triangle,
    Rectangle,
    Random,
    Trajectory,
}

impl Topology {
    pub const STATIC: [Topology; 4] = [
        Topology::Circle,
        Topology::Triangle,
        Topology::Rectangle,
        Topology::Random,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Topology::Circle => "circle",
            Topology::Triangle => "triangle",
            Topology::Rectangle => "rectangle",
            Topology::Random => "random",
            Topology::Trajectory => "trajectory",
        }
    }
}

impl std::str::FromStr for Topology {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "circle" => Ok(Topology::Circle),
            "triangle" => Ok(Topology::Triangle),
            "rectangle" => Ok(Topology::Rectangle),
            "random" => Ok(Topology::Random),
            "trajectory" => Ok(Topology::Trajectory),
            other => Err(format!("unknown topology '{other}'")),
        }
    }
}

/// Jammer location relative to the sampled region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Placement {
    #[serde(rename = "inside_R")]
    InsideRegion,
    #[serde(rename = "outside_R")]
    OutsideRegion,
    #[serde(rename = "n/a")]
    NotApplicable,
}

impl Placement {
    pub fn as_str(&self) -> &'static str {
        match self {
            Placement::InsideRegion => "inside",
            Placement::OutsideRegion => "outside",
            Placement::NotApplicable => "n/a",
        }
    }
}

impl std::str::FromStr for Placement {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "inside" | "inside_R" => Ok(Placement::InsideRegion),
            "outside" | "outside_R" => Ok(Placement::OutsideRegion),
            "n/a" | "none" => Ok(Placement::NotApplicable),
            other => Err(format!("unknown placement '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioInstance {
    pub samples: Vec<MeasurementSample>,
    pub jammer: JammerConfig,
    pub propagation: PropagationParams,
    pub topology: Topology,
    pub placement: Placement,
    pub dimensionality: u8,
    pub seed: u64,
    pub area: Bounds,
}

impl ScenarioInstance {
    pub fn positions(&self) -> Vec<Point> {
        self.samples.iter().map(|s| s.position).collect()
    }

    pub fn is_dynamic(&self) -> bool {
        self.topology == Topology::Trajectory
    }

    /// Smallest device-to-jammer distance over all samples (m).
    pub fn min_jammer_distance(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| (s.position - self.jammer.position).norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_noise_dbm(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.noise_dbm)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn jammed_count(&self) -> usize {
        count_jammed(&self.samples)
    }

    /// Same instance restricted to a subset of samples.
    pub fn with_samples(&self, samples: Vec<MeasurementSample>) -> Self {
        Self {
            samples,
            ..self.clone()
        }
    }

    /// Checks the instance invariants: enough jammed samples, one detection
    /// above [`DETECTION_THRESHOLD_DBM`], finite data, jammer inside the area
    /// and a placement label consistent with the sample hull.
    pub fn validate(&self) -> Result<()> {
        if self.dimensionality != 2 && self.dimensionality != 3 {
            return Err(Error::InvalidInstance(format!(
                "dimensionality {} not in {{2, 3}}",
                self.dimensionality
            )));
        }
        for (i, s) in self.samples.iter().enumerate() {
            if !s.position.iter().all(|v| v.is_finite()) || !s.noise_dbm.is_finite() {
                return Err(Error::InvalidInstance(format!("sample {i} is not finite")));
            }
            if s.noise_dbm < self.propagation.ambient_noise_dbm - 1e-9 {
                return Err(Error::InvalidInstance(format!(
                    "sample {i} noise {} below ambient floor",
                    s.noise_dbm
                )));
            }
        }
        let jammed = self.jammed_count();
        if jammed < 3 {
            return Err(Error::InvalidInstance(format!(
                "only {jammed} jammed samples"
            )));
        }
        if self.max_noise_dbm() < DETECTION_THRESHOLD_DBM {
            return Err(Error::InvalidInstance(
                "no sample reaches the detection threshold".into(),
            ));
        }
        if !self.area.contains(&self.jammer.position) {
            return Err(Error::InvalidInstance("jammer outside the area".into()));
        }
        let expected = match self.placement {
            Placement::InsideRegion => Some(true),
            Placement::OutsideRegion => Some(false),
            Placement::NotApplicable => None,
        };
        if let Some(inside) = expected {
            if in_convex_hull_xy(&self.positions(), &self.jammer.position) != inside {
                return Err(Error::InvalidInstance(
                    "placement label contradicts hull test".into(),
                ));
            }
        }
        Ok(())
    }
}

pub fn count_jammed(samples: &[MeasurementSample]) -> usize {
    let thr = jammed_threshold_dbm();
    samples.iter().filter(|s| s.noise_dbm >= thr).count()
}

/// SplitMix64 finalizer; maps `(seed, index)` to an independent instance seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Static generation parameters. Recorded in dataset headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticGenConfig {
    pub area: Bounds,
    pub comm_range_m: f64,
    pub min_nodes: usize,
    /// Hard ceiling on node count.
    pub node_cap: usize,
    /// Node-count scaling factor `Beta(a, b)`.
    pub node_beta: (f64, f64),
    /// Transmit power drawn as `lo + (hi - lo) · Beta(a, b)`.
    pub tx_power_range_dbm: (f64, f64),
    pub tx_power_beta: (f64, f64),
    pub urban_gamma: (f64, f64),
    pub shadowed_urban_gamma: (f64, f64),
    pub shadowed_urban_fraction: f64,
    pub sigma_range_db: (f64, f64),
}

impl Default for StaticGenConfig {
    fn default() -> Self {
        Self {
            area: Bounds::square(1500.0),
            comm_range_m: 200.0,
            min_nodes: 3,
            node_cap: 122,
            node_beta: (2.0, 5.0),
            tx_power_range_dbm: (20.0, 59.0),
            tx_power_beta: (4.0, 1.0),
            urban_gamma: (2.7, 3.5),
            shadowed_urban_gamma: (3.0, 5.0),
            shadowed_urban_fraction: 0.05,
            sigma_range_db: (2.0, 6.0),
        }
    }
}

impl StaticGenConfig {
    pub fn with_area(area: Bounds) -> Self {
        Self {
            area,
            ..Self::default()
        }
    }

    /// Largest node count: two devices per communication-range cell of the
    /// area, capped at `node_cap`.
    pub fn max_nodes(&self) -> usize {
        let e = self.area.extent();
        let cells = e.x * e.y / (self.comm_range_m * self.comm_range_m);
        ((2.0 * cells).ceil() as usize).clamp(self.min_nodes, self.node_cap)
    }

    fn sample_node_count(&self, rng: &mut ChaCha8Rng) -> usize {
        let (a, b) = self.node_beta;
        let f: f64 = Beta::new(a, b).expect("valid beta").sample(rng);
        let span = (self.max_nodes() - self.min_nodes) as f64;
        self.min_nodes + (f * span).round() as usize
    }

    fn sample_propagation(&self, rng: &mut ChaCha8Rng) -> PropagationParams {
        let (lo, hi) = if rng.random::<f64>() < self.shadowed_urban_fraction {
            self.shadowed_urban_gamma
        } else {
            self.urban_gamma
        };
        let gamma = rng.random_range(lo..=hi);
        let sigma = rng.random_range(self.sigma_range_db.0..=self.sigma_range_db.1);
        PropagationParams::new(gamma, sigma)
    }

    fn sample_tx_power(&self, rng: &mut ChaCha8Rng) -> f64 {
        let (a, b) = self.tx_power_beta;
        let f: f64 = Beta::new(a, b).expect("valid beta").sample(rng);
        let (lo, hi) = self.tx_power_range_dbm;
        lo + (hi - lo) * f
    }
}

fn uniform_in(area: &Bounds, rng: &mut ChaCha8Rng) -> Point {
    let mut p = Point::zeros();
    for a in 0..3 {
        p[a] = if area.max[a] > area.min[a] {
            rng.random_range(area.min[a]..=area.max[a])
        } else {
            area.min[a]
        };
    }
    p
}

/// Random placement of a sub-region of size `w × h` inside the planar area.
fn place_box(area: &Bounds, w: f64, h: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let ext = area.extent();
    let x0 = area.min.x + rng.random::<f64>() * (ext.x - w).max(0.0);
    let y0 = area.min.y + rng.random::<f64>() * (ext.y - h).max(0.0);
    (x0, y0)
}

/// Node layout for a static topology. Circle and triangle are perimeter-bounded,
/// rectangle (jittered grid) and random (uniform) cover a surface.
pub fn sample_layout(
    topology: Topology,
    n: usize,
    cfg: &StaticGenConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Point>> {
    let area = &cfg.area;
    let ext = area.extent();
    let half_side = 0.5 * ext.x.min(ext.y);
    let pts = match topology {
        Topology::Circle | Topology::Triangle => {
            let r_hi = (n as f64 * 160.0 / TAU).clamp(80.0, 700.0).min(half_side);
            let r = rng.random_range(50.0f64.min(r_hi)..=r_hi);
            let cx = rng.random_range(area.min.x + r..=area.max.x - r);
            let cy = rng.random_range(area.min.y + r..=area.max.y - r);
            if topology == Topology::Circle {
                let mut angles: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..TAU)).collect();
                angles.sort_by(f64::total_cmp);
                angles
                    .into_iter()
                    .map(|t| Point::new(cx + r * t.cos(), cy + r * t.sin(), 0.0))
                    .collect()
            } else {
                let a0 = rng.random_range(0.0..TAU);
                let a1 = a0 + rng.random_range(2.0 * PI / 3.0 - 0.6..=2.0 * PI / 3.0 + 0.6);
                let a2 = a1 + rng.random_range(2.0 * PI / 3.0 - 0.6..=2.0 * PI / 3.0 + 0.6);
                let v: Vec<Point> = [a0, a1, a2]
                    .iter()
                    .map(|t| Point::new(cx + r * t.cos(), cy + r * t.sin(), 0.0))
                    .collect();
                let lens: Vec<f64> = (0..3).map(|i| (v[(i + 1) % 3] - v[i]).norm()).collect();
                let perimeter: f64 = lens.iter().sum();
                (0..n)
                    .map(|_| {
                        let mut s = rng.random_range(0.0..perimeter);
                        let mut side = 0;
                        while side < 2 && s > lens[side] {
                            s -= lens[side];
                            side += 1;
                        }
                        let t = (s / lens[side]).min(1.0);
                        v[side] + (v[(side + 1) % 3] - v[side]) * t
                    })
                    .collect()
            }
        }
        Topology::Rectangle => {
            let aspect = rng.random_range(0.5..=2.0);
            let cols = ((n as f64 * aspect).sqrt().round() as usize).max(1);
            let rows = n.div_ceil(cols);
            let mut spacing = rng.random_range(40.0..=150.0);
            let span = |k: usize, s: f64| (k.max(2) - 1) as f64 * s;
            let fit = (ext.x / span(cols, spacing))
                .min(ext.y / span(rows, spacing))
                .min(1.0);
            spacing *= fit;
            let (w, h) = (span(cols, spacing), span(rows, spacing));
            let (x0, y0) = place_box(area, w, h, rng);
            let jitter = 0.15 * spacing;
            (0..n)
                .map(|i| {
                    let (r, c) = (i / cols, i % cols);
                    let x = x0 + c as f64 * spacing + rng.random_range(-jitter..=jitter);
                    let y = y0 + r as f64 * spacing + rng.random_range(-jitter..=jitter);
                    Point::new(
                        x.clamp(area.min.x, area.max.x),
                        y.clamp(area.min.y, area.max.y),
                        0.0,
                    )
                })
                .collect()
        }
        Topology::Random => {
            let spacing = rng.random_range(60.0..=180.0);
            let aspect: f64 = rng.random_range(0.5..=2.0);
            let region = n as f64 * spacing * spacing;
            let w = (region * aspect).sqrt().max(50.0).min(ext.x);
            let h = (region / aspect).sqrt().max(50.0).min(ext.y);
            let (x0, y0) = place_box(area, w, h, rng);
            (0..n)
                .map(|_| {
                    Point::new(
                        x0 + rng.random::<f64>() * w,
                        y0 + rng.random::<f64>() * h,
                        0.0,
                    )
                })
                .collect()
        }
        Topology::Trajectory => {
            return Err(Error::Generation {
                attempts: 0,
                reason: "trajectory is not a static topology".into(),
            })
        }
    };
    Ok(pts)
}

/// Every node has another node within communication range.
fn range_connected(points: &[Point], range: f64) -> bool {
    points.len() >= 2
        && points.iter().enumerate().all(|(i, p)| {
            points
                .iter()
                .enumerate()
                .any(|(j, q)| i != j && (p - q).norm() <= range)
        })
}

fn generate_static_one(
    topology: Topology,
    placement: Placement,
    cfg: &StaticGenConfig,
    instance_seed: u64,
) -> Result<ScenarioInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(instance_seed);
    let mut last_reason = String::new();
    for _ in 0..RETRY_BUDGET {
        let n = cfg.sample_node_count(&mut rng);
        let nodes = sample_layout(topology, n, cfg, &mut rng)?;
        if !range_connected(&nodes, cfg.comm_range_m) {
            last_reason = "nodes outside communication range".into();
            continue;
        }
        let propagation = cfg.sample_propagation(&mut rng);
        let jammer = JammerConfig::new(
            uniform_in(&cfg.area, &mut rng),
            cfg.sample_tx_power(&mut rng),
        );
        let inside = in_convex_hull_xy(&nodes, &jammer.position);
        let label = if inside {
            Placement::InsideRegion
        } else {
            Placement::OutsideRegion
        };
        if placement != Placement::NotApplicable && label != placement {
            last_reason = format!("placement {} not realised", placement.as_str());
            continue;
        }
        let samples = nodes
            .iter()
            .map(|p| {
                rf::observe_noise(p, &jammer, &propagation, &mut rng)
                    .map(|noise| MeasurementSample::new(*p, noise, 0))
            })
            .collect::<Result<Vec<_>>>()?;
        let instance = ScenarioInstance {
            samples,
            jammer,
            propagation,
            topology,
            placement: label,
            dimensionality: 2,
            seed: instance_seed,
            area: cfg.area,
        };
        match instance.validate() {
            Ok(()) => return Ok(instance),
            Err(e) => last_reason = e.to_string(),
        }
    }
    Err(Error::Generation {
        attempts: RETRY_BUDGET,
        reason: last_reason,
    })
}

/// Generates `count` valid static instances of one topology and placement.
pub fn generate_static(
    topology: Topology,
    placement: Placement,
    count: usize,
    seed: u64,
    cfg: &StaticGenConfig,
) -> Result<Vec<ScenarioInstance>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| generate_static_one(topology, placement, cfg, derive_seed(seed, i)))
        .collect()
}

/// Dynamic (trajectory) generation parameters. Recorded in dataset headers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicGenConfig {
    pub area: Bounds,
    pub min_samples: usize,
    pub max_samples: usize,
    /// `ln N ~ Normal(mu, sigma)` before clamping to the sample bounds.
    pub log_samples: (f64, f64),
    pub tx_power_range_dbm: (f64, f64),
    pub gamma_range: (f64, f64),
    pub sigma_range_db: (f64, f64),
    /// Initial spiral radius as a multiple of the detection radius.
    pub start_radius_factor: (f64, f64),
    pub start_radius_limits_m: (f64, f64),
    pub terminal_radius_m: (f64, f64),
    pub turns: (f64, f64),
    /// Terminal height above the jammer (m).
    pub terminal_height_m: (f64, f64),
    pub jitter_m: f64,
}

impl Default for DynamicGenConfig {
    fn default() -> Self {
        Self {
            area: Bounds::new(Point::zeros(), Point::new(500.0, 500.0, 50.0)),
            min_samples: 1112,
            max_samples: 37144,
            log_samples: (8.42, 0.7),
            tx_power_range_dbm: (20.0, 60.0),
            gamma_range: (2.7, 3.5),
            sigma_range_db: (2.0, 6.0),
            start_radius_factor: (0.7, 1.3),
            start_radius_limits_m: (40.0, 1800.0),
            terminal_radius_m: (1.0, 25.0),
            turns: (2.5, 6.0),
            terminal_height_m: (0.5, 5.0),
            jitter_m: 0.3,
        }
    }
}

impl DynamicGenConfig {
    pub fn with_area(area: Bounds) -> Self {
        Self {
            area,
            ..Self::default()
        }
    }
}

/// Distance at which the mean jammer power drops to the detection threshold.
fn detection_radius(jammer: &JammerConfig, params: &PropagationParams) -> f64 {
    let budget = jammer.eirp_dbm() - params.pl0 - DETECTION_THRESHOLD_DBM;
    params.d0 * 10f64.powf(budget / (10.0 * params.gamma))
}

struct Spiral {
    center: Point,
    rho0: f64,
    rho_end: f64,
    kappa: f64,
    psi0: f64,
    direction: f64,
    z0: f64,
    z_end: f64,
}

impl Spiral {
    /// Position at arc-length fraction `u ∈ [0, 1]`. Arc length of a
    /// logarithmic spiral is linear in the radius, so `ρ` is interpolated directly.
    fn at(&self, u: f64) -> Point {
        let rho = self.rho0 - u * (self.rho0 - self.rho_end);
        let psi = (self.rho0 / rho).ln() / self.kappa;
        let angle = self.psi0 + self.direction * psi;
        let frac = (rho - self.rho_end) / (self.rho0 - self.rho_end);
        Point::new(
            self.center.x + rho * angle.cos(),
            self.center.y + rho * angle.sin(),
            self.z_end + (self.z0 - self.z_end) * frac,
        )
    }
}

fn generate_dynamic_one(cfg: &DynamicGenConfig, instance_seed: u64) -> Result<ScenarioInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(instance_seed);
    let jitter = Normal::new(0.0, cfg.jitter_m.max(1e-12)).expect("finite jitter");
    let count_dist = LogNormal::new(cfg.log_samples.0, cfg.log_samples.1).expect("valid lognormal");
    let mut last_reason = String::new();
    for _ in 0..RETRY_BUDGET {
        let jammer_pos = uniform_in(&cfg.area, &mut rng);
        let tx = rng.random_range(cfg.tx_power_range_dbm.0..=cfg.tx_power_range_dbm.1);
        let jammer = JammerConfig::new(jammer_pos, tx);
        let mut propagation = PropagationParams::new(
            rng.random_range(cfg.gamma_range.0..=cfg.gamma_range.1),
            rng.random_range(cfg.sigma_range_db.0..=cfg.sigma_range_db.1),
        );
        propagation.ambient_noise_dbm = rf::AMBIENT_NOISE_DBM;

        let d_detect = detection_radius(&jammer, &propagation);
        let (lo, hi) = cfg.start_radius_limits_m;
        let rho0 = (d_detect
            * rng.random_range(cfg.start_radius_factor.0..=cfg.start_radius_factor.1))
        .clamp(lo, hi);
        let rho_end = rng
            .random_range(cfg.terminal_radius_m.0..=cfg.terminal_radius_m.1)
            .min(0.25 * rho0);
        let turns = rng.random_range(cfg.turns.0..=cfg.turns.1);
        let spiral = Spiral {
            center: jammer_pos,
            rho0,
            rho_end,
            kappa: (rho0 / rho_end).ln() / (TAU * turns),
            psi0: rng.random_range(0.0..TAU),
            direction: if rng.random::<bool>() { 1.0 } else { -1.0 },
            z0: rng.random_range(5.0..=cfg.area.max.z.max(5.0)),
            z_end: jammer_pos.z
                + rng.random_range(cfg.terminal_height_m.0..=cfg.terminal_height_m.1),
        };

        let mut n =
            (count_dist.sample(&mut rng).round() as usize).clamp(cfg.min_samples, cfg.max_samples);
        loop {
            let mut samples = Vec::with_capacity(n);
            for i in 0..n {
                let u = i as f64 / (n - 1) as f64;
                let mut p = spiral.at(u);
                for a in 0..3 {
                    p[a] += jitter.sample(&mut rng);
                }
                let noise = rf::observe_noise(&p, &jammer, &propagation, &mut rng)?;
                if noise >= DETECTION_THRESHOLD_DBM {
                    samples.push(MeasurementSample::new(p, noise, i as u64));
                }
            }
            if samples.len() >= cfg.min_samples {
                let instance = ScenarioInstance {
                    samples,
                    jammer,
                    propagation,
                    topology: Topology::Trajectory,
                    placement: Placement::NotApplicable,
                    dimensionality: 3,
                    seed: instance_seed,
                    area: cfg.area,
                };
                match instance.validate() {
                    Ok(()) => return Ok(instance),
                    Err(e) => {
                        last_reason = e.to_string();
                        break;
                    }
                }
            }
            if n >= cfg.max_samples {
                last_reason = "too few samples above the detection threshold".into();
                break;
            }
            let kept = samples.len().max(1);
            let grow = (cfg.min_samples as f64 / kept as f64 * 1.05).max(1.1);
            n = ((n as f64 * grow).ceil() as usize).min(cfg.max_samples);
        }
    }
    Err(Error::Generation {
        attempts: RETRY_BUDGET,
        reason: last_reason,
    })
}

/// Generates `count` single-device spiral trajectories.
pub fn generate_dynamic(
    count: usize,
    seed: u64,
    cfg: &DynamicGenConfig,
) -> Result<Vec<ScenarioInstance>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| generate_dynamic_one(cfg, derive_seed(seed, i)))
        .collect()
}
