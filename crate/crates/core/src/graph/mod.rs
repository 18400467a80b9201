//! Measurement graphs built from noise-floor samples.
//!
//! Nodes are measurements, edges connect each node to its `k` nearest
//! neighbours and carry an exponentially decaying distance weight. Positions
//! are encoded as `(r, sin θ, cos θ, sin φ, cos φ)` relative to a stored
//! [`NormalizationTransform`], which also fixes the noise scaling.

pub mod augment;
pub mod pipeline;

use std::collections::BTreeSet;
use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::{Bounds, Error, Point, Result};

pub use pipeline::{AugmentConfig, GraphBuilder, GraphConfig};

/// Fixed noise bounds used for every feature (dBm).
pub const NOISE_MIN_DBM: f64 = -100.0;
pub const NOISE_MAX_DBM: f64 = 80.0;

pub const STATIC_FEATURES: usize = 15;
pub const DYNAMIC_FEATURES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphMode {
    Static,
    Dynamic,
}

impl GraphMode {
    pub fn feature_dim(self) -> usize {
        match self {
            GraphMode::Static => STATIC_FEATURES,
            GraphMode::Dynamic => DYNAMIC_FEATURES,
        }
    }

    pub fn dim(self) -> usize {
        match self {
            GraphMode::Static => 2,
            GraphMode::Dynamic => 3,
        }
    }

    pub fn feature_names(self) -> Vec<&'static str> {
        let mut names = vec![
            "noise",
            "r",
            "sin_theta",
            "cos_theta",
            "sin_phi",
            "cos_phi",
            "x",
            "y",
            "z",
            "median",
            "max",
            "delta_noise",
            "wcent_x",
            "wcent_y",
        ];
        if self == GraphMode::Dynamic {
            names.push("wcent_z");
        }
        names.push("wcent_dist");
        if self == GraphMode::Dynamic {
            names.extend(["dir_x", "dir_y", "dir_z", "delta_noise_temp"]);
        }
        names
    }
}

/// Maps raw metres and dBm to the normalized model space and back.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationTransform {
    pub position_offset: Point,
    pub position_scale: Point,
    pub noise_min_dbm: f64,
    pub noise_max_dbm: f64,
    pub r_scale: f64,
    pub dim: u8,
}

impl NormalizationTransform {
    pub fn new(
        position_offset: Point,
        position_scale: Point,
        r_scale: f64,
        dim: u8,
    ) -> Result<Self> {
        let t = Self {
            position_offset,
            position_scale,
            noise_min_dbm: NOISE_MIN_DBM,
            noise_max_dbm: NOISE_MAX_DBM,
            r_scale,
            dim,
        };
        let scales_ok = t.position_scale.iter().all(|s| s.is_finite() && *s > 0.0);
        if !scales_ok || !(r_scale > 0.0) || !r_scale.is_finite() || !(dim == 2 || dim == 3) {
            return Err(Error::Graph(format!("non-invertible transform {t:?}")));
        }
        Ok(t)
    }

    /// Origin at the area's minimum corner, per-axis scale equal to the area
    /// extent, radial scale equal to the area diagonal.
    pub fn for_static_area(area: &Bounds) -> Result<Self> {
        let ext = area.extent();
        let scale = ext.map(|e| if e > 0.0 { e } else { 1.0 });
        Self::new(area.min, scale, area.diagonal(), 2)
    }

    /// Centred on the bounding box of `positions`, isotropic scale of its
    /// largest half-extent (at least 1 m), radial scale `r_scale`.
    pub fn for_dynamic_points(positions: &[Point], r_scale: f64) -> Result<Self> {
        let b = Bounds::of_points(positions).ok_or_else(|| Error::Graph("no positions".into()))?;
        let half = (b.extent() * 0.5).max().max(1.0);
        Self::new(b.center(), Point::repeat(half), r_scale, 3)
    }

    pub fn noise_range(&self) -> f64 {
        self.noise_max_dbm - self.noise_min_dbm
    }

    pub fn normalize_noise(&self, dbm: f64) -> f64 {
        (dbm - self.noise_min_dbm) / self.noise_range()
    }

    pub fn denormalize_noise(&self, v: f64) -> f64 {
        v * self.noise_range() + self.noise_min_dbm
    }

    pub fn normalize_position(&self, p: &Point) -> Point {
        (p - self.position_offset).component_div(&self.position_scale)
    }

    pub fn denormalize_position(&self, p: &Point) -> Point {
        p.component_mul(&self.position_scale) + self.position_offset
    }

    /// Normalizes a displacement (no offset).
    pub fn normalize_vector(&self, v: &Point) -> Point {
        v.component_div(&self.position_scale)
    }

    pub fn encode(&self, p: &Point) -> AngularPosition {
        let v = p - self.position_offset;
        let r = v.norm() / self.r_scale;
        let theta = v.y.atan2(v.x);
        let phi = if self.dim == 3 {
            v.z.atan2(v.x.hypot(v.y))
        } else {
            0.0
        };
        AngularPosition {
            r,
            sin_theta: theta.sin(),
            cos_theta: theta.cos(),
            sin_phi: phi.sin(),
            cos_phi: phi.cos(),
        }
    }

    pub fn decode(&self, ap: &AngularPosition) -> Point {
        let theta = ap.sin_theta.atan2(ap.cos_theta);
        let phi = if self.dim == 3 {
            ap.sin_phi.atan2(ap.cos_phi)
        } else {
            0.0
        };
        let rho = ap.r * self.r_scale;
        let mut out = self.position_offset
            + Point::new(phi.cos() * theta.cos(), phi.cos() * theta.sin(), phi.sin()) * rho;
        if self.dim == 2 {
            out.z = self.position_offset.z;
        }
        out
    }
}

/// Normalized polar/spherical position encoding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularPosition {
    pub r: f64,
    pub sin_theta: f64,
    pub cos_theta: f64,
    pub sin_phi: f64,
    pub cos_phi: f64,
}

impl AngularPosition {
    pub fn to_array(&self) -> [f64; 5] {
        [
            self.r,
            self.sin_theta,
            self.cos_theta,
            self.sin_phi,
            self.cos_phi,
        ]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            r: a[0],
            sin_theta: a[1],
            cos_theta: a[2],
            sin_phi: a[3],
            cos_phi: a[4],
        }
    }

    pub fn from_slice(a: &[f64]) -> Self {
        Self::from_array([a[0], a[1], a[2], a[3], a[4]])
    }
}

/// Distance weight on normalized distance `d̂ ∈ [0, 1]`: 1 at zero, 0 at `d_max`.
pub fn edge_weight(d_hat: f64) -> f64 {
    ((1.0 - d_hat).exp() - 1.0) / (E - 1.0)
}

/// KNN structure of a node set.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    /// `(src, dst)` pairs, sorted by `(dst, src)`; messages flow `src → dst`.
    pub edges: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
    /// Each node's own k nearest neighbours (no self, before symmetrization).
    pub neighbors: Vec<Vec<usize>>,
    pub d_max: f64,
}

/// Indices of the `k` nearest other nodes of every node, nearest first; ties
/// go to the lower index.
pub fn knn_lists(positions: &[Point], k: usize) -> Vec<Vec<usize>> {
    let n = positions.len();
    let k = k.min(n.saturating_sub(1));
    if k == 0 {
        return vec![Vec::new(); n];
    }
    (0..n)
        .map(|i| {
            let pi = positions[i];
            let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
            for (j, pj) in positions.iter().enumerate() {
                if j == i {
                    continue;
                }
                let d2 = (pi - pj).norm_squared();
                if best.len() == k && d2 >= best[k - 1].0 {
                    continue;
                }
                let at = best.partition_point(|&(d, _)| d <= d2);
                best.insert(at, (d2, j));
                best.truncate(k);
            }
            best.into_iter().map(|(_, j)| j).collect()
        })
        .collect()
}

/// Builds KNN edges with distance weights. Edges run from neighbour to node,
/// and are mirrored unless `directed`.
pub fn knn_edges(positions: &[Point], k: usize, directed: bool) -> Result<KnnGraph> {
    if positions.len() < 2 {
        return Err(Error::Graph(format!(
            "too few nodes for a graph: {}",
            positions.len()
        )));
    }
    if k == 0 {
        return Err(Error::Graph("k must be at least 1".into()));
    }
    let neighbors = knn_lists(positions, k);
    let mut set = BTreeSet::new();
    for (i, nb) in neighbors.iter().enumerate() {
        for &j in nb {
            set.insert((i, j));
            if !directed {
                set.insert((j, i));
            }
        }
    }
    let edges: Vec<(usize, usize)> = set.into_iter().map(|(dst, src)| (src, dst)).collect();
    let dists: Vec<f64> = edges
        .iter()
        .map(|&(s, d)| (positions[s] - positions[d]).norm())
        .collect();
    let d_max = dists.iter().copied().fold(0.0, f64::max);
    let weights = dists.iter().map(|&d| normalized_weight(d, d_max)).collect();
    Ok(KnnGraph {
        edges,
        weights,
        neighbors,
        d_max,
    })
}

fn normalized_weight(d: f64, d_max: f64) -> f64 {
    if d_max > 0.0 {
        edge_weight((d / d_max).min(1.0))
    } else {
        1.0
    }
}

/// Linear-power weighted centroid of `positions` and the same-weight mean of
/// the dBm values.
pub fn weighted_centroid<'a>(
    items: impl IntoIterator<Item = (&'a Point, f64)> + Clone,
) -> Option<(Point, f64)> {
    let peak = items
        .clone()
        .into_iter()
        .map(|(_, n)| n)
        .fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return None;
    }
    let (mut pos, mut noise, mut total) = (Point::zeros(), 0.0, 0.0);
    for (p, n) in items {
        // shifted by the peak; the common factor cancels.
        let w = 10f64.powf((n - peak) / 10.0);
        pos += p * w;
        noise += n * w;
        total += w;
    }
    Some((pos / total, noise / total))
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols);
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Spatial part of a feature row shared by measurement nodes and the supernode.
fn base_features(
    pos: &Point,
    noise: f64,
    nb: &[usize],
    positions: &[Point],
    noise_all: &[f64],
    mode: GraphMode,
    t: &NormalizationTransform,
) -> Result<Vec<f64>> {
    if nb.is_empty() {
        return Err(Error::Graph("node with empty neighbourhood".into()));
    }
    let mut row = Vec::with_capacity(mode.feature_dim());
    row.push(t.normalize_noise(noise));
    row.extend(t.encode(pos).to_array());
    row.extend(t.normalize_position(pos).iter());

    let mut nb_noise: Vec<f64> = nb.iter().map(|&j| noise_all[j]).collect();
    let mean = nb_noise.iter().sum::<f64>() / nb_noise.len() as f64;
    let max = nb_noise.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let med = median(&mut nb_noise);
    row.push(t.normalize_noise(med));
    row.push(t.normalize_noise(max));
    row.push((noise - mean) / t.noise_range());

    let (wcent, _) =
        weighted_centroid(nb.iter().map(|&j| (&positions[j], noise_all[j]))).expect("non-empty");
    let wn = t.normalize_position(&wcent);
    row.extend(wn.iter().take(mode.dim()));
    row.push((pos - wcent).norm() / t.r_scale);
    Ok(row)
}

/// Feature matrix of the measurement nodes.
pub fn node_features(
    positions: &[Point],
    noise: &[f64],
    time_index: &[u64],
    neighbors: &[Vec<usize>],
    mode: GraphMode,
    t: &NormalizationTransform,
) -> Result<FeatureMatrix> {
    let n = positions.len();
    let mut m = FeatureMatrix::zeros(0, mode.feature_dim());
    m.data.reserve(n * m.cols);
    for i in 0..n {
        let mut row = base_features(
            &positions[i],
            noise[i],
            &neighbors[i],
            positions,
            noise,
            mode,
            t,
        )?;
        if mode == GraphMode::Dynamic {
            row.extend([0.0; 4]);
        }
        m.push_row(&row);
    }
    if mode == GraphMode::Dynamic && n >= 2 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| (time_index[i], i));
        let base = STATIC_FEATURES + 1;
        for r in 0..n {
            let (a, b) = if r + 1 < n {
                (order[r], order[r + 1])
            } else {
                (order[r - 1], order[r])
            };
            let dir = t.normalize_vector(&(positions[b] - positions[a]));
            let dn = (noise[b] - noise[a]) / t.noise_range();
            let row = m.row_mut(order[r]);
            row[base..base + 3].copy_from_slice(dir.as_slice());
            row[base + 3] = dn;
        }
    }
    Ok(m)
}

/// A graph ready for a model.
#[derive(Debug, Clone)]
pub struct MeasurementGraph {
    pub mode: GraphMode,
    pub features: FeatureMatrix,
    /// Raw positions of all nodes, supernode last when present.
    pub positions: Vec<Point>,
    pub noise_dbm: Vec<f64>,
    pub edges: Vec<(usize, usize)>,
    pub edge_weights: Vec<f64>,
    pub neighbors: Vec<Vec<usize>>,
    pub d_max: f64,
    pub num_measurements: usize,
    pub supernode_index: Option<usize>,
    pub transform: NormalizationTransform,
    pub target: Option<AngularPosition>,
    pub wcl_position: Point,
    pub wcl_estimate: AngularPosition,
}

impl MeasurementGraph {
    /// Builds the base graph `G` (no supernode).
    pub fn build(
        positions: Vec<Point>,
        noise_dbm: Vec<f64>,
        time_index: &[u64],
        k: usize,
        directed: bool,
        mode: GraphMode,
        transform: NormalizationTransform,
        jammer: Option<Point>,
    ) -> Result<Self> {
        let knn = knn_edges(&positions, k, directed)?;
        let features = node_features(
            &positions,
            &noise_dbm,
            time_index,
            &knn.neighbors,
            mode,
            &transform,
        )?;
        let (wcl_position, _) = weighted_centroid(positions.iter().zip(noise_dbm.iter().copied()))
            .expect("at least two nodes");
        Ok(Self {
            mode,
            features,
            num_measurements: positions.len(),
            positions,
            noise_dbm,
            edges: knn.edges,
            edge_weights: knn.weights,
            neighbors: knn.neighbors,
            d_max: knn.d_max,
            supernode_index: None,
            target: jammer.map(|j| transform.encode(&j)),
            wcl_estimate: transform.encode(&wcl_position),
            wcl_position,
            transform,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows
    }

    pub fn has_supernode(&self) -> bool {
        self.supernode_index.is_some()
    }

    /// Appends the noise-weighted centroid node with inbound edges from every
    /// measurement node. Idempotent.
    pub fn attach_supernode(mut self) -> Result<Self> {
        if self.supernode_index.is_some() {
            return Ok(self);
        }
        let n = self.num_measurements;
        let (pos, noise) = weighted_centroid(
            self.positions[..n]
                .iter()
                .zip(self.noise_dbm[..n].iter().copied()),
        )
        .ok_or_else(|| Error::Graph("empty graph".into()))?;
        let all: Vec<usize> = (0..n).collect();
        let mut row = base_features(
            &pos,
            noise,
            &all,
            &self.positions[..n],
            &self.noise_dbm[..n],
            self.mode,
            &self.transform,
        )?;
        if self.mode == GraphMode::Dynamic {
            row.extend([0.0; 4]);
        }
        self.features.push_row(&row);

        let s = n;
        let dists: Vec<f64> = self.positions[..n]
            .iter()
            .map(|p| (p - pos).norm())
            .collect();
        // Supernode links may be longer than any KNN link; widen d_max so their weights stay in [0, 1].
        let d_max = dists.iter().copied().fold(self.d_max, f64::max);
        for (i, d) in dists.into_iter().enumerate() {
            self.edges.push((i, s));
            self.edge_weights.push(normalized_weight(d, d_max));
        }
        self.positions.push(pos);
        self.noise_dbm.push(noise);
        self.supernode_index = Some(s);
        Ok(self)
    }

    pub fn decode(&self, ap: &AngularPosition) -> Point {
        self.transform.decode(ap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p2(x: f64, y: f64) -> Point {
        Point::new(x, y, 0.0)
    }

    fn unit_transform(dim: u8) -> NormalizationTransform {
        NormalizationTransform::new(Point::zeros(), Point::repeat(1.0), 1.0, dim).unwrap()
    }

    #[test]
    fn weight_boundaries() {
        assert_eq!(edge_weight(0.0), 1.0);
        assert!(edge_weight(1.0).abs() < 1e-15);
        let oracle = (-0.5f64).exp() * (E - 0.5f64.exp()) / (E - 1.0);
        assert!((edge_weight(0.5) - oracle).abs() < 1e-12);
        assert!((edge_weight(0.5) - 0.37754).abs() < 1e-5);
    }

    #[test]
    fn weight_strictly_decreasing() {
        let grid: Vec<f64> = (0..=1000).map(|i| edge_weight(i as f64 / 1000.0)).collect();
        assert!(grid.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn encode_planar_example() {
        let ap = unit_transform(2).encode(&p2(3.0, 4.0));
        assert!((ap.r - 5.0).abs() < 1e-12);
        assert!((ap.sin_theta - 0.8).abs() < 1e-12);
        assert!((ap.cos_theta - 0.6).abs() < 1e-12);
        assert_eq!((ap.sin_phi, ap.cos_phi), (0.0, 1.0));
    }

    #[test]
    fn angular_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ts = NormalizationTransform::for_static_area(&Bounds::square(1500.0)).unwrap();
        let td = NormalizationTransform::new(
            Point::new(250.0, 250.0, 25.0),
            Point::repeat(250.0),
            708.9,
            3,
        )
        .unwrap();
        for _ in 0..1000 {
            let a = p2(rng.random_range(0.0..1500.0), rng.random_range(0.0..1500.0));
            assert!((ts.decode(&ts.encode(&a)) - a).norm() < 1e-9);
            let b = Point::new(
                rng.random_range(0.0..500.0),
                rng.random_range(0.0..500.0),
                rng.random_range(0.0..50.0),
            );
            assert!((td.decode(&td.encode(&b)) - b).norm() < 1e-9);
            let ap = td.encode(&b);
            assert!((ap.sin_theta.powi(2) + ap.cos_theta.powi(2) - 1.0).abs() < 1e-9);
            assert!((ap.sin_phi.powi(2) + ap.cos_phi.powi(2) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn offset_point_decodes_to_offset() {
        let t = NormalizationTransform::new(Point::new(1.0, 2.0, 3.0), Point::repeat(1.0), 10.0, 3)
            .unwrap();
        let mut ap = t.encode(&Point::new(1.0, 2.0, 3.0));
        assert_eq!(ap.r, 0.0);
        ap.sin_theta = 0.3;
        ap.cos_phi = -0.7;
        assert_eq!(t.decode(&ap), Point::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn transform_rejects_zero_scale() {
        assert!(
            NormalizationTransform::new(Point::zeros(), Point::new(1.0, 0.0, 1.0), 1.0, 2).is_err()
        );
        assert!(NormalizationTransform::new(Point::zeros(), Point::repeat(1.0), 0.0, 2).is_err());
    }

    #[test]
    fn knn_needs_two_nodes() {
        assert!(knn_edges(&[p2(0.0, 0.0)], 3, false).is_err());
    }

    #[test]
    fn knn_ties_prefer_lower_index() {
        let pts = [p2(0.0, 0.0), p2(1.0, 0.0), p2(-1.0, 0.0), p2(0.0, 1.0)];
        let lists = knn_lists(&pts, 2);
        assert_eq!(lists[0], vec![1, 2]);
    }

    #[test]
    fn knn_clamps_k() {
        let pts = [p2(0.0, 0.0), p2(1.0, 0.0), p2(3.0, 0.0)];
        let g = knn_edges(&pts, 10, false).unwrap();
        assert!(g.neighbors.iter().all(|nb| nb.len() == 2));
        assert_eq!(g.edges.len(), 6);
    }

    #[test]
    fn knn_directed_keeps_neighbour_to_node_edges_only() {
        let pts = [p2(0.0, 0.0), p2(1.0, 0.0), p2(10.0, 0.0)];
        let g = knn_edges(&pts, 1, true).unwrap();
        // 0←1, 1←0, 2←1
        assert_eq!(g.edges, vec![(1, 0), (0, 1), (1, 2)]);
        let w: Vec<f64> = g.weights.clone();
        assert!((w[2] - 0.0).abs() < 1e-15 && (w[0] - edge_weight(1.0 / 9.0)).abs() < 1e-12);
    }

    #[test]
    fn uniform_neighbourhood_features() {
        let pts = [p2(0.0, 0.0), p2(1.0, 0.0), p2(0.0, 1.0), p2(1.0, 1.0)];
        let noise = [-70.0; 4];
        let t = NormalizationTransform::for_static_area(&Bounds::square(10.0)).unwrap();
        let nb = knn_lists(&pts, 3);
        let f = node_features(&pts, &noise, &[0, 1, 2, 3], &nb, GraphMode::Static, &t).unwrap();
        for i in 0..4 {
            let row = f.row(i);
            assert_eq!(row[11], 0.0);
            assert_eq!(row[9], row[10]);
            assert!((row[9] - t.normalize_noise(-70.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn local_weighted_centroid_example() {
        let pts = [p2(5.0, 5.0), p2(0.0, 0.0), p2(10.0, 0.0)];
        let noise = [-65.0, -60.0, -70.0];
        // y-offset keeps node 0 equidistant but not nearer
        let nb = vec![vec![1, 2], vec![0, 2], vec![0, 1]];
        let t = unit_transform(2);
        let f = node_features(&pts, &noise, &[0, 1, 2], &nb, GraphMode::Static, &t).unwrap();
        let expected = 10.0 * 1e-7 / (1e-6 + 1e-7);
        assert!((f.get(0, 12) - expected).abs() < 1e-9);
        assert!((expected - 0.909).abs() < 1e-3);
        assert_eq!(f.get(0, 13), 0.0);
    }

    #[test]
    fn supernode_example() {
        let t = unit_transform(2);
        let g = MeasurementGraph::build(
            vec![p2(0.0, 0.0), p2(10.0, 0.0)],
            vec![-60.0, -70.0],
            &[0, 1],
            3,
            false,
            GraphMode::Static,
            t,
            None,
        )
        .unwrap()
        .attach_supernode()
        .unwrap();
        let s = g.supernode_index.unwrap();
        assert_eq!(s, 2);
        assert!((g.positions[s] - p2(10.0 / 11.0, 0.0)).norm() < 1e-12);
        assert!((g.noise_dbm[s] - (-60.0 * 10.0 / 11.0 - 70.0 / 11.0)).abs() < 1e-9);
        let inbound: Vec<_> = g.edges.iter().filter(|e| e.1 == s).map(|e| e.0).collect();
        assert_eq!(inbound, vec![0, 1]);
        assert!(g.edges.iter().all(|e| e.0 != s));
        assert!(g.edge_weights.iter().all(|w| (0.0..=1.0).contains(w)));
        assert!(g.neighbors.iter().all(|nb| !nb.contains(&s)));
    }

    #[test]
    fn supernode_uniform_noise_is_mean() {
        let pts = vec![p2(0.0, 0.0), p2(4.0, 0.0), p2(2.0, 6.0)];
        let (c, n) = weighted_centroid(pts.iter().map(|p| (p, -75.0))).unwrap();
        assert!((c - p2(2.0, 2.0)).norm() < 1e-12);
        assert_eq!(n, -75.0);
        let one = [p2(3.0, 1.0)];
        assert_eq!(
            weighted_centroid(one.iter().map(|p| (p, -50.0))).unwrap().0,
            one[0]
        );
    }

    #[test]
    fn temporal_features_use_backward_difference_at_end() {
        let pts = vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(3.0, 0.0, 0.0),
        ];
        let noise = vec![-80.0, -70.0, -65.0];
        let t = unit_transform(3);
        // time order: 2, 0, 1
        let times = [5, 9, 1];
        let nb = knn_lists(&pts, 2);
        let f = node_features(&pts, &noise, &times, &nb, GraphMode::Dynamic, &t).unwrap();
        let dir = |i: usize| f.get(i, 16);
        let dn = |i: usize| f.get(i, 19) * 180.0;
        assert_eq!(dir(2), -3.0);
        assert!((dn(2) - -15.0).abs() < 1e-12);
        assert_eq!(dir(0), 1.0);
        assert_eq!(dir(1), 1.0);
        assert!((dn(1) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn feature_names_match_width() {
        assert_eq!(GraphMode::Static.feature_names().len(), STATIC_FEATURES);
        assert_eq!(GraphMode::Dynamic.feature_names().len(), DYNAMIC_FEATURES);
    }

    fn arb_points() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
        prop::collection::vec((0.0f64..1500.0, 0.0f64..1500.0, -100.0f64..40.0), 2..60)
    }

    proptest! {
        #[test]
        fn knn_graph_invariants(pts in arb_points(), k in 1usize..8) {
            let positions: Vec<Point> = pts.iter().map(|&(x, y, _)| p2(x, y)).collect();
            let g = knn_edges(&positions, k, false).unwrap();
            let set: BTreeSet<_> = g.edges.iter().copied().collect();
            for &(s, d) in &g.edges {
                prop_assert!(s != d);
                prop_assert!(set.contains(&(d, s)));
            }
            prop_assert!(g.weights.iter().all(|w| (0.0..=1.0).contains(w)));
        }

        #[test]
        fn features_finite(pts in arb_points(), k in 1usize..6) {
            let positions: Vec<Point> = pts.iter().map(|&(x, y, _)| p2(x, y)).collect();
            let noise: Vec<f64> = pts.iter().map(|p| p.2).collect();
            let times: Vec<u64> = (0..positions.len() as u64).collect();
            let t = NormalizationTransform::for_static_area(&Bounds::square(1500.0)).unwrap();
            let g = MeasurementGraph::build(positions, noise, &times, k, false, GraphMode::Static, t, None).unwrap();
            let g = g.attach_supernode().unwrap();
            prop_assert!(g.features.is_finite());
            prop_assert_eq!(g.features.cols, STATIC_FEATURES);
        }
    }
}
