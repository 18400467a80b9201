//! Points, axis-aligned bounds and planar convex hulls.

use serde::{Deserialize, Serialize};

/// A position in meters. Planar data keeps `z = 0`.
pub type Point = nalgebra::Vector3<f64>;

/// Axis-aligned box `[min, max]` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Point,
    pub max: Point,
}

impl Bounds {
    pub fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }

    /// `[0, side]²` with a degenerate z-axis.
    pub fn square(side: f64) -> Self {
        Self::new(Point::zeros(), Point::new(side, side, 0.0))
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    pub fn extent(&self) -> Point {
        self.max - self.min
    }

    pub fn center(&self) -> Point {
        (self.min + self.max) * 0.5
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    /// Tight bounds of a non-empty point set.
    pub fn of_points<'a>(points: impl IntoIterator<Item = &'a Point>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let (min, max) = it.fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
        Some(Self { min, max })
    }
}

fn cross(o: &[f64; 2], a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise convex hull of the xy-projection (Andrew's monotone chain).
/// Collinear boundary points are dropped.
pub fn convex_hull_xy(points: &[Point]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.iter().map(|p| [p.x, p.y]).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for p in pts.iter() {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    let lower = hull.len() + 1;
    for p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();
    hull
}

/// Whether `p` lies inside (or on the boundary of) the planar convex hull of `points`.
///
/// Hulls with fewer than three vertices have no interior; only points on the
/// degenerate segment count as inside.
pub fn in_convex_hull_xy(points: &[Point], p: &Point) -> bool {
    let hull = convex_hull_xy(points);
    let q = [p.x, p.y];
    match hull.len() {
        0 => false,
        1 => hull[0] == q,
        2 => {
            let (a, b) = (hull[0], hull[1]);
            let c = cross(&a, &b, &q);
            let within =
                (q[0] - a[0]) * (q[0] - b[0]) <= 0.0 && (q[1] - a[1]) * (q[1] - b[1]) <= 0.0;
            c.abs() <= 1e-9 * (1.0 + (b[0] - a[0]).abs() + (b[1] - a[1]).abs()) && within
        }
        n => (0..n).all(|i| cross(&hull[i], &hull[(i + 1) % n], &q) >= 0.0),
    }
}
