//! Error statistics and distance buckets.

use serde::{Deserialize, Serialize};

/// Summary of Euclidean errors in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub rmse: f64,
    pub mae: f64,
    /// Population standard deviation of the errors.
    pub error_std: f64,
}

impl Stats {
    pub fn of(errors: &[f64]) -> Option<Self> {
        if errors.is_empty() {
            return None;
        }
        let n = errors.len() as f64;
        let mae = errors.iter().sum::<f64>() / n;
        let ms = errors.iter().map(|e| e * e).sum::<f64>() / n;
        let var = (ms - mae * mae).max(0.0);
        // rounding can put sqrt(ms) a hair under the mean for near-constant errors
        let rmse = ms.sqrt().max(mae);
        Some(Self {
            count: errors.len(),
            rmse,
            mae,
            error_std: var.sqrt(),
        })
    }
}

/// Minimum-distance-to-jammer intervals, half-open `[lo, hi)`; the nearest
/// bucket is closed at 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DistanceBucket {
    Over500,
    From200To500,
    From100To200,
    From50To100,
    Under50,
}

impl DistanceBucket {
    pub const ALL: [DistanceBucket; 5] = [
        DistanceBucket::Over500,
        DistanceBucket::From200To500,
        DistanceBucket::From100To200,
        DistanceBucket::From50To100,
        DistanceBucket::Under50,
    ];

    pub fn of(distance_m: f64) -> Self {
        match distance_m {
            d if d >= 500.0 => DistanceBucket::Over500,
            d if d >= 200.0 => DistanceBucket::From200To500,
            d if d >= 100.0 => DistanceBucket::From100To200,
            d if d >= 50.0 => DistanceBucket::From50To100,
            _ => DistanceBucket::Under50,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            DistanceBucket::Over500 => ">500",
            DistanceBucket::From200To500 => "[500,200)",
            DistanceBucket::From100To200 => "[200,100)",
            DistanceBucket::From50To100 => "[100,50)",
            DistanceBucket::Under50 => "[50,0]",
        }
    }
}
