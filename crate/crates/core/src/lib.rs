//! Scenario synthesis, measurement graphs and classical estimators for
//! localizing a wireless jamming source from noise-floor measurements.
//!
//! The crate is organised bottom-up:
//!
//! - [`rf`]: log-distance path loss, jammer RSSI and noise-floor composition.
//! - [`scenario`]: static 2D and dynamic 3D scenario generation.
//! - [`dataset`]: JSON-lines persistence of scenario sets.
//! - [`sampling`]: trajectory downsampling (window averaging, spatial binning).
//! - [`graph`]: KNN measurement graphs, node features, supernode, augmentations.
//! - [`estimators`]: WCL and the path-loss model based baselines.

pub mod dataset;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod graph;
pub mod rf;
pub mod sampling;
pub mod scenario;

pub use error::{Error, Result};
pub use geometry::{Bounds, Point};
