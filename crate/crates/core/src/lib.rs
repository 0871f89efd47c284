//! Power-aware navigation for autonomous mobile robots.
//!
//! The crate combines an end-to-end power predictor (learned motor model plus
//! an embedded CPU/GPU model), a navigation-locality checker, a collision
//! timing analyzer, a power-augmented dynamic-window planner and a coordinator
//! that picks CPU/GPU frequency levels and navigation parameters. A
//! deterministic 2D simulator in [`sim`] drives everything end to end.
//!
//! Batch-style inner loops (MLP gradients, particle weighting, policy sweeps)
//! go through [`exec`], which uses rayon when the `parallel` feature is on
//! and falls back to plain iterators otherwise. Both paths produce
//! bit-identical results.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod collision;
pub mod coordinator;
pub mod error;
pub mod exec;
pub mod grid;
pub mod locality;
pub mod planner;
pub mod power;
pub mod report;
pub mod scan;
pub mod sim;
pub mod types;

pub use error::{Error, Result};
pub use grid::OccupancyGrid;
pub use scan::LaserScan;
pub use types::{normalize_angle, Pose, SimClock, Twist};
