use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::types::wrap;

/// A planar range scan in the robot frame. Beam `i` points at
/// `angle_min + i * increment()`; a range of `+inf` means no return.
#[derive(Debug, Clone, PartialEq)]
pub struct LaserScan {
    pub angle_min: f64,
    pub angle_max: f64,
    pub ranges: Vec<f64>,
    pub range_max: f64,
    pub timestamp: f64,
}

impl LaserScan {
    pub fn new(angle_min: f64, angle_max: f64, ranges: Vec<f64>, range_max: f64, timestamp: f64) -> Result<Self> {
        if ranges.is_empty() {
            return Err(Error::invalid("scan must contain at least one beam"));
        }
        if !(range_max > 0.0) {
            return Err(Error::invalid("range_max must be positive"));
        }
        if angle_max < angle_min {
            return Err(Error::invalid("angle_max must not be below angle_min"));
        }
        for (i, &r) in ranges.iter().enumerate() {
            let ok = r == f64::INFINITY || (r > 0.0 && r <= range_max);
            if !ok {
                return Err(Error::invalid(format!(
                    "beam {i} has range {r} outside (0, {range_max}]"
                )));
            }
        }
        Ok(LaserScan {
            angle_min,
            angle_max,
            ranges,
            range_max,
            timestamp,
        })
    }

    /// Evenly spaced full-circle scan starting at bearing 0.
    pub fn full_circle(ranges: Vec<f64>, range_max: f64, timestamp: f64) -> Result<Self> {
        let n = ranges.len().max(1) as f64;
        Self::new(0.0, TAU * (n - 1.0) / n, ranges, range_max, timestamp)
    }

    pub fn beam_count(&self) -> usize {
        self.ranges.len()
    }

    pub fn increment(&self) -> f64 {
        if self.ranges.len() > 1 {
            (self.angle_max - self.angle_min) / (self.ranges.len() - 1) as f64
        } else {
            0.0
        }
    }

    pub fn bearing(&self, i: usize) -> f64 {
        self.angle_min + i as f64 * self.increment()
    }

    fn is_full_circle(&self) -> bool {
        let n = self.ranges.len();
        n > 1 && ((self.angle_max - self.angle_min) + self.increment() - TAU).abs() < 1e-9
    }

    /// Index of the beam closest to `bearing`, or `None` when the bearing is
    /// outside a partial scan's coverage.
    pub fn beam_index(&self, bearing: f64) -> Option<usize> {
        let n = self.ranges.len();
        if n == 1 {
            return (wrap(bearing - self.angle_min).abs() < 1e-9).then_some(0);
        }
        let inc = self.increment();
        if self.is_full_circle() {
            let rel = (bearing - self.angle_min).rem_euclid(TAU);
            return Some(((rel / inc).round() as usize) % n);
        }
        let rel = wrap(bearing - self.angle_min);
        let rel = if rel < -0.5 * inc { rel + TAU } else { rel };
        let k = (rel / inc).round();
        (k >= 0.0 && k <= (n - 1) as f64).then_some(k as usize)
    }

    /// Range of the beam nearest to `bearing`; uncovered bearings read as no return.
    pub fn range_at(&self, bearing: f64) -> f64 {
        self.beam_index(bearing).map_or(f64::INFINITY, |i| self.ranges[i])
    }

    pub fn all_no_return(&self) -> bool {
        self.ranges.iter().all(|r| r.is_infinite())
    }
}
