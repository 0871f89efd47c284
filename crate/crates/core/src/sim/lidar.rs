use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::grid::OccupancyGrid;
use crate::scan::LaserScan;
use crate::types::Pose;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarConfig {
    pub beam_count: usize,
    pub range_max: f64,
    pub noise_sigma: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        LidarConfig {
            beam_count: 360,
            range_max: 8.0,
            noise_sigma: 0.01,
        }
    }
}

/// Full-circle scan from `pose` with Gaussian range noise.
pub fn simulate_scan<R: Rng>(
    grid: &OccupancyGrid,
    pose: &Pose,
    cfg: &LidarConfig,
    timestamp: f64,
    rng: &mut R,
) -> Result<LaserScan> {
    if cfg.beam_count == 0 || !(cfg.range_max > 0.0) || !(cfg.noise_sigma >= 0.0) {
        return Err(Error::invalid(
            "lidar needs beams, a positive range and non-negative noise",
        ));
    }
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let n = cfg.beam_count;
    let mut ranges = Vec::with_capacity(n);
    for i in 0..n {
        let bearing = std::f64::consts::TAU * i as f64 / n as f64;
        let r = grid.raycast(pose, bearing, cfg.range_max)?;
        let r = if r.is_finite() {
            let e = if cfg.noise_sigma > 0.0 { noise.sample(rng) } else { 0.0 };
            (r + e).clamp(1e-3, cfg.range_max)
        } else {
            r
        };
        ranges.push(r);
    }
    LaserScan::full_circle(ranges, cfg.range_max, timestamp)
}
