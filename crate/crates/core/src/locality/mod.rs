//! Navigation locality at three levels: camera view overlap between frames,
//! particle-cloud confidence, and global/local plan progress.

pub mod polygon;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Pose;
use polygon::Point;

/// Saturation value for a collapsed particle cloud.
pub const CONF_MAX: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub w: f64,
    pub h: f64,
    pub fx: f64,
    pub fy: f64,
    /// Depth at which the view is truncated, meters.
    pub view_range: f64,
}

impl CameraIntrinsics {
    pub fn new(w: f64, h: f64, fx: f64, fy: f64, view_range: f64) -> Result<Self> {
        if [w, h, fx, fy, view_range].iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("camera intrinsics must be positive and finite"));
        }
        Ok(CameraIntrinsics {
            w,
            h,
            fx,
            fy,
            view_range,
        })
    }

    pub fn fov_w(&self) -> f64 {
        2.0 * (self.w / (2.0 * self.fx)).atan()
    }

    pub fn fov_h(&self) -> f64 {
        2.0 * (self.h / (2.0 * self.fy)).atan()
    }
}

impl Default for CameraIntrinsics {
    /// 640x480 depth camera with roughly 70 degrees horizontal view, 4 m deep.
    fn default() -> Self {
        CameraIntrinsics {
            w: 640.0,
            h: 480.0,
            fx: 457.0,
            fy: 457.0,
            view_range: 4.0,
        }
    }
}

/// Planar projection of the camera view: apex at the camera and a far chord
/// at depth `view_range`, vertices counterclockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Frustum {
    pub polygon: Vec<Point>,
}

impl Frustum {
    pub fn area(&self) -> f64 {
        polygon::area(&self.polygon)
    }
}

pub fn fov_polygon(pose: &Pose, intrinsics: &CameraIntrinsics) -> Result<Frustum> {
    let fov = intrinsics.fov_w();
    if !(fov > 0.0 && fov < std::f64::consts::PI) {
        return Err(Error::UnsupportedFov(fov));
    }
    let half = 0.5 * fov;
    let reach = intrinsics.view_range / half.cos();
    let vertex = |b: f64| [pose.x + reach * b.cos(), pose.y + reach * b.sin()];
    Ok(Frustum {
        polygon: vec![[pose.x, pose.y], vertex(pose.yaw - half), vertex(pose.yaw + half)],
    })
}

/// Intersection area of the two view frustums over the smaller frustum area.
pub fn fov_overlap(p1: &Pose, p2: &Pose, intrinsics: &CameraIntrinsics) -> Result<f64> {
    let f1 = fov_polygon(p1, intrinsics)?;
    let f2 = fov_polygon(p2, intrinsics)?;
    let denom = f1.area().min(f2.area());
    let inter = polygon::intersection_area(&f1.polygon, &f2.polygon);
    Ok((inter / denom).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
}

impl ParticleSet {
    pub fn new(particles: Vec<Particle>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::invalid("particle set must not be empty"));
        }
        let mut s = ParticleSet { particles };
        s.normalize();
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Rescales weights to sum to one; returns `false` (and resets to uniform)
    /// when every weight is zero or non-finite.
    pub fn normalize(&mut self) -> bool {
        let sum: f64 = self.particles.iter().map(|p| p.weight).sum();
        if sum > 0.0 && sum.is_finite() {
            self.particles.iter_mut().for_each(|p| p.weight /= sum);
            true
        } else {
            let u = 1.0 / self.particles.len() as f64;
            self.particles.iter_mut().for_each(|p| p.weight = u);
            false
        }
    }
}

/// Inverse of the summed (unweighted, population) positional variances.
pub fn confidence_ratio(ps: &ParticleSet) -> f64 {
    let n = ps.particles.len() as f64;
    let mx = ps.particles.iter().map(|p| p.x).sum::<f64>() / n;
    let my = ps.particles.iter().map(|p| p.y).sum::<f64>() / n;
    let vx = ps.particles.iter().map(|p| (p.x - mx).powi(2)).sum::<f64>() / n;
    let vy = ps.particles.iter().map(|p| (p.y - my).powi(2)).sum::<f64>() / n;
    let denom = vx + vy;
    if denom < 1e-6 {
        CONF_MAX
    } else {
        (1.0 / denom).min(CONF_MAX)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanSnapshot {
    pub global_len: f64,
    pub local_len: f64,
    pub timestamp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Progress {
    Progress,
    Deviation,
    Stalled,
}

impl Progress {
    pub fn as_str(self) -> &'static str {
        match self {
            Progress::Progress => "PROGRESS",
            Progress::Deviation => "DEVIATION",
            Progress::Stalled => "STALLED",
        }
    }
}

/// Default plan-length tolerance, meters.
pub const PROGRESS_EPS: f64 = 0.05;

pub fn progress_status(prev: &PlanSnapshot, curr: &PlanSnapshot, eps: f64) -> Result<Progress> {
    if !(curr.timestamp > prev.timestamp) {
        return Err(Error::invalid(format!(
            "plan snapshots out of order ({} then {})",
            prev.timestamp, curr.timestamp
        )));
    }
    if curr.global_len > prev.global_len + eps {
        Ok(Progress::Deviation)
    } else if curr.global_len < prev.global_len - eps && curr.local_len <= prev.local_len + eps {
        Ok(Progress::Progress)
    } else {
        Ok(Progress::Stalled)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalityReport {
    pub fov_overlap: f64,
    pub confidence_ratio: f64,
    pub progress: Progress,
}
