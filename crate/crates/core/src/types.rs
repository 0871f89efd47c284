use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps a finite angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::invalid(format!("angle must be finite, got {a}")));
    }
    Ok(wrap(a))
}

/// Infallible variant of [`normalize_angle`] for values already known to be finite.
pub(crate) fn wrap(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let r = a.rem_euclid(TAU);
    // 3pi and friends land a few ulps above pi after the remainder.
    if (r - PI).abs() <= 4.0 * f64::EPSILON * a.abs().max(1.0) {
        return PI;
    }
    if r > PI {
        r - TAU
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Always within `(-pi, pi]`.
    pub yaw: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Pose { x, y, yaw: wrap(yaw) }
    }

    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }

    /// Applies a rigid motion: rotation by `rot` about the origin followed by
    /// translation `(tx, ty)`.
    pub fn transformed(&self, rot: f64, tx: f64, ty: f64) -> Pose {
        let (s, c) = rot.sin_cos();
        Pose::new(
            c * self.x - s * self.y + tx,
            s * self.x + c * self.y + ty,
            self.yaw + rot,
        )
    }
}

/// Linear (m/s) and angular (rad/s) velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub v: f64,
    pub w: f64,
}

impl Twist {
    pub const ZERO: Twist = Twist { v: 0.0, w: 0.0 };

    pub fn new(v: f64, w: f64) -> Self {
        Twist { v, w }
    }

    pub fn clamped(self, vmax: f64, wmax: f64) -> Twist {
        Twist {
            v: self.v.clamp(-vmax, vmax),
            w: self.w.clamp(-wmax, wmax),
        }
    }

    pub fn within_limits(&self, vmax: f64, wmax: f64) -> bool {
        self.v.abs() <= vmax + 1e-12 && self.w.abs() <= wmax + 1e-12
    }
}

/// Fixed-step simulation clock. Time is kept as an integer tick count so that
/// event scheduling never accumulates rounding error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimClock {
    ticks: u64,
    tick_us: u64,
}

impl SimClock {
    pub fn new(tick_us: u64) -> Self {
        assert!(tick_us > 0, "tick must be positive");
        SimClock { ticks: 0, tick_us }
    }

    pub fn advance(&mut self) {
        self.ticks += 1;
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn now_us(&self) -> u64 {
        self.ticks * self.tick_us
    }

    pub fn now(&self) -> f64 {
        self.now_us() as f64 * 1e-6
    }

    pub fn tick(&self) -> f64 {
        self.tick_us as f64 * 1e-6
    }
}
