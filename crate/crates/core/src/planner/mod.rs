//! Dynamic-window local planner with a power term, plus the global planner.

mod global;

pub use global::{plan_global, GlobalPlan};

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::power::{MotorCommandWindow, MotorPowerModel};
use crate::scan::LaserScan;
use crate::types::{wrap, Pose, Twist};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub theta_p: f64,
}

impl PlannerWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64, theta_p: f64) -> Result<Self> {
        let w = PlannerWeights {
            alpha,
            beta,
            gamma,
            theta_p,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha, self.beta, self.gamma, self.theta_p];
        if all.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || all.iter().sum::<f64>() <= 0.0 {
            return Err(Error::invalid(format!(
                "planner weights must be non-negative with a positive sum: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn without_power(self) -> Self {
        PlannerWeights { theta_p: 0.0, ..self }
    }

    pub fn scaled(self, c: f64) -> Self {
        PlannerWeights {
            alpha: self.alpha * c,
            beta: self.beta * c,
            gamma: self.gamma * c,
            theta_p: self.theta_p * c,
        }
    }
}

impl Default for PlannerWeights {
    fn default() -> Self {
        PlannerWeights {
            alpha: 0.4,
            beta: 0.3,
            gamma: 0.2,
            theta_p: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    pub weights: PlannerWeights,
    pub vmax: f64,
    pub wmax: f64,
    pub acc_v: f64,
    pub acc_w: f64,
    pub horizon: f64,
    /// Arc integration step, seconds.
    pub dt: f64,
    pub samples: (usize, usize),
    pub safety_radius: f64,
    pub clearance_cap: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            weights: PlannerWeights::default(),
            vmax: 0.5,
            wmax: 1.0,
            acc_v: 0.5,
            acc_w: 1.5,
            horizon: 2.0,
            dt: 0.1,
            samples: (5, 11),
            safety_radius: 0.2,
            clearance_cap: 2.0,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        let pos = [
            self.vmax,
            self.wmax,
            self.acc_v,
            self.acc_w,
            self.horizon,
            self.dt,
            self.clearance_cap,
        ];
        if pos.iter().any(|x| !(x.is_finite() && *x > 0.0)) || !(self.safety_radius >= 0.0) {
            return Err(Error::invalid("planner limits, horizon and step must be positive"));
        }
        if self.samples.0 == 0 || self.samples.1 == 0 {
            return Err(Error::invalid("planner sample counts must be positive"));
        }
        Ok(())
    }

    pub fn limits(&self) -> WindowLimits {
        WindowLimits {
            vmax: self.vmax,
            wmax: self.wmax,
            acc_v: self.acc_v,
            acc_w: self.acc_w,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowLimits {
    pub vmax: f64,
    pub wmax: f64,
    pub acc_v: f64,
    pub acc_w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub cmd: Twist,
    pub heading_score: f64,
    pub dist_score: f64,
    pub vel_score: f64,
    pub power_score: f64,
    pub total: f64,
    pub predicted_motor_watts: f64,
    pub collision_free: bool,
    /// Smallest obstacle distance along the arc, capped.
    pub clearance: f64,
}

fn lattice(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Velocities reachable from `current` within `dt`, as an `nv x nw` lattice
/// (linear-major order).
pub fn sample_window(current: Twist, limits: WindowLimits, dt: f64, (nv, nw): (usize, usize)) -> Vec<Twist> {
    // A current twist outside the limits can leave an empty interval; it then
    // collapses onto the nearest limit.
    let window = |x: f64, reach: f64, lo: f64, hi: f64| {
        let (a, b) = ((x - reach).max(lo), (x + reach).min(hi));
        if a <= b {
            (a, b)
        } else {
            let c = x.clamp(lo, hi);
            (c, c)
        }
    };
    let (vlo, vhi) = window(current.v, limits.acc_v * dt, 0.0, limits.vmax);
    let (wlo, whi) = window(current.w, limits.acc_w * dt, -limits.wmax, limits.wmax);
    let ws = lattice(wlo, whi, nw);
    lattice(vlo, vhi, nv)
        .into_iter()
        .flat_map(|v| ws.iter().map(move |&w| Twist::new(v, w)))
        .collect()
}

/// World-frame poses along the constant-`cmd` arc from `pose`, every `dt`
/// up to `horizon` (the start pose excluded, the end pose included).
pub fn rollout(pose: &Pose, cmd: Twist, horizon: f64, dt: f64) -> Vec<Pose> {
    let n = (horizon / dt - 1e-9).ceil().max(1.0) as usize;
    (1..=n)
        .map(|k| {
            let t = (k as f64 * dt).min(horizon);
            arc_pose(pose, cmd, t)
        })
        .collect()
}

/// Exact pose after following `cmd` for `t` seconds.
pub fn arc_pose(pose: &Pose, cmd: Twist, t: f64) -> Pose {
    let (x, y) = crate::collision::arc_point(cmd.v, cmd.w, t);
    let (s, c) = pose.yaw.sin_cos();
    Pose::new(pose.x + c * x - s * y, pose.y + s * x + c * y, pose.yaw + cmd.w * t)
}

/// Obstacle hit points of `scan`, in the world frame of `pose`.
pub fn scan_points(scan: &LaserScan, pose: &Pose) -> Vec<[f64; 2]> {
    scan.ranges
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_finite())
        .map(|(i, r)| {
            let b = pose.yaw + scan.bearing(i);
            [pose.x + r * b.cos(), pose.y + r * b.sin()]
        })
        .collect()
}

fn normalize(raw: &[f64]) -> Vec<f64> {
    let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span > 1e-12 * hi.abs().max(1.0)) {
        return vec![1.0; raw.len()];
    }
    raw.iter().map(|x| ((x - lo) / span).clamp(0.0, 1.0)).collect()
}

/// Raw per-sample criteria before normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawCriteria {
    pub heading: f64,
    pub clearance: f64,
    pub velocity: f64,
    pub power: f64,
}

/// Heading, clearance, speed and predicted motor power of each sample's arc.
pub fn raw_criteria(
    samples: &[Twist],
    current: Twist,
    pose: &Pose,
    goal: (f64, f64),
    obstacles: &[[f64; 2]],
    model: &MotorPowerModel,
    cfg: &PlannerConfig,
) -> Vec<RawCriteria> {
    let reach = cfg.vmax * cfg.horizon + cfg.clearance_cap;
    let near: Vec<[f64; 2]> = obstacles
        .iter()
        .filter(|p| (p[0] - pose.x).hypot(p[1] - pose.y) <= reach)
        .copied()
        .collect();
    samples
        .iter()
        .map(|&cmd| {
            let path = rollout(pose, cmd, cfg.horizon, cfg.dt);
            let mut clearance = cfg.clearance_cap;
            for p in std::iter::once(pose).chain(path.iter()) {
                for o in &near {
                    clearance = clearance.min((o[0] - p.x).hypot(o[1] - p.y));
                }
            }
            let end = path.last().unwrap();
            let err = wrap((goal.1 - end.y).atan2(goal.0 - end.x) - end.yaw);
            RawCriteria {
                heading: (PI - err.abs()) / PI,
                clearance,
                velocity: cmd.v,
                power: model.predict(&MotorCommandWindow::new(cmd, current)),
            }
        })
        .collect()
}

/// Normalizes the raw criteria across the sample set and combines them.
pub fn combine(
    samples: &[Twist],
    raw: &[RawCriteria],
    weights: &PlannerWeights,
    safety_radius: f64,
) -> Vec<TrajectorySample> {
    let col = |f: fn(&RawCriteria) -> f64| normalize(&raw.iter().map(f).collect::<Vec<_>>());
    let heading = col(|r| r.heading);
    let dist = col(|r| r.clearance);
    let vel = col(|r| r.velocity);
    let power = col(|r| r.power);
    let flat_power = power.iter().all(|&p| p == 1.0);
    samples
        .iter()
        .enumerate()
        .map(|(k, &cmd)| {
            let power_score = if flat_power { 1.0 } else { 1.0 - power[k] };
            let total = weights.alpha * heading[k]
                + weights.beta * dist[k]
                + weights.gamma * vel[k]
                + weights.theta_p * power_score;
            TrajectorySample {
                cmd,
                heading_score: heading[k],
                dist_score: dist[k],
                vel_score: vel[k],
                power_score,
                total,
                predicted_motor_watts: raw[k].power,
                collision_free: raw[k].clearance >= safety_radius,
                clearance: raw[k].clearance,
            }
        })
        .collect()
}

/// Scores every sample against the latest scan taken at `pose`.
#[allow(clippy::too_many_arguments)]
pub fn score_samples(
    samples: &[Twist],
    current: Twist,
    pose: &Pose,
    goal: (f64, f64),
    scan: &LaserScan,
    model: &MotorPowerModel,
    cfg: &PlannerConfig,
) -> Result<Vec<TrajectorySample>> {
    if samples.is_empty() {
        return Err(Error::invalid("no velocity samples to score"));
    }
    let obstacles = scan_points(scan, pose);
    let raw = raw_criteria(samples, current, pose, goal, &obstacles, model, cfg);
    Ok(combine(samples, &raw, &cfg.weights, cfg.safety_radius))
}

fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

/// Best collision-free sample, or a stop when every arc is blocked.
pub fn select_command(scored: &[TrajectorySample]) -> Twist {
    let mut best: Option<&TrajectorySample> = None;
    for s in scored.iter().filter(|s| s.collision_free) {
        best = match best {
            None => Some(s),
            Some(b) if ties(s.total, b.total) => {
                let key = |x: &TrajectorySample| (x.cmd.w.abs(), x.cmd.v);
                if key(s).partial_cmp(&key(b)) == Some(std::cmp::Ordering::Less) {
                    Some(s)
                } else {
                    Some(b)
                }
            }
            Some(b) if s.total > b.total => Some(s),
            keep => keep,
        };
    }
    best.map(|s| s.cmd).unwrap_or(Twist::ZERO)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::power::{plant_dataset, train_motor_model, EmbeddedPowerModel, MotorPlant};

    fn small_model() -> MotorPowerModel {
        let plant = MotorPlant::calibrated(&EmbeddedPowerModel::calibrated());
        train_motor_model(&plant_dataset(&plant, 400, 0.0, 3), 150, 0.02, 1).unwrap()
    }

    #[test]
    fn window_examples() {
        let lim = PlannerConfig::default().limits();
        let full = sample_window(Twist::ZERO, lim, 2.0, (5, 11));
        assert_eq!(full.len(), 55);
        assert_eq!(full[0], Twist::new(0.0, -1.0));
        assert_eq!(full[54], Twist::new(0.5, 1.0));
        let one = sample_window(Twist::new(0.2, 0.1), lim, 0.1, (1, 1));
        assert_eq!(one.len(), 1);
        assert!((one[0].v - 0.2).abs() < 1e-12 && (one[0].w - 0.1).abs() < 1e-12);
        let cur = Twist::new(0.3, -0.2);
        for s in sample_window(cur, lim, 0.1, (5, 11)) {
            assert!((s.v - cur.v).abs() <= lim.acc_v * 0.1 + 1e-12);
            assert!((s.w - cur.w).abs() <= lim.acc_w * 0.1 + 1e-12);
            assert!(s.v >= 0.0 && s.v <= lim.vmax && s.w.abs() <= lim.wmax);
        }
    }

    #[test]
    fn rollout_ends_at_horizon() {
        let p = rollout(&Pose::new(1.0, 1.0, 0.0), Twist::new(0.5, 0.0), 2.0, 0.1);
        assert_eq!(p.len(), 20);
        assert!((p[19].x - 2.0).abs() < 1e-12);
    }

    #[test]
    fn blocked_arcs_stop() {
        let model = small_model();
        let cfg = PlannerConfig::default();
        // wall of points 0.1 m in front
        let wall: Vec<[f64; 2]> = (-20..=20).map(|k| [0.1, k as f64 * 0.02]).collect();
        let samples = vec![Twist::new(0.3, 0.0), Twist::new(0.4, 0.0)];
        let raw = raw_criteria(&samples, Twist::ZERO, &Pose::default(), (5.0, 0.0), &wall, &model, &cfg);
        let scored = combine(&samples, &raw, &cfg.weights, cfg.safety_radius);
        assert!(scored.iter().all(|s| !s.collision_free));
        assert_eq!(select_command(&scored), Twist::ZERO);
    }

    #[test]
    fn zero_power_weight_is_classic_dwa() {
        let model = small_model();
        let cfg = PlannerConfig::default();
        let samples = sample_window(Twist::new(0.2, 0.0), cfg.limits(), 0.5, (5, 11));
        let obstacles = vec![[1.0, 0.6], [1.5, -0.4], [2.5, 0.0]];
        let raw = raw_criteria(
            &samples,
            Twist::new(0.2, 0.0),
            &Pose::default(),
            (4.0, 1.0),
            &obstacles,
            &model,
            &cfg,
        );
        let w = cfg.weights.without_power();
        let scored = combine(&samples, &raw, &w, cfg.safety_radius);
        for s in &scored {
            let classic = w.alpha * s.heading_score + w.beta * s.dist_score + w.gamma * s.vel_score;
            assert!((s.total - classic).abs() < 1e-15);
            for x in [s.heading_score, s.dist_score, s.vel_score, s.power_score] {
                assert!((0.0..=1.0).contains(&x));
            }
        }
    }

    #[test]
    fn degenerate_criterion_scores_one() {
        assert_eq!(normalize(&[3.0, 3.0, 3.0]), vec![1.0; 3]);
        assert_eq!(normalize(&[1.0, 2.0, 3.0]), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn ties_prefer_straight_then_slow() {
        let mk = |v: f64, w: f64, total: f64| TrajectorySample {
            cmd: Twist::new(v, w),
            heading_score: 0.0,
            dist_score: 0.0,
            vel_score: 0.0,
            power_score: 0.0,
            total,
            predicted_motor_watts: 0.0,
            collision_free: true,
            clearance: 1.0,
        };
        let s = [
            mk(0.3, 0.2, 1.0),
            mk(0.3, 0.0, 1.0),
            mk(0.2, 0.0, 1.0),
            mk(0.5, 0.5, 0.9),
        ];
        assert_eq!(select_command(&s), Twist::new(0.2, 0.0));
        assert_eq!(select_command(&s[..1]), Twist::new(0.3, 0.2));
    }
}
