//! Scenario description and its flat `section.key = value` file format.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coordinator::{CoordinatorConfig, NavParams};
use crate::error::{Error, Result};
use crate::grid::OccupancyGrid;
use crate::locality::CameraIntrinsics;
use crate::planner::PlannerConfig;
use crate::types::Pose;

use super::lidar::LidarConfig;
use super::localizer::{MotionNoise, SensorModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Policy {
    #[serde(rename = "SP")]
    Sp,
    #[serde(rename = "SP_UDVFS")]
    SpUdvfs,
    #[serde(rename = "PNAV_UDVFS")]
    PnavUdvfs,
    #[serde(rename = "PNAV")]
    Pnav,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Sp, Policy::SpUdvfs, Policy::PnavUdvfs, Policy::Pnav];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Sp => "SP",
            Policy::SpUdvfs => "SP_UDVFS",
            Policy::PnavUdvfs => "PNAV_UDVFS",
            Policy::Pnav => "PNAV",
        }
    }

    /// Navigation parameters and planner power term come from the coordinator.
    pub fn uses_coordinator(self) -> bool {
        matches!(self, Policy::Pnav | Policy::PnavUdvfs)
    }

    pub fn uses_governor(self) -> bool {
        matches!(self, Policy::SpUdvfs | Policy::PnavUdvfs)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace(['-', '+'], "_");
        Policy::ALL.into_iter().find(|p| p.as_str() == norm).ok_or_else(|| {
            Error::invalid(format!(
                "unknown policy `{s}` (expected SP, SP_UDVFS, PNAV_UDVFS or PNAV)"
            ))
        })
    }
}

/// Tunables that are not part of the route itself.
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub planner: PlannerConfig,
    pub coordinator: CoordinatorConfig,
    pub lidar: LidarConfig,
    pub sensor: SensorModel,
    pub motion_noise: MotionNoise,
    pub camera: CameraIntrinsics,
    /// Navigation parameters of the baseline policies.
    pub baseline_nav: NavParams,
    pub goal_tolerance: f64,
    pub lookahead: f64,
    /// Obstacle growth used only by the global planner, meters.
    pub inflation: f64,
    pub init_spread_xy: f64,
    pub init_spread_yaw: f64,
    pub max_time: f64,
    pub tick_us: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            planner: PlannerConfig::default(),
            coordinator: CoordinatorConfig::default(),
            lidar: LidarConfig::default(),
            sensor: SensorModel::default(),
            motion_noise: MotionNoise::default(),
            camera: CameraIntrinsics::default(),
            baseline_nav: NavParams {
                yolo_wait_ms: 0.0,
                max_particles: 2000,
                controller_frequency: 20,
            },
            goal_tolerance: 0.2,
            lookahead: 1.0,
            inflation: 0.3,
            init_spread_xy: 0.1,
            init_spread_yaw: 0.05,
            max_time: 1800.0,
            tick_us: 10_000,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        self.planner.validate()?;
        self.coordinator.validate()?;
        self.baseline_nav.validate()?;
        let pos = [self.goal_tolerance, self.lookahead, self.max_time];
        if pos.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::invalid(
                "goal tolerance, lookahead and max time must be positive",
            ));
        }
        if self.tick_us == 0 || 200_000 % self.tick_us != 0 {
            return Err(Error::invalid("tick must divide the 200 ms scan period"));
        }
        if !(self.inflation >= 0.0) || !(self.init_spread_xy >= 0.0) || !(self.init_spread_yaw >= 0.0) {
            return Err(Error::invalid("inflation and initial spread must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub map_name: String,
    pub map: OccupancyGrid,
    pub start: Pose,
    pub goals: Vec<(f64, f64)>,
    pub loops: usize,
    pub policy: Policy,
    pub seed: u64,
    pub params: SimParams,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.loops == 0 {
            return Err(Error::invalid("loop count must be at least 1"));
        }
        if self.goals.is_empty() {
            return Err(Error::invalid("scenario needs at least one goal"));
        }
        if self.map.occupied_at(self.start.x, self.start.y) {
            return Err(Error::invalid(format!(
                "start ({}, {}) is not free",
                self.start.x, self.start.y
            )));
        }
        for &(x, y) in &self.goals {
            if self.map.occupied_at(x, y) {
                return Err(Error::invalid(format!("goal ({x}, {y}) is not free")));
            }
        }
        self.params.validate()
    }

    /// Goals in visiting order over all loops.
    pub fn route(&self) -> Vec<(f64, f64)> {
        (0..self.loops).flat_map(|_| self.goals.iter().copied()).collect()
    }

    pub fn parse(text: &str, origin: &str, base_dir: &Path) -> Result<Self> {
        let mut map: Option<(String, OccupancyGrid)> = None;
        let mut start = None;
        let mut goals = None;
        let mut loops = 1usize;
        let mut policy = Policy::Pnav;
        let mut seed = 1u64;
        let mut p = SimParams::default();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| Error::parse(origin, ln + 1, m);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected `section.key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let num = || {
                value
                    .parse::<f64>()
                    .map_err(|_| err(format!("`{key}` expects a number, got `{value}`")))
            };
            let int = || {
                value
                    .parse::<u64>()
                    .map_err(|_| err(format!("`{key}` expects an integer, got `{value}`")))
            };
            let nums = || -> Result<Vec<f64>> {
                value
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|t| !t.is_empty())
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| err(format!("bad number `{t}` in `{key}`")))
                    })
                    .collect()
            };
            match key {
                "map.path" => {
                    let grid = if value == "builtin:hall" {
                        reference_hall()
                    } else {
                        OccupancyGrid::load(&base_dir.join(value))?
                    };
                    map = Some((value.to_string(), grid));
                }
                "robot.start" => {
                    let v = nums()?;
                    if v.len() != 3 {
                        return Err(err("robot.start expects `x y yaw`".into()));
                    }
                    start = Some(Pose::new(v[0], v[1], v[2]));
                }
                "route.goals" => {
                    let mut g = Vec::new();
                    for part in value.split(';') {
                        let xy: Vec<f64> = part
                            .split_whitespace()
                            .map(|t| {
                                t.parse::<f64>()
                                    .map_err(|_| err(format!("bad number `{t}` in route.goals")))
                            })
                            .collect::<Result<_>>()?;
                        if xy.len() != 2 {
                            return Err(err("route.goals expects `x y; x y; ...`".into()));
                        }
                        g.push((xy[0], xy[1]));
                    }
                    goals = Some(g);
                }
                "route.loops" => loops = int()? as usize,
                "run.policy" => policy = value.parse().map_err(|e: Error| err(e.to_string()))?,
                "run.seed" => seed = int()?,
                "run.max_time" => p.max_time = num()?,
                "run.goal_tolerance" => p.goal_tolerance = num()?,
                "planner.alpha" => p.planner.weights.alpha = num()?,
                "planner.beta" => p.planner.weights.beta = num()?,
                "planner.gamma" => p.planner.weights.gamma = num()?,
                "planner.theta_p" => p.planner.weights.theta_p = num()?,
                "planner.vmax" => p.planner.vmax = num()?,
                "planner.wmax" => p.planner.wmax = num()?,
                "planner.acc_v" => p.planner.acc_v = num()?,
                "planner.acc_w" => p.planner.acc_w = num()?,
                "planner.horizon" => p.planner.horizon = num()?,
                "planner.dt" => p.planner.dt = num()?,
                "planner.samples" => {
                    let v = nums()?;
                    if v.len() != 2 || v.iter().any(|x| x.fract() != 0.0 || *x < 1.0) {
                        return Err(err("planner.samples expects two positive integers".into()));
                    }
                    p.planner.samples = (v[0] as usize, v[1] as usize);
                }
                "planner.safety_radius" => p.planner.safety_radius = num()?,
                "planner.clearance_cap" => p.planner.clearance_cap = num()?,
                "planner.lookahead" => p.lookahead = num()?,
                "planner.inflation" => p.inflation = num()?,
                "coordinator.t_d" => p.coordinator.t_d = num()?,
                "coordinator.fov_threshold" => p.coordinator.fov_threshold = num()?,
                "coordinator.confidence_threshold" => p.coordinator.confidence_threshold = num()?,
                "coordinator.hysteresis_margin" => p.coordinator.hysteresis_margin = num()?,
                "coordinator.consecutive_trigger" => p.coordinator.consecutive_trigger = int()? as u32,
                "lidar.beams" => p.lidar.beam_count = int()? as usize,
                "lidar.range_max" => p.lidar.range_max = num()?,
                "lidar.noise" => p.lidar.noise_sigma = num()?,
                "localizer.beams_used" => p.sensor.beams_used = int()? as usize,
                "localizer.sigma_hit" => p.sensor.sigma_hit = num()?,
                "localizer.init_spread" => p.init_spread_xy = num()?,
                "baseline.yolo_wait" => p.baseline_nav.yolo_wait_ms = num()?,
                "baseline.max_particles" => p.baseline_nav.max_particles = int()? as usize,
                "baseline.controller_frequency" => p.baseline_nav.controller_frequency = int()? as u32,
                _ => return Err(err(format!("unknown key `{key}`"))),
            }
        }
        let (map_name, map) = map.ok_or_else(|| Error::parse(origin, 0, "missing map.path"))?;
        let spec = ScenarioSpec {
            map_name,
            map,
            start: start.ok_or_else(|| Error::parse(origin, 0, "missing robot.start"))?,
            goals: goals.ok_or_else(|| Error::parse(origin, 0, "missing route.goals"))?,
            loops,
            policy,
            seed,
            params: p,
        };
        spec.validate().map_err(|e| Error::parse(origin, 0, e.to_string()))?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, &path.display().to_string(), base)
    }

    /// The two-goal hall route, five loops.
    pub fn reference(policy: Policy, seed: u64) -> Self {
        ScenarioSpec {
            map_name: "builtin:hall".into(),
            map: reference_hall(),
            start: Pose::new(3.0, 4.0, 0.0),
            goals: vec![(17.0, 4.0), (3.0, 4.0)],
            loops: 5,
            policy,
            seed,
            params: SimParams::default(),
        }
    }
}

/// 20 m x 8 m hall at 0.1 m resolution, walled on all sides, with two rows of
/// 0.4 m pillars along the long walls.
pub fn reference_hall() -> OccupancyGrid {
    let mut g = OccupancyGrid::new(200, 80, 0.1).expect("static dimensions");
    for &x in &[4.0, 8.0, 12.0, 16.0] {
        g.fill_rect(x - 0.2, 0.8, x + 0.2, 1.2);
    }
    for &x in &[6.0, 10.0, 14.0] {
        g.fill_rect(x - 0.2, 6.8, x + 0.2, 7.2);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "\
map.path = builtin:hall
robot.start = 3 4 0
route.goals = 17 4; 3 4
route.loops = 2
run.policy = sp_udvfs
planner.theta_p = 0.2
";

    #[test]
    fn parses_and_routes() {
        let s = ScenarioSpec::parse(TEXT, "t", Path::new(".")).unwrap();
        assert_eq!(s.policy, Policy::SpUdvfs);
        assert_eq!(s.route().len(), 4);
        assert_eq!(s.params.planner.weights.theta_p, 0.2);
    }

    #[test]
    fn errors_name_the_line() {
        let bad = TEXT.replace("route.loops = 2", "route.loops = two");
        assert!(matches!(
            ScenarioSpec::parse(&bad, "t", Path::new(".")),
            Err(Error::Parse { line: 4, .. })
        ));
        let bad = format!("{TEXT}nope.key = 1\n");
        assert!(matches!(
            ScenarioSpec::parse(&bad, "t", Path::new(".")),
            Err(Error::Parse { line: 7, .. })
        ));
        let bad = TEXT.replace("route.goals = 17 4; 3 4", "route.goals = 4 1");
        assert!(ScenarioSpec::parse(&bad, "t", Path::new(".")).is_err());
    }

    #[test]
    fn policy_names() {
        for p in Policy::ALL {
            assert_eq!(p.as_str().parse::<Policy>().unwrap(), p);
        }
        assert_eq!("sp+udvfs".parse::<Policy>().unwrap(), Policy::SpUdvfs);
        assert!("fast".parse::<Policy>().is_err());
    }

    #[test]
    fn hall_layout() {
        let g = reference_hall();
        assert!(g.occupied_at(4.0, 1.0) && g.occupied_at(10.0, 7.0));
        assert!(!g.occupied_at(3.0, 4.0) && !g.occupied_at(17.0, 4.0));
        assert!(g.occupied_at(0.05, 4.0));
    }
}
