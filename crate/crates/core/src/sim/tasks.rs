//! Detection-task stub and the utilization-driven frequency governor.

use crate::collision::{Stage, TimelineProfile};
use crate::power::{FrequencyConfig, CPU_LEVELS, DUTY_FULL_HZ, GPU_LEVELS};

/// CPU cores the synthesized CPU load is spread over.
pub const CPU_CORES: f64 = 8.0;
/// Rate of the localization and costmap updates.
pub const SCAN_HZ: f64 = 5.0;

pub const UTIL_UP: f64 = 0.8;
pub const UTIL_DOWN: f64 = 0.3;

/// Object detector that only accounts for time; it never reports objects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionStub {
    pub period: f64,
    pub extra_wait: f64,
    pub latency: f64,
    pub last_fire: f64,
    pub fired: u64,
}

impl DetectionStub {
    pub fn new(task_hz: f64) -> Self {
        DetectionStub {
            period: 1.0 / task_hz,
            extra_wait: 0.0,
            latency: 0.0,
            last_fire: f64::NEG_INFINITY,
            fired: 0,
        }
    }

    /// Fires when a full period plus the extra wait has elapsed.
    pub fn poll(&mut self, now: f64) -> bool {
        if now - self.last_fire >= self.period + self.extra_wait - 1e-9 {
            self.last_fire = now;
            self.fired += 1;
            true
        } else {
            false
        }
    }

    pub fn rate(&self) -> f64 {
        1.0 / (self.period + self.extra_wait)
    }
}

impl Default for DetectionStub {
    fn default() -> Self {
        DetectionStub::new(DUTY_FULL_HZ)
    }
}

/// Busy fraction of the CPU and GPU implied by the latency tables: work time
/// per second of each periodic task, CPU load shared across the cores.
pub fn synthetic_utilization(
    profile: &TimelineProfile,
    fc: FrequencyConfig,
    controller_hz: f64,
    detection_hz: f64,
) -> (f64, f64) {
    let t = |s: Stage| {
        let f = if s.on_gpu() { fc.f_gpu } else { fc.f_cpu };
        profile.table(s).get(f).map(|e| e.mean).unwrap_or(0.0)
    };
    let cpu = ((t(Stage::Slam) + t(Stage::Costmap)) * SCAN_HZ + t(Stage::Planner) * controller_hz) / CPU_CORES;
    let gpu = t(Stage::Object) * detection_hz;
    (cpu.clamp(0.0, 1.0), gpu.clamp(0.0, 1.0))
}

fn step_level(levels: &[u32], f: u32, util: f64) -> u32 {
    let i = levels.iter().position(|&l| l == f).unwrap_or(levels.len() - 1);
    let j = if util > UTIL_UP {
        (i + 1).min(levels.len() - 1)
    } else if util < UTIL_DOWN {
        i.saturating_sub(1)
    } else {
        i
    };
    levels[j]
}

/// One governor step per axis: up above 80 % load, down below 30 %.
pub fn udvfs_governor(util_cpu: f64, util_gpu: f64, current: FrequencyConfig) -> FrequencyConfig {
    FrequencyConfig {
        f_cpu: step_level(&CPU_LEVELS, current.f_cpu, util_cpu),
        f_gpu: step_level(&GPU_LEVELS, current.f_gpu, util_gpu),
    }
}
