use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CPU frequency levels in MHz, ascending.
pub const CPU_LEVELS: [u32; 7] = [422, 729, 1036, 1343, 1651, 1958, 2265];
/// GPU frequency levels in MHz, ascending.
pub const GPU_LEVELS: [u32; 6] = [420, 624, 828, 1032, 1198, 1377];
/// CPU level at which the GPU power table was measured.
pub const CALIBRATION_CPU_MHZ: u32 = 1343;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FrequencyConfig {
    pub f_cpu: u32,
    pub f_gpu: u32,
}

impl FrequencyConfig {
    pub fn new(f_cpu: u32, f_gpu: u32) -> Result<Self> {
        if !CPU_LEVELS.contains(&f_cpu) {
            return Err(Error::invalid(format!("{f_cpu} MHz is not a CPU level")));
        }
        if !GPU_LEVELS.contains(&f_gpu) {
            return Err(Error::invalid(format!("{f_gpu} MHz is not a GPU level")));
        }
        Ok(FrequencyConfig { f_cpu, f_gpu })
    }

    pub fn max() -> Self {
        FrequencyConfig {
            f_cpu: CPU_LEVELS[CPU_LEVELS.len() - 1],
            f_gpu: GPU_LEVELS[GPU_LEVELS.len() - 1],
        }
    }

    pub fn min() -> Self {
        FrequencyConfig {
            f_cpu: CPU_LEVELS[0],
            f_gpu: GPU_LEVELS[0],
        }
    }

    /// All 42 pairs, CPU-major.
    pub fn all() -> impl Iterator<Item = FrequencyConfig> {
        CPU_LEVELS
            .iter()
            .flat_map(|&c| GPU_LEVELS.iter().map(move |&g| FrequencyConfig { f_cpu: c, f_gpu: g }))
    }

    pub fn is_valid(&self) -> bool {
        CPU_LEVELS.contains(&self.f_cpu) && GPU_LEVELS.contains(&self.f_gpu)
    }

    pub fn cpu_index(&self) -> Option<usize> {
        CPU_LEVELS.iter().position(|&c| c == self.f_cpu)
    }

    pub fn gpu_index(&self) -> Option<usize> {
        GPU_LEVELS.iter().position(|&g| g == self.f_gpu)
    }
}

impl fmt::Display for FrequencyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cpu {} MHz / gpu {} MHz", self.f_cpu, self.f_gpu)
    }
}
