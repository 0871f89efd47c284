//! Offline latency profile of the sensing-to-actuation pipeline.
//!
//! File format: `dt0 = <ms>` plus one line per stage and frequency,
//! `stage.frequencyMHz = mean_ms max_ms`, where stage is one of `slam`,
//! `object`, `costmap`, `planner`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::power::{CPU_LEVELS, GPU_LEVELS};

/// Camera/LiDAR alignment delay is bounded by one camera frame.
pub const DT0_MAX: f64 = 0.033;

const HEADER: &str = "# pnav-timeline v1";
const WORST_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Slam,
    Object,
    Costmap,
    Planner,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Slam, Stage::Object, Stage::Costmap, Stage::Planner];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Slam => "slam",
            Stage::Object => "object",
            Stage::Costmap => "costmap",
            Stage::Planner => "planner",
        }
    }

    fn from_name(s: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|st| st.name() == s)
    }

    /// Stages driven by the GPU clock; everything else follows the CPU.
    pub fn on_gpu(self) -> bool {
        self == Stage::Object
    }
}

/// Mean and worst observed latency, seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyEntry {
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LatencyTable {
    entries: Vec<(u32, LatencyEntry)>,
}

impl LatencyTable {
    pub fn insert(&mut self, f: u32, e: LatencyEntry) {
        match self.entries.binary_search_by_key(&f, |(k, _)| *k) {
            Ok(i) => self.entries[i].1 = e,
            Err(i) => self.entries.insert(i, (f, e)),
        }
    }

    pub fn get(&self, f: u32) -> Option<&LatencyEntry> {
        self.entries
            .binary_search_by_key(&f, |(k, _)| *k)
            .ok()
            .map(|i| &self.entries[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = &(u32, LatencyEntry)> {
        self.entries.iter()
    }

    /// Inverse-frequency law anchored at the highest level.
    fn inverse_law(levels: &[u32], anchor: f64) -> Self {
        let fmax = *levels.last().unwrap() as f64;
        let mut t = LatencyTable::default();
        for &f in levels {
            let mean = anchor * fmax / f as f64;
            t.insert(
                f,
                LatencyEntry {
                    mean,
                    max: mean * WORST_FACTOR,
                },
            );
        }
        t
    }

    fn is_non_increasing(&self) -> bool {
        self.entries
            .windows(2)
            .all(|w| w[1].1.mean <= w[0].1.mean && w[1].1.max <= w[0].1.max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimelineProfile {
    pub dt0: f64,
    pub slam: LatencyTable,
    pub object: LatencyTable,
    pub costmap: LatencyTable,
    pub planner: LatencyTable,
}

impl TimelineProfile {
    /// Synthetic profile: latency scales as `f_max / f` from anchors at the
    /// maximal clocks (localization 40.6 ms, detector 50 ms, costmap 101 ms,
    /// local planner 60 ms), worst case 1.5x the mean.
    pub fn synthetic() -> Self {
        TimelineProfile {
            dt0: DT0_MAX,
            slam: LatencyTable::inverse_law(&CPU_LEVELS, 0.0406),
            object: LatencyTable::inverse_law(&GPU_LEVELS, 0.050),
            costmap: LatencyTable::inverse_law(&CPU_LEVELS, 0.101),
            planner: LatencyTable::inverse_law(&CPU_LEVELS, 0.060),
        }
    }

    /// Every stage at every level has the same mean and worst latency.
    pub fn uniform(dt0: f64, mean: f64, max: f64) -> Self {
        let flat = |levels: &[u32]| {
            let mut t = LatencyTable::default();
            for &f in levels {
                t.insert(f, LatencyEntry { mean, max });
            }
            t
        };
        TimelineProfile {
            dt0,
            slam: flat(&CPU_LEVELS),
            object: flat(&GPU_LEVELS),
            costmap: flat(&CPU_LEVELS),
            planner: flat(&CPU_LEVELS),
        }
    }

    pub fn table(&self, stage: Stage) -> &LatencyTable {
        match stage {
            Stage::Slam => &self.slam,
            Stage::Object => &self.object,
            Stage::Costmap => &self.costmap,
            Stage::Planner => &self.planner,
        }
    }

    fn table_mut(&mut self, stage: Stage) -> &mut LatencyTable {
        match stage {
            Stage::Slam => &mut self.slam,
            Stage::Object => &mut self.object,
            Stage::Costmap => &mut self.costmap,
            Stage::Planner => &mut self.planner,
        }
    }

    /// Full coverage of the frequency levels, positive entries, `max >= mean`,
    /// bounded alignment delay.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt0 >= 0.0 && self.dt0 <= DT0_MAX + 1e-12) {
            return Err(Error::invalid(format!("dt0 {} s exceeds {DT0_MAX} s", self.dt0)));
        }
        for stage in Stage::ALL {
            let levels: &[u32] = if stage.on_gpu() { &GPU_LEVELS } else { &CPU_LEVELS };
            let t = self.table(stage);
            for &f in levels {
                let e = t
                    .get(f)
                    .ok_or_else(|| Error::invalid(format!("{} table lacks {f} MHz", stage.name())))?;
                if !(e.mean > 0.0 && e.max >= e.mean && e.max.is_finite()) {
                    return Err(Error::invalid(format!(
                        "{}.{f} has invalid latency {e:?}",
                        stage.name()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Latency never grows with clock speed, per stage and per case.
    pub fn is_monotone(&self) -> bool {
        Stage::ALL.iter().all(|&s| self.table(s).is_non_increasing())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{HEADER}");
        let _ = writeln!(s, "dt0 = {}", self.dt0 * 1e3);
        for stage in Stage::ALL {
            for (f, e) in self.table(stage).iter() {
                let _ = writeln!(s, "{}.{f} = {} {}", stage.name(), e.mean * 1e3, e.max * 1e3);
            }
        }
        s
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let mut p = TimelineProfile {
            dt0: f64::NAN,
            slam: LatencyTable::default(),
            object: LatencyTable::default(),
            costmap: LatencyTable::default(),
            planner: LatencyTable::default(),
        };
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: String| Error::parse(origin, ln + 1, m);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let nums: Vec<f64> = value
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| err(format!("bad number `{t}`"))))
                .collect::<Result<_>>()?;
            if key == "dt0" {
                if nums.len() != 1 {
                    return Err(err("dt0 takes one value in ms".into()));
                }
                p.dt0 = nums[0] * 1e-3;
                continue;
            }
            let (stage, freq) = key
                .split_once('.')
                .ok_or_else(|| err(format!("expected `stage.frequencyMHz`, got `{key}`")))?;
            let stage = Stage::from_name(stage).ok_or_else(|| err(format!("unknown stage `{stage}`")))?;
            let f: u32 = freq.parse().map_err(|_| err(format!("bad frequency `{freq}`")))?;
            if nums.len() != 2 {
                return Err(err("expected `mean_ms max_ms`".into()));
            }
            p.table_mut(stage).insert(
                f,
                LatencyEntry {
                    mean: nums[0] * 1e-3,
                    max: nums[1] * 1e-3,
                },
            );
        }
        if p.dt0.is_nan() {
            return Err(Error::parse(origin, 0, "missing dt0"));
        }
        p.validate().map_err(|e| Error::parse(origin, 0, e.to_string()))?;
        if !p.is_monotone() {
            return Err(Error::parse(origin, 0, "latencies must not increase with frequency"));
        }
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, &path.display().to_string())
    }
}
