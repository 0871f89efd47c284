//! Frequency selection and power-saving/performance mode switching.

use serde::{Deserialize, Serialize};

use crate::collision::{pipeline_delay, DelayCase, TimelineProfile};
use crate::error::{Error, Result};
use crate::locality::{LocalityReport, Progress};
use crate::power::{EmbeddedPowerModel, FrequencyConfig, DUTY_FULL_HZ};

pub const YOLO_WAIT_MAX_MS: f64 = 200.0;
pub const PARTICLES_MIN: usize = 500;
pub const PARTICLES_MAX: usize = 3000;
pub const CONTROLLER_RATES: [u32; 3] = [10, 20, 30];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoordinatorConfig {
    pub t_d: f64,
    pub fov_threshold: f64,
    pub confidence_threshold: f64,
    pub hysteresis_margin: f64,
    pub consecutive_trigger: u32,
}

impl Default for CoordinatorConfig {
    fn default() -> Self {
        CoordinatorConfig {
            t_d: 2.0,
            fov_threshold: 0.8,
            confidence_threshold: 50.0,
            hysteresis_margin: 0.10,
            consecutive_trigger: 3,
        }
    }
}

impl CoordinatorConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.t_d, self.fov_threshold, self.confidence_threshold];
        if pos.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::invalid("coordinator thresholds must be positive"));
        }
        if !(0.0..=0.5).contains(&self.hysteresis_margin) {
            return Err(Error::invalid(format!(
                "hysteresis margin {} outside [0, 0.5]",
                self.hysteresis_margin
            )));
        }
        if self.consecutive_trigger == 0 {
            return Err(Error::invalid("consecutive trigger must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavParams {
    pub yolo_wait_ms: f64,
    pub max_particles: usize,
    pub controller_frequency: u32,
}

impl NavParams {
    pub fn new(yolo_wait_ms: f64, max_particles: usize, controller_frequency: u32) -> Result<Self> {
        let p = NavParams {
            yolo_wait_ms,
            max_particles,
            controller_frequency,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=YOLO_WAIT_MAX_MS).contains(&self.yolo_wait_ms) {
            return Err(Error::invalid(format!(
                "yolo_wait {} ms outside [0, 200]",
                self.yolo_wait_ms
            )));
        }
        if !(PARTICLES_MIN..=PARTICLES_MAX).contains(&self.max_particles) {
            return Err(Error::invalid(format!(
                "max_particles {} outside [500, 3000]",
                self.max_particles
            )));
        }
        if !CONTROLLER_RATES.contains(&self.controller_frequency) {
            return Err(Error::invalid(format!(
                "controller frequency {} Hz not in {{10, 20, 30}}",
                self.controller_frequency
            )));
        }
        Ok(())
    }

    /// Detection rate once the extra wait is added to the detector period.
    pub fn detection_hz(&self) -> f64 {
        1.0 / (1.0 / DUTY_FULL_HZ + self.yolo_wait_ms * 1e-3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    PowerSaving,
    Performance,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::PowerSaving => "POWER_SAVING",
            Mode::Performance => "PERFORMANCE",
        }
    }
}

/// Length of the current run of results that argue for leaving the mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Streak {
    pub count: u32,
}

/// Cheapest frequency pair whose worst-case reaction still leaves `t_d` of
/// time to collision; the maximal pair when no pair does.
pub fn optimize_frequencies(
    embedded: &EmbeddedPowerModel,
    profile: &TimelineProfile,
    t_c: f64,
    t_d: f64,
    detection_hz: f64,
) -> Result<FrequencyConfig> {
    if !(t_d > 0.0) {
        return Err(Error::invalid(format!("t_d must be positive, got {t_d}")));
    }
    let mut best: Option<(f64, FrequencyConfig)> = None;
    for fc in FrequencyConfig::all() {
        let delay = pipeline_delay(profile, fc, DelayCase::Worst)?;
        if t_c - delay < t_d {
            continue;
        }
        let p = embedded.predict(fc, detection_hz)?;
        let better = match best {
            None => true,
            Some((bp, bfc)) => p < bp || (p == bp && (fc.f_gpu, fc.f_cpu) < (bfc.f_gpu, bfc.f_cpu)),
        };
        if better {
            best = Some((p, fc));
        }
    }
    Ok(best.map(|(_, fc)| fc).unwrap_or_else(FrequencyConfig::max))
}

pub fn locality_test(report: &LocalityReport, cfg: &CoordinatorConfig) -> bool {
    locality_test_with_margin(report, cfg, 0.0)
}

/// Locality test with every threshold raised by the fraction `margin`.
pub fn locality_test_with_margin(report: &LocalityReport, cfg: &CoordinatorConfig, margin: f64) -> bool {
    let k = 1.0 + margin;
    report.fov_overlap >= (cfg.fov_threshold * k).min(1.0)
        && report.confidence_ratio >= cfg.confidence_threshold * k
        && report.progress == Progress::Progress
}

/// The test that argues for staying in (or entering) power saving: the plain
/// test while saving power, the stricter hysteresis test in performance mode.
pub fn mode_test(mode: Mode, report: &LocalityReport, cfg: &CoordinatorConfig) -> bool {
    match mode {
        Mode::PowerSaving => locality_test(report, cfg),
        Mode::Performance => locality_test_with_margin(report, cfg, cfg.hysteresis_margin),
    }
}

pub fn step_mode(current: Mode, test_passed: bool, streak: Streak, cfg: &CoordinatorConfig) -> (Mode, Streak) {
    let against = match current {
        Mode::PowerSaving => !test_passed,
        Mode::Performance => test_passed,
    };
    if !against {
        return (current, Streak::default());
    }
    let count = streak.count + 1;
    if count >= cfg.consecutive_trigger {
        let next = match current {
            Mode::PowerSaving => Mode::Performance,
            Mode::Performance => Mode::PowerSaving,
        };
        (next, Streak::default())
    } else {
        (current, Streak { count })
    }
}

pub fn apply_mode(mode: Mode, s_t: f64, _cfg: &CoordinatorConfig) -> NavParams {
    match mode {
        Mode::PowerSaving => NavParams {
            yolo_wait_ms: if s_t.is_nan() {
                0.0
            } else {
                (s_t * 1000.0).clamp(0.0, YOLO_WAIT_MAX_MS)
            },
            max_particles: PARTICLES_MIN,
            controller_frequency: 10,
        },
        Mode::Performance => NavParams {
            yolo_wait_ms: 0.0,
            max_particles: PARTICLES_MAX,
            controller_frequency: 30,
        },
    }
}

/// One coordinator evaluation, as logged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub time: f64,
    pub mode: Mode,
    pub freq: FrequencyConfig,
    pub nav: NavParams,
    pub t_c: f64,
    pub s_t: f64,
    pub fov_overlap: f64,
    pub confidence_ratio: f64,
    pub progress: Progress,
    /// The chosen pair meets the TTC threshold (false only when no pair can).
    pub feasible: bool,
    pub forced: bool,
}

/// Single-owner mode state machine.
#[derive(Debug, Clone)]
pub struct Coordinator {
    pub cfg: CoordinatorConfig,
    embedded: EmbeddedPowerModel,
    profile: TimelineProfile,
    mode: Mode,
    streak: Streak,
    freq: FrequencyConfig,
}

impl Coordinator {
    pub fn new(
        cfg: CoordinatorConfig,
        embedded: EmbeddedPowerModel,
        profile: TimelineProfile,
        initial: Mode,
    ) -> Result<Self> {
        cfg.validate()?;
        Ok(Coordinator {
            cfg,
            embedded,
            profile,
            mode: initial,
            streak: Streak::default(),
            freq: FrequencyConfig::max(),
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn frequencies(&self) -> FrequencyConfig {
        self.freq
    }

    /// Advances the mode machine and picks the settings for the next period.
    /// `t_c` is the current time to collision; the safe time is evaluated
    /// with the worst-case delay at the frequencies currently applied.
    pub fn evaluate(&mut self, time: f64, report: &LocalityReport, t_c: f64) -> Result<Decision> {
        let s_now = crate::collision::safe_time(t_c, pipeline_delay(&self.profile, self.freq, DelayCase::Worst)?);
        let forced = s_now < 0.0;
        if forced {
            self.mode = Mode::Performance;
            self.streak = Streak::default();
        } else {
            let pass = mode_test(self.mode, report, &self.cfg);
            (self.mode, self.streak) = step_mode(self.mode, pass, self.streak, &self.cfg);
        }
        let nav = apply_mode(self.mode, s_now, &self.cfg);
        self.freq = match self.mode {
            Mode::Performance => FrequencyConfig::max(),
            Mode::PowerSaving => {
                optimize_frequencies(&self.embedded, &self.profile, t_c, self.cfg.t_d, nav.detection_hz())?
            }
        };
        let delay = pipeline_delay(&self.profile, self.freq, DelayCase::Worst)?;
        let s_t = crate::collision::safe_time(t_c, delay);
        Ok(Decision {
            time,
            mode: self.mode,
            freq: self.freq,
            nav,
            t_c,
            s_t,
            fov_overlap: report.fov_overlap,
            confidence_ratio: report.confidence_ratio,
            progress: report.progress,
            feasible: t_c - delay >= self.cfg.t_d,
            forced,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(fov: f64, conf: f64, progress: Progress) -> LocalityReport {
        LocalityReport {
            fov_overlap: fov,
            confidence_ratio: conf,
            progress,
        }
    }

    #[test]
    fn locality_examples() {
        let cfg = CoordinatorConfig::default();
        assert!(locality_test(&report(0.9, 100.0, Progress::Progress), &cfg));
        assert!(!locality_test(&report(0.9, 100.0, Progress::Deviation), &cfg));
        assert!(!locality_test(&report(0.79, 100.0, Progress::Progress), &cfg));
    }

    #[test]
    fn trigger_and_reset() {
        let cfg = CoordinatorConfig::default();
        let run = |mode: Mode, seq: &[bool]| {
            let mut s = (mode, Streak::default());
            for &p in seq {
                s = step_mode(s.0, p, s.1, &cfg);
            }
            s.0
        };
        assert_eq!(run(Mode::PowerSaving, &[false, false, false]), Mode::Performance);
        assert_eq!(run(Mode::PowerSaving, &[false, false, true, false]), Mode::PowerSaving);
        assert_eq!(run(Mode::Performance, &[true, true, true]), Mode::PowerSaving);
    }

    #[test]
    fn hysteresis_band_holds_performance() {
        let cfg = CoordinatorConfig::default();
        let at_base = report(cfg.fov_threshold, cfg.confidence_threshold, Progress::Progress);
        let mut s = (Mode::Performance, Streak::default());
        for _ in 0..3 {
            s = step_mode(s.0, mode_test(s.0, &at_base, &cfg), s.1, &cfg);
        }
        assert_eq!(s.0, Mode::Performance);
        let above = report(0.9, 60.0, Progress::Progress);
        for _ in 0..3 {
            s = step_mode(s.0, mode_test(s.0, &above, &cfg), s.1, &cfg);
        }
        assert_eq!(s.0, Mode::PowerSaving);
    }

    #[test]
    fn apply_mode_examples() {
        let cfg = CoordinatorConfig::default();
        assert_eq!(apply_mode(Mode::PowerSaving, 0.15, &cfg).yolo_wait_ms, 150.0);
        let p = apply_mode(Mode::PowerSaving, 5.0, &cfg);
        assert_eq!(
            (p.yolo_wait_ms, p.max_particles, p.controller_frequency),
            (200.0, 500, 10)
        );
        let p = apply_mode(Mode::Performance, 0.7, &cfg);
        assert_eq!(
            (p.yolo_wait_ms, p.max_particles, p.controller_frequency),
            (0.0, 3000, 30)
        );
        for s in [-10.0, -0.1, f64::INFINITY, f64::NAN] {
            apply_mode(Mode::PowerSaving, s, &cfg).validate().unwrap();
        }
    }

    #[test]
    fn optimizer_extremes() {
        let e = EmbeddedPowerModel::calibrated();
        let p = TimelineProfile::synthetic();
        let cheapest = optimize_frequencies(&e, &p, f64::INFINITY, 2.0, 6.0).unwrap();
        assert_eq!(cheapest, FrequencyConfig::min());
        let fastest = pipeline_delay(&p, FrequencyConfig::max(), DelayCase::Worst).unwrap();
        let only_max = optimize_frequencies(&e, &p, fastest + 2.0 + 1e-9, 2.0, 6.0).unwrap();
        assert_eq!(only_max, FrequencyConfig::max());
        assert_eq!(
            optimize_frequencies(&e, &p, 0.5, 2.0, 6.0).unwrap(),
            FrequencyConfig::max()
        );
        assert!(optimize_frequencies(&e, &p, 5.0, 0.0, 6.0).is_err());
    }

    #[test]
    fn unsafe_margin_forces_performance() {
        let mut c = Coordinator::new(
            CoordinatorConfig::default(),
            EmbeddedPowerModel::calibrated(),
            TimelineProfile::synthetic(),
            Mode::PowerSaving,
        )
        .unwrap();
        let good = report(1.0, 1e6, Progress::Progress);
        let d = c.evaluate(0.0, &good, 0.05).unwrap();
        assert!(d.forced);
        assert_eq!(d.mode, Mode::Performance);
        assert_eq!(d.freq, FrequencyConfig::max());
    }

    #[test]
    fn detection_rate_with_wait() {
        let p = NavParams::new(0.0, 2000, 20).unwrap();
        assert!((p.detection_hz() - 6.0).abs() < 1e-12);
        assert!(NavParams::new(250.0, 2000, 20).is_err());
        assert!(NavParams::new(0.0, 200, 20).is_err());
        assert!(NavParams::new(0.0, 2000, 15).is_err());
    }
}
