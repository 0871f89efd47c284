//! Embedded (CPU + GPU + peripheral) power model.
//!
//! `P_ES = F1(f_cpu) + F2(f_gpu) * duty(detection_hz) + F3(f_cpu, f_gpu)` with
//! a linear CPU term, a piecewise-linear GPU term through measured anchors and
//! a peripheral term that grows with GPU clock and steps up above 2 GHz CPU.

use std::fmt::Write as _;
use std::path::Path;

use super::freq::{FrequencyConfig, CALIBRATION_CPU_MHZ, GPU_LEVELS};
use crate::error::{Error, Result};

/// Measured board power (W) per GPU level at the calibration CPU level with
/// detection running at full duty.
pub const GPU_POWER_ANCHORS: [(u32, f64); 6] = [
    (420, 16.91),
    (624, 18.92),
    (828, 21.53),
    (1032, 24.89),
    (1198, 28.45),
    (1377, 33.38),
];

/// Detection rate that keeps the GPU fully busy.
pub const DUTY_FULL_HZ: f64 = 6.0;
pub const DUTY_IDLE_FLOOR: f64 = 0.15;

/// Board power at the detection profiling point (maximal frequencies) for
/// the full and the halved detection rate.
const DUTY_ANCHOR_FULL_W: f64 = 36.5;
const DUTY_ANCHOR_HALF_W: f64 = 26.8;

const HEADER: &str = "pnav-embedded-model v1";

/// Coefficients that the anchors cannot pin down on their own.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddedPriors {
    pub cpu_intercept: f64,
    pub peripheral_gpu_slope: f64,
    pub peripheral_cpu_step: f64,
    pub cpu_step_threshold: f64,
}

impl Default for EmbeddedPriors {
    fn default() -> Self {
        EmbeddedPriors {
            cpu_intercept: 2.0,
            peripheral_gpu_slope: 0.002,
            peripheral_cpu_step: 1.0,
            cpu_step_threshold: 2000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorResidual {
    pub f_gpu: u32,
    pub anchor_watts: f64,
    pub predicted_watts: f64,
}

impl AnchorResidual {
    pub fn residual(&self) -> f64 {
        self.predicted_watts - self.anchor_watts
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedPowerModel {
    /// `(f_gpu MHz, F2 watts)`, strictly increasing in frequency.
    pub gpu_anchor_table: Vec<(f64, f64)>,
    pub cpu_slope: f64,
    pub cpu_intercept: f64,
    pub peripheral_base: f64,
    pub peripheral_gpu_slope: f64,
    pub peripheral_cpu_step: f64,
    pub cpu_step_threshold: f64,
}

impl EmbeddedPowerModel {
    /// Model fitted to the built-in anchors with default priors.
    pub fn calibrated() -> Self {
        Self::calibrate(&GPU_POWER_ANCHORS, EmbeddedPriors::default())
            .expect("built-in anchors are consistent")
            .0
    }

    /// Fits the model so that every `(f_gpu, watts)` anchor is reproduced at
    /// the calibration CPU level, and the halved-duty anchor pair holds at the
    /// maximal frequencies.
    pub fn calibrate(anchors: &[(u32, f64)], priors: EmbeddedPriors) -> Result<(Self, Vec<AnchorResidual>)> {
        if anchors.len() < 2 {
            return Err(Error::invalid("need at least two GPU anchors"));
        }
        if anchors.windows(2).any(|w| w[1].0 <= w[0].0 || w[1].1 < w[0].1) {
            return Err(Error::invalid(
                "GPU anchors must increase in frequency and not decrease in watts",
            ));
        }
        let top = FrequencyConfig::max();
        let &(top_gpu, top_watts) = anchors.last().unwrap();
        if top_gpu != top.f_gpu {
            return Err(Error::invalid("last GPU anchor must sit at the maximal GPU level"));
        }
        let step = |f_cpu: f64| {
            if f_cpu > priors.cpu_step_threshold {
                priors.peripheral_cpu_step
            } else {
                0.0
            }
        };
        let cal = CALIBRATION_CPU_MHZ as f64;
        let fmax = top.f_cpu as f64;

        let duty_drop = duty(DUTY_FULL_HZ) - duty(DUTY_FULL_HZ / 2.0);
        let f2_top = (DUTY_ANCHOR_FULL_W - DUTY_ANCHOR_HALF_W) / duty_drop;
        // Moving the CPU from the calibration level to the maximum accounts
        // for the gap between the top anchor and the profiling point.
        let cpu_slope = (DUTY_ANCHOR_FULL_W - top_watts - (step(fmax) - step(cal))) / (fmax - cal);
        let fixed_at_cal =
            |g: f64| priors.cpu_intercept + cpu_slope * cal + priors.peripheral_gpu_slope * g + step(cal);
        let peripheral_base = top_watts - f2_top - fixed_at_cal(top_gpu as f64);

        let gpu_anchor_table: Vec<(f64, f64)> = anchors
            .iter()
            .map(|&(g, w)| (g as f64, w - peripheral_base - fixed_at_cal(g as f64)))
            .collect();
        let model = EmbeddedPowerModel {
            gpu_anchor_table,
            cpu_slope,
            cpu_intercept: priors.cpu_intercept,
            peripheral_base,
            peripheral_gpu_slope: priors.peripheral_gpu_slope,
            peripheral_cpu_step: priors.peripheral_cpu_step,
            cpu_step_threshold: priors.cpu_step_threshold,
        };
        model.validate()?;
        let residuals = model.anchor_residuals(anchors);
        Ok((model, residuals))
    }

    pub fn anchor_residuals(&self, anchors: &[(u32, f64)]) -> Vec<AnchorResidual> {
        anchors
            .iter()
            .map(|&(g, w)| AnchorResidual {
                f_gpu: g,
                anchor_watts: w,
                predicted_watts: self
                    .predict(
                        FrequencyConfig {
                            f_cpu: CALIBRATION_CPU_MHZ,
                            f_gpu: g,
                        },
                        DUTY_FULL_HZ,
                    )
                    .unwrap_or(f64::NAN),
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.gpu_anchor_table;
        if t.len() < 2 {
            return Err(Error::invalid("GPU anchor table needs at least two entries"));
        }
        if t.windows(2).any(|w| w[1].0 <= w[0].0 || w[1].1 < w[0].1) {
            return Err(Error::invalid(
                "GPU anchor table must be strictly increasing in frequency and non-decreasing in watts",
            ));
        }
        let coeffs = [
            self.cpu_slope,
            self.cpu_intercept,
            self.peripheral_base,
            self.peripheral_gpu_slope,
            self.peripheral_cpu_step,
            self.cpu_step_threshold,
        ];
        if coeffs
            .iter()
            .chain(t.iter().flat_map(|(a, b)| [a, b]))
            .any(|c| !c.is_finite())
        {
            return Err(Error::invalid("embedded model coefficients must be finite"));
        }
        if self.cpu_slope < 0.0 || self.peripheral_gpu_slope < 0.0 || self.peripheral_cpu_step < 0.0 {
            return Err(Error::invalid("embedded model slopes must be non-negative"));
        }
        for fc in FrequencyConfig::all() {
            if self.predict(fc, 0.0)? <= 0.0 {
                return Err(Error::invalid(format!("non-positive board power at {fc}")));
            }
        }
        Ok(())
    }

    /// CPU term, linear in frequency.
    pub fn cpu_power(&self, f_cpu: f64) -> f64 {
        self.cpu_intercept + self.cpu_slope * f_cpu
    }

    /// GPU term at full duty: piecewise-linear through the anchor table,
    /// held flat outside it.
    pub fn gpu_power(&self, f_gpu: f64) -> f64 {
        let t = &self.gpu_anchor_table;
        if f_gpu <= t[0].0 {
            return t[0].1;
        }
        for w in t.windows(2) {
            let ((f0, p0), (f1, p1)) = (w[0], w[1]);
            if f_gpu <= f1 {
                return p0 + (p1 - p0) * (f_gpu - f0) / (f1 - f0);
            }
        }
        t[t.len() - 1].1
    }

    pub fn peripheral_power(&self, f_cpu: f64, f_gpu: f64) -> f64 {
        let step = if f_cpu > self.cpu_step_threshold {
            self.peripheral_cpu_step
        } else {
            0.0
        };
        self.peripheral_base + self.peripheral_gpu_slope * f_gpu + step
    }

    /// Board power for a frequency pair with detection running at `detection_hz`.
    pub fn predict(&self, fc: FrequencyConfig, detection_hz: f64) -> Result<f64> {
        if !fc.is_valid() {
            return Err(Error::invalid(format!("{fc} is not a valid frequency pair")));
        }
        if !(0.0..=30.0).contains(&detection_hz) {
            return Err(Error::invalid(format!(
                "detection rate {detection_hz} Hz outside [0, 30]"
            )));
        }
        let (c, g) = (fc.f_cpu as f64, fc.f_gpu as f64);
        Ok(self.cpu_power(c) + self.gpu_power(g) * duty(detection_hz) + self.peripheral_power(c, g))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{HEADER}");
        let _ = writeln!(s, "cpu_intercept = {}", self.cpu_intercept);
        let _ = writeln!(s, "cpu_slope = {}", self.cpu_slope);
        let _ = writeln!(s, "peripheral_base = {}", self.peripheral_base);
        let _ = writeln!(s, "peripheral_gpu_slope = {}", self.peripheral_gpu_slope);
        let _ = writeln!(s, "peripheral_cpu_step = {}", self.peripheral_cpu_step);
        let _ = writeln!(s, "cpu_step_threshold = {}", self.cpu_step_threshold);
        for (f, w) in &self.gpu_anchor_table {
            let _ = writeln!(s, "gpu_anchor.{f} = {w}");
        }
        s
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == HEADER => {}
            _ => return Err(Error::parse(origin, 1, format!("expected header `{HEADER}`"))),
        }
        let mut m = EmbeddedPowerModel {
            gpu_anchor_table: Vec::new(),
            cpu_slope: f64::NAN,
            cpu_intercept: f64::NAN,
            peripheral_base: f64::NAN,
            peripheral_gpu_slope: f64::NAN,
            peripheral_cpu_step: f64::NAN,
            cpu_step_threshold: f64::NAN,
        };
        for (ln, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, ln + 1, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            let v: f64 = value
                .parse()
                .map_err(|_| Error::parse(origin, ln + 1, format!("bad number `{value}`")))?;
            match key {
                "cpu_intercept" => m.cpu_intercept = v,
                "cpu_slope" => m.cpu_slope = v,
                "peripheral_base" => m.peripheral_base = v,
                "peripheral_gpu_slope" => m.peripheral_gpu_slope = v,
                "peripheral_cpu_step" => m.peripheral_cpu_step = v,
                "cpu_step_threshold" => m.cpu_step_threshold = v,
                k if k.starts_with("gpu_anchor.") => {
                    let f: f64 = k["gpu_anchor.".len()..]
                        .parse()
                        .map_err(|_| Error::parse(origin, ln + 1, format!("bad anchor key `{k}`")))?;
                    m.gpu_anchor_table.push((f, v));
                }
                other => return Err(Error::parse(origin, ln + 1, format!("unknown key `{other}`"))),
            }
        }
        m.validate().map_err(|e| Error::parse(origin, 0, e.to_string()))?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, &path.display().to_string())
    }

    /// True when every GPU level has its own anchor.
    pub fn covers_gpu_levels(&self) -> bool {
        GPU_LEVELS
            .iter()
            .all(|&g| self.gpu_anchor_table.iter().any(|&(f, _)| f == g as f64))
    }
}

/// Fraction of the GPU kept busy by detection at `detection_hz`.
pub fn duty(detection_hz: f64) -> f64 {
    (detection_hz / DUTY_FULL_HZ).clamp(DUTY_IDLE_FLOOR, 1.0)
}
