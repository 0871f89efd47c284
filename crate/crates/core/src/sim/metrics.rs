//! Logged samples, CSV stream and run summary.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::coordinator::Mode;
use crate::power::{FrequencyConfig, PowerBreakdown};

pub const CSV_HEADER: &str = "# pnav-metrics v1";

/// Column order of the metrics CSV.
pub const CSV_COLUMNS: [&str; 24] = [
    "time",
    "motor_watts",
    "embedded_watts",
    "total_watts",
    "predicted_motor_watts",
    "predicted_total_watts",
    "position_error",
    "orientation_error",
    "t_c",
    "s_t",
    "mode",
    "f_cpu",
    "f_gpu",
    "x_gt",
    "y_gt",
    "yaw_gt",
    "x_est",
    "y_est",
    "yaw_est",
    "v",
    "w",
    "particles",
    "controller_hz",
    "yolo_wait_ms",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSample {
    pub time: f64,
    pub power: PowerBreakdown,
    pub predicted_motor_watts: f64,
    pub predicted_total_watts: f64,
    pub position_error: f64,
    pub orientation_error: f64,
    pub t_c: f64,
    pub s_t: f64,
    /// `None` for the baseline policies, which have no mode machine.
    pub mode: Option<Mode>,
    pub freq: FrequencyConfig,
    pub true_pose: [f64; 3],
    pub estimate: [f64; 3],
    pub v: f64,
    pub w: f64,
    pub particles: usize,
    pub controller_hz: u32,
    pub yolo_wait_ms: f64,
}

fn num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

impl MetricsSample {
    pub fn csv_row(&self) -> String {
        let mut s = String::new();
        let mode = self.mode.map(Mode::as_str).unwrap_or("BASELINE");
        let fields = [
            num(self.time),
            num(self.power.motor_watts),
            num(self.power.embedded_watts),
            num(self.power.total_watts),
            num(self.predicted_motor_watts),
            num(self.predicted_total_watts),
            num(self.position_error),
            num(self.orientation_error),
            num(self.t_c),
            num(self.s_t),
            mode.to_string(),
            self.freq.f_cpu.to_string(),
            self.freq.f_gpu.to_string(),
            num(self.true_pose[0]),
            num(self.true_pose[1]),
            num(self.true_pose[2]),
            num(self.estimate[0]),
            num(self.estimate[1]),
            num(self.estimate[2]),
            num(self.v),
            num(self.w),
            self.particles.to_string(),
            self.controller_hz.to_string(),
            num(self.yolo_wait_ms),
        ];
        let _ = write!(s, "{}", fields.join(","));
        s
    }
}

pub fn write_csv<W: Write>(out: &mut W, samples: &[MetricsSample]) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    writeln!(out, "{}", CSV_COLUMNS.join(","))?;
    for s in samples {
        writeln!(out, "{}", s.csv_row())?;
    }
    Ok(())
}

/// Minimum, mean and maximum over finite values; `None` when there are none.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub min: Option<f64>,
    pub mean: Option<f64>,
    pub max: Option<f64>,
    /// Samples that were infinite (no obstacle in reach).
    pub unbounded: usize,
}

impl Stats {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let (mut n, mut sum, mut lo, mut hi, mut inf) = (0usize, 0.0, f64::INFINITY, f64::NEG_INFINITY, 0);
        for v in values {
            if v.is_finite() {
                n += 1;
                sum += v;
                lo = lo.min(v);
                hi = hi.max(v);
            } else {
                inf += 1;
            }
        }
        if n == 0 {
            return Stats {
                min: None,
                mean: None,
                max: None,
                unbounded: inf,
            };
        }
        Stats {
            min: Some(lo),
            mean: Some(sum / n as f64),
            max: Some(hi),
            unbounded: inf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub policy: String,
    pub seed: u64,
    pub map: String,
    pub start: [f64; 3],
    pub goals: Vec<[f64; 2]>,
    pub loops: usize,
    /// Time to reach each goal from the previous one, in route order.
    pub finish_times: Vec<f64>,
    pub mean_finish_time: f64,
    pub total_time: f64,
    pub mean_power: f64,
    pub mean_motor_power: f64,
    pub mean_embedded_power: f64,
    pub total_energy: f64,
    pub mean_position_error: f64,
    pub max_position_error: f64,
    pub mean_orientation_error: f64,
    pub t_c: Stats,
    pub collisions: usize,
    pub lost_resets: usize,
    pub detections: u64,
    pub coordinator_evaluations: usize,
    pub mode_switches: usize,
    pub power_saving_fraction: f64,
    /// Evaluations whose chosen pair missed the TTC threshold although a
    /// feasible pair existed.
    pub infeasible_choices: usize,
}

/// Trapezoidal integral of `(time, watts)` samples, joules.
pub fn trapezoid(points: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let mut it = points.into_iter();
    let Some(mut prev) = it.next() else {
        return 0.0;
    };
    let mut acc = 0.0;
    for p in it {
        acc += 0.5 * (p.1 + prev.1) * (p.0 - prev.0);
        prev = p;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_rule() {
        assert_eq!(trapezoid([]), 0.0);
        assert_eq!(trapezoid([(0.0, 5.0)]), 0.0);
        assert!((trapezoid([(0.0, 0.0), (1.0, 2.0), (3.0, 2.0)]) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn stats_skip_infinite() {
        let s = Stats::of([1.0, f64::INFINITY, 3.0]);
        assert_eq!(
            (s.min, s.mean, s.max, s.unbounded),
            (Some(1.0), Some(2.0), Some(3.0), 1)
        );
        assert_eq!(Stats::of([f64::INFINITY]).mean, None);
    }

    #[test]
    fn row_matches_columns() {
        let s = MetricsSample {
            time: 0.2,
            power: PowerBreakdown::default(),
            predicted_motor_watts: 0.0,
            predicted_total_watts: 0.0,
            position_error: 0.0,
            orientation_error: 0.0,
            t_c: f64::INFINITY,
            s_t: f64::INFINITY,
            mode: None,
            freq: FrequencyConfig::max(),
            true_pose: [0.0; 3],
            estimate: [0.0; 3],
            v: 0.0,
            w: 0.0,
            particles: 2000,
            controller_hz: 20,
            yolo_wait_ms: 0.0,
        };
        let row = s.csv_row();
        assert_eq!(row.split(',').count(), CSV_COLUMNS.len());
        assert!(row.contains(",inf,inf,BASELINE,2265,1377,"));
    }
}
