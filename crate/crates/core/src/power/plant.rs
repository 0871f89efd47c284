//! Synthetic motor plant used as ground truth for the learned motor model.
//!
//! `P = c0 + c1|v| + c2 v^2 + c3|w| + c4 w^2 + c5|v - v_prev| + c6|w - w_prev|`

use std::fmt::Write as _;
use std::path::Path;

use super::embedded::{EmbeddedPowerModel, DUTY_FULL_HZ};
use super::freq::FrequencyConfig;
use super::MotorCommandWindow;
use crate::error::{Error, Result};

/// Steady in-place spin: (angular speed rad/s, motor watts).
pub const SPIN_ANCHORS: [(f64, f64); 2] = [(1.2, 92.1), (0.4, 19.4)];

/// Straight-line runs: (wheel RPM, whole-robot watts). Motor power is what
/// remains after subtracting the board power at the profiling frequencies.
pub const STRAIGHT_E2E_ANCHORS: [(f64, f64); 3] = [(1000.0, 44.11), (1500.0, 53.44), (2000.0, 61.77)];

const IDLE_WATTS: f64 = 2.0;
/// Transient coefficients (W per m/s and W per rad/s of command change).
const ACCEL_V_WATTS: f64 = 40.0;
const ACCEL_W_WATTS: f64 = 10.0;

const MAX_RPM: f64 = 2000.0;
const MAX_V: f64 = 0.5;

const HEADER: &str = "pnav-motor-plant v1";

/// Linear map from wheel RPM to forward speed, 2000 RPM at 0.5 m/s.
pub fn rpm_to_velocity(rpm: f64) -> f64 {
    rpm / MAX_RPM * MAX_V
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorPlant {
    pub coeffs: [f64; 7],
}

impl MotorPlant {
    /// Plant fitted against the built-in anchors and the calibrated board model.
    pub fn calibrated(embedded: &EmbeddedPowerModel) -> Self {
        Self::calibrate(embedded).expect("built-in plant anchors are consistent")
    }

    pub fn calibrate(embedded: &EmbeddedPowerModel) -> Result<Self> {
        let c0 = IDLE_WATTS;
        // Two spin anchors, two unknowns: exact solve.
        let [(w1, p1), (w2, p2)] = SPIN_ANCHORS;
        let (c3, c4) = solve2([[w1, w1 * w1], [w2, w2 * w2]], [p1 - c0, p2 - c0])
            .ok_or_else(|| Error::invalid("spin anchors are degenerate"))?;

        let board = embedded.predict(FrequencyConfig::max(), DUTY_FULL_HZ)?;
        let rows: Vec<([f64; 2], f64)> = STRAIGHT_E2E_ANCHORS
            .iter()
            .map(|&(rpm, total)| {
                let v = rpm_to_velocity(rpm);
                ([v, v * v], total - board - c0)
            })
            .collect();
        let (c1, c2) = nnls2(&rows).ok_or_else(|| Error::invalid("straight anchors are degenerate"))?;

        let plant = MotorPlant {
            coeffs: [c0, c1, c2, c3, c4, ACCEL_V_WATTS, ACCEL_W_WATTS],
        };
        if plant.coeffs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::invalid(format!(
                "calibrated plant has invalid coefficients {:?}",
                plant.coeffs
            )));
        }
        Ok(plant)
    }

    pub fn power(&self, cmd: &MotorCommandWindow) -> f64 {
        let [c0, c1, c2, c3, c4, c5, c6] = self.coeffs;
        let (v, w) = (cmd.current.v, cmd.current.w);
        let dv = (cmd.current.v - cmd.previous.v).abs();
        let dw = (cmd.current.w - cmd.previous.w).abs();
        (c0 + c1 * v.abs() + c2 * v * v + c3 * w.abs() + c4 * w * w + c5 * dv + c6 * dw).max(0.0)
    }

    pub fn idle_watts(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{HEADER}");
        for (i, c) in self.coeffs.iter().enumerate() {
            let _ = writeln!(s, "c{i} = {c}");
        }
        s
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == HEADER => {}
            _ => return Err(Error::parse(origin, 1, format!("expected header `{HEADER}`"))),
        }
        let mut coeffs = [f64::NAN; 7];
        for (ln, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, ln + 1, "expected `cN = value`"))?;
            let idx: usize = k
                .trim()
                .strip_prefix('c')
                .and_then(|n| n.parse().ok())
                .filter(|&n: &usize| n < 7)
                .ok_or_else(|| Error::parse(origin, ln + 1, format!("unknown key `{}`", k.trim())))?;
            coeffs[idx] = v
                .trim()
                .parse()
                .map_err(|_| Error::parse(origin, ln + 1, format!("bad number `{}`", v.trim())))?;
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::parse(origin, 0, "plant file must define c0..c6"));
        }
        Ok(MotorPlant { coeffs })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, &path.display().to_string())
    }
}

fn solve2(a: [[f64; 2]; 2], b: [f64; 2]) -> Option<(f64, f64)> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det.abs() < 1e-15 {
        return None;
    }
    Some((
        (b[0] * a[1][1] - a[0][1] * b[1]) / det,
        (a[0][0] * b[1] - b[0] * a[1][0]) / det,
    ))
}

/// Two-variable non-negative least squares by enumerating the active sets.
fn nnls2(rows: &[([f64; 2], f64)]) -> Option<(f64, f64)> {
    let mut ata = [[0.0; 2]; 2];
    let mut atb = [0.0; 2];
    for (x, y) in rows {
        for i in 0..2 {
            atb[i] += x[i] * y;
            for j in 0..2 {
                ata[i][j] += x[i] * x[j];
            }
        }
    }
    let sse = |a: f64, b: f64| rows.iter().map(|(x, y)| (x[0] * a + x[1] * b - y).powi(2)).sum::<f64>();
    let mut candidates = Vec::new();
    if let Some((a, b)) = solve2(ata, atb) {
        if a >= 0.0 && b >= 0.0 {
            candidates.push((a, b));
        }
    }
    if ata[1][1] > 0.0 {
        candidates.push((0.0, (atb[1] / ata[1][1]).max(0.0)));
    }
    if ata[0][0] > 0.0 {
        candidates.push(((atb[0] / ata[0][0]).max(0.0), 0.0));
    }
    candidates
        .into_iter()
        .min_by(|p, q| sse(p.0, p.1).total_cmp(&sse(q.0, q.1)))
}
