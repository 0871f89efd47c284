//! Pipeline timing, time-to-collision and safe-time margin.

mod timeline;

pub use timeline::{LatencyEntry, LatencyTable, Stage, TimelineProfile, DT0_MAX};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::power::FrequencyConfig;
use crate::scan::LaserScan;
use crate::types::wrap;

/// Time step along each candidate arc.
pub const ARC_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DelayCase {
    Average,
    Worst,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TtcReport {
    pub f_d: f64,
    pub t_c: f64,
    pub s_t: f64,
    pub case: DelayCase,
}

/// Velocity lattice over the full drivable window `[0, vmax] x [-wmax, wmax]`.
pub fn velocity_lattice(vmax: f64, wmax: f64, (nv, nw): (usize, usize)) -> Vec<(f64, f64)> {
    let axis = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
        match n {
            0 => vec![],
            1 => vec![hi],
            _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
        }
    };
    let vs = axis(0.0, vmax, nv);
    let ws = if nw == 1 { vec![0.0] } else { axis(-wmax, wmax, nw) };
    vs.iter().flat_map(|&v| ws.iter().map(move |&w| (v, w))).collect()
}

/// Closed-form position after following constant `(v, w)` for `t` seconds
/// from the origin facing +x.
pub fn arc_point(v: f64, w: f64, t: f64) -> (f64, f64) {
    if w.abs() < 1e-9 {
        (v * t, 0.0)
    } else {
        (v / w * (w * t).sin(), v / w * (1.0 - (w * t).cos()))
    }
}

pub(crate) fn arc_times(horizon: f64) -> impl Iterator<Item = f64> {
    let n = (horizon / ARC_STEP - 1e-9).ceil().max(0.0) as usize;
    (0..=n).map(move |k| (k as f64 * ARC_STEP).min(horizon))
}

/// Smallest remaining clearance over all reachable constant-velocity arcs.
///
/// For every lattice velocity and every time step up to `horizon`, the arc
/// point's bearing (the heading `w * t` while the robot has not moved) picks
/// a beam, and the distance already covered toward that bearing is
/// subtracted from its range. Values are floored at zero.
pub fn min_reachable_distance(
    scan: &LaserScan,
    vmax: f64,
    wmax: f64,
    horizon: f64,
    samples: (usize, usize),
) -> Result<f64> {
    if scan.ranges.is_empty() {
        return Err(Error::invalid("scan has no beams"));
    }
    if !(vmax > 0.0) || !(horizon > 0.0) || !(wmax >= 0.0) {
        return Err(Error::invalid("vmax and horizon must be positive, wmax non-negative"));
    }
    if scan.all_no_return() {
        return Ok(f64::INFINITY);
    }
    let mut best = f64::INFINITY;
    for (v, w) in velocity_lattice(vmax, wmax, samples) {
        for t in arc_times(horizon) {
            let (x, y) = arc_point(v, w, t);
            let chord = x.hypot(y);
            let bearing = if chord < 1e-12 { wrap(w * t) } else { y.atan2(x) };
            let r = scan.range_at(bearing);
            if r.is_finite() {
                best = best.min((r - chord).max(0.0));
            }
        }
    }
    Ok(best)
}

pub fn time_to_collision(f_d: f64, vmax: f64) -> Result<f64> {
    if !(vmax > 0.0) {
        return Err(Error::invalid("vmax must be positive"));
    }
    if f_d.is_nan() || f_d < 0.0 {
        return Err(Error::invalid(format!("distance must be non-negative, got {f_d}")));
    }
    if f_d.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(f_d / vmax)
}

/// Time left after the pipeline reacts; negative means it cannot react in time.
pub fn safe_time(t_c: f64, delay: f64) -> f64 {
    debug_assert!(delay >= 0.0, "delay must be non-negative");
    if t_c.is_infinite() {
        t_c
    } else {
        t_c - delay
    }
}

/// End-to-end reaction delay: alignment, then the slower of localization and
/// detection, then costmap update and local planning.
pub fn pipeline_delay(profile: &TimelineProfile, fc: FrequencyConfig, case: DelayCase) -> Result<f64> {
    let pick = |stage: Stage, f: u32| -> Result<f64> {
        let e = profile
            .table(stage)
            .get(f)
            .ok_or_else(|| Error::invalid(format!("no {} latency for {f} MHz", stage.name())))?;
        Ok(match case {
            DelayCase::Average => e.mean,
            DelayCase::Worst => e.max,
        })
    };
    let slam = pick(Stage::Slam, fc.f_cpu)?;
    let object = pick(Stage::Object, fc.f_gpu)?;
    let costmap = pick(Stage::Costmap, fc.f_cpu)?;
    let planner = pick(Stage::Planner, fc.f_cpu)?;
    Ok(profile.dt0 + slam.max(object) + costmap + planner)
}

pub fn ttc_report(
    scan: &LaserScan,
    profile: &TimelineProfile,
    fc: FrequencyConfig,
    case: DelayCase,
    vmax: f64,
    wmax: f64,
    horizon: f64,
    samples: (usize, usize),
) -> Result<TtcReport> {
    let f_d = min_reachable_distance(scan, vmax, wmax, horizon, samples)?;
    let t_c = time_to_collision(f_d, vmax)?;
    let s_t = safe_time(t_c, pipeline_delay(profile, fc, case)?);
    Ok(TtcReport { f_d, t_c, s_t, case })
}
