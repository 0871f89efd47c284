//! Multi-policy comparison report.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::sim::{run_scenario_with, Calibration, Policy, RunOptions, RunOutput, ScenarioSpec, Summary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub baseline: String,
    /// `100 * (baseline - reference) / baseline` for total energy.
    pub energy_pct: f64,
    pub power_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinishRow {
    pub policy: String,
    pub finish_times: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub policy: String,
    pub mean_position_error: f64,
    pub max_position_error: f64,
    pub mean_orientation_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtcRow {
    pub policy: String,
    pub min: Option<f64>,
    pub mean: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Policy the reductions are measured for.
    pub reference: String,
    pub summaries: Vec<Summary>,
    pub reductions: Vec<Reduction>,
    pub finish_times: Vec<FinishRow>,
    pub errors: Vec<ErrorRow>,
    pub ttc: Vec<TtcRow>,
}

pub fn reduction_pct(baseline: f64, reference: f64) -> f64 {
    100.0 * (baseline - reference) / baseline
}

impl RunReport {
    /// Builds the tables. The reference is PNAV when present, otherwise the
    /// last summary.
    pub fn from_summaries(summaries: Vec<Summary>) -> Result<Self> {
        if summaries.len() < 2 {
            return Err(Error::invalid("a comparison needs at least two policies"));
        }
        let first = &summaries[0];
        if summaries.iter().any(|s| {
            s.map != first.map
                || s.start != first.start
                || s.goals != first.goals
                || s.loops != first.loops
                || s.seed != first.seed
        }) {
            return Err(Error::invalid("summaries come from different scenarios"));
        }
        let r = summaries
            .iter()
            .position(|s| s.policy == Policy::Pnav.as_str())
            .unwrap_or(summaries.len() - 1);
        let refs = &summaries[r];
        let reductions = summaries
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != r)
            .map(|(_, s)| Reduction {
                baseline: s.policy.clone(),
                energy_pct: reduction_pct(s.total_energy, refs.total_energy),
                power_pct: reduction_pct(s.mean_power, refs.mean_power),
            })
            .collect();
        Ok(RunReport {
            reference: refs.policy.clone(),
            reductions,
            finish_times: summaries
                .iter()
                .map(|s| FinishRow {
                    policy: s.policy.clone(),
                    finish_times: s.finish_times.clone(),
                    mean: s.mean_finish_time,
                })
                .collect(),
            errors: summaries
                .iter()
                .map(|s| ErrorRow {
                    policy: s.policy.clone(),
                    mean_position_error: s.mean_position_error,
                    max_position_error: s.max_position_error,
                    mean_orientation_error: s.mean_orientation_error,
                })
                .collect(),
            ttc: summaries
                .iter()
                .map(|s| TtcRow {
                    policy: s.policy.clone(),
                    min: s.t_c.min,
                    mean: s.t_c.mean,
                    max: s.t_c.max,
                })
                .collect(),
            summaries,
        })
    }

    pub fn reduction_vs(&self, baseline: Policy) -> Option<&Reduction> {
        self.reductions.iter().find(|r| r.baseline == baseline.as_str())
    }
}

/// Runs `spec` once per policy with the same seed. `exec` only decides
/// whether the runs overlap in time; each run is deterministic on its own.
pub fn compare_policies(
    spec: &ScenarioSpec,
    calib: &Calibration,
    policies: &[Policy],
    exec: Exec,
    opts: RunOptions,
) -> Result<Vec<RunOutput>> {
    let specs: Vec<ScenarioSpec> = policies
        .iter()
        .map(|&policy| ScenarioSpec { policy, ..spec.clone() })
        .collect();
    exec.map(&specs, |s| run_scenario_with(s, calib, opts))
        .into_iter()
        .collect()
}
