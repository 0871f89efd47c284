//! Deterministic 2D world and the scenario loop.
//!
//! Each 10 ms tick runs the stages in a fixed order: sense, localize,
//! monitor, coordinate, plan, actuate, log. LiDAR scans, locality checks,
//! coordinator evaluations and metric rows happen every 200 ms; camera poses
//! every 33.3 ms; the local planner at the controller frequency.

mod calibration;
mod kinematics;
mod lidar;
mod localizer;
mod metrics;
mod run;
mod scenario;
mod tasks;

pub use calibration::{
    Calibration, CalibrationReport, EMBEDDED_FILE, HOLDOUT_SAMPLES, LABEL_NOISE, MOTOR_MODEL_FILE, PLANT_FILE,
    TIMELINE_FILE, TRAIN_SAMPLES,
};
pub use kinematics::{integrate_kinematics, RobotState};
pub use lidar::{simulate_scan, LidarConfig};
pub use localizer::{odometry_delta, LikelihoodField, Localizer, MotionNoise, SensorModel};
pub use metrics::{trapezoid, write_csv, MetricsSample, Stats, Summary, CSV_COLUMNS, CSV_HEADER};
pub use run::{run_scenario, run_scenario_with, PowerTracePoint, RunOptions, RunOutput};
pub use scenario::{reference_hall, Policy, ScenarioSpec, SimParams};
pub use tasks::{synthetic_utilization, udvfs_governor, DetectionStub, CPU_CORES, SCAN_HZ, UTIL_DOWN, UTIL_UP};
