//! The fixed-tick scenario loop.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::collision::{min_reachable_distance, pipeline_delay, safe_time, time_to_collision, DelayCase, Stage};
use crate::coordinator::{apply_mode, Coordinator, Decision, Mode, NavParams};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::OccupancyGrid;
use crate::locality::{
    confidence_ratio, fov_overlap, progress_status, LocalityReport, PlanSnapshot, Progress, PROGRESS_EPS,
};
use crate::planner::{combine, plan_global, raw_criteria, sample_window, scan_points, select_command, GlobalPlan};
use crate::power::{predict_total_power, FrequencyConfig, MotorCommandWindow};
use crate::types::{wrap, Pose, Twist};

use super::calibration::Calibration;
use super::kinematics::{integrate_kinematics, RobotState};
use super::lidar::simulate_scan;
use super::localizer::{odometry_delta, LikelihoodField, Localizer};
use super::metrics::{trapezoid, MetricsSample, Stats, Summary};
use super::scenario::{Policy, ScenarioSpec};
use super::tasks::{synthetic_utilization, udvfs_governor, DetectionStub};

const SCAN_PERIOD_US: u64 = 200_000;
const CAMERA_PERIOD_US: u64 = 33_333;
/// Lag between the current and previous command in the motor window.
const MOTOR_WINDOW_US: u64 = 100_000;
/// Obstacle distances beyond this carry no extra likelihood information.
const FIELD_CAP: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    pub exec: Exec,
    /// Record plant and predicted total power at every tick.
    pub trace_power: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTracePoint {
    pub time: f64,
    pub truth_watts: f64,
    pub predicted_watts: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: Vec<MetricsSample>,
    pub decisions: Vec<Decision>,
    pub power_trace: Vec<PowerTracePoint>,
    pub summary: Summary,
}

pub fn run_scenario(spec: &ScenarioSpec, calib: &Calibration) -> Result<RunOutput> {
    run_scenario_with(spec, calib, RunOptions::default())
}

/// Grid with obstacles grown by `radius`, for path search only.
fn inflate(grid: &OccupancyGrid, radius: f64) -> OccupancyGrid {
    let mut out = grid.clone();
    if radius <= 0.0 {
        return out;
    }
    let d = grid.distance_field();
    for j in 0..grid.height() {
        for i in 0..grid.width() {
            if d[j * grid.width() + i] <= radius + 1e-9 {
                out.set(i, j, true);
            }
        }
    }
    out
}

fn replan(inflated: &OccupancyGrid, raw: &OccupancyGrid, from: &Pose, goal: (f64, f64)) -> Result<GlobalPlan> {
    match plan_global(inflated, from, goal) {
        Ok(p) => Ok(p),
        Err(Error::NoPath { .. }) | Err(Error::InvalidArgument(_)) => {
            plan_global(raw, from, goal).map_err(|e| match e {
                Error::NoPath { .. } => e,
                other => Error::Aborted(format!("cannot plan from ({:.2}, {:.2}): {other}", from.x, from.y)),
            })
        }
        Err(e) => Err(e),
    }
}

fn period_us(hz: u32) -> u64 {
    1_000_000 / hz as u64
}

pub fn run_scenario_with(spec: &ScenarioSpec, calib: &Calibration, opts: RunOptions) -> Result<RunOutput> {
    spec.validate()?;
    let p = &spec.params;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let inflated = inflate(&spec.map, p.inflation);
    let field = LikelihoodField::new(&spec.map, FIELD_CAP);
    let limits = p.planner.limits();
    let tick_s = p.tick_us as f64 * 1e-6;

    let coordinated = spec.policy.uses_coordinator();
    let weights = if coordinated {
        p.planner.weights
    } else {
        p.planner.weights.without_power()
    };
    let mut coordinator = if coordinated {
        Some(Coordinator::new(
            p.coordinator,
            calib.embedded.clone(),
            calib.timeline.clone(),
            Mode::Performance,
        )?)
    } else {
        None
    };
    let mut nav: NavParams = if coordinated {
        apply_mode(Mode::Performance, f64::INFINITY, &p.coordinator)
    } else {
        p.baseline_nav
    };
    let mut freq = FrequencyConfig::max();

    let mut state = RobotState::at(spec.start);
    let mut loc = Localizer::uniform_box(
        &spec.start,
        nav.max_particles,
        p.init_spread_xy,
        p.init_spread_yaw,
        &mut rng,
    )?;
    loc.noise = p.motion_noise;
    loc.sensor = p.sensor;
    loc.exec = opts.exec;
    let mut detection = DetectionStub::default();

    let route = spec.route();
    let mut goal_idx = 0usize;
    let mut plan = replan(&inflated, &spec.map, &loc.estimate, route[0])?;
    let mut path_idx = 0usize;
    let mut leg_start = 0.0;
    let mut finish_times = Vec::with_capacity(route.len());

    let mut obstacles: Vec<[f64; 2]> = Vec::new();
    let mut odom_anchor = state.true_pose;
    let mut t_c = f64::INFINITY;
    let mut s_t = f64::INFINITY;
    let mut prev_snapshot: Option<PlanSnapshot> = None;
    let mut camera_pose = loc.estimate;
    let mut last_eval_camera: Option<Pose> = None;
    let lag_ticks = (MOTOR_WINDOW_US / p.tick_us).max(1) as usize;
    let mut twist_hist: VecDeque<Twist> = VecDeque::from(vec![Twist::ZERO; lag_ticks]);
    let mut next_control_us = period_us(nav.controller_frequency);

    let mut metrics = Vec::new();
    let mut decisions = Vec::new();
    let mut trace = Vec::new();
    let mut collisions = 0usize;
    let mut mode_switches = 0usize;
    let mut saving_evals = 0usize;
    let mut infeasible_choices = 0usize;
    let mut mode: Option<Mode> = coordinator.as_ref().map(|c| c.mode());

    let mut tick: u64 = 0;
    loop {
        let now_us = tick * p.tick_us;
        let now = now_us as f64 * 1e-6;
        if now > p.max_time {
            return Err(Error::Aborted(format!(
                "{} did not finish the route within {} s ({} of {} goals reached)",
                spec.policy,
                p.max_time,
                goal_idx,
                route.len()
            )));
        }

        // sense
        let scan_due = now_us.is_multiple_of(SCAN_PERIOD_US);
        let scan = if scan_due {
            Some(simulate_scan(&spec.map, &state.true_pose, &p.lidar, now, &mut rng)?)
        } else {
            None
        };
        let camera_due = tick == 0 || now_us / CAMERA_PERIOD_US != (now_us - p.tick_us) / CAMERA_PERIOD_US;

        // localize
        if let Some(scan) = &scan {
            let (trans, rot) = odometry_delta(&odom_anchor, &state.true_pose);
            let zt: f64 = StandardNormal.sample(&mut rng);
            let zr: f64 = StandardNormal.sample(&mut rng);
            let odom = (
                (trans * (1.0 + p.motion_noise.trans_frac * zt)).max(0.0),
                rot + p.motion_noise.rot * zr,
            );
            loc.step(odom, scan, &field, nav.max_particles, &mut rng)?;
            odom_anchor = state.true_pose;
            obstacles = scan_points(scan, &loc.estimate);
        }
        if camera_due {
            camera_pose = loc.estimate;
        }

        // monitor and coordinate
        if let Some(scan) = &scan {
            let f_d = min_reachable_distance(
                scan,
                p.planner.vmax,
                p.planner.wmax,
                p.planner.horizon,
                p.planner.samples,
            )?;
            t_c = time_to_collision(f_d, p.planner.vmax)?;
            let est = loc.estimate;
            path_idx = plan.nearest_index(est.x, est.y, path_idx);
            let global_len = plan.remaining_length(est.x, est.y, path_idx);
            let carrot = plan.lookahead(path_idx, p.lookahead);
            let snapshot = PlanSnapshot {
                global_len,
                local_len: est.distance_to(carrot.0, carrot.1),
                timestamp: now,
            };
            let progress = match &prev_snapshot {
                Some(prev) => progress_status(prev, &snapshot, PROGRESS_EPS)?,
                None => Progress::Stalled,
            };
            prev_snapshot = Some(snapshot);
            let report = LocalityReport {
                fov_overlap: fov_overlap(
                    last_eval_camera.as_ref().unwrap_or(&camera_pose),
                    &camera_pose,
                    &p.camera,
                )?,
                confidence_ratio: confidence_ratio(&loc.particles),
                progress,
            };
            last_eval_camera = Some(camera_pose);

            if let Some(c) = coordinator.as_mut() {
                let before = c.mode();
                let d = c.evaluate(now, &report, t_c)?;
                if d.mode != before {
                    mode_switches += 1;
                }
                if d.mode == Mode::PowerSaving {
                    saving_evals += 1;
                }
                nav = d.nav;
                mode = Some(d.mode);
                if spec.policy == Policy::Pnav {
                    freq = d.freq;
                    let best_delay = pipeline_delay(&calib.timeline, FrequencyConfig::max(), DelayCase::Worst)?;
                    if !d.feasible && t_c - best_delay >= p.coordinator.t_d {
                        infeasible_choices += 1;
                    }
                }
                decisions.push(d);
            }
            if spec.policy.uses_governor() {
                let (uc, ug) = synthetic_utilization(
                    &calib.timeline,
                    freq,
                    nav.controller_frequency as f64,
                    nav.detection_hz(),
                );
                freq = udvfs_governor(uc, ug, freq);
            }
            s_t = safe_time(t_c, pipeline_delay(&calib.timeline, freq, DelayCase::Worst)?);
            detection.extra_wait = nav.yolo_wait_ms * 1e-3;
            detection.latency = calib
                .timeline
                .table(Stage::Object)
                .get(freq.f_gpu)
                .map(|e| e.mean)
                .unwrap_or(0.0);
        }
        detection.poll(now);

        // plan
        let mut finished = false;
        if now_us >= next_control_us {
            next_control_us = now_us + period_us(nav.controller_frequency);
            let est = loc.estimate;
            let goal = route[goal_idx];
            if est.distance_to(goal.0, goal.1) <= p.goal_tolerance {
                finish_times.push(now - leg_start);
                leg_start = now;
                goal_idx += 1;
                if goal_idx == route.len() {
                    finished = true;
                } else {
                    plan = replan(&inflated, &spec.map, &est, route[goal_idx])?;
                    path_idx = 0;
                    prev_snapshot = None;
                }
            }
            if finished {
                state.commanded = Twist::ZERO;
            } else {
                path_idx = plan.nearest_index(est.x, est.y, path_idx);
                let carrot = plan.lookahead(path_idx, p.lookahead);
                let samples = sample_window(
                    state.twist,
                    limits,
                    1.0 / nav.controller_frequency as f64,
                    p.planner.samples,
                );
                let raw = raw_criteria(
                    &samples,
                    state.twist,
                    &est,
                    carrot,
                    &obstacles,
                    &calib.motor_model,
                    &p.planner,
                );
                let scored = combine(&samples, &raw, &weights, p.planner.safety_radius);
                state.commanded = select_command(&scored);
            }
        }

        // actuate
        let (next, hit) = integrate_kinematics(&state, tick_s, &limits, &spec.map);
        state = next;
        if hit {
            collisions += 1;
            plan = replan(
                &inflated,
                &spec.map,
                &loc.estimate,
                route[goal_idx.min(route.len() - 1)],
            )?;
            path_idx = 0;
            prev_snapshot = None;
        }
        assert!(
            !spec.map.occupied_at(state.true_pose.x, state.true_pose.y),
            "robot entered an occupied cell"
        );

        // log
        let previous = twist_hist.pop_front().unwrap_or(Twist::ZERO);
        twist_hist.push_back(state.twist);
        let window = MotorCommandWindow::new(state.twist, previous);
        let embedded_w = calib.embedded.predict(freq, nav.detection_hz())?;
        let power = predict_total_power(calib.plant.power(&window), embedded_w)?;
        let predicted_motor = calib.motor_model.predict(&window).max(0.0);
        if opts.trace_power {
            trace.push(PowerTracePoint {
                time: now,
                truth_watts: power.total_watts,
                predicted_watts: predicted_motor + embedded_w,
            });
        }
        if scan_due || finished {
            let (tp, est) = (state.true_pose, loc.estimate);
            metrics.push(MetricsSample {
                time: now,
                power,
                predicted_motor_watts: predicted_motor,
                predicted_total_watts: predicted_motor + embedded_w,
                position_error: tp.distance_to(est.x, est.y),
                orientation_error: wrap(est.yaw - tp.yaw).abs(),
                t_c,
                s_t,
                mode,
                freq,
                true_pose: [tp.x, tp.y, tp.yaw],
                estimate: [est.x, est.y, est.yaw],
                v: state.twist.v,
                w: state.twist.w,
                particles: loc.len(),
                controller_hz: nav.controller_frequency,
                yolo_wait_ms: nav.yolo_wait_ms,
            });
        }
        if finished {
            break;
        }
        tick += 1;
    }

    let total_time = metrics.last().map(|m| m.time).unwrap_or(0.0);
    let total_energy = trapezoid(metrics.iter().map(|m| (m.time, m.power.total_watts)));
    let time_mean = |f: fn(&MetricsSample) -> f64| {
        if total_time > 0.0 {
            trapezoid(metrics.iter().map(|m| (m.time, f(m)))) / total_time
        } else {
            metrics.last().map(f).unwrap_or(0.0)
        }
    };
    let n = metrics.len().max(1) as f64;
    let summary = Summary {
        policy: spec.policy.as_str().to_string(),
        seed: spec.seed,
        map: spec.map_name.clone(),
        start: [spec.start.x, spec.start.y, spec.start.yaw],
        goals: spec.goals.iter().map(|g| [g.0, g.1]).collect(),
        loops: spec.loops,
        mean_finish_time: finish_times.iter().sum::<f64>() / finish_times.len().max(1) as f64,
        finish_times,
        total_time,
        mean_power: time_mean(|m| m.power.total_watts),
        mean_motor_power: time_mean(|m| m.power.motor_watts),
        mean_embedded_power: time_mean(|m| m.power.embedded_watts),
        total_energy,
        mean_position_error: metrics.iter().map(|m| m.position_error).sum::<f64>() / n,
        max_position_error: metrics.iter().map(|m| m.position_error).fold(0.0, f64::max),
        mean_orientation_error: metrics.iter().map(|m| m.orientation_error).sum::<f64>() / n,
        t_c: Stats::of(metrics.iter().map(|m| m.t_c)),
        collisions,
        lost_resets: loc.lost_resets,
        detections: detection.fired,
        coordinator_evaluations: decisions.len(),
        mode_switches,
        power_saving_fraction: if decisions.is_empty() {
            0.0
        } else {
            saving_evals as f64 / decisions.len() as f64
        },
        infeasible_choices,
    };
    Ok(RunOutput {
        metrics,
        decisions,
        power_trace: trace,
        summary,
    })
}
