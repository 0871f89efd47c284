use crate::grid::OccupancyGrid;
use crate::planner::{arc_pose, WindowLimits};
use crate::types::{Pose, Twist};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RobotState {
    pub true_pose: Pose,
    pub twist: Twist,
    pub commanded: Twist,
}

impl RobotState {
    pub fn at(pose: Pose) -> Self {
        RobotState {
            true_pose: pose,
            ..Default::default()
        }
    }
}

fn approach(x: f64, target: f64, step: f64) -> f64 {
    x + (target - x).clamp(-step, step)
}

/// Advances the robot by `dt`. The twist follows the command under the
/// acceleration limits, then the pose follows the exact constant-twist arc.
/// Returns `true` when the step would have entered an occupied cell; the
/// pose is then kept and the robot stopped.
pub fn integrate_kinematics(
    state: &RobotState,
    dt: f64,
    limits: &WindowLimits,
    grid: &OccupancyGrid,
) -> (RobotState, bool) {
    assert!(dt > 0.0, "time step must be positive");
    let cmd = state.commanded.clamped(limits.vmax, limits.wmax);
    let twist = Twist::new(
        approach(state.twist.v, cmd.v, limits.acc_v * dt),
        approach(state.twist.w, cmd.w, limits.acc_w * dt),
    );
    let pose = arc_pose(&state.true_pose, twist, dt);
    if grid.occupied_at(pose.x, pose.y) {
        let stopped = RobotState {
            true_pose: state.true_pose,
            twist: Twist::ZERO,
            commanded: Twist::ZERO,
        };
        return (stopped, true);
    }
    (
        RobotState {
            true_pose: pose,
            twist,
            commanded: state.commanded,
        },
        false,
    )
}
