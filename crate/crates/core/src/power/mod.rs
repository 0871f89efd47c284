//! End-to-end power prediction: motors plus the embedded compute board.

mod embedded;
mod freq;
mod mlp;
mod plant;

pub use embedded::{
    AnchorResidual, EmbeddedPowerModel, EmbeddedPriors, DUTY_FULL_HZ, DUTY_IDLE_FLOOR, GPU_POWER_ANCHORS,
};
pub use freq::{FrequencyConfig, CALIBRATION_CPU_MHZ, CPU_LEVELS, GPU_LEVELS};
pub use mlp::{plant_dataset, r_squared, train_motor_model, train_motor_model_with, MotorPowerModel, TrainConfig};
pub use plant::{rpm_to_velocity, MotorPlant, SPIN_ANCHORS, STRAIGHT_E2E_ANCHORS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Twist;

/// Current and previous velocity command, the motor model's input window.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotorCommandWindow {
    pub current: Twist,
    pub previous: Twist,
}

impl MotorCommandWindow {
    pub fn new(current: Twist, previous: Twist) -> Self {
        MotorCommandWindow { current, previous }
    }

    pub fn steady(t: Twist) -> Self {
        MotorCommandWindow {
            current: t,
            previous: t,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PowerBreakdown {
    pub motor_watts: f64,
    pub embedded_watts: f64,
    pub total_watts: f64,
}

/// Total robot power as the sum of motor and embedded power.
pub fn predict_total_power(motor: f64, embedded: f64) -> Result<PowerBreakdown> {
    if !(motor >= 0.0) || !(embedded >= 0.0) {
        return Err(Error::invalid(format!(
            "power components must be non-negative (motor {motor}, embedded {embedded})"
        )));
    }
    Ok(PowerBreakdown {
        motor_watts: motor,
        embedded_watts: embedded,
        total_watts: motor + embedded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn total_power_examples() {
        assert_eq!(predict_total_power(0.0, 0.0).unwrap().total_watts, 0.0);
        assert!((predict_total_power(17.7, 19.68).unwrap().total_watts - 37.38).abs() < 1e-9);
        assert!((predict_total_power(23.3, 37.11).unwrap().total_watts - 60.41).abs() < 1e-9);
        assert!(predict_total_power(-1.0, 3.0).is_err());
        assert!(predict_total_power(1.0, f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn breakdown_is_additive(m in 0.0f64..500.0, e in 0.0f64..500.0) {
            let b = predict_total_power(m, e).unwrap();
            prop_assert_eq!(b.total_watts, m + e);
            prop_assert_eq!(b.motor_watts, m);
            prop_assert_eq!(b.embedded_watts, e);
        }
    }
}
