//! Offline calibration artifacts consumed by scenario runs.

use std::path::{Path, PathBuf};

use crate::collision::TimelineProfile;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::power::{
    plant_dataset, r_squared, train_motor_model_with, AnchorResidual, EmbeddedPowerModel, EmbeddedPriors, MotorPlant,
    MotorPowerModel, TrainConfig, GPU_POWER_ANCHORS,
};

pub const PLANT_FILE: &str = "motor_plant.txt";
pub const MOTOR_MODEL_FILE: &str = "motor_model.txt";
pub const EMBEDDED_FILE: &str = "embedded_model.txt";
pub const TIMELINE_FILE: &str = "timeline.txt";

pub const TRAIN_SAMPLES: usize = 10_000;
pub const HOLDOUT_SAMPLES: usize = 2_000;
pub const LABEL_NOISE: f64 = 0.02;

#[derive(Debug, Clone)]
pub struct Calibration {
    pub plant: MotorPlant,
    pub motor_model: MotorPowerModel,
    pub embedded: EmbeddedPowerModel,
    pub timeline: TimelineProfile,
}

#[derive(Debug, Clone)]
pub struct CalibrationReport {
    pub anchor_residuals: Vec<AnchorResidual>,
    pub holdout_r2: f64,
    /// Root-mean-square error over the mean held-out target.
    pub holdout_relative_rmse: f64,
}

impl Calibration {
    /// Fits the embedded model to the GPU anchors, derives the motor plant,
    /// trains the motor network on noisy plant samples and builds the
    /// synthetic latency profile.
    pub fn build(seed: u64, exec: Exec) -> Result<(Self, CalibrationReport)> {
        let (embedded, anchor_residuals) =
            EmbeddedPowerModel::calibrate(&GPU_POWER_ANCHORS, EmbeddedPriors::default())?;
        let plant = MotorPlant::calibrate(&embedded)?;
        let train = plant_dataset(&plant, TRAIN_SAMPLES, LABEL_NOISE, seed);
        let holdout = plant_dataset(&plant, HOLDOUT_SAMPLES, LABEL_NOISE, seed.wrapping_add(0x9e37_79b9));
        let cfg = TrainConfig {
            seed,
            exec,
            ..TrainConfig::default()
        };
        let motor_model = train_motor_model_with(&train, &cfg)?;
        let holdout_r2 = r_squared(&motor_model, &holdout);
        let n = holdout.len() as f64;
        let mean = holdout.iter().map(|(_, t)| t).sum::<f64>() / n;
        let mse = holdout
            .iter()
            .map(|(c, t)| (motor_model.predict(c) - t).powi(2))
            .sum::<f64>()
            / n;
        let calib = Calibration {
            plant,
            motor_model,
            embedded,
            timeline: TimelineProfile::synthetic(),
        };
        let report = CalibrationReport {
            anchor_residuals,
            holdout_r2,
            holdout_relative_rmse: mse.sqrt() / mean,
        };
        Ok((calib, report))
    }

    pub fn paths(dir: &Path) -> [PathBuf; 4] {
        [PLANT_FILE, MOTOR_MODEL_FILE, EMBEDDED_FILE, TIMELINE_FILE].map(|f| dir.join(f))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let [plant, model, embedded, timeline] = Self::paths(dir);
        let put = |p: &Path, text: String| std::fs::write(p, text).map_err(|e| Error::io(p, e));
        put(&plant, self.plant.to_text())?;
        put(&model, self.motor_model.to_text())?;
        put(&embedded, self.embedded.to_text())?;
        put(&timeline, self.timeline.to_text())?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let paths = Self::paths(dir);
        if let Some(missing) = paths.iter().find(|p| !p.exists()) {
            return Err(Error::InvalidState(format!(
                "calibration file {} is missing; run `pnav calibrate --out {}` first",
                missing.display(),
                dir.display()
            )));
        }
        let [plant, model, embedded, timeline] = paths;
        Ok(Calibration {
            plant: MotorPlant::load(&plant)?,
            motor_model: MotorPowerModel::load(&model)?,
            embedded: EmbeddedPowerModel::load(&embedded)?,
            timeline: TimelineProfile::load(&timeline)?,
        })
    }
}
