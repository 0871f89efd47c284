use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pnav_core::collision::TimelineProfile;
use pnav_core::exec::Exec;
use pnav_core::power::{plant_dataset, train_motor_model_with, EmbeddedPowerModel, MotorPlant, TrainConfig};
use pnav_core::report::compare_policies;
use pnav_core::sim::{
    reference_hall, simulate_scan, Calibration, LidarConfig, LikelihoodField, Localizer, Policy, RunOptions,
    ScenarioSpec,
};
use pnav_core::Pose;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn mlp_training(c: &mut Criterion) {
    let plant = MotorPlant::calibrated(&EmbeddedPowerModel::calibrated());
    let data = plant_dataset(&plant, 4000, 0.02, 1);
    let mut g = c.benchmark_group("mlp_training_20_epochs");
    for (name, exec) in MODES {
        let cfg = TrainConfig {
            epochs: 20,
            exec,
            ..TrainConfig::default()
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| train_motor_model_with(&data, &cfg).unwrap())
        });
    }
    g.finish();
}

fn particle_weighting(c: &mut Criterion) {
    let grid = reference_hall();
    let field = LikelihoodField::new(&grid, 2.0);
    let truth = Pose::new(6.0, 4.0, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let scan = simulate_scan(&grid, &truth, &LidarConfig::default(), 0.0, &mut rng).unwrap();
    let base = Localizer::uniform_box(&truth, 5000, 0.5, 0.1, &mut rng).unwrap();
    let mut g = c.benchmark_group("particle_weighting_5000");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter_batched(
                || Localizer { exec, ..base.clone() },
                |mut loc| loc.correct(&scan, &field),
                criterion::BatchSize::LargeInput,
            )
        });
    }
    g.finish();
}

fn policy_sweep(c: &mut Criterion) {
    let embedded = EmbeddedPowerModel::calibrated();
    let plant = MotorPlant::calibrated(&embedded);
    let cfg = TrainConfig {
        epochs: 200,
        ..TrainConfig::default()
    };
    let calib = Calibration {
        motor_model: train_motor_model_with(&plant_dataset(&plant, 1000, 0.02, 3), &cfg).unwrap(),
        plant,
        embedded,
        timeline: TimelineProfile::synthetic(),
    };
    let mut spec = ScenarioSpec::reference(Policy::Pnav, 1);
    spec.goals = vec![(7.0, 4.0)];
    spec.loops = 1;
    let mut g = c.benchmark_group("policy_sweep_4");
    g.sample_size(10).measurement_time(Duration::from_secs(20));
    for (name, exec) in MODES {
        let opts = RunOptions {
            exec,
            ..RunOptions::default()
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| compare_policies(&spec, &calib, &Policy::ALL, exec, opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, mlp_training, particle_weighting, policy_sweep);
criterion_main!(benches);
