use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use pnav_core::locality::{
    confidence_ratio, fov_overlap, progress_status, CameraIntrinsics, Particle, ParticleSet, PlanSnapshot, PROGRESS_EPS,
};
use pnav_core::power::{
    plant_dataset, train_motor_model_with, EmbeddedPowerModel, MotorCommandWindow, MotorPlant, MotorPowerModel,
    TrainConfig,
};
use pnav_core::sim::{
    reference_hall, simulate_scan, LidarConfig, LikelihoodField, Localizer, LABEL_NOISE, TRAIN_SAMPLES,
};
use pnav_core::{Pose, Twist};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn plant() -> MotorPlant {
    MotorPlant::calibrated(&EmbeddedPowerModel::calibrated())
}

fn trained() -> &'static MotorPowerModel {
    static CELL: OnceLock<MotorPowerModel> = OnceLock::new();
    // Same data and settings as the calibration artifacts.
    CELL.get_or_init(|| {
        let data = plant_dataset(&plant(), TRAIN_SAMPLES, LABEL_NOISE, 7);
        train_motor_model_with(&data, &TrainConfig::default()).unwrap()
    })
}

#[test]
fn idle_prediction_is_near_plant_idle() {
    let idle = trained().predict(&MotorCommandWindow::default());
    let c0 = plant().idle_watts();
    assert!((idle - c0).abs() <= 0.1 * c0, "idle {idle} vs {c0}");
}

#[test]
fn straight_speed_sweep_is_monotone() {
    let m = trained();
    let mut peak = f64::NEG_INFINITY;
    for k in 0..=50 {
        let v = 0.5 * k as f64 / 50.0;
        let p = m.predict(&MotorCommandWindow::steady(Twist::new(v, 0.0)));
        assert!(p >= peak - 0.2, "dip at v = {v}: {p} after {peak}");
        peak = peak.max(p);
    }
}

#[test]
fn gradients_match_finite_differences_under_perturbation() {
    let base = trained();
    let data = plant_dataset(&plant(), 48, 0.02, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let params: Vec<f64> = base.params().iter().map(|p| p + rng.random_range(-0.2..0.2)).collect();
        let m = base.with_params(params.clone()).unwrap();
        let g = m.normalized_loss_gradient(&data);
        let scale = g.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        for _ in 0..10 {
            let k = rng.random_range(0..params.len());
            let h = 1e-6;
            let mut p = params.clone();
            p[k] += h;
            let up = base.with_params(p.clone()).unwrap().normalized_loss(&data);
            p[k] -= 2.0 * h;
            let down = base.with_params(p).unwrap().normalized_loss(&data);
            let fd = (up - down) / (2.0 * h);
            worst = worst.max((g[k] - fd).abs() / g[k].abs().max(fd.abs()).max(1e-3 * scale));
        }
    }
    assert!(worst <= 1e-4, "max relative error {worst:.2e}");
}

#[test]
fn forward_shift_overlap_matches_dense_sampling() {
    let cam = CameraIntrinsics::new(640.0, 480.0, 320.0, 320.0, 4.0).unwrap();
    assert!((cam.fov_w() - FRAC_PI_2).abs() < 1e-12);
    let a = Pose::new(0.0, 0.0, 0.3);
    let b = Pose::new(0.3f64.cos(), 0.3f64.sin(), 0.3);
    let inside = |p: &Pose, x: f64, y: f64| {
        let (s, c) = p.yaw.sin_cos();
        let (f, l) = (c * (x - p.x) + s * (y - p.y), -s * (x - p.x) + c * (y - p.y));
        (0.0..=4.0).contains(&f) && l.abs() <= f
    };
    // Bounding box of both frustums.
    let corners: Vec<(f64, f64)> = [&a, &b]
        .iter()
        .flat_map(|p| {
            let (s, c) = p.yaw.sin_cos();
            [(0.0, 0.0), (4.0, 4.0), (4.0, -4.0)].map(|(f, l)| (p.x + c * f - s * l, p.y + s * f + c * l))
        })
        .collect();
    let (x0, x1) = corners
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), c| (lo.min(c.0), hi.max(c.0)));
    let (y0, y1) = corners
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), c| (lo.min(c.1), hi.max(c.1)));
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut in_a, mut in_b, mut both) = (0u64, 0u64, 0u64);
    for _ in 0..1_000_000 {
        let (x, y) = (rng.random_range(x0..x1), rng.random_range(y0..y1));
        let (ia, ib) = (inside(&a, x, y), inside(&b, x, y));
        in_a += ia as u64;
        in_b += ib as u64;
        both += (ia && ib) as u64;
    }
    let want = both as f64 / in_a.min(in_b) as f64;
    let got = fov_overlap(&a, &b, &cam).unwrap();
    assert!((got - want).abs() <= 0.02, "{got} vs {want}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn overlap_is_symmetric(
        x in -5.0f64..5.0, y in -5.0f64..5.0, a in -PI..PI,
        dx in -3.0f64..3.0, dy in -3.0f64..3.0, da in -2.0f64..2.0,
    ) {
        let cam = CameraIntrinsics::default();
        let (p, q) = (Pose::new(x, y, a), Pose::new(x + dx, y + dy, a + da));
        let (pq, qp) = (fov_overlap(&p, &q, &cam).unwrap(), fov_overlap(&q, &p, &cam).unwrap());
        prop_assert!((pq - qp).abs() <= 1e-9);
        prop_assert!((0.0..=1.0).contains(&pq));
    }
}

#[test]
fn gaussian_cloud_confidence() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let n = Normal::new(0.0, 0.1).unwrap();
    let particles: Vec<Particle> = (0..500)
        .map(|_| Particle {
            x: 3.0 + n.sample(&mut rng),
            y: -1.0 + n.sample(&mut rng),
            yaw: 0.0,
            weight: 1.0 / 500.0,
        })
        .collect();
    let ps = ParticleSet::new(particles.clone()).unwrap();
    let got = confidence_ratio(&ps);
    let var = |f: fn(&Particle) -> f64| {
        let m = particles.iter().map(f).sum::<f64>() / 500.0;
        particles.iter().map(|p| (f(p) - m).powi(2)).sum::<f64>() / 500.0
    };
    let brute = 1.0 / (var(|p| p.x) + var(|p| p.y));
    assert!((got - brute).abs() <= 1e-9 * brute);
    assert!((got - 50.0).abs() <= 0.15 * 50.0, "{got}");
}

#[test]
fn progress_is_a_pure_function() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..200 {
        let a = PlanSnapshot {
            global_len: rng.random_range(0.0..10.0),
            local_len: rng.random_range(0.0..2.0),
            timestamp: 1.0,
        };
        let b = PlanSnapshot {
            global_len: rng.random_range(0.0..10.0),
            local_len: rng.random_range(0.0..2.0),
            timestamp: 1.2,
        };
        let first = progress_status(&a, &b, PROGRESS_EPS).unwrap();
        for _ in 0..3 {
            assert_eq!(progress_status(&a, &b, PROGRESS_EPS).unwrap(), first);
        }
    }
}

/// Spearman rank correlation, ties broken by position.
fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut r = vec![0.0; v.len()];
        for (k, &i) in idx.iter().enumerate() {
            r[i] = k as f64;
        }
        r
    };
    let (rx, ry) = (rank(xs), rank(ys));
    let n = xs.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

#[test]
fn localizer_converges_from_a_one_meter_box() {
    let grid = reference_hall();
    let field = LikelihoodField::new(&grid, 2.0);
    let lidar = LidarConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let truth = Pose::new(6.0, 4.0, 0.1);
    let mut loc = Localizer::uniform_box(&truth, 2000, 0.5, 0.1, &mut rng).unwrap();
    let mut conf = Vec::new();
    for k in 0..50 {
        let scan = simulate_scan(&grid, &truth, &lidar, k as f64 * 0.2, &mut rng).unwrap();
        loc.step((0.0, 0.0), &scan, &field, 2000, &mut rng).unwrap();
        conf.push(confidence_ratio(&loc.particles));
    }
    let err = loc.estimate.distance_to(truth.x, truth.y);
    assert!(err < 0.15, "position error {err}");
    let t: Vec<f64> = (0..conf.len()).map(|k| k as f64).collect();
    let rho = spearman(&t, &conf);
    assert!(rho > 0.6, "Spearman {rho}");
}
