//! Multi-layer perceptron regressor for motor power.
//!
//! Architecture: 4 inputs, two tanh hidden layers, one linear output.
//! The inputs are the magnitudes `|v|, |w|, |v - v_prev|, |w - w_prev|` of
//! the command window, z-scored with statistics from the training set.
//! Training minimizes the mean squared error over the whole batch with Adam
//! steps.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::plant::MotorPlant;
use super::MotorCommandWindow;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::types::Twist;

const HEADER: &str = "pnav-motor-model v1";
const INPUTS: usize = 4;
const GRAD_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: 16,
            epochs: 1500,
            learning_rate: 0.01,
            seed: 7,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotorPowerModel {
    hidden: usize,
    params: Vec<f64>,
    input_mean: [f64; INPUTS],
    input_std: [f64; INPUTS],
    output_mean: f64,
    output_std: f64,
}

#[derive(Clone, Copy)]
struct Layout {
    h: usize,
}

impl Layout {
    fn w1(&self) -> usize {
        0
    }
    fn b1(&self) -> usize {
        INPUTS * self.h
    }
    fn w2(&self) -> usize {
        self.b1() + self.h
    }
    fn b2(&self) -> usize {
        self.w2() + self.h * self.h
    }
    fn w3(&self) -> usize {
        self.b2() + self.h
    }
    fn b3(&self) -> usize {
        self.w3() + self.h
    }
    fn len(&self) -> usize {
        self.b3() + 1
    }
}

fn features(cmd: &MotorCommandWindow) -> [f64; INPUTS] {
    [
        cmd.current.v.abs(),
        cmd.current.w.abs(),
        (cmd.current.v - cmd.previous.v).abs(),
        (cmd.current.w - cmd.previous.w).abs(),
    ]
}

fn forward(p: &[f64], l: Layout, x: &[f64; INPUTS], a1: &mut [f64], a2: &mut [f64]) -> f64 {
    let h = l.h;
    for j in 0..h {
        let row = &p[l.w1() + j * INPUTS..l.w1() + (j + 1) * INPUTS];
        let z = p[l.b1() + j] + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>();
        a1[j] = z.tanh();
    }
    for j in 0..h {
        let row = &p[l.w2() + j * h..l.w2() + (j + 1) * h];
        let z = p[l.b2() + j] + row.iter().zip(a1.iter()).map(|(w, a)| w * a).sum::<f64>();
        a2[j] = z.tanh();
    }
    p[l.b3()]
        + p[l.w3()..l.w3() + h]
            .iter()
            .zip(a2.iter())
            .map(|(w, a)| w * a)
            .sum::<f64>()
}

/// Sum of squared errors and its gradient over one chunk of normalized samples.
fn chunk_grad(p: &[f64], l: Layout, xs: &[([f64; INPUTS], f64)]) -> (f64, Vec<f64>) {
    let h = l.h;
    let mut g = vec![0.0; l.len()];
    let mut a1 = vec![0.0; h];
    let mut a2 = vec![0.0; h];
    let mut d2 = vec![0.0; h];
    let mut sse = 0.0;
    for (x, t) in xs {
        let y = forward(p, l, x, &mut a1, &mut a2);
        let e = y - t;
        sse += e * e;
        let dy = 2.0 * e;
        g[l.b3()] += dy;
        for j in 0..h {
            g[l.w3() + j] += dy * a2[j];
            d2[j] = dy * p[l.w3() + j] * (1.0 - a2[j] * a2[j]);
            g[l.b2() + j] += d2[j];
        }
        for j in 0..h {
            for k in 0..h {
                g[l.w2() + j * h + k] += d2[j] * a1[k];
            }
        }
        for k in 0..h {
            let mut d1 = 0.0;
            for j in 0..h {
                d1 += d2[j] * p[l.w2() + j * h + k];
            }
            d1 *= 1.0 - a1[k] * a1[k];
            g[l.b1() + k] += d1;
            for i in 0..INPUTS {
                g[l.w1() + k * INPUTS + i] += d1 * x[i];
            }
        }
    }
    (sse, g)
}

fn loss_and_grad(p: &[f64], l: Layout, data: &[([f64; INPUTS], f64)], exec: Exec) -> (f64, Vec<f64>) {
    let parts = exec.map_chunks(data, GRAD_CHUNK, |c| chunk_grad(p, l, c));
    let n = data.len() as f64;
    let mut total = 0.0;
    let mut g = vec![0.0; l.len()];
    for (sse, gc) in parts {
        total += sse;
        for (a, b) in g.iter_mut().zip(gc) {
            *a += b;
        }
    }
    g.iter_mut().for_each(|v| *v /= n);
    (total / n, g)
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count().max(1) as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 1e-9 { std } else { 1.0 })
}

impl MotorPowerModel {
    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn with_params(&self, params: Vec<f64>) -> Result<Self> {
        if params.len() != self.params.len() {
            return Err(Error::invalid("parameter vector has the wrong length"));
        }
        Ok(MotorPowerModel { params, ..self.clone() })
    }

    fn layout(&self) -> Layout {
        Layout { h: self.hidden }
    }

    fn normalize_input(&self, cmd: &MotorCommandWindow) -> [f64; INPUTS] {
        let mut x = features(cmd);
        for ((v, m), s) in x.iter_mut().zip(&self.input_mean).zip(&self.input_std) {
            *v = (*v - m) / s;
        }
        x
    }

    fn normalized(&self, data: &[(MotorCommandWindow, f64)]) -> Vec<([f64; INPUTS], f64)> {
        data.iter()
            .map(|(c, t)| (self.normalize_input(c), (t - self.output_mean) / self.output_std))
            .collect()
    }

    /// Predicted motor watts, clamped at zero.
    pub fn predict(&self, cmd: &MotorCommandWindow) -> f64 {
        let h = self.hidden;
        let mut a1 = vec![0.0; h];
        let mut a2 = vec![0.0; h];
        let y = forward(
            &self.params,
            self.layout(),
            &self.normalize_input(cmd),
            &mut a1,
            &mut a2,
        );
        (y * self.output_std + self.output_mean).max(0.0)
    }

    /// Training loss (MSE in normalized output units) on `data`.
    pub fn normalized_loss(&self, data: &[(MotorCommandWindow, f64)]) -> f64 {
        loss_and_grad(&self.params, self.layout(), &self.normalized(data), Exec::Sequential).0
    }

    /// Analytic gradient of [`Self::normalized_loss`] with respect to the parameters.
    pub fn normalized_loss_gradient(&self, data: &[(MotorCommandWindow, f64)]) -> Vec<f64> {
        loss_and_grad(&self.params, self.layout(), &self.normalized(data), Exec::Sequential).1
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{HEADER}");
        let _ = writeln!(s, "layers {INPUTS} {h} {h} 1", h = self.hidden);
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, "input_mean {}", join(&self.input_mean));
        let _ = writeln!(s, "input_std {}", join(&self.input_std));
        let _ = writeln!(s, "output {} {}", self.output_mean, self.output_std);
        for chunk in self.params.chunks(8) {
            let _ = writeln!(s, "{}", join(chunk));
        }
        s
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::parse(origin, 0, format!("missing {what}")))
        };
        let (_, header) = next("header")?;
        if header.trim() != HEADER {
            return Err(Error::parse(origin, 1, format!("expected header `{HEADER}`")));
        }
        let nums = |ln: usize, s: &str| -> Result<Vec<f64>> {
            s.split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| Error::parse(origin, ln + 1, format!("bad number `{t}`")))
                })
                .collect()
        };
        let (ln, layers) = next("layer line")?;
        let dims: Vec<usize> = layers
            .strip_prefix("layers")
            .map(|r| r.split_whitespace().filter_map(|t| t.parse().ok()).collect())
            .unwrap_or_default();
        if dims.len() != 4 || dims[0] != INPUTS || dims[1] != dims[2] || dims[3] != 1 || dims[1] == 0 {
            return Err(Error::parse(origin, ln + 1, "expected `layers 4 H H 1`"));
        }
        let h = dims[1];
        let mut section = |key: &str, n: usize| -> Result<Vec<f64>> {
            let (ln, line) = next(key)?;
            let rest = line
                .strip_prefix(key)
                .ok_or_else(|| Error::parse(origin, ln + 1, format!("expected `{key}`")))?;
            let v = nums(ln, rest)?;
            if v.len() != n {
                return Err(Error::parse(origin, ln + 1, format!("`{key}` needs {n} values")));
            }
            Ok(v)
        };
        let im = section("input_mean", INPUTS)?;
        let is = section("input_std", INPUTS)?;
        let out = section("output", 2)?;
        let layout = Layout { h };
        let mut params = Vec::with_capacity(layout.len());
        for (ln, line) in lines {
            params.extend(nums(ln, line)?);
        }
        if params.len() != layout.len() {
            return Err(Error::parse(
                origin,
                0,
                format!("expected {} weights, found {}", layout.len(), params.len()),
            ));
        }
        if params.iter().chain(&im).chain(&is).chain(&out).any(|v| !v.is_finite()) {
            return Err(Error::parse(origin, 0, "model contains non-finite values"));
        }
        Ok(MotorPowerModel {
            hidden: h,
            params,
            input_mean: [im[0], im[1], im[2], im[3]],
            input_std: [is[0], is[1], is[2], is[3]],
            output_mean: out[0],
            output_std: out[1],
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, &path.display().to_string())
    }
}

pub fn train_motor_model(
    dataset: &[(MotorCommandWindow, f64)],
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<MotorPowerModel> {
    train_motor_model_with(
        dataset,
        &TrainConfig {
            epochs,
            learning_rate,
            seed,
            ..TrainConfig::default()
        },
    )
}

pub fn train_motor_model_with(dataset: &[(MotorCommandWindow, f64)], cfg: &TrainConfig) -> Result<MotorPowerModel> {
    if dataset.is_empty() {
        return Err(Error::invalid("training dataset is empty"));
    }
    if dataset.iter().any(|(_, t)| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::invalid("training targets must be finite and non-negative"));
    }
    if cfg.hidden == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::invalid("hidden width and learning rate must be positive"));
    }
    let feats: Vec<[f64; INPUTS]> = dataset.iter().map(|(c, _)| features(c)).collect();
    let mut input_mean = [0.0; INPUTS];
    let mut input_std = [1.0; INPUTS];
    for i in 0..INPUTS {
        (input_mean[i], input_std[i]) = mean_std(feats.iter().map(|f| f[i]));
    }
    let (output_mean, output_std) = mean_std(dataset.iter().map(|(_, t)| *t));

    let layout = Layout { h: cfg.hidden };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = vec![0.0; layout.len()];
    let mut init = |start: usize, count: usize, fan_in: usize, fan_out: usize| {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for p in &mut params[start..start + count] {
            *p = rng.random_range(-limit..limit);
        }
    };
    let h = cfg.hidden;
    init(layout.w1(), INPUTS * h, INPUTS, h);
    init(layout.w2(), h * h, h, h);
    init(layout.w3(), h, h, 1);

    let mut model = MotorPowerModel {
        hidden: h,
        params,
        input_mean,
        input_std,
        output_mean,
        output_std,
    };
    let data = model.normalized(dataset);

    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut m = vec![0.0; layout.len()];
    let mut v = vec![0.0; layout.len()];
    for epoch in 0..cfg.epochs {
        let (loss, g) = loss_and_grad(&model.params, layout, &data, cfg.exec);
        if !loss.is_finite() || g.iter().any(|x| !x.is_finite()) {
            return Err(Error::TrainingDiverged { epoch, loss });
        }
        let t = (epoch + 1) as i32;
        let (c1, c2) = (1.0 - b1.powi(t), 1.0 - b2.powi(t));
        for i in 0..layout.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            model.params[i] -= cfg.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
        }
    }
    if model.params.iter().any(|p| !p.is_finite()) {
        return Err(Error::TrainingDiverged {
            epoch: cfg.epochs,
            loss: f64::NAN,
        });
    }
    Ok(model)
}

/// Coefficient of determination of `model` on `data`.
pub fn r_squared(model: &MotorPowerModel, data: &[(MotorCommandWindow, f64)]) -> f64 {
    let n = data.len() as f64;
    let mean = data.iter().map(|(_, t)| t).sum::<f64>() / n;
    let ss_tot: f64 = data.iter().map(|(_, t)| (t - mean).powi(2)).sum();
    let ss_res: f64 = data.iter().map(|(c, t)| (model.predict(c) - t).powi(2)).sum();
    1.0 - ss_res / ss_tot
}

/// Samples `n` command windows over `v in [0, 0.5]`, `w in [-1.2, 1.2]` with a
/// mix of straight, spin, idle and combined motion, labelled by the plant
/// with multiplicative Gaussian noise of `noise_frac`.
pub fn plant_dataset(plant: &MotorPlant, n: usize, noise_frac: f64, seed: u64) -> Vec<(MotorCommandWindow, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let kind: f64 = rng.random();
            let mut v = rng.random_range(0.0..=0.5);
            let mut w = rng.random_range(-1.2..=1.2);
            if kind < 0.2 {
                w = 0.0;
            } else if kind < 0.4 {
                v = 0.0;
            } else if kind < 0.45 {
                v = 0.0;
                w = 0.0;
            }
            let current = Twist::new(v, w);
            let previous = if rng.random::<f64>() < 0.5 {
                current
            } else {
                Twist::new(
                    (v - rng.random_range(-0.05..=0.05)).clamp(0.0, 0.5),
                    (w - rng.random_range(-0.15..=0.15)).clamp(-1.2, 1.2),
                )
            };
            let cmd = MotorCommandWindow::new(current, previous);
            let z: f64 = StandardNormal.sample(&mut rng);
            let target = (plant.power(&cmd) * (1.0 + noise_frac * z)).max(0.0);
            (cmd, target)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::power::EmbeddedPowerModel;

    #[test]
    fn rejects_empty_and_negative_targets() {
        assert!(matches!(
            train_motor_model(&[], 10, 0.01, 1),
            Err(Error::InvalidArgument(_))
        ));
        let bad = vec![(MotorCommandWindow::default(), -1.0)];
        assert!(train_motor_model(&bad, 10, 0.01, 1).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let plant = MotorPlant::calibrated(&EmbeddedPowerModel::calibrated());
        let data = plant_dataset(&plant, 200, 0.0, 1);
        let r = train_motor_model(&data, 200, 1e200, 1);
        assert!(matches!(r, Err(Error::TrainingDiverged { .. })), "{r:?}");
    }

    #[test]
    fn constant_target_is_learned() {
        let plant = MotorPlant::calibrated(&EmbeddedPowerModel::calibrated());
        let data: Vec<_> = plant_dataset(&plant, 500, 0.0, 2)
            .into_iter()
            .map(|(c, _)| (c, 10.0))
            .collect();
        let m = train_motor_model(&data, 300, 0.01, 3).unwrap();
        for (c, _) in &data {
            assert!((m.predict(c) - 10.0).abs() < 0.5);
        }
    }

    #[test]
    fn training_is_deterministic_and_exec_independent() {
        let plant = MotorPlant::calibrated(&EmbeddedPowerModel::calibrated());
        let data = plant_dataset(&plant, 700, 0.02, 4);
        let mk = |exec| {
            train_motor_model_with(
                &data,
                &TrainConfig {
                    epochs: 40,
                    exec,
                    ..TrainConfig::default()
                },
            )
            .unwrap()
        };
        let a = mk(Exec::Sequential);
        let b = mk(Exec::Parallel);
        assert_eq!(a.params(), b.params());
        assert_eq!(a, mk(Exec::Sequential));
    }

    #[test]
    fn text_round_trip_is_exact() {
        let plant = MotorPlant::calibrated(&EmbeddedPowerModel::calibrated());
        let data = plant_dataset(&plant, 300, 0.02, 5);
        let m = train_motor_model(&data, 20, 0.01, 5).unwrap();
        let text = m.to_text();
        assert!(text.starts_with("pnav-motor-model v1\nlayers 4 16 16 1\n"));
        let back = MotorPowerModel::from_text(&text, "mem").unwrap();
        assert_eq!(back, m);
        assert!(MotorPowerModel::from_text("pnav-motor-model v1\nlayers 4 16 8 1\n", "mem").is_err());
    }
}
