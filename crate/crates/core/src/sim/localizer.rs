//! Monte Carlo localization against a precomputed likelihood field.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::OccupancyGrid;
use crate::locality::{Particle, ParticleSet};
use crate::scan::LaserScan;
use crate::types::{wrap, Pose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionNoise {
    /// Standard deviation per meter traveled.
    pub trans_frac: f64,
    /// Standard deviation per update, radians.
    pub rot: f64,
}

impl Default for MotionNoise {
    fn default() -> Self {
        MotionNoise {
            trans_frac: 0.01,
            rot: 0.5f64.to_radians(),
        }
    }
}

impl MotionNoise {
    pub const NONE: MotionNoise = MotionNoise {
        trans_frac: 0.0,
        rot: 0.0,
    };
}

/// Euclidean distance to the nearest obstacle for every grid cell.
#[derive(Debug, Clone)]
pub struct LikelihoodField {
    width: usize,
    height: usize,
    resolution: f64,
    dist: Vec<f64>,
    max_dist: f64,
}

impl LikelihoodField {
    pub fn new(grid: &OccupancyGrid, max_dist: f64) -> Self {
        LikelihoodField {
            width: grid.width(),
            height: grid.height(),
            resolution: grid.resolution(),
            dist: grid.distance_field().into_iter().map(|d| d.min(max_dist)).collect(),
            max_dist,
        }
    }

    pub fn distance(&self, x: f64, y: f64) -> f64 {
        if !(x >= 0.0 && y >= 0.0) {
            return self.max_dist;
        }
        let i = (x / self.resolution) as usize;
        let j = (y / self.resolution) as usize;
        if i >= self.width || j >= self.height {
            return self.max_dist;
        }
        self.dist[j * self.width + i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorModel {
    pub beams_used: usize,
    pub sigma_hit: f64,
    /// Weight of the uniform component in the per-beam mixture.
    pub z_rand: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel {
            beams_used: 30,
            sigma_hit: 0.1,
            z_rand: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Localizer {
    pub particles: ParticleSet,
    pub noise: MotionNoise,
    pub sensor: SensorModel,
    pub estimate: Pose,
    /// Number of times every particle weight vanished and was reset.
    pub lost_resets: usize,
    pub exec: Exec,
}

impl Localizer {
    /// Particles drawn uniformly from a box of half-widths `(dxy, dyaw)`
    /// around `center`.
    pub fn uniform_box<R: Rng>(center: &Pose, n: usize, dxy: f64, dyaw: f64, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("localizer needs particles"));
        }
        let w = 1.0 / n as f64;
        let mut particles = Vec::with_capacity(n);
        for _ in 0..n {
            let (ox, oy, oa): (f64, f64, f64) = if dxy > 0.0 || dyaw > 0.0 {
                (
                    rng.random_range(-1.0..=1.0) * dxy,
                    rng.random_range(-1.0..=1.0) * dxy,
                    rng.random_range(-1.0..=1.0) * dyaw,
                )
            } else {
                (0.0, 0.0, 0.0)
            };
            particles.push(Particle {
                x: center.x + ox,
                y: center.y + oy,
                yaw: wrap(center.yaw + oa),
                weight: w,
            });
        }
        let mut loc = Localizer {
            particles: ParticleSet::new(particles)?,
            noise: MotionNoise::default(),
            sensor: SensorModel::default(),
            estimate: *center,
            lost_resets: 0,
            exec: Exec::default(),
        };
        loc.estimate = loc.mean_pose();
        Ok(loc)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Weighted mean position with circular mean heading.
    pub fn mean_pose(&self) -> Pose {
        let (mut x, mut y, mut s, mut c) = (0.0, 0.0, 0.0, 0.0);
        for p in &self.particles.particles {
            x += p.weight * p.x;
            y += p.weight * p.y;
            s += p.weight * p.yaw.sin();
            c += p.weight * p.yaw.cos();
        }
        Pose::new(x, y, s.atan2(c))
    }

    /// Moves every particle by the odometry increment plus sampled noise.
    pub fn predict<R: Rng>(&mut self, trans: f64, rot: f64, rng: &mut R) {
        let st = self.noise.trans_frac * trans.abs();
        let sr = self.noise.rot;
        for p in &mut self.particles.particles {
            let nt = if st > 0.0 { st * gauss(rng) } else { 0.0 };
            let nr = if sr > 0.0 { sr * gauss(rng) } else { 0.0 };
            let t = trans + nt;
            let r = rot + nr;
            let h = p.yaw + 0.5 * r;
            p.x += t * h.cos();
            p.y += t * h.sin();
            p.yaw = wrap(p.yaw + r);
        }
    }

    /// Reweights particles by the scan. Returns `false` if every weight
    /// vanished and the set was reset to uniform.
    pub fn correct(&mut self, scan: &LaserScan, field: &LikelihoodField) -> bool {
        let n = scan.beam_count();
        let used = self.sensor.beams_used.clamp(1, n);
        let beams: Vec<(f64, f64)> = (0..used)
            .map(|k| k * n / used)
            .filter(|&i| scan.ranges[i].is_finite())
            .map(|i| (scan.bearing(i), scan.ranges[i]))
            .collect();
        let inv = 1.0 / (2.0 * self.sensor.sigma_hit * self.sensor.sigma_hit);
        let (zh, zr) = (1.0 - self.sensor.z_rand, self.sensor.z_rand);
        let loglik: Vec<f64> = self.exec.map(&self.particles.particles, |p| {
            beams
                .iter()
                .map(|&(b, r)| {
                    let a = p.yaw + b;
                    let d = field.distance(p.x + r * a.cos(), p.y + r * a.sin());
                    (zh * (-d * d * inv).exp() + zr).ln()
                })
                .sum::<f64>()
        });
        let best = loglik.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for (p, l) in self.particles.particles.iter_mut().zip(&loglik) {
            p.weight *= (l - best).exp();
        }
        let ok = self.particles.normalize();
        if !ok {
            self.lost_resets += 1;
        }
        ok
    }

    pub fn effective_sample_size(&self) -> f64 {
        1.0 / self
            .particles
            .particles
            .iter()
            .map(|p| p.weight * p.weight)
            .sum::<f64>()
    }

    /// Low-variance resampling to `n` particles.
    pub fn resample<R: Rng>(&mut self, n: usize, rng: &mut R) {
        let src = &self.particles.particles;
        let step = 1.0 / n as f64;
        let mut u = rng.random_range(0.0..step);
        let mut acc = src[0].weight;
        let mut k = 0;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            while u > acc && k + 1 < src.len() {
                k += 1;
                acc += src[k].weight;
            }
            out.push(Particle { weight: step, ..src[k] });
            u += step;
        }
        self.particles.particles = out;
    }

    /// One filter update: odometry motion, scan weighting, resampling when
    /// the effective sample size drops below half (or the target count
    /// changes), then a fresh estimate.
    pub fn step<R: Rng>(
        &mut self,
        odom: (f64, f64),
        scan: &LaserScan,
        field: &LikelihoodField,
        target_particles: usize,
        rng: &mut R,
    ) -> Result<()> {
        if target_particles == 0 {
            return Err(Error::invalid("target particle count must be positive"));
        }
        self.predict(odom.0, odom.1, rng);
        self.correct(scan, field);
        let n = self.len();
        if self.effective_sample_size() < 0.5 * n as f64 || target_particles != n {
            self.resample(target_particles, rng);
        }
        self.estimate = self.mean_pose();
        Ok(())
    }
}

fn gauss<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Distance traveled and heading change between two poses, as wheel
/// odometry would report them.
pub fn odometry_delta(from: &Pose, to: &Pose) -> (f64, f64) {
    (from.distance_to(to.x, to.y), wrap(to.yaw - from.yaw))
}
