//! Occupancy-grid world, text map format and LiDAR-style ray casting.
//!
//! Map file layout: a header line `width height resolution`, then `height`
//! rows of `width` characters, `#` occupied and `.` free. The first row is
//! the top of the map (largest y). Cell `(i, j)` covers
//! `[i*res, (i+1)*res) x [j*res, (j+1)*res)` in world meters.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::Pose;

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    cells: Vec<bool>,
}

impl OccupancyGrid {
    /// An all-free grid (boundary cells still count as occupied).
    pub fn new(width: usize, height: usize, resolution: f64) -> Result<Self> {
        if width < 3 || height < 3 {
            return Err(Error::invalid("grid must be at least 3x3 cells"));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::invalid(format!("resolution must be positive, got {resolution}")));
        }
        Ok(OccupancyGrid {
            width,
            height,
            resolution,
            cells: vec![false; width * height],
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn width_m(&self) -> f64 {
        self.width as f64 * self.resolution
    }

    pub fn height_m(&self) -> f64 {
        self.height as f64 * self.resolution
    }

    pub fn set(&mut self, i: usize, j: usize, occupied: bool) {
        assert!(i < self.width && j < self.height);
        self.cells[j * self.width + i] = occupied;
    }

    /// Marks every cell whose center falls inside the axis-aligned box.
    pub fn fill_rect(&mut self, x0: f64, y0: f64, x1: f64, y1: f64) {
        for j in 0..self.height {
            for i in 0..self.width {
                let (cx, cy) = self.cell_center(i, j);
                if cx >= x0 && cx <= x1 && cy >= y0 && cy <= y1 {
                    self.set(i, j, true);
                }
            }
        }
    }

    /// Occupancy of a cell; boundary and out-of-range cells are occupied.
    pub fn is_occupied(&self, i: i64, j: i64) -> bool {
        if i <= 0 || j <= 0 || i >= self.width as i64 - 1 || j >= self.height as i64 - 1 {
            return true;
        }
        self.cells[j as usize * self.width + i as usize]
    }

    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        if !(x.is_finite() && y.is_finite()) || x < 0.0 || y < 0.0 {
            return None;
        }
        let i = (x / self.resolution).floor() as usize;
        let j = (y / self.resolution).floor() as usize;
        (i < self.width && j < self.height).then_some((i, j))
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.resolution, (j as f64 + 0.5) * self.resolution)
    }

    pub fn occupied_at(&self, x: f64, y: f64) -> bool {
        match self.cell_of(x, y) {
            Some((i, j)) => self.is_occupied(i as i64, j as i64),
            None => true,
        }
    }

    /// Distance from `origin` along `origin.yaw + bearing` to the first
    /// occupied cell, or `+inf` when nothing is hit within `max_range`.
    ///
    /// The ray is sampled every half cell, so the result never falls short of
    /// the exact boundary crossing and is never zero. A ray that only clips
    /// the corner of an occupied cell can step past it.
    pub fn raycast(&self, origin: &Pose, bearing: f64, max_range: f64) -> Result<f64> {
        if self.cell_of(origin.x, origin.y).is_none() {
            return Err(Error::InvalidState(format!(
                "ray origin ({:.3}, {:.3}) lies outside the grid",
                origin.x, origin.y
            )));
        }
        if self.occupied_at(origin.x, origin.y) {
            return Err(Error::InvalidState(format!(
                "ray origin ({:.3}, {:.3}) lies on an occupied cell",
                origin.x, origin.y
            )));
        }
        let step = self.resolution * 0.5;
        let (s, c) = (origin.yaw + bearing).sin_cos();
        let mut k = 1u64;
        loop {
            let d = k as f64 * step;
            if d > max_range {
                return Ok(f64::INFINITY);
            }
            if self.occupied_at(origin.x + d * c, origin.y + d * s) {
                return Ok(d);
            }
            k += 1;
        }
    }

    /// Per-cell Euclidean distance (meters) from each cell center to the
    /// nearest occupied cell center. Row-major, `j * width + i`.
    pub fn distance_field(&self) -> Vec<f64> {
        let (w, h) = (self.width, self.height);
        let inf = 1e20;
        let mut d2 = vec![0.0f64; w * h];
        for j in 0..h {
            for i in 0..w {
                d2[j * w + i] = if self.is_occupied(i as i64, j as i64) { 0.0 } else { inf };
            }
        }
        let mut buf = vec![0.0; w.max(h)];
        let mut out = vec![0.0; w.max(h)];
        for i in 0..w {
            for j in 0..h {
                buf[j] = d2[j * w + i];
            }
            edt_1d(&buf[..h], &mut out[..h]);
            for j in 0..h {
                d2[j * w + i] = out[j];
            }
        }
        for j in 0..h {
            buf[..w].copy_from_slice(&d2[j * w..(j + 1) * w]);
            edt_1d(&buf[..w], &mut out[..w]);
            d2[j * w..(j + 1) * w].copy_from_slice(&out[..w]);
        }
        d2.into_iter().map(|v| v.sqrt() * self.resolution).collect()
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hl, header) = lines.next().ok_or_else(|| Error::parse(origin, 1, "empty map file"))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::parse(origin, hl + 1, "header must be `width height resolution`"));
        }
        let width: usize = parts[0]
            .parse()
            .map_err(|_| Error::parse(origin, hl + 1, format!("bad width `{}`", parts[0])))?;
        let height: usize = parts[1]
            .parse()
            .map_err(|_| Error::parse(origin, hl + 1, format!("bad height `{}`", parts[1])))?;
        let resolution: f64 = parts[2]
            .parse()
            .map_err(|_| Error::parse(origin, hl + 1, format!("bad resolution `{}`", parts[2])))?;
        let mut grid =
            OccupancyGrid::new(width, height, resolution).map_err(|e| Error::parse(origin, hl + 1, e.to_string()))?;
        let mut row = 0usize;
        for (ln, line) in lines {
            if row >= height {
                return Err(Error::parse(origin, ln + 1, "more rows than declared height"));
            }
            let line = line.trim_end();
            if line.chars().count() != width {
                return Err(Error::parse(
                    origin,
                    ln + 1,
                    format!("row has {} cells, expected {width}", line.chars().count()),
                ));
            }
            let j = height - 1 - row;
            for (i, ch) in line.chars().enumerate() {
                match ch {
                    '#' => grid.set(i, j, true),
                    '.' => {}
                    other => {
                        return Err(Error::parse(
                            origin,
                            ln + 1,
                            format!("unexpected cell character `{other}`"),
                        ))
                    }
                }
            }
            row += 1;
        }
        if row != height {
            return Err(Error::parse(origin, 0, format!("expected {height} rows, found {row}")));
        }
        Ok(grid)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Serializes to the map text format. Boundary cells are written as `#`.
    pub fn to_map_string(&self) -> String {
        let mut s = String::with_capacity((self.width + 1) * (self.height + 1));
        let _ = writeln!(s, "{} {} {}", self.width, self.height, self.resolution);
        for row in 0..self.height {
            let j = self.height - 1 - row;
            for i in 0..self.width {
                s.push(if self.is_occupied(i as i64, j as i64) { '#' } else { '.' });
            }
            s.push('\n');
        }
        s
    }
}

/// Felzenszwalb-Huttenlocher squared distance transform of a sampled function.
fn edt_1d(f: &[f64], d: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let parabola =
        |q: usize, p: usize| ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
    for q in 1..n {
        let mut s = parabola(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = parabola(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, dq) in d.iter_mut().enumerate().take(n) {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dx = q as f64 - p as f64;
        *dq = dx * dx + f[p];
    }
}
