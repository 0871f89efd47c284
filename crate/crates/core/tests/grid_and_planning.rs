use std::collections::HashMap;
use std::f64::consts::{SQRT_2, TAU};

use pnav_core::planner::plan_global;
use pnav_core::sim::{simulate_scan, LidarConfig};
use pnav_core::{OccupancyGrid, Pose};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_grid(rng: &mut ChaCha8Rng, w: usize, h: usize, res: f64, fill: f64) -> (OccupancyGrid, Vec<Vec<bool>>) {
    let mut g = OccupancyGrid::new(w, h, res).unwrap();
    let mut occ = vec![vec![false; w]; h];
    for (j, row) in occ.iter_mut().enumerate() {
        for (i, cell) in row.iter_mut().enumerate() {
            let border = i == 0 || j == 0 || i == w - 1 || j == h - 1;
            if border || rng.random_bool(fill) {
                *cell = true;
                if !border {
                    g.set(i, j, true);
                }
            }
        }
    }
    (g, occ)
}

fn free_point(rng: &mut ChaCha8Rng, occ: &[Vec<bool>], res: f64) -> (f64, f64) {
    loop {
        let i = rng.random_range(1..occ[0].len() - 1);
        let j = rng.random_range(1..occ.len() - 1);
        if !occ[j][i] {
            return (
                (i as f64 + rng.random_range(0.1..0.9)) * res,
                (j as f64 + rng.random_range(0.1..0.9)) * res,
            );
        }
    }
}

/// Walks the ray in half-cell steps over a plain occupancy table.
fn line_walk(occ: &[Vec<bool>], res: f64, x: f64, y: f64, a: f64, max: f64) -> f64 {
    let step = res / 2.0;
    let (dx, dy) = (a.cos(), a.sin());
    let mut k = 1.0;
    loop {
        let d = k * step;
        if d > max {
            return f64::INFINITY;
        }
        let (px, py) = (x + d * dx, y + d * dy);
        let (i, j) = ((px / res).floor(), (py / res).floor());
        if i < 0.0 || j < 0.0 || i as usize >= occ[0].len() || j as usize >= occ.len() || occ[j as usize][i as usize] {
            return d;
        }
        k += 1.0;
    }
}

/// Exact distance to the first occupied cell boundary (grid traversal).
fn exact_crossing(occ: &[Vec<bool>], res: f64, x: f64, y: f64, a: f64, max: f64) -> f64 {
    let (dx, dy) = (a.cos(), a.sin());
    let (mut i, mut j) = ((x / res).floor() as i64, (y / res).floor() as i64);
    let (si, sj) = (if dx > 0.0 { 1 } else { -1 }, if dy > 0.0 { 1 } else { -1 });
    let next = |c: i64, s: i64, p: f64, d: f64| {
        if d.abs() < 1e-15 {
            f64::INFINITY
        } else {
            (((c + (s > 0) as i64) as f64) * res - p) / d
        }
    };
    let (mut tx, mut ty) = (next(i, si, x, dx), next(j, sj, y, dy));
    let (ddx, ddy) = (
        if dx.abs() < 1e-15 {
            f64::INFINITY
        } else {
            res / dx.abs()
        },
        if dy.abs() < 1e-15 {
            f64::INFINITY
        } else {
            res / dy.abs()
        },
    );
    loop {
        let t = if tx < ty {
            i += si;
            let t = tx;
            tx += ddx;
            t
        } else {
            j += sj;
            let t = ty;
            ty += ddy;
            t
        };
        if t > max {
            return f64::INFINITY;
        }
        if i < 0 || j < 0 || i as usize >= occ[0].len() || j as usize >= occ.len() || occ[j as usize][i as usize] {
            return t;
        }
    }
}

#[test]
fn raycast_matches_line_walk_for_every_beam() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut close = 0;
    let mut total = 0;
    for _ in 0..10 {
        let (grid, occ) = random_grid(&mut rng, 60, 45, 0.1, 0.08);
        let (x, y) = free_point(&mut rng, &occ, 0.1);
        let pose = Pose::new(x, y, rng.random_range(-3.0..3.0));
        for b in 0..360 {
            let bearing = TAU * b as f64 / 360.0;
            let a = pose.yaw + bearing;
            let got = grid.raycast(&pose, bearing, 8.0).unwrap();
            assert_eq!(got, line_walk(&occ, 0.1, x, y, a, 8.0), "beam {b}");
            let exact = exact_crossing(&occ, 0.1, x, y, a, 8.0);
            assert!(got >= exact - 1e-9, "sampled hit {got} before the boundary {exact}");
            total += 1;
            if got - exact <= 0.1 + 1e-9 {
                close += 1;
            }
        }
    }
    // Rays that only clip the corner of an isolated cell can step past it;
    // on these sparse grids that is under one beam in ten.
    assert!(close as f64 >= 0.85 * total as f64, "{close}/{total} within one cell");
}

#[test]
fn square_room_scan_matches_analytic_walls() {
    let res = 0.05;
    let grid = OccupancyGrid::new(100, 100, res).unwrap();
    // Free interior spans [res, 99 res] on both axes.
    let (lo, hi) = (res, 99.0 * res);
    let c = 2.5;
    let cfg = LidarConfig {
        beam_count: 360,
        range_max: 10.0,
        noise_sigma: 0.0,
    };
    let scan = simulate_scan(
        &grid,
        &Pose::new(c, c, 0.0),
        &cfg,
        0.0,
        &mut ChaCha8Rng::seed_from_u64(1),
    )
    .unwrap();
    for (k, &r) in scan.ranges.iter().enumerate() {
        let a = TAU * k as f64 / 360.0;
        let (dx, dy) = (a.cos(), a.sin());
        let tx = if dx > 1e-12 {
            (hi - c) / dx
        } else if dx < -1e-12 {
            (lo - c) / dx
        } else {
            f64::INFINITY
        };
        let ty = if dy > 1e-12 {
            (hi - c) / dy
        } else if dy < -1e-12 {
            (lo - c) / dy
        } else {
            f64::INFINITY
        };
        let want = tx.min(ty);
        assert!((r - want).abs() <= res * SQRT_2, "beam {k}: {r} vs {want}");
    }
}

/// Textbook Dijkstra over a hash map of settled costs, without a heap.
fn shortest(occ: &[Vec<bool>], res: f64, s: (i64, i64), g: (i64, i64)) -> Option<f64> {
    let free = |i: i64, j: i64| {
        i >= 0 && j >= 0 && (j as usize) < occ.len() && (i as usize) < occ[0].len() && !occ[j as usize][i as usize]
    };
    let mut dist: HashMap<(i64, i64), f64> = HashMap::new();
    let mut done: HashMap<(i64, i64), bool> = HashMap::new();
    dist.insert(s, 0.0);
    loop {
        let cur = dist
            .iter()
            .filter(|(k, _)| !done.contains_key(*k))
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(k, d)| (*k, *d));
        let ((i, j), d) = cur?;
        if (i, j) == g {
            return Some(d);
        }
        done.insert((i, j), true);
        for di in -1..=1i64 {
            for dj in -1..=1i64 {
                if (di, dj) == (0, 0) || !free(i + di, j + dj) {
                    continue;
                }
                if di != 0 && dj != 0 && !(free(i + di, j) && free(i, j + dj)) {
                    continue;
                }
                let step = if di != 0 && dj != 0 { SQRT_2 } else { 1.0 } * res;
                let e = dist.entry((i + di, j + dj)).or_insert(f64::INFINITY);
                if d + step < *e {
                    *e = d + step;
                }
            }
        }
    }
}

#[test]
fn global_plan_length_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut solved = 0;
    for case in 0..20 {
        let (grid, occ) = random_grid(&mut rng, 24, 18, 0.1, 0.25);
        let s = free_point(&mut rng, &occ, 0.1);
        let g = free_point(&mut rng, &occ, 0.1);
        let cell = |p: (f64, f64)| ((p.0 / 0.1).floor() as i64, (p.1 / 0.1).floor() as i64);
        let want = shortest(&occ, 0.1, cell(s), cell(g));
        match plan_global(&grid, &Pose::new(s.0, s.1, 0.0), g) {
            Ok(plan) => {
                let want = want.unwrap_or_else(|| panic!("case {case}: planner found a path the oracle did not"));
                assert!(
                    (plan.length - want).abs() < 1e-9,
                    "case {case}: {} vs {want}",
                    plan.length
                );
                for w in plan.waypoints.windows(2) {
                    assert!(!grid.occupied_at(w[1].0, w[1].1));
                    let d = (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1);
                    assert!(d < 0.1 * SQRT_2 + 1e-9);
                }
                solved += 1;
            }
            Err(pnav_core::Error::NoPath { .. }) => assert!(want.is_none(), "case {case}: oracle found {want:?}"),
            Err(e) => panic!("case {case}: {e}"),
        }
    }
    assert!(solved >= 10, "only {solved} solvable cases");
}
