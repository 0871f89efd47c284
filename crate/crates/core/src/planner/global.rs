//! Grid shortest path (8-connected Dijkstra) and path bookkeeping.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::grid::OccupancyGrid;
use crate::types::Pose;

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalPlan {
    /// Cell centers from start to goal, meters.
    pub waypoints: Vec<(f64, f64)>,
    pub length: f64,
    cumulative: Vec<f64>,
}

impl GlobalPlan {
    pub fn from_waypoints(waypoints: Vec<(f64, f64)>) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::invalid("plan needs at least one waypoint"));
        }
        let mut cumulative = Vec::with_capacity(waypoints.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in waypoints.windows(2) {
            acc += (w[1].0 - w[0].0).hypot(w[1].1 - w[0].1);
            cumulative.push(acc);
        }
        Ok(GlobalPlan {
            waypoints,
            length: acc,
            cumulative,
        })
    }

    pub fn goal(&self) -> (f64, f64) {
        *self.waypoints.last().unwrap()
    }

    /// Index of the nearest waypoint at or after `from`.
    pub fn nearest_index(&self, x: f64, y: f64, from: usize) -> usize {
        let from = from.min(self.waypoints.len() - 1);
        let mut best = (f64::INFINITY, from);
        for (k, &(wx, wy)) in self.waypoints.iter().enumerate().skip(from) {
            let d = (wx - x).hypot(wy - y);
            if d < best.0 {
                best = (d, k);
            }
        }
        best.1
    }

    /// Path length still to go when standing at `(x, y)` next to waypoint `k`.
    pub fn remaining_length(&self, x: f64, y: f64, k: usize) -> f64 {
        let (wx, wy) = self.waypoints[k];
        (wx - x).hypot(wy - y) + self.length - self.cumulative[k]
    }

    /// Point `lookahead` meters along the path past waypoint `k` (clamped to
    /// the goal).
    pub fn lookahead(&self, k: usize, lookahead: f64) -> (f64, f64) {
        let target = self.cumulative[k] + lookahead;
        if target >= self.length {
            return self.goal();
        }
        let j = self.cumulative.partition_point(|&c| c <= target);
        let (a, b) = (self.waypoints[j - 1], self.waypoints[j]);
        let seg = self.cumulative[j] - self.cumulative[j - 1];
        let t = (target - self.cumulative[j - 1]) / seg;
        (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))
    }
}

#[derive(PartialEq)]
struct Entry {
    cost: f64,
    j: usize,
    i: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // Reversed so the max-heap pops the smallest (cost, y, x).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then(other.j.cmp(&self.j))
            .then(other.i.cmp(&self.i))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Neighbor offsets with their step length in cells.
pub(crate) const MOVES: [(i64, i64, f64); 8] = [
    (1, 0, 1.0),
    (-1, 0, 1.0),
    (0, 1, 1.0),
    (0, -1, 1.0),
    (1, 1, std::f64::consts::SQRT_2),
    (-1, 1, std::f64::consts::SQRT_2),
    (1, -1, std::f64::consts::SQRT_2),
    (-1, -1, std::f64::consts::SQRT_2),
];

/// Diagonal steps are only allowed when both side cells are free.
pub(crate) fn can_move(grid: &OccupancyGrid, i: i64, j: i64, di: i64, dj: i64) -> bool {
    let (ni, nj) = (i + di, j + dj);
    if grid.is_occupied(ni, nj) {
        return false;
    }
    di == 0 || dj == 0 || (!grid.is_occupied(i + di, j) && !grid.is_occupied(i, j + dj))
}

pub fn plan_global(grid: &OccupancyGrid, start: &Pose, goal: (f64, f64)) -> Result<GlobalPlan> {
    let no_path = || Error::NoPath {
        from_x: start.x,
        from_y: start.y,
        to_x: goal.0,
        to_y: goal.1,
    };
    let free_cell = |x: f64, y: f64, what: &str| -> Result<(usize, usize)> {
        match grid.cell_of(x, y) {
            Some((i, j)) if !grid.is_occupied(i as i64, j as i64) => Ok((i, j)),
            _ => Err(Error::invalid(format!("{what} ({x:.3}, {y:.3}) is not on a free cell"))),
        }
    };
    let s = free_cell(start.x, start.y, "start")?;
    let g = free_cell(goal.0, goal.1, "goal")?;

    let w = grid.width();
    let idx = |i: usize, j: usize| j * w + i;
    let mut dist = vec![f64::INFINITY; w * grid.height()];
    let mut parent = vec![usize::MAX; w * grid.height()];
    let mut heap = BinaryHeap::new();
    dist[idx(s.0, s.1)] = 0.0;
    heap.push(Entry {
        cost: 0.0,
        j: s.1,
        i: s.0,
    });
    while let Some(Entry { cost, j, i }) = heap.pop() {
        if cost > dist[idx(i, j)] {
            continue;
        }
        if (i, j) == g {
            break;
        }
        for (di, dj, step) in MOVES {
            if !can_move(grid, i as i64, j as i64, di, dj) {
                continue;
            }
            let (ni, nj) = ((i as i64 + di) as usize, (j as i64 + dj) as usize);
            let nc = cost + step * grid.resolution();
            let k = idx(ni, nj);
            if nc < dist[k] {
                dist[k] = nc;
                parent[k] = idx(i, j);
                heap.push(Entry { cost: nc, j: nj, i: ni });
            }
        }
    }
    let gk = idx(g.0, g.1);
    if dist[gk].is_infinite() {
        return Err(no_path());
    }
    let mut cells = vec![gk];
    let mut k = gk;
    while k != idx(s.0, s.1) {
        k = parent[k];
        cells.push(k);
    }
    cells.reverse();
    let waypoints = cells.into_iter().map(|k| grid.cell_center(k % w, k / w)).collect();
    GlobalPlan::from_waypoints(waypoints)
}
