//! Independent oracles shared by the integration tests.
//!
//! Nothing here calls into the code under test for the quantity being checked;
//! the planner oracle recomputes every factor from the raw grid.

#![allow(dead_code)]

use std::collections::VecDeque;

use orientbot_core::planner::{Candidate, OccupancyGrid, Point2, Pose2D};
use orientbot_core::Tensor;
use rand::Rng;

/// Published confusion counts, rows = true class, columns = predicted class.
pub const TABLE_II: [[u64; 8]; 8] = [
    [478, 19, 3, 0, 2, 0, 3, 122],
    [33, 186, 21, 3, 2, 3, 0, 4],
    [3, 31, 538, 95, 7, 1, 2, 2],
    [0, 1, 69, 703, 133, 4, 3, 10],
    [0, 0, 3, 62, 570, 30, 6, 7],
    [1, 1, 0, 1, 22, 196, 51, 5],
    [3, 0, 1, 0, 6, 30, 473, 108],
    [59, 0, 1, 0, 0, 0, 58, 825],
];

// ---------------------------------------------------------------------------
// Finite differences

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;

/// Relative error with a floor so entries that are both ~0 compare absolutely.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Largest relative error between `analytic` and the central-difference
/// gradient of `f` at `x`.
pub fn fd_max_rel_err(x: &[f64], analytic: &[f64], f: impl Fn(&[f64]) -> f64) -> f64 {
    assert_eq!(x.len(), analytic.len());
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        probe[i] = x[i] + FD_STEP;
        let up = f(&probe);
        probe[i] = x[i] - FD_STEP;
        let down = f(&probe);
        probe[i] = x[i];
        worst = worst.max(rel_err(analytic[i], (up - down) / (2.0 * FD_STEP)));
    }
    worst
}

pub fn random_tensor<R: Rng>(rng: &mut R, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

/// Values bounded away from zero so ReLU kinks stay out of the FD stencil.
pub fn random_tensor_off_zero<R: Rng>(rng: &mut R, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m: f64 = rng.gen_range(0.01..1.0);
            if rng.gen() {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::from_vec(shape, data).unwrap()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// ---------------------------------------------------------------------------
// Planner oracle

pub const ORACLE_RADII: [(f64, f64); 4] = [(0.5, 0.5), (1.0, 0.8), (1.5, 0.8), (2.0, 1.0)];

pub fn oracle_orientation_multiplier(class: usize) -> f64 {
    [10.0, 1.0, 0.1, 0.01, 0.001, 0.01, 0.1, 1.0][class]
}

fn cell_of(grid: &OccupancyGrid, p: Point2) -> Option<(usize, usize)> {
    let o = grid.origin();
    let fx = ((p.x - o.x) / grid.resolution()).floor();
    let fy = ((p.y - o.y) / grid.resolution()).floor();
    if fx < 0.0 || fy < 0.0 || fx >= grid.width() as f64 || fy >= grid.height() as f64 {
        None
    } else {
        Some((fx as usize, fy as usize))
    }
}

/// Class seen from `p`: sector of the relative bearing, computed with plain trig.
pub fn oracle_class(p: Point2, t: &Pose2D) -> usize {
    let rel = (p.y - t.y).atan2(p.x - t.x).to_degrees() - t.heading;
    let rel = ((rel % 360.0) + 360.0) % 360.0;
    (((rel + 22.5) / 45.0).floor() as usize) % 8
}

fn flood(grid: &OccupancyGrid, start: (usize, usize)) -> Vec<Vec<bool>> {
    let mut seen = vec![vec![false; grid.height()]; grid.width()];
    if grid.is_occupied(start) {
        return seen;
    }
    seen[start.0][start.1] = true;
    let mut q = VecDeque::from([start]);
    while let Some((x, y)) = q.pop_front() {
        for dx in -1i64..=1 {
            for dy in -1i64..=1 {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= grid.width() as i64 || ny >= grid.height() as i64 {
                    continue;
                }
                let (nx, ny) = (nx as usize, ny as usize);
                if !seen[nx][ny] && !grid.is_occupied((nx, ny)) {
                    seen[nx][ny] = true;
                    q.push_back((nx, ny));
                }
            }
        }
    }
    seen
}

/// Liang–Barsky: does the closed segment meet the closed unit square at `(cx, cy)`?
pub fn segment_touches_cell(a: (f64, f64), b: (f64, f64), cx: usize, cy: usize) -> bool {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    let (x0, x1, y0, y1) = (cx as f64, cx as f64 + 1.0, cy as f64, cy as f64 + 1.0);
    for (p, q) in [(-dx, a.0 - x0), (dx, x1 - a.0), (-dy, a.1 - y0), (dy, y1 - a.1)] {
        if p.abs() < 1e-12 {
            if q < -1e-9 {
                return false;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    t0 <= t1 + 1e-9
}

/// Line of sight between cell centres, checking every cell of the grid.
pub fn oracle_clear(grid: &OccupancyGrid, a: (usize, usize), b: (usize, usize)) -> bool {
    let pa = (a.0 as f64 + 0.5, a.1 as f64 + 0.5);
    let pb = (b.0 as f64 + 0.5, b.1 as f64 + 0.5);
    let (xl, xh) = (a.0.min(b.0).saturating_sub(1), (a.0.max(b.0) + 1).min(grid.width() - 1));
    let (yl, yh) = (a.1.min(b.1).saturating_sub(1), (a.1.max(b.1) + 1).min(grid.height() - 1));
    for x in xl..=xh {
        for y in yl..=yh {
            if grid.is_occupied((x, y)) && segment_touches_cell(pa, pb, x, y) {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, Copy)]
pub struct OracleScore {
    pub total: f64,
    pub class: usize,
    pub radius: f64,
    pub bearing: f64,
}

/// Re-scores every candidate from scratch and returns the winner's index
/// (total first, then class, larger radius, smaller bearing), or `None`.
pub fn oracle_select(
    candidates: &[Candidate],
    robot: Point2,
    target: &Pose2D,
    grid: &OccupancyGrid,
    distance_scale: f64,
) -> (Vec<OracleScore>, Option<usize>) {
    let reach = flood(grid, cell_of(grid, robot).expect("robot on the grid"));
    let tc = cell_of(grid, Point2::new(target.x, target.y)).expect("target on the grid");
    let dist = |p: Point2| (p.x - robot.x).hypot(p.y - robot.y);
    let far = candidates.iter().map(|c| dist(c.position)).fold(f64::MIN, f64::max);
    let scores: Vec<OracleScore> = candidates
        .iter()
        .map(|c| {
            let class = oracle_class(c.position, target);
            let radius_mult = ORACLE_RADII.iter().find(|r| r.0 == c.radius).expect("known ring").1;
            let (occ, obs) = match cell_of(grid, c.position) {
                None => (0.0, 0.0),
                Some(pc) => (
                    if reach[pc.0][pc.1] { 1.0 } else { 0.0 },
                    if oracle_clear(grid, pc, tc) { 1.0 } else { 0.0 },
                ),
            };
            let distance = (far - dist(c.position) + grid.resolution()) * distance_scale;
            OracleScore {
                total: oracle_orientation_multiplier(class) * distance * radius_mult * occ * obs,
                class,
                radius: c.radius,
                bearing: c.bearing,
            }
        })
        .collect();
    let best = scores.iter().map(|s| s.total).fold(0.0, f64::max);
    if best <= 0.0 {
        return (scores, None);
    }
    let mut winner: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if s.total < best * (1.0 - 1e-12) {
            continue;
        }
        winner = match winner {
            None => Some(i),
            Some(w) => {
                let o = &scores[w];
                let better = (s.class, -s.radius, s.bearing) < (o.class, -o.radius, o.bearing);
                Some(if better { i } else { w })
            }
        };
    }
    (scores, winner)
}

/// A random grid with rectangular obstacles, plus a free robot cell and target.
pub fn random_planner_scene<R: Rng>(rng: &mut R) -> (OccupancyGrid, Point2, Pose2D) {
    let res = [0.05, 0.1, 0.2][rng.gen_range(0..3)];
    let (w, h) = (rng.gen_range(30..70), rng.gen_range(30..70));
    let origin = Point2::new(rng.gen_range(-3.0..0.0), rng.gen_range(-3.0..0.0));
    let mut grid = OccupancyGrid::new(w, h, res, origin).unwrap();
    for _ in 0..rng.gen_range(0..7) {
        let (x0, y0) = (rng.gen_range(0..w), rng.gen_range(0..h));
        let (dw, dh) = (rng.gen_range(1..8), rng.gen_range(1..8));
        for x in x0..(x0 + dw).min(w) {
            for y in y0..(y0 + dh).min(h) {
                grid.set_occupied((x, y), true);
            }
        }
    }
    let free_point = |rng: &mut R, grid: &OccupancyGrid| loop {
        let p = Point2::new(
            origin.x + rng.gen_range(0.0..w as f64 * res),
            origin.y + rng.gen_range(0.0..h as f64 * res),
        );
        if !grid.is_occupied(cell_of(grid, p).unwrap()) {
            return p;
        }
    };
    let robot = free_point(rng, &grid);
    let t = free_point(rng, &grid);
    (grid.clone(), robot, Pose2D::new(t.x, t.y, rng.gen_range(0.0..360.0)))
}
