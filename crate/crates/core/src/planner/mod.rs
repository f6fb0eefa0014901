//! Utility-based repositioning: score candidate viewpoints around a person and
//! pick the one with the largest
//! `U(p) = Orientation · Distance · Radius · Occupancy · Obstacle`.
//!
//! Bearings and headings are in degrees, counter-clockwise from world +X.

mod grid;
mod los;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{angle_to_class, bearing_degrees, wrap_degrees, OrientationAngle, OrientationClass};
use crate::parallel::{map_slice, Exec};

pub use grid::{load_grid, save_grid, sidecar_path, Cell, OccupancyGrid, Point2};
pub use los::{cells_between, line_of_sight, supercover};

/// Ring radii in metres, nearest first.
pub const RADII: [f64; 4] = [0.5, 1.0, 1.5, 2.0];
pub const DEFAULT_BEARINGS_PER_RING: usize = 16;

/// Totals within this relative distance of the best are treated as tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    /// Wrapped to `[0, 360)` by [`Pose2D::new`].
    pub heading: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose2D { x, y, heading: wrap_degrees(heading) }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub position: Point2,
    pub radius: f64,
    /// Direction from the target to the candidate.
    pub bearing: f64,
}

pub fn generate_candidates(target: &Pose2D, bearings_per_ring: usize) -> Result<Vec<Candidate>> {
    if bearings_per_ring < 4 {
        return Err(Error::InvalidArgument(format!("need at least 4 bearings per ring, got {bearings_per_ring}")));
    }
    let mut out = Vec::with_capacity(RADII.len() * bearings_per_ring);
    for &radius in &RADII {
        for k in 0..bearings_per_ring {
            let bearing = 360.0 * k as f64 / bearings_per_ring as f64;
            let (s, c) = bearing.to_radians().sin_cos();
            out.push(Candidate {
                position: Point2::new(target.x + radius * c, target.y + radius * s),
                radius,
                bearing,
            });
        }
    }
    Ok(out)
}

/// Class the robot would see from `p`: 0 on the target's facing ray, 4 directly behind.
pub fn observed_class(p: Point2, target: &Pose2D) -> Result<OrientationClass> {
    let (dx, dy) = (p.x - target.x, p.y - target.y);
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::InvalidArgument("viewpoint coincides with the target".into()));
    }
    Ok(angle_to_class(OrientationAngle::new(bearing_degrees(dx, dy) - target.heading)))
}

pub fn orientation_multiplier(class: OrientationClass) -> f64 {
    match class.index() {
        0 => 10.0,
        1 | 7 => 1.0,
        2 | 6 => 0.1,
        3 | 5 => 0.01,
        _ => 0.001,
    }
}

pub fn radius_multiplier(radius: f64) -> Result<f64> {
    match radius {
        0.5 => Ok(0.5),
        1.0 | 1.5 => Ok(0.8),
        2.0 => Ok(1.0),
        r => Err(Error::InvalidArgument(format!("no radius multiplier for {r} m"))),
    }
}

/// `max_{p'} |p' − robot| − |p − robot| + epsilon`, the max running over all candidates.
pub fn distance_score(p: Point2, robot: Point2, all: &[Candidate], epsilon: f64) -> Result<f64> {
    let farthest = farthest_distance(robot, all)?;
    Ok(farthest - p.distance(robot) + epsilon)
}

fn farthest_distance(robot: Point2, all: &[Candidate]) -> Result<f64> {
    all.iter()
        .map(|c| c.position.distance(robot))
        .reduce(f64::max)
        .ok_or(Error::Empty { what: "candidate set" })
}

/// 1 when `p` is on a free cell connected to the robot's cell through free cells.
pub fn occupancy_term(p: Point2, robot: Point2, grid: &OccupancyGrid) -> Result<f64> {
    let (pc, rc) = (grid.cell_of(p)?, grid.cell_of(robot)?);
    Ok(if grid.bfs_path(rc, pc).is_some() { 1.0 } else { 0.0 })
}

/// 1 when the line from `p` to the target is clear (or blocked, under `literal`).
pub fn obstacle_term(p: Point2, target: Point2, grid: &OccupancyGrid, literal: bool) -> Result<f64> {
    let (pc, tc) = (grid.cell_of(p)?, grid.cell_of(target)?);
    Ok(if line_of_sight(grid, pc, tc) != literal { 1.0 } else { 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub bearings_per_ring: usize,
    /// Reward blocked lines of sight instead of clear ones.
    pub literal_obstacle: bool,
    /// Uniform factor on every Distance score. Does not change the selection.
    pub distance_scale: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig { bearings_per_ring: DEFAULT_BEARINGS_PER_RING, literal_obstacle: false, distance_scale: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityBreakdown {
    pub orientation: f64,
    pub distance: f64,
    pub radius: f64,
    pub occupancy: f64,
    pub obstacle: f64,
    pub total: f64,
}

impl UtilityBreakdown {
    pub fn from_factors(orientation: f64, distance: f64, radius: f64, occupancy: f64, obstacle: f64) -> Self {
        let total = orientation * distance * radius * occupancy * obstacle;
        UtilityBreakdown { orientation, distance, radius, occupancy, obstacle, total }
    }
}

/// Everything about the scene that does not depend on the candidate.
struct ScoringContext<'a> {
    grid: &'a OccupancyGrid,
    robot: Point2,
    target: Pose2D,
    target_cell: Cell,
    reachable: Vec<bool>,
    farthest: f64,
    cfg: PlannerConfig,
}

impl<'a> ScoringContext<'a> {
    fn new(grid: &'a OccupancyGrid, robot: Point2, target: &Pose2D, all: &[Candidate], cfg: PlannerConfig) -> Result<Self> {
        if !(cfg.distance_scale > 0.0 && cfg.distance_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("distance scale must be positive, got {}", cfg.distance_scale)));
        }
        let robot_cell = grid.cell_of(robot)?;
        let target_cell = grid.cell_of(target.position())?;
        Ok(ScoringContext {
            grid,
            robot,
            target: *target,
            target_cell,
            reachable: grid.reachable_from(robot_cell),
            farthest: farthest_distance(robot, all)?,
            cfg,
        })
    }

    /// Candidates off the map keep their geometric factors but score zero
    /// for occupancy and obstacle.
    fn score(&self, c: &Candidate) -> Result<ScoredCandidate> {
        let class = observed_class(c.position, &self.target)?;
        let distance = (self.farthest - c.position.distance(self.robot) + self.grid.resolution()) * self.cfg.distance_scale;
        let (occupancy, obstacle) = match self.grid.world_to_cell(c.position) {
            None => (0.0, 0.0),
            Some(cell) => {
                let reach = self.reachable[cell.1 * self.grid.width() + cell.0];
                let clear = line_of_sight(self.grid, cell, self.target_cell);
                (f64::from(u8::from(reach)), f64::from(u8::from(clear != self.cfg.literal_obstacle)))
            }
        };
        let breakdown = UtilityBreakdown::from_factors(
            orientation_multiplier(class),
            distance,
            radius_multiplier(c.radius)?,
            occupancy,
            obstacle,
        );
        Ok(ScoredCandidate { candidate: *c, observed_class: class, breakdown })
    }
}

/// Full breakdown for one candidate.
pub fn utility(
    c: &Candidate,
    robot: Point2,
    target: &Pose2D,
    grid: &OccupancyGrid,
    all: &[Candidate],
    cfg: PlannerConfig,
) -> Result<UtilityBreakdown> {
    Ok(ScoringContext::new(grid, robot, target, all, cfg)?.score(c)?.breakdown)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub candidate: Candidate,
    pub observed_class: OrientationClass,
    pub breakdown: UtilityBreakdown,
}

impl ScoredCandidate {
    /// Tie-break order: frontal classes first, then farther rings, then smaller bearings.
    fn prefer(&self, other: &ScoredCandidate) -> std::cmp::Ordering {
        self.observed_class
            .cmp(&other.observed_class)
            .then(other.candidate.radius.total_cmp(&self.candidate.radius))
            .then(self.candidate.bearing.total_cmp(&other.candidate.bearing))
    }
}

/// Index of the winner in `scored`, or `None` when every total is zero.
pub fn argmax(scored: &[ScoredCandidate]) -> Option<usize> {
    let best = scored.iter().map(|s| s.breakdown.total).fold(0.0, f64::max);
    if best <= 0.0 {
        return None;
    }
    let cutoff = best * (1.0 - TIE_TOLERANCE);
    scored
        .iter()
        .enumerate()
        .filter(|(_, s)| s.breakdown.total >= cutoff)
        .min_by(|(_, a), (_, b)| a.prefer(b))
        .map(|(i, _)| i)
}

pub fn score_candidates(
    candidates: &[Candidate],
    robot: Point2,
    target: &Pose2D,
    grid: &OccupancyGrid,
    cfg: PlannerConfig,
    exec: Exec,
) -> Result<Vec<ScoredCandidate>> {
    let ctx = ScoringContext::new(grid, robot, target, candidates, cfg)?;
    map_slice(exec, candidates, |c| ctx.score(c)).into_iter().collect()
}

/// The best candidate, or `Ok(None)` when nothing is viable.
pub fn select_best(
    candidates: &[Candidate],
    robot: Point2,
    target: &Pose2D,
    grid: &OccupancyGrid,
    cfg: PlannerConfig,
    exec: Exec,
) -> Result<Option<ScoredCandidate>> {
    let scored = score_candidates(candidates, robot, target, grid, cfg, exec)?;
    Ok(argmax(&scored).map(|i| scored[i]))
}

/// Every scored candidate plus the selection, for offline inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanTrace {
    pub robot: Point2,
    pub target: Pose2D,
    pub config: PlannerConfig,
    pub candidates: Vec<ScoredCandidate>,
    pub selected: Option<usize>,
}

impl PlanTrace {
    pub fn selection(&self) -> Option<&ScoredCandidate> {
        self.selected.map(|i| &self.candidates[i])
    }
}

/// Generates candidates around `target`, scores them and records the choice.
pub fn plan(robot: Point2, target: &Pose2D, grid: &OccupancyGrid, cfg: PlannerConfig, exec: Exec) -> Result<PlanTrace> {
    let candidates = generate_candidates(target, cfg.bearings_per_ring)?;
    let scored = score_candidates(&candidates, robot, target, grid, cfg, exec)?;
    Ok(PlanTrace { robot, target: *target, config: cfg, selected: argmax(&scored), candidates: scored })
}
