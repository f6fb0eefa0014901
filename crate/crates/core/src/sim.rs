//! Deterministic follow / dwell / reposition / face-check simulation on an occupancy grid.
//!
//! Each tick the target moves along its piecewise-linear trajectory. The robot
//! pursues it along BFS grid paths at a capped speed. Once the target has stayed
//! within one cell per tick for the dwell threshold, the robot estimates the
//! person's orientation, asks the planner for a viewpoint and drives there.
//! A geometric face check stands in for a face detector.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{render_figure, StyleParams};
use crate::error::{Error, Result};
use crate::labels::{angular_difference, bearing_degrees, class_to_angle, wrap_degrees, OrientationClass};
use crate::nnet::{load_model, OrientationModel};
use crate::parallel::{map_slice, Exec};
use crate::planner::{
    line_of_sight, load_grid, observed_class, plan, supercover, Cell, OccupancyGrid, PlannerConfig, Point2, Pose2D,
    ScoredCandidate,
};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaceCone {
    pub half_angle: f64,
    pub min_range: f64,
    pub max_range: f64,
}

impl Default for FaceCone {
    fn default() -> Self {
        FaceCone { half_angle: 22.5, min_range: 0.5, max_range: 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Waypoint {
    fn pose(&self) -> Pose2D {
        Pose2D::new(self.x, self.y, self.heading)
    }
}

#[derive(Debug, Clone)]
pub enum OrientationSource {
    /// The planner is given the target's true heading.
    GroundTruth,
    /// The robot renders what it sees and classifies it with the network.
    Model(Arc<OrientationModel>),
}

/// A fully resolved scenario, ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub grid: OccupancyGrid,
    pub robot_start: Pose2D,
    pub trajectory: Vec<Waypoint>,
    pub dt: f64,
    pub duration: f64,
    pub dwell_threshold: f64,
    pub robot_speed: f64,
    /// The robot stops pursuing once this close to the target.
    pub follow_distance: f64,
    pub face_cone: FaceCone,
    pub planner: PlannerConfig,
    pub orientation: OrientationSource,
    pub seed: u64,
}

/// On-disk scenario schema (TOML). Paths are relative to the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub grid: PathBuf,
    pub robot: Pose2D,
    pub trajectory: Vec<Waypoint>,
    #[serde(default = "defaults::dt")]
    pub dt: f64,
    pub duration: f64,
    #[serde(default = "defaults::dwell")]
    pub dwell_threshold: f64,
    #[serde(default = "defaults::speed")]
    pub robot_speed: f64,
    #[serde(default = "defaults::follow")]
    pub follow_distance: f64,
    #[serde(default)]
    pub face_cone: FaceCone,
    #[serde(default = "defaults::bearings")]
    pub bearings_per_ring: usize,
    #[serde(default)]
    pub literal_obstacle: bool,
    /// Path to a trained model; ground truth is used when absent.
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

mod defaults {
    pub fn dt() -> f64 {
        0.1
    }
    pub fn dwell() -> f64 {
        2.5
    }
    pub fn speed() -> f64 {
        0.5
    }
    pub fn follow() -> f64 {
        1.0
    }
    pub fn bearings() -> usize {
        crate::planner::DEFAULT_BEARINGS_PER_RING
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))
    }

    /// Loads the grid and model the file refers to.
    pub fn resolve(&self, base_dir: &Path) -> Result<Scenario> {
        let grid = load_grid(base_dir.join(&self.grid))?;
        let orientation = match &self.model {
            None => OrientationSource::GroundTruth,
            Some(p) => OrientationSource::Model(Arc::new(load_model(base_dir.join(p))?)),
        };
        let scenario = Scenario {
            grid,
            robot_start: Pose2D::new(self.robot.x, self.robot.y, self.robot.heading),
            trajectory: self.trajectory.clone(),
            dt: self.dt,
            duration: self.duration,
            dwell_threshold: self.dwell_threshold,
            robot_speed: self.robot_speed,
            follow_distance: self.follow_distance,
            face_cone: self.face_cone,
            planner: PlannerConfig {
                bearings_per_ring: self.bearings_per_ring,
                literal_obstacle: self.literal_obstacle,
                ..Default::default()
            },
            orientation,
            seed: self.seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    ScenarioFile::parse(&text)?.resolve(path.parent().unwrap_or(Path::new(".")))
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scenario(m));
        if self.trajectory.is_empty() {
            return bad("target trajectory is empty".into());
        }
        if self.trajectory.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return bad("trajectory times must be strictly increasing".into());
        }
        if !(self.face_cone.half_angle > 0.0 && self.face_cone.half_angle < 90.0) {
            return bad(format!("face cone half-angle {} outside (0, 90)", self.face_cone.half_angle));
        }
        if !(self.face_cone.min_range <= self.face_cone.max_range) {
            return bad("face cone min range exceeds max range".into());
        }
        for (name, v) in [
            ("dt", self.dt),
            ("robot_speed", self.robot_speed),
            ("dwell_threshold", self.dwell_threshold),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.duration >= 0.0) || !(self.follow_distance >= 0.0) {
            return bad("duration and follow distance must be non-negative".into());
        }
        match self.grid.world_to_cell(self.robot_start.position()) {
            None => bad("robot starts outside the grid".into()),
            Some(c) if self.grid.is_occupied(c) => bad("robot starts on an occupied cell".into()),
            Some(_) => Ok(()),
        }
    }

    /// Target pose at time `t`: linear in position, shortest arc in heading,
    /// clamped to the first and last waypoint.
    pub fn target_at(&self, t: f64) -> Pose2D {
        let tr = &self.trajectory;
        if t <= tr[0].t {
            return tr[0].pose();
        }
        let i = tr.partition_point(|w| w.t <= t);
        if i >= tr.len() {
            return tr[tr.len() - 1].pose();
        }
        let (a, b) = (&tr[i - 1], &tr[i]);
        let f = (t - a.t) / (b.t - a.t);
        let dh = wrap_degrees(b.heading - a.heading + 180.0) - 180.0;
        Pose2D::new(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y), a.heading + f * dh)
    }
}

/// Whether the robot would see the person's face from `robot`.
/// Points off the grid never see it.
pub fn face_detected(robot: Point2, target: &Pose2D, grid: &OccupancyGrid, cone: &FaceCone) -> bool {
    let (Some(rc), Some(tc)) = (grid.world_to_cell(robot), grid.world_to_cell(target.position())) else {
        return false;
    };
    let range = robot.distance(target.position());
    if range < cone.min_range - EPS || range > cone.max_range + EPS || range == 0.0 {
        return false;
    }
    let bearing = bearing_degrees(robot.x - target.x, robot.y - target.y);
    angular_difference(bearing, target.heading) <= cone.half_angle + EPS && line_of_sight(grid, rc, tc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientationEstimate {
    /// Class seen from the robot, 0 = the person faces the robot.
    pub class: OrientationClass,
    /// Heading handed to the planner.
    pub heading: f64,
}

/// The `index`-th estimate of a run. Model mode renders the person as seen
/// from the robot and converts the predicted class back to a heading.
pub fn estimate_orientation(
    robot: Point2,
    target: &Pose2D,
    source: &OrientationSource,
    seed: u64,
    index: usize,
) -> Result<OrientationEstimate> {
    let class = observed_class(robot, target)?;
    match source {
        OrientationSource::GroundTruth => Ok(OrientationEstimate { class, heading: target.heading }),
        OrientationSource::Model(model) => {
            let to_robot = bearing_degrees(robot.x - target.x, robot.y - target.y);
            // The renderer measures the body angle from the line of sight to the
            // camera, which is the mirror image of the planner's convention.
            let view_angle = wrap_degrees(target.heading - to_robot);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index as u64));
            let image = render_figure(view_angle, &StyleParams::default(), &mut rng);
            let seen = model.predict(&image.to_tensor())?.orientation()?;
            Ok(OrientationEstimate {
                class: seen.mirrored(),
                heading: wrap_degrees(to_robot + class_to_angle(seen)),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Following,
    Repositioning,
    Holding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: usize,
    pub t: f64,
    pub robot: Pose2D,
    pub target: Pose2D,
    pub dwell: f64,
    pub mode: Mode,
    pub face_detected: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEvent {
    pub tick: usize,
    pub t: f64,
    pub dwell: f64,
    pub true_class: OrientationClass,
    pub estimate: OrientationEstimate,
    /// `None` when no candidate was viable.
    pub selection: Option<ScoredCandidate>,
    pub face_before: u8,
    /// Set once the robot reaches the chosen viewpoint.
    pub face_after: Option<u8>,
    pub arrived_tick: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub seed: u64,
    pub dt: f64,
    pub ticks: Vec<TickRecord>,
    pub plans: Vec<PlanEvent>,
}

impl SimTrace {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Waypoints for driving from `from` to `goal` through free cells: the BFS
/// cell centres, then `goal` itself. The start cell centre is skipped when the
/// straight move to the next centre stays on free cells.
fn route(grid: &OccupancyGrid, from: Point2, goal: Point2) -> Option<VecDeque<Point2>> {
    let cells: Vec<Cell> = grid.bfs_path(grid.world_to_cell(from)?, grid.world_to_cell(goal)?)?;
    let mut pts: VecDeque<Point2> = cells.iter().map(|&c| grid.cell_center(c)).collect();
    if cells.len() >= 2 {
        let a = grid.to_grid_coords(from);
        let b = grid.to_grid_coords(pts[1]);
        if supercover(a, b, grid.width(), grid.height()).into_iter().all(|c| !grid.is_occupied(c)) {
            pts.pop_front();
        }
    }
    if cells.len() == 1 {
        // Same cell: a straight move cannot leave it.
        pts.clear();
    }
    pts.push_back(goal);
    Some(pts)
}

/// Moves along `route` by at most `budget` metres, stopping early once `done` holds.
fn advance(pos: &mut Point2, route: &mut VecDeque<Point2>, mut budget: f64, done: impl Fn(Point2) -> bool) {
    while budget > EPS && !done(*pos) {
        let Some(&next) = route.front() else { break };
        let d = pos.distance(next);
        if d <= budget {
            *pos = next;
            budget -= d;
            route.pop_front();
        } else {
            let f = budget / d;
            *pos = Point2::new(pos.x + f * (next.x - pos.x), pos.y + f * (next.y - pos.y));
            budget = 0.0;
        }
    }
}

struct Nav {
    goal_cell: Option<Cell>,
    route: VecDeque<Point2>,
}

impl Nav {
    fn new() -> Self {
        Nav { goal_cell: None, route: VecDeque::new() }
    }

    /// Recomputes the route when the goal moved to another cell.
    fn retarget(&mut self, grid: &OccupancyGrid, pos: Point2, goal: Point2, force: bool) {
        let cell = grid.world_to_cell(goal);
        if force || cell != self.goal_cell {
            self.goal_cell = cell;
            self.route = route(grid, pos, goal).unwrap_or_default();
        }
    }
}

pub fn run_scenario(s: &Scenario) -> Result<SimTrace> {
    s.validate()?;
    let grid = &s.grid;
    let ticks = (s.duration / s.dt - EPS).ceil() as usize;
    let step = s.robot_speed * s.dt;
    let dwell_ticks_needed = (s.dwell_threshold / s.dt - EPS).ceil() as usize;

    let mut robot = s.robot_start.position();
    let mut target = s.target_at(0.0);
    let mut mode = Mode::Following;
    let mut dwell_ticks = 0usize;
    let mut planned_this_dwell = false;
    let mut nav = Nav::new();
    let mut goal = robot;
    let mut trace = SimTrace { seed: s.seed, dt: s.dt, ticks: Vec::with_capacity(ticks + 1), plans: Vec::new() };

    let heading_to = |from: Point2, to: Point2, fallback: f64| {
        if from.distance(to) > EPS {
            bearing_degrees(to.x - from.x, to.y - from.y)
        } else {
            fallback
        }
    };
    let mut robot_heading = s.robot_start.heading;
    let record = |tick: usize, robot: Point2, heading: f64, target: Pose2D, dwell_ticks: usize, mode: Mode| TickRecord {
        tick,
        t: tick as f64 * s.dt,
        robot: Pose2D::new(robot.x, robot.y, heading),
        target,
        dwell: dwell_ticks as f64 * s.dt,
        mode,
        face_detected: u8::from(face_detected(robot, &target, grid, &s.face_cone)),
    };
    trace.ticks.push(record(0, robot, robot_heading, target, 0, mode));

    for tick in 1..=ticks {
        let t = tick as f64 * s.dt;
        let next = s.target_at(t);
        if next.position().distance(target.position()) <= grid.resolution() + EPS {
            dwell_ticks += 1;
        } else {
            dwell_ticks = 0;
            planned_this_dwell = false;
            if mode != Mode::Following {
                mode = Mode::Following;
                nav.goal_cell = None;
            }
        }
        target = next;

        if !planned_this_dwell && dwell_ticks >= dwell_ticks_needed {
            planned_this_dwell = true;
            let index = trace.plans.len();
            let true_class = observed_class(robot, &target)?;
            let estimate = estimate_orientation(robot, &target, &s.orientation, s.seed, index)?;
            let believed = Pose2D::new(target.x, target.y, estimate.heading);
            let selection = plan(robot, &believed, grid, s.planner, Exec::Sequential)?.selection().copied();
            if let Some(sel) = &selection {
                goal = sel.candidate.position;
                nav.retarget(grid, robot, goal, true);
                mode = Mode::Repositioning;
            }
            trace.plans.push(PlanEvent {
                tick,
                t,
                dwell: dwell_ticks as f64 * s.dt,
                true_class,
                estimate,
                selection,
                face_before: u8::from(face_detected(robot, &target, grid, &s.face_cone)),
                face_after: None,
                arrived_tick: None,
            });
        }

        match mode {
            Mode::Following => {
                nav.retarget(grid, robot, target.position(), false);
                let tp = target.position();
                let stop = s.follow_distance;
                advance(&mut robot, &mut nav.route, step, |p| p.distance(tp) <= stop);
            }
            Mode::Repositioning => {
                advance(&mut robot, &mut nav.route, step, |_| false);
                if robot.distance(goal) <= EPS {
                    robot = goal;
                    mode = Mode::Holding;
                    let ev = trace.plans.last_mut().expect("repositioning follows a plan");
                    ev.face_after = Some(u8::from(face_detected(robot, &target, grid, &s.face_cone)));
                    ev.arrived_tick = Some(tick);
                }
            }
            Mode::Holding => {}
        }
        robot_heading = heading_to(robot, target.position(), robot_heading);
        trace.ticks.push(record(tick, robot, robot_heading, target, dwell_ticks, mode));
    }
    Ok(trace)
}

/// Runs independent scenarios, one per worker. Results keep input order.
pub fn run_batch(scenarios: &[Scenario], exec: Exec) -> Vec<Result<SimTrace>> {
    map_slice(exec, scenarios, run_scenario)
}

/// A walled square room, `size` metres across at 0.1 m cells, with origin at (0, 0).
pub fn open_room(size: f64) -> Result<OccupancyGrid> {
    let res = 0.1;
    let n = (size / res).round() as usize;
    let mut g = OccupancyGrid::new(n, n, res, Point2::default())?;
    for i in 0..n {
        for (cx, cy) in [(i, 0), (i, n - 1), (0, i), (n - 1, i)] {
            g.set_occupied((cx, cy), true);
        }
    }
    Ok(g)
}

/// A random walk-then-stop scenario in an 8 m open room. The person walks in a
/// straight line (facing the direction of travel) with the robot following
/// behind, then stops somewhere with at least 2.3 m of free floor ahead.
pub fn random_open_room_scenario(seed: u64) -> Result<Scenario> {
    let size = 8.0;
    let grid = open_room(size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (0.6, size - 0.6);
    let inside = |p: Point2| p.x > lo && p.x < hi && p.y > lo && p.y < hi;
    let ahead = |p: Point2, heading: f64, d: f64| {
        let (s, c) = heading.to_radians().sin_cos();
        Point2::new(p.x + d * c, p.y + d * s)
    };
    loop {
        let heading: f64 = rng.gen_range(0.0..360.0);
        let stop = Point2::new(rng.gen_range(lo..hi), rng.gen_range(lo..hi));
        let walk: f64 = rng.gen_range(1.5..3.5);
        let start = ahead(stop, heading, -walk);
        let robot = ahead(start, heading, -1.0);
        if !(inside(ahead(stop, heading, 2.3)) && inside(start) && inside(robot)) {
            continue;
        }
        let speed: f64 = rng.gen_range(1.1..1.4);
        let t_walk = walk / speed;
        let scenario = Scenario {
            grid,
            robot_start: Pose2D::new(robot.x, robot.y, heading),
            trajectory: vec![
                Waypoint { t: 0.0, x: start.x, y: start.y, heading },
                Waypoint { t: t_walk, x: stop.x, y: stop.y, heading },
            ],
            dt: 0.1,
            duration: t_walk + 20.0,
            dwell_threshold: 2.5,
            robot_speed: 0.5,
            follow_distance: 1.0,
            face_cone: FaceCone::default(),
            planner: PlannerConfig::default(),
            orientation: OrientationSource::GroundTruth,
            seed,
        };
        scenario.validate()?;
        return Ok(scenario);
    }
}
