//! Occupancy grids: world/cell transforms, 8-connected BFS, PGM + sidecar files.
//!
//! Cell `(cx, cy)` covers world `[ox + cx·res, ox + (cx+1)·res) × [oy + cy·res, oy + (cy+1)·res)`.
//! In PGM files the first image row is the top of the map (largest `cy`).

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn distance(self, o: Point2) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

pub type Cell = (usize, usize);

const NEIGHBORS_8: [(isize, isize); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Point2,
    occupied: Vec<bool>,
}

impl OccupancyGrid {
    /// An all-free grid.
    pub fn new(width: usize, height: usize, resolution: f64, origin: Point2) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("grid must have at least one cell".into()));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidArgument(format!("grid resolution must be positive, got {resolution}")));
        }
        Ok(OccupancyGrid { width, height, resolution, origin, occupied: vec![false; width * height] })
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

    pub fn origin(&self) -> Point2 {
        self.origin
    }

    fn idx(&self, (cx, cy): Cell) -> usize {
        cy * self.width + cx
    }

    pub fn is_occupied(&self, cell: Cell) -> bool {
        self.occupied[self.idx(cell)]
    }

    pub fn set_occupied(&mut self, cell: Cell, occupied: bool) {
        let i = self.idx(cell);
        self.occupied[i] = occupied;
    }

    /// Marks every cell whose centre lies in the world rectangle `[x0, x1] × [y0, y1]`.
    pub fn fill_rect(&mut self, x0: f64, y0: f64, x1: f64, y1: f64) {
        for cy in 0..self.height {
            for cx in 0..self.width {
                let c = self.cell_center((cx, cy));
                if c.x >= x0 && c.x <= x1 && c.y >= y0 && c.y <= y1 {
                    self.set_occupied((cx, cy), true);
                }
            }
        }
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    /// Continuous cell coordinates: `(x − ox) / res`.
    pub fn to_grid_coords(&self, p: Point2) -> (f64, f64) {
        ((p.x - self.origin.x) / self.resolution, (p.y - self.origin.y) / self.resolution)
    }

    pub fn world_to_cell(&self, p: Point2) -> Option<Cell> {
        let (gx, gy) = self.to_grid_coords(p);
        let (cx, cy) = (gx.floor(), gy.floor());
        (cx >= 0.0 && cy >= 0.0 && cx < self.width as f64 && cy < self.height as f64).then_some((cx as usize, cy as usize))
    }

    pub fn cell_of(&self, p: Point2) -> Result<Cell> {
        self.world_to_cell(p).ok_or(Error::OutOfBounds { x: p.x, y: p.y })
    }

    pub fn contains(&self, p: Point2) -> bool {
        self.world_to_cell(p).is_some()
    }

    pub fn cell_center(&self, (cx, cy): Cell) -> Point2 {
        Point2::new(
            self.origin.x + (cx as f64 + 0.5) * self.resolution,
            self.origin.y + (cy as f64 + 0.5) * self.resolution,
        )
    }

    fn neighbors(&self, (cx, cy): Cell) -> impl Iterator<Item = Cell> + '_ {
        NEIGHBORS_8.iter().filter_map(move |&(dx, dy)| {
            let nx = cx.checked_add_signed(dx)?;
            let ny = cy.checked_add_signed(dy)?;
            (nx < self.width && ny < self.height).then_some((nx, ny))
        })
    }

    /// Free cells reachable from `start` through 8-connected free cells.
    /// Empty when `start` itself is occupied.
    pub fn reachable_from(&self, start: Cell) -> Vec<bool> {
        let mut seen = vec![false; self.occupied.len()];
        if self.is_occupied(start) {
            return seen;
        }
        let mut queue = VecDeque::from([start]);
        seen[self.idx(start)] = true;
        while let Some(c) = queue.pop_front() {
            for n in self.neighbors(c) {
                let i = self.idx(n);
                if !seen[i] && !self.occupied[i] {
                    seen[i] = true;
                    queue.push_back(n);
                }
            }
        }
        seen
    }

    /// Shortest 8-connected path of free cells, both ends included.
    /// Neighbour expansion order is fixed, so the result is deterministic.
    pub fn bfs_path(&self, start: Cell, goal: Cell) -> Option<Vec<Cell>> {
        if self.is_occupied(start) || self.is_occupied(goal) {
            return None;
        }
        let mut parent: Vec<Option<usize>> = vec![None; self.occupied.len()];
        let start_i = self.idx(start);
        parent[start_i] = Some(start_i);
        let mut queue = VecDeque::from([start]);
        while let Some(c) = queue.pop_front() {
            if c == goal {
                let mut path = vec![goal];
                let mut i = self.idx(goal);
                while i != start_i {
                    i = parent[i].expect("visited cells have parents");
                    path.push((i % self.width, i / self.width));
                }
                path.reverse();
                return Some(path);
            }
            for n in self.neighbors(c) {
                let i = self.idx(n);
                if parent[i].is_none() && !self.occupied[i] {
                    parent[i] = Some(self.idx(c));
                    queue.push_back(n);
                }
            }
        }
        None
    }

    /// Binary (P5) PGM: 0 = occupied, 255 = free.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        for row in (0..self.height).rev() {
            for cx in 0..self.width {
                out.push(if self.is_occupied((cx, row)) { 0 } else { 255 });
            }
        }
        out
    }

    /// Parses P2 or P5 data. A pixel is free when its value exceeds half the maximum.
    pub fn from_pgm(bytes: &[u8], resolution: f64, origin: Point2) -> Result<Self> {
        let mut pos = 0;
        let mut token = || -> Result<String> {
            loop {
                while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                if pos < bytes.len() && bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                    continue;
                }
                break;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Truncated("PGM header ended early".into()));
            }
            Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
        };
        let magic = token()?;
        let num = |s: String| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad PGM number {s:?}")));
        let width = num(token()?)?;
        let height = num(token()?)?;
        let maxval = num(token()?)?;
        if maxval == 0 || maxval > 255 {
            return Err(Error::Parse(format!("unsupported PGM maxval {maxval}")));
        }
        let mut values = Vec::with_capacity(width * height);
        match magic.as_str() {
            "P2" => {
                for _ in 0..width * height {
                    values.push(num(token()?)?);
                }
            }
            "P5" => {
                let data_start = pos + 1;
                let data = bytes.get(data_start..data_start + width * height).ok_or_else(|| {
                    Error::Truncated(format!("PGM raster needs {} bytes", width * height))
                })?;
                values.extend(data.iter().map(|&b| usize::from(b)));
            }
            other => return Err(Error::Parse(format!("not a PGM file (magic {other:?})"))),
        }
        let mut grid = OccupancyGrid::new(width, height, resolution, origin)?;
        for (i, v) in values.into_iter().enumerate() {
            let (row, cx) = (i / width, i % width);
            grid.set_occupied((cx, height - 1 - row), v * 2 <= maxval);
        }
        Ok(grid)
    }

    /// Sidecar metadata in `key: value` lines.
    pub fn sidecar_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "resolution: {}", self.resolution);
        let _ = writeln!(s, "origin: [{}, {}]", self.origin.x, self.origin.y);
        s
    }
}

/// `room.pgm` → `room.yaml`.
pub fn sidecar_path(pgm: &Path) -> PathBuf {
    pgm.with_extension("yaml")
}

fn parse_sidecar(text: &str) -> Result<(f64, Point2)> {
    let mut resolution = None;
    let mut origin = None;
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        let Some((key, value)) = line.split_once(':') else { continue };
        let value = value.trim();
        match key.trim() {
            "resolution" => {
                resolution = Some(value.parse::<f64>().map_err(|_| Error::Parse(format!("bad resolution {value:?}")))?)
            }
            "origin" => {
                let nums = value
                    .trim_start_matches('[')
                    .trim_end_matches(']')
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::Parse(format!("bad origin {value:?}")))?;
                if nums.len() < 2 {
                    return Err(Error::Parse(format!("origin needs x and y, got {value:?}")));
                }
                origin = Some(Point2::new(nums[0], nums[1]));
            }
            _ => {}
        }
    }
    Ok((
        resolution.ok_or_else(|| Error::Parse("sidecar is missing `resolution`".into()))?,
        origin.ok_or_else(|| Error::Parse("sidecar is missing `origin`".into()))?,
    ))
}

pub fn load_grid(pgm: impl AsRef<Path>) -> Result<OccupancyGrid> {
    let pgm = pgm.as_ref();
    let side = sidecar_path(pgm);
    let meta = fs::read_to_string(&side).map_err(|e| Error::file(&side, e))?;
    let (resolution, origin) = parse_sidecar(&meta)?;
    let bytes = fs::read(pgm).map_err(|e| Error::file(pgm, e))?;
    OccupancyGrid::from_pgm(&bytes, resolution, origin)
}

pub fn save_grid(grid: &OccupancyGrid, pgm: impl AsRef<Path>) -> Result<()> {
    let pgm = pgm.as_ref();
    fs::write(pgm, grid.to_pgm()).map_err(|e| Error::file(pgm, e))?;
    let side = sidecar_path(pgm);
    fs::write(&side, grid.sidecar_text()).map_err(|e| Error::file(&side, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> OccupancyGrid {
        OccupancyGrid::new(10, 8, 0.5, Point2::new(-1.0, -2.0)).unwrap()
    }

    #[test]
    fn world_cell_round_trip_within_half_cell() {
        let g = grid();
        for cy in 0..g.height() {
            for cx in 0..g.width() {
                let c = g.cell_center((cx, cy));
                assert_eq!(g.world_to_cell(c), Some((cx, cy)));
            }
        }
        let p = Point2::new(0.3, -0.7);
        let back = g.cell_center(g.world_to_cell(p).unwrap());
        assert!((back.x - p.x).abs() <= 0.25 && (back.y - p.y).abs() <= 0.25);
        assert_eq!(g.world_to_cell(Point2::new(-1.01, 0.0)), None);
        assert_eq!(g.world_to_cell(Point2::new(4.0, 0.0)), None, "right edge is exclusive");
    }

    #[test]
    fn enclosed_cell_is_unreachable() {
        let mut g = grid();
        for (dx, dy) in NEIGHBORS_8 {
            g.set_occupied(((5 + dx) as usize, (4 + dy) as usize), true);
        }
        let reach = g.reachable_from((0, 0));
        assert!(!reach[g.idx((5, 4))]);
        assert!(reach[g.idx((9, 7))]);
        assert!(g.bfs_path((0, 0), (5, 4)).is_none());
        assert!(g.reachable_from((5, 5)).iter().all(|&r| !r), "start on a wall");
    }

    #[test]
    fn bfs_path_is_shortest_and_connected() {
        let mut g = grid();
        for cy in 0..7 {
            g.set_occupied((4, cy), true);
        }
        let path = g.bfs_path((0, 0), (9, 0)).unwrap();
        assert_eq!(path.first(), Some(&(0, 0)));
        assert_eq!(path.last(), Some(&(9, 0)));
        for w in path.windows(2) {
            let (a, b) = (w[0], w[1]);
            assert!(a.0.abs_diff(b.0) <= 1 && a.1.abs_diff(b.1) <= 1);
            assert!(!g.is_occupied(b));
        }
        // Must climb to row 7 to pass the wall and come back down: 7 up, 7 down, 9 across.
        assert_eq!(path.len() - 1, 14);
    }

    #[test]
    fn pgm_round_trip_p5_and_p2() {
        let mut g = grid();
        g.fill_rect(0.0, 0.0, 1.0, 1.0);
        g.set_occupied((0, 7), true);
        let back = OccupancyGrid::from_pgm(&g.to_pgm(), 0.5, g.origin()).unwrap();
        assert_eq!(back, g);

        let p2 = "P2\n# comment\n3 2\n255\n0 255 255\n255 255 0\n";
        let g2 = OccupancyGrid::from_pgm(p2.as_bytes(), 1.0, Point2::default()).unwrap();
        assert!(g2.is_occupied((0, 1)), "top-left pixel is the top row");
        assert!(g2.is_occupied((2, 0)));
        assert_eq!(g2.occupied_count(), 2);
        assert!(OccupancyGrid::from_pgm(b"P5\n3 2\n255\n\x00", 1.0, Point2::default()).is_err());
        assert!(OccupancyGrid::from_pgm(b"P6\n1 1\n255\n\x00", 1.0, Point2::default()).is_err());
    }

    #[test]
    fn sidecar_parsing() {
        let (r, o) = parse_sidecar("image: room.pgm\nresolution: 0.05\norigin: [-1.5, 2.0, 0.0]\n").unwrap();
        assert_eq!(r, 0.05);
        assert_eq!(o, Point2::new(-1.5, 2.0));
        assert!(parse_sidecar("origin: [0, 0]").is_err());
    }

    #[test]
    fn rejects_bad_resolution() {
        assert!(OccupancyGrid::new(2, 2, 0.0, Point2::default()).is_err());
        assert!(OccupancyGrid::new(0, 2, 1.0, Point2::default()).is_err());
    }
}
