//! Supercover line traversal: every cell the closed segment touches,
//! including cells met only at a corner.

use super::grid::{Cell, OccupancyGrid};

const EPS: f64 = 1e-9;

/// Cells touched by the segment between two points in continuous grid coordinates.
/// Cells outside `[0, width) × [0, height)` are dropped. Sorted by (x, y).
pub fn supercover(a: (f64, f64), b: (f64, f64), width: usize, height: usize) -> Vec<Cell> {
    let (x_lo, x_hi) = (a.0.min(b.0), a.0.max(b.0));
    let first_col = ((x_lo - EPS).ceil() - 1.0).max(0.0);
    let last_col = (x_hi + EPS).floor().min(width as f64 - 1.0);
    let mut cells = Vec::new();
    let mut col = first_col;
    while col <= last_col {
        // Part of the segment inside the closed strip [col, col + 1].
        let (lo, hi) = (x_lo.max(col), x_hi.min(col + 1.0));
        let (y0, y1) = if (b.0 - a.0).abs() < EPS {
            (a.1, b.1)
        } else {
            let y_at = |x: f64| a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0);
            (y_at(lo), y_at(hi))
        };
        let (y_lo, y_hi) = (y0.min(y1), y0.max(y1));
        let first_row = ((y_lo - EPS).ceil() - 1.0).max(0.0);
        let last_row = (y_hi + EPS).floor().min(height as f64 - 1.0);
        let mut row = first_row;
        while row <= last_row {
            cells.push((col as usize, row as usize));
            row += 1.0;
        }
        col += 1.0;
    }
    cells
}

/// Supercover between the centres of two cells.
pub fn cells_between(grid: &OccupancyGrid, from: Cell, to: Cell) -> Vec<Cell> {
    let centre = |(cx, cy): Cell| (cx as f64 + 0.5, cy as f64 + 0.5);
    supercover(centre(from), centre(to), grid.width(), grid.height())
}

/// True when no occupied cell lies on the supercover between the two cells.
pub fn line_of_sight(grid: &OccupancyGrid, from: Cell, to: Cell) -> bool {
    cells_between(grid, from, to).into_iter().all(|c| !grid.is_occupied(c))
}
