//! Occupancy-grid world model: map text format, world/cell conversion,
//! raycasting, field-of-view geometry, and simulated lidar mapping.
//!
//! Grids are value types: every operation that changes a map returns a new
//! one, so maps can be shared read-only across concurrent planners.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{angle_diff, Point2};
use crate::models::RobotPose;

/// State of one grid cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellState {
    Free,
    Occupied,
    Unknown,
}

impl CellState {
    fn to_char(self) -> char {
        match self {
            CellState::Free => '.',
            CellState::Occupied => '#',
            CellState::Unknown => '?',
        }
    }
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("point ({x}, {y}) is outside the map bounds")]
    OutOfBounds { x: f64, y: f64 },
    #[error("maps do not share geometry (size, resolution, origin)")]
    GeometryMismatch,
    #[error("map parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Which physical sensor a [`SensorConfig`] describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SensorKind {
    Camera,
    Lidar,
}

/// Cone-shaped sensing region: maximum range and half of the cone angle.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SensorConfig {
    pub max_range: f64,
    pub half_angle: f64,
    pub kind: SensorKind,
}

impl SensorConfig {
    pub fn new(max_range: f64, half_angle: f64, kind: SensorKind) -> Self {
        assert!(max_range > 0.0, "max_range must be positive");
        assert!(
            half_angle > 0.0 && half_angle <= PI,
            "half_angle must lie in (0, pi]"
        );
        Self {
            max_range,
            half_angle,
            kind,
        }
    }
}

/// Result of casting a ray between two world points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RaycastResult {
    Clear,
    /// First point where the ray enters an occupied cell.
    Blocked(Point2),
}

/// Axis-aligned occupancy grid with a world-frame origin.
///
/// Cell `(0, 0)` covers the square starting at `origin`; row index grows
/// with world `y`, column index with world `x`.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Point2,
    cells: Vec<CellState>,
}

impl OccupancyGrid {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Point2,
        fill: CellState,
    ) -> Self {
        assert!(width >= 1 && height >= 1, "grid must be at least 1x1");
        assert!(resolution > 0.0, "resolution must be positive");
        Self {
            width,
            height,
            resolution,
            origin,
            cells: vec![fill; width * height],
        }
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

    /// World extent covered by the grid, `[min, max)` per axis.
    pub fn bounds(&self) -> (Point2, Point2) {
        (
            self.origin,
            Point2::new(
                self.origin.x + self.width as f64 * self.resolution,
                self.origin.y + self.height as f64 * self.resolution,
            ),
        )
    }

    pub fn contains(&self, p: Point2) -> bool {
        let (lo, hi) = self.bounds();
        p.x >= lo.x && p.x < hi.x && p.y >= lo.y && p.y < hi.y
    }

    /// Cell indices containing a world point, or `None` if out of bounds.
    pub fn cell_of(&self, p: Point2) -> Option<(usize, usize)> {
        if !self.contains(p) {
            return None;
        }
        let cx = ((p.x - self.origin.x) / self.resolution).floor() as usize;
        let cy = ((p.y - self.origin.y) / self.resolution).floor() as usize;
        // Clamp against float edge cases right at the upper boundary.
        Some((cx.min(self.width - 1), cy.min(self.height - 1)))
    }

    /// World coordinates of a cell center.
    pub fn cell_center(&self, cx: usize, cy: usize) -> Point2 {
        Point2::new(
            self.origin.x + (cx as f64 + 0.5) * self.resolution,
            self.origin.y + (cy as f64 + 0.5) * self.resolution,
        )
    }

    pub fn cell(&self, cx: usize, cy: usize) -> CellState {
        self.cells[cy * self.width + cx]
    }

    pub fn set_cell(&mut self, cx: usize, cy: usize, s: CellState) {
        self.cells[cy * self.width + cx] = s;
    }

    /// Cell state at a world point.
    pub fn query(&self, p: Point2) -> Result<CellState, GridError> {
        let (cx, cy) = self
            .cell_of(p)
            .ok_or(GridError::OutOfBounds { x: p.x, y: p.y })?;
        Ok(self.cell(cx, cy))
    }

    pub fn same_geometry(&self, other: &OccupancyGrid) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.resolution == other.resolution
            && (self.origin.x - other.origin.x).abs() < 1e-12
            && (self.origin.y - other.origin.y).abs() < 1e-12
    }

    /// Count of cells in a given state.
    pub fn count(&self, s: CellState) -> usize {
        self.cells.iter().filter(|&&c| c == s).count()
    }

    /// Parse the map text format: a header `W H RES OX OY` followed by `H`
    /// rows of `W` characters from `{., #, ?}`. The first data row is the
    /// minimum-y row.
    pub fn parse(text: &str) -> Result<Self, GridError> {
        let mut lines = text.lines().enumerate();
        let (hline, header) = lines.next().ok_or(GridError::Parse {
            line: 1,
            msg: "empty map text".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(GridError::Parse {
                line: hline + 1,
                msg: format!("header needs `W H RES OX OY`, got {} fields", fields.len()),
            });
        }
        let parse_num = |s: &str, what: &str| -> Result<f64, GridError> {
            s.parse::<f64>().map_err(|_| GridError::Parse {
                line: hline + 1,
                msg: format!("bad {what}: {s:?}"),
            })
        };
        let width = parse_num(fields[0], "width")? as usize;
        let height = parse_num(fields[1], "height")? as usize;
        let resolution = parse_num(fields[2], "resolution")?;
        let ox = parse_num(fields[3], "origin x")?;
        let oy = parse_num(fields[4], "origin y")?;
        if width < 1 || height < 1 || resolution <= 0.0 {
            return Err(GridError::Parse {
                line: hline + 1,
                msg: "width/height must be >= 1 and resolution > 0".into(),
            });
        }

        let mut grid = OccupancyGrid::new(
            width,
            height,
            resolution,
            Point2::new(ox, oy),
            CellState::Unknown,
        );
        let mut rows = 0usize;
        for (ln, row) in lines {
            if row.trim().is_empty() {
                continue;
            }
            if rows >= height {
                return Err(GridError::Parse {
                    line: ln + 1,
                    msg: format!("more than {height} data rows"),
                });
            }
            let chars: Vec<char> = row.trim_end().chars().collect();
            if chars.len() != width {
                return Err(GridError::Parse {
                    line: ln + 1,
                    msg: format!("row has {} cells, expected {width}", chars.len()),
                });
            }
            for (cx, ch) in chars.into_iter().enumerate() {
                let s = match ch {
                    '.' => CellState::Free,
                    '#' => CellState::Occupied,
                    '?' => CellState::Unknown,
                    other => {
                        return Err(GridError::Parse {
                            line: ln + 1,
                            msg: format!("unexpected cell character {other:?}"),
                        })
                    }
                };
                grid.set_cell(cx, rows, s);
            }
            rows += 1;
        }
        if rows != height {
            return Err(GridError::Parse {
                line: 0,
                msg: format!("expected {height} data rows, got {rows}"),
            });
        }
        Ok(grid)
    }

    /// Render back to the text format accepted by [`OccupancyGrid::parse`].
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} {} {} {} {}\n",
            self.width, self.height, self.resolution, self.origin.x, self.origin.y
        );
        for cy in 0..self.height {
            for cx in 0..self.width {
                out.push(self.cell(cx, cy).to_char());
            }
            out.push('\n');
        }
        out
    }

    /// Copy of the grid with occupied cells dilated by `radius` meters, for
    /// collision checking against an inflated robot footprint. A cell is
    /// marked when the gap between its region and an occupied cell's
    /// region is at most `radius`, so any positive radius covers at least
    /// the eight neighbors.
    pub fn inflate(&self, radius: f64) -> OccupancyGrid {
        let mut out = self.clone();
        if radius <= 0.0 {
            return out;
        }
        let r_cells = (radius / self.resolution).ceil() as i64 + 1;
        for cy in 0..self.height {
            for cx in 0..self.width {
                if self.cell(cx, cy) != CellState::Occupied {
                    continue;
                }
                for dy in -r_cells..=r_cells {
                    for dx in -r_cells..=r_cells {
                        let (nx, ny) = (cx as i64 + dx, cy as i64 + dy);
                        if nx < 0 || ny < 0 || nx >= self.width as i64 || ny >= self.height as i64 {
                            continue;
                        }
                        let gx = (dx.abs() - 1).max(0) as f64 * self.resolution;
                        let gy = (dy.abs() - 1).max(0) as f64 * self.resolution;
                        if gx.hypot(gy) <= radius {
                            out.set_cell(nx as usize, ny as usize, CellState::Occupied);
                        }
                    }
                }
            }
        }
        out
    }
}

/// Walk the cells a segment crosses, in order, using grid traversal (DDA).
/// Yields `(cx, cy, t_entry)` with `t_entry` the segment parameter where the
/// ray enters the cell; the starting cell has `t_entry = 0`.
fn traverse_cells(
    map: &OccupancyGrid,
    from: Point2,
    to: Point2,
    mut visit: impl FnMut(usize, usize, f64) -> bool,
) {
    let Some((mut cx, mut cy)) = map.cell_of(from) else {
        return;
    };
    let (ex, ey) = match map.cell_of(to) {
        Some(c) => c,
        None => return,
    };
    if !visit(cx, cy, 0.0) {
        return;
    }
    let dx = to.x - from.x;
    let dy = to.y - from.y;
    if dx == 0.0 && dy == 0.0 {
        return;
    }

    let res = map.resolution();
    let step_x: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_y: i64 = if dy > 0.0 { 1 } else { -1 };
    // Segment parameter t at which the ray crosses the next cell border on
    // each axis, and the t-increment per whole cell.
    let next_border_x = map.origin().x + (cx as f64 + if dx > 0.0 { 1.0 } else { 0.0 }) * res;
    let next_border_y = map.origin().y + (cy as f64 + if dy > 0.0 { 1.0 } else { 0.0 }) * res;
    let mut t_max_x = if dx != 0.0 {
        (next_border_x - from.x) / dx
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if dy != 0.0 {
        (next_border_y - from.y) / dy
    } else {
        f64::INFINITY
    };
    let t_delta_x = if dx != 0.0 {
        (res / dx).abs()
    } else {
        f64::INFINITY
    };
    let t_delta_y = if dy != 0.0 {
        (res / dy).abs()
    } else {
        f64::INFINITY
    };

    loop {
        if cx as usize == ex && cy as usize == ey {
            return;
        }
        let t;
        if t_max_x < t_max_y {
            t = t_max_x;
            t_max_x += t_delta_x;
            cx = (cx as i64 + step_x).max(0) as usize;
        } else {
            t = t_max_y;
            t_max_y += t_delta_y;
            cy = (cy as i64 + step_y).max(0) as usize;
        }
        if t > 1.0 || cx >= map.width() || cy >= map.height() {
            return;
        }
        if !visit(cx, cy, t) {
            return;
        }
    }
}

/// Cast a ray between two world points. Blocked iff an occupied cell lies
/// strictly between the endpoints (the endpoint cells themselves never
/// block); unknown cells do not block.
pub fn raycast(map: &OccupancyGrid, from: Point2, to: Point2) -> Result<RaycastResult, GridError> {
    if !map.contains(from) {
        return Err(GridError::OutOfBounds { x: from.x, y: from.y });
    }
    if !map.contains(to) {
        return Err(GridError::OutOfBounds { x: to.x, y: to.y });
    }
    let (sx, sy) = map.cell_of(from).unwrap();
    let (ex, ey) = map.cell_of(to).unwrap();
    let mut hit: Option<Point2> = None;
    traverse_cells(map, from, to, |cx, cy, t| {
        if (cx, cy) == (sx, sy) || (cx, cy) == (ex, ey) {
            return true;
        }
        if map.cell(cx, cy) == CellState::Occupied {
            hit = Some(Point2::new(from.x + t * (to.x - from.x), from.y + t * (to.y - from.y)));
            return false;
        }
        true
    });
    Ok(match hit {
        Some(p) => RaycastResult::Blocked(p),
        None => RaycastResult::Clear,
    })
}

/// True iff `point` lies inside the sensing cone of a robot at `pose` and
/// line of sight is not occluded by an occupied cell.
pub fn is_inside_fov(
    pose: &RobotPose,
    point: Point2,
    sensor: &SensorConfig,
    map: &OccupancyGrid,
) -> Result<bool, GridError> {
    let origin = Point2::new(pose.x, pose.y);
    let range = origin.distance(point);
    if range > sensor.max_range {
        return Ok(false);
    }
    if range > 0.0 {
        let bearing = angle_diff((point.y - pose.y).atan2(point.x - pose.x), pose.theta);
        if bearing.abs() > sensor.half_angle {
            return Ok(false);
        }
    }
    Ok(raycast(map, origin, point)? == RaycastResult::Clear)
}

/// Update the robot's known map by sweeping a fan of lidar rays against the
/// ground-truth map. Cells crossed before the first occupied truth cell
/// become free, the hit cell becomes occupied, everything else is kept.
pub fn update_map(
    known: &OccupancyGrid,
    pose: &RobotPose,
    lidar: &SensorConfig,
    truth: &OccupancyGrid,
) -> Result<OccupancyGrid, GridError> {
    if !known.same_geometry(truth) {
        return Err(GridError::GeometryMismatch);
    }
    let mut out = known.clone();
    let origin = Point2::new(pose.x, pose.y);
    if !truth.contains(origin) {
        return Err(GridError::OutOfBounds { x: pose.x, y: pose.y });
    }
    // Angular step fine enough that adjacent rays are less than one cell
    // apart at maximum range.
    let step = (truth.resolution() / lidar.max_range).min(lidar.half_angle);
    let n_rays = (2.0 * lidar.half_angle / step).ceil() as usize + 1;
    let (lo, hi) = truth.bounds();
    let eps = truth.resolution() * 1e-6;
    for i in 0..n_rays {
        let ang = pose.theta - lidar.half_angle
            + (i as f64 / (n_rays - 1).max(1) as f64) * 2.0 * lidar.half_angle;
        let tip = Point2::new(
            (pose.x + lidar.max_range * ang.cos()).clamp(lo.x + eps, hi.x - eps),
            (pose.y + lidar.max_range * ang.sin()).clamp(lo.y + eps, hi.y - eps),
        );
        traverse_cells(truth, origin, tip, |cx, cy, _t| {
            if truth.cell(cx, cy) == CellState::Occupied {
                out.set_cell(cx, cy, CellState::Occupied);
                false
            } else {
                out.set_cell(cx, cy, CellState::Free);
                true
            }
        });
    }
    Ok(out)
}
