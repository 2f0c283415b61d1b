//! Regenerates the map files shipped under `maps/`. Run from the repo
//! root:
//!
//! ```text
//! cargo run -p sat-sim --example gen_maps
//! ```

use sat_core::env::{CellState, OccupancyGrid};
use sat_core::geom::Point2;

fn ring(map: &mut OccupancyGrid) {
    let (w, h) = (map.width(), map.height());
    for c in 0..w {
        map.set_cell(c, 0, CellState::Occupied);
        map.set_cell(c, h - 1, CellState::Occupied);
    }
    for r in 0..h {
        map.set_cell(0, r, CellState::Occupied);
        map.set_cell(w - 1, r, CellState::Occupied);
    }
}

fn hwall(map: &mut OccupancyGrid, row: usize, c0: usize, c1: usize, gaps: &[(usize, usize)]) {
    for c in c0..=c1 {
        if gaps.iter().any(|(g0, g1)| c >= *g0 && c <= *g1) {
            continue;
        }
        map.set_cell(c, row, CellState::Occupied);
    }
}

fn vwall(map: &mut OccupancyGrid, col: usize, r0: usize, r1: usize, gaps: &[(usize, usize)]) {
    for r in r0..=r1 {
        if gaps.iter().any(|(g0, g1)| r >= *g0 && r <= *g1) {
            continue;
        }
        map.set_cell(col, r, CellState::Occupied);
    }
}

fn block(map: &mut OccupancyGrid, c0: usize, r0: usize, w: usize, h: usize) {
    for r in r0..r0 + h {
        for c in c0..c0 + w {
            map.set_cell(c, r, CellState::Occupied);
        }
    }
}

/// 50 x 50 m rooms-and-corridors layout.
fn structured() -> OccupancyGrid {
    let mut m = OccupancyGrid::new(100, 100, 0.5, Point2::new(0.0, 0.0), CellState::Free);
    ring(&mut m);
    // Two horizontal and two vertical walls with door gaps.
    hwall(&mut m, 33, 1, 65, &[(18, 24), (48, 54)]);
    hwall(&mut m, 66, 34, 98, &[(56, 62), (84, 90)]);
    vwall(&mut m, 33, 34, 98, &[(48, 54), (78, 84)]);
    vwall(&mut m, 66, 1, 33, &[(12, 18)]);
    // Pillars.
    block(&mut m, 14, 78, 6, 6);
    block(&mut m, 78, 14, 6, 6);
    block(&mut m, 50, 45, 5, 5);
    block(&mut m, 80, 78, 5, 5);
    m
}

/// 50 x 50 m scatter of irregular blobs, reproducible via a fixed LCG.
fn unstructured() -> OccupancyGrid {
    let mut m = OccupancyGrid::new(100, 100, 0.5, Point2::new(0.0, 0.0), CellState::Free);
    ring(&mut m);
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut next = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 33) as f64) / (u32::MAX as f64)
    };
    for _ in 0..26 {
        let cx = 6.0 + next() * 38.0;
        let cy = 6.0 + next() * 38.0;
        let r = 0.8 + next() * 1.8;
        // Keep the conventional start areas near (5, 5) and (45, 45) open.
        if (cx - 5.0).hypot(cy - 5.0) < 5.0 || (cx - 45.0).hypot(cy - 45.0) < 5.0 {
            continue;
        }
        let r_cells = (r / 0.5).ceil() as i64;
        let (gx, gy) = ((cx / 0.5) as i64, (cy / 0.5) as i64);
        for dy in -r_cells..=r_cells {
            for dx in -r_cells..=r_cells {
                let (x, y) = (gx + dx, gy + dy);
                if x <= 0 || y <= 0 || x >= 99 || y >= 99 {
                    continue;
                }
                let d = ((dx * dx + dy * dy) as f64).sqrt() * 0.5;
                if d <= r {
                    m.set_cell(x as usize, y as usize, CellState::Occupied);
                }
            }
        }
    }
    m
}

/// 24 x 24 m four-room layout for the corner-search ablations.
fn corners() -> OccupancyGrid {
    let mut m = OccupancyGrid::new(48, 48, 0.5, Point2::new(0.0, 0.0), CellState::Free);
    ring(&mut m);
    hwall(&mut m, 24, 1, 46, &[(20, 27)]);
    vwall(&mut m, 24, 1, 46, &[(20, 27)]);
    m
}

/// 50 x 50 m empty box for tracking-only runs.
fn open_box() -> OccupancyGrid {
    let mut m = OccupancyGrid::new(100, 100, 0.5, Point2::new(0.0, 0.0), CellState::Free);
    ring(&mut m);
    m
}

fn main() -> std::io::Result<()> {
    std::fs::create_dir_all("maps")?;
    for (name, map) in [
        ("structured", structured()),
        ("unstructured", unstructured()),
        ("corners", corners()),
        ("open", open_box()),
    ] {
        let path = format!("maps/{name}.map");
        std::fs::write(&path, map.to_text())?;
        println!(
            "{path}: {}x{} cells, {} occupied",
            map.width(),
            map.height(),
            map.count(CellState::Occupied)
        );
    }
    Ok(())
}
