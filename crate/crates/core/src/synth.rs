//! Synthetic cell libraries with known abutment behaviour, used by the
//! demo, the shipped fixtures and the test suites.
//!
//! All cells share one frame: 576 DBU rows, a 50 DBU site, 40 DBU M1 rails
//! at the bottom and top of every row (mask 1) and vertical 32 DBU M1 wires
//! from y = 120 to 456 within each row.

use crate::geom::Rect;
use crate::libio::{CellLibrary, CellProfile, ColoredRect, Mask, PinDef};

pub const ROW_HEIGHT: i64 = 576;
pub const SITE_WIDTH: i64 = 50;
pub const WIRE_WIDTH: i64 = 32;
const RAIL: i64 = 40;
const WIRE_Y: (i64, i64) = (120, 456);
/// Distance from a clean cell's outline to its nearest wire.
pub const CLEAN_MARGIN: i64 = 45;
const CLEAN_PITCH: i64 = 88;

/// Rule deck matching the synthetic frame. Same-mask spacing is 64, so the
/// 56 DBU in-cell wire gaps require alternating masks; the bridging pattern
/// flags four alternating lines at 64..=80 DBU gaps.
pub const RULES_TOML: &str = r#"row_height = 576
site_width = 50
interaction_distance = 128

[[layer]]
name = "M1"
min_width = 32
spacing_any_mask = 32
spacing_same_mask = 64
dpt = true

[[pattern]]
name = "M1_BRIDGE4"
layer = "M1"
masks = [1, 2, 1, 2]
min_gap = 64
max_gap = 80
min_run_length = 200
"#;

fn m1(mask: Mask, x1: i64, y1: i64, x2: i64, y2: i64) -> ColoredRect {
    ColoredRect::new("M1", mask, Rect::new(x1, y1, x2, y2))
}

fn rails(width: i64, rows: u32) -> Vec<ColoredRect> {
    let mut out = vec![m1(Mask::Mask1, 0, 0, width, RAIL / 2 * 2)];
    for r in 1..rows as i64 {
        let y = r * ROW_HEIGHT;
        out.push(m1(Mask::Mask1, 0, y - RAIL / 2, width, y + RAIL / 2));
    }
    let top = rows as i64 * ROW_HEIGHT;
    out.push(m1(Mask::Mask1, 0, top - RAIL, width, top));
    out
}

/// Wire span of row `row` inside a cell, flipped on odd rows.
fn wire_y(row: u32) -> (i64, i64) {
    let base = row as i64 * ROW_HEIGHT;
    if row.is_multiple_of(2) {
        (base + WIRE_Y.0, base + WIRE_Y.1)
    } else {
        (base + ROW_HEIGHT - WIRE_Y.1, base + ROW_HEIGHT - WIRE_Y.0)
    }
}

fn cell(name: &str, width: i64, rows: u32, shapes: Vec<ColoredRect>, pins: Vec<PinDef>) -> CellProfile {
    CellProfile {
        name: name.to_string(),
        width,
        height: rows as i64 * ROW_HEIGHT,
        height_rows: rows,
        pins,
        shapes,
    }
}

/// A cell whose wires keep at least [`CLEAN_MARGIN`] from the outline and
/// alternate masks inside each row. Clean in any abutment under both
/// coloring options.
pub fn clean_cell(name: &str, width: i64, rows: u32) -> CellProfile {
    let mut shapes = rails(width, rows);
    let mut pins = Vec::new();
    for row in 0..rows {
        let (y1, y2) = wire_y(row);
        let mut x = CLEAN_MARGIN;
        let mut mask = Mask::Mask1;
        while x + WIRE_WIDTH <= width - CLEAN_MARGIN {
            shapes.push(m1(mask, x, y1, x + WIRE_WIDTH, y2));
            if row == 0 && pins.len() < 2 {
                let pname = if pins.is_empty() { "A" } else { "Y" };
                pins.push(PinDef {
                    name: pname.to_string(),
                    rects: vec![m1(Mask::None, x, y1, x + WIRE_WIDTH, y2)],
                });
            }
            mask = mask.opposite();
            x += CLEAN_PITCH;
        }
    }
    cell(name, width, rows, shapes, pins)
}

/// Wires 24 DBU inside both edges, both on mask 1: every seam puts two
/// mask-1 wires 48 DBU apart.
pub fn same_mask_edge_cell(name: &str) -> CellProfile {
    let w = 200;
    let (y1, y2) = wire_y(0);
    let mut shapes = rails(w, 1);
    shapes.push(m1(Mask::Mask1, 24, y1, 56, y2));
    shapes.push(m1(Mask::Mask1, w - 56, y1, w - 24, y2));
    cell(name, w, 1, shapes, Vec::new())
}

/// Two lines near each edge at 70 DBU gaps: `1 2` on the left, `1 2` on the
/// right. Only the R0|R0 seam lines up `1 2 1 2` at 70 DBU.
pub fn bridge_edge_cell(name: &str) -> CellProfile {
    let w = 450;
    let (y1, y2) = wire_y(0);
    let mut shapes = rails(w, 1);
    shapes.push(m1(Mask::Mask1, 35, y1, 67, y2));
    shapes.push(m1(Mask::Mask2, 137, y1, 169, y2));
    shapes.push(m1(Mask::Mask1, 281, y1, 313, y2));
    shapes.push(m1(Mask::Mask2, 383, y1, 415, y2));
    cell(name, w, 1, shapes, Vec::new())
}

/// Right edge carries a short wire with a bar stacked above it; the tall
/// left-edge wire of the next R0 instance faces both, closing a triangle of
/// same-mask conflicts that no recoloring can fix.
pub fn odd_cycle_cell(name: &str) -> CellProfile {
    let w = 200;
    let mut shapes = rails(w, 1);
    shapes.push(m1(Mask::Mask1, 24, 120, 56, 420));
    shapes.push(m1(Mask::Mask2, 144, 120, 176, 300));
    shapes.push(m1(Mask::Mask1, 144, 340, 176, 372));
    cell(name, w, 1, shapes, Vec::new())
}

fn library(name: &str, cells: Vec<CellProfile>) -> CellLibrary {
    CellLibrary {
        name: name.to_string(),
        row_height: ROW_HEIGHT,
        site_width: SITE_WIDTH,
        cells,
    }
}

/// `n` clean single-height cells with widths cycling through 4..=9 sites.
pub fn uniform_library(name: &str, n: usize) -> CellLibrary {
    let cells = (0..n)
        .map(|i| clean_cell(&format!("C{i:04}"), SITE_WIDTH * (4 + (i % 6) as i64), 1))
        .collect();
    library(name, cells)
}

/// Clean library with one double-height cell.
pub fn clean_library() -> CellLibrary {
    library(
        "clean",
        vec![
            clean_cell("INV", 200, 1),
            clean_cell("NAND2", 300, 1),
            clean_cell("LS", 300, 2),
        ],
    )
}

/// Library whose drawn masks conflict only across seams.
pub fn seam_conflict_library() -> CellLibrary {
    library(
        "seam_conflict",
        vec![
            clean_cell("INV", 250, 1),
            same_mask_edge_cell("EDGE1"),
            bridge_edge_cell("BRIDGE"),
            clean_cell("LS", 300, 2),
        ],
    )
}

/// Library with a seam conflict that forms an odd cycle.
pub fn odd_cycle_library() -> CellLibrary {
    library("odd_cycle", vec![odd_cycle_cell("TRI")])
}
