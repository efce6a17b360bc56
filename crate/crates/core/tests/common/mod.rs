//! Independent reference implementations used to check the library, plus
//! random input generators. Nothing here calls the code it checks.

#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use seamcheck::abut::{Orientation, Side, Topology};
use seamcheck::emitio::DefDesign;
use seamcheck::geom::{FlatLayout, FlatShape, ParallelRun, Rect, RunAxis, ShapeId};
use seamcheck::libio::{CellLibrary, CellProfile, ColoredRect, Mask};

pub const RH: i64 = 576;
pub const SITE: i64 = 50;

/// 2^n search for a proper two-coloring.
pub fn brute_two_colorable(n: usize, edges: &[(u32, u32)]) -> bool {
    (0u32..1 << n).any(|bits| {
        edges
            .iter()
            .all(|&(a, b)| a == b || (bits >> a & 1) != (bits >> b & 1))
    })
}

/// Closed-set rectangle intersection, written out longhand.
pub fn touches(a: &Rect, b: &Rect) -> bool {
    !(a.x2 < b.x1 || b.x2 < a.x1 || a.y2 < b.y1 || b.y2 < a.y1)
}

pub fn scan_query(layout: &FlatLayout, layer: u16, window: &Rect) -> Vec<ShapeId> {
    layout
        .shapes
        .iter()
        .filter(|s| s.layer == layer && touches(&s.rect, window))
        .map(|s| s.id)
        .collect()
}

/// O(n^2) parallel-run scan.
pub fn scan_runs(layout: &FlatLayout, layer: u16, max_spacing: i64) -> Vec<ParallelRun> {
    let shapes: Vec<&FlatShape> = layout.shapes.iter().filter(|s| s.layer == layer).collect();
    let mut out = Vec::new();
    for (i, a) in shapes.iter().enumerate() {
        for b in &shapes[i + 1..] {
            let (ra, rb) = (a.rect, b.rect);
            let xo = ra.x2.min(rb.x2) - ra.x1.max(rb.x1);
            let yo = ra.y2.min(rb.y2) - ra.y1.max(rb.y1);
            let found = if xo > 0 && yo > 0 {
                // Overlap: spacing 0, measured across the thinner overlap.
                Some(if yo <= xo { (0, yo, RunAxis::Horizontal) } else { (0, xo, RunAxis::Vertical) })
            } else if yo > 0 {
                let gap = (rb.x1 - ra.x2).max(ra.x1 - rb.x2);
                Some((gap, yo, RunAxis::Horizontal))
            } else if xo > 0 {
                let gap = (rb.y1 - ra.y2).max(ra.y1 - rb.y2);
                Some((gap, xo, RunAxis::Vertical))
            } else {
                None
            };
            if let Some((spacing, run_length, axis)) = found {
                if spacing <= max_spacing {
                    let (lo, hi) = if a.id < b.id { (a.id, b.id) } else { (b.id, a.id) };
                    out.push(ParallelRun {
                        a: lo,
                        b: hi,
                        spacing,
                        run_length,
                        axis,
                    });
                }
            }
        }
    }
    out.sort();
    out
}

/// Reference orientation transform: explicit reflections about the cell's
/// centre lines, then translation.
pub fn ref_transform(r: &Rect, w: i64, h: i64, o: Orientation, origin: (i64, i64)) -> Rect {
    let fx = |x: i64| w - x;
    let fy = |y: i64| h - y;
    let (x1, y1, x2, y2) = match o {
        Orientation::R0 => (r.x1, r.y1, r.x2, r.y2),
        Orientation::MY => (fx(r.x2), r.y1, fx(r.x1), r.y2),
        Orientation::MX => (r.x1, fy(r.y2), r.x2, fy(r.y1)),
        Orientation::R180 => (fx(r.x2), fy(r.y2), fx(r.x1), fy(r.y1)),
    };
    Rect::new(x1 + origin.0, y1 + origin.1, x2 + origin.0, y2 + origin.1)
}

fn ref_mirror_y(o: Orientation) -> Orientation {
    match o {
        Orientation::R0 => Orientation::MY,
        Orientation::MY => Orientation::R0,
        Orientation::MX => Orientation::R180,
        Orientation::R180 => Orientation::MX,
    }
}

fn ref_flip_v(o: Orientation) -> Orientation {
    match o {
        Orientation::R0 => Orientation::MX,
        Orientation::MX => Orientation::R0,
        Orientation::MY => Orientation::R180,
        Orientation::R180 => Orientation::MY,
    }
}

/// A mirror class as the sorted pair {t, mirror(t)}.
pub type Class = (Topology, Topology);

pub fn class_of(t: &Topology) -> Class {
    let m = |s: &Side| Side {
        cell: s.cell.clone(),
        orientation: ref_mirror_y(s.orientation),
        row: s.row,
    };
    let mirrored = (m(&t.1), m(&t.0));
    if mirrored < *t {
        (mirrored, t.clone())
    } else {
        (t.clone(), mirrored)
    }
}

fn side(cell: &str, o: Orientation, row: u32) -> Side {
    Side {
        cell: cell.to_string(),
        orientation: o,
        row,
    }
}

/// Every neighbour relation a full abutment testbench covers, by brute
/// force over ordered cell pairs and orientations.
pub fn brute_classes(lib: &CellLibrary) -> BTreeSet<Class> {
    use Orientation::*;
    let even = [R0, MY];
    let odd = [MX, R180];
    let mut out = BTreeSet::new();
    for x in &lib.cells {
        for y in &lib.cells {
            let (xs, ys) = (x.height_rows == 1, y.height_rows == 1);
            if x.name == y.name || (xs && ys) {
                for o1 in even {
                    for o2 in even {
                        out.insert(class_of(&(side(&x.name, o1, 0), side(&y.name, o2, 0))));
                    }
                }
            } else if !xs && ys {
                for r in 0..x.height_rows {
                    let legal = if r % 2 == 0 { even } else { odd };
                    for ox in even {
                        for oy in legal {
                            out.insert(class_of(&(side(&x.name, ox, r), side(&y.name, oy, 0))));
                            out.insert(class_of(&(side(&y.name, oy, 0), side(&x.name, ox, r))));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Neighbour relations found geometrically in a placed design: two
/// instances abut when one's right edge is the other's left edge and they
/// share a row.
pub fn realized_classes(lib: &CellLibrary, def: &DefDesign) -> BTreeSet<Class> {
    let cell = |name: &str| lib.cells.iter().find(|c| c.name == name).expect("known cell");
    let mut out = BTreeSet::new();
    let mut by_left: std::collections::HashMap<i64, Vec<usize>> = Default::default();
    for (i, p) in def.components.iter().enumerate() {
        by_left.entry(p.origin.0).or_default().push(i);
    }
    for p in &def.components {
        let pc = cell(&p.cell);
        let right = p.origin.0 + pc.width;
        for &qi in by_left.get(&right).into_iter().flatten() {
            let q = &def.components[qi];
            let qc = cell(&q.cell);
            let (p0, p1) = (p.origin.1 / RH, p.origin.1 / RH + pc.height_rows as i64);
            let (q0, q1) = (q.origin.1 / RH, q.origin.1 / RH + qc.height_rows as i64);
            for row in p0.max(q0)..p1.min(q1) {
                let rp = if pc.height_rows > 1 { (row - p0) as u32 } else { 0 };
                let rq = if qc.height_rows > 1 { (row - q0) as u32 } else { 0 };
                let (mut op, mut oq) = (p.orientation, q.orientation);
                if pc.height_rows == 1 && qc.height_rows == 1 && row % 2 == 1 {
                    op = ref_flip_v(op);
                    oq = ref_flip_v(oq);
                }
                out.insert(class_of(&(side(&p.cell, op, rp), side(&q.cell, oq, rq))));
            }
        }
    }
    out
}

pub fn bare_cell(name: &str, width: i64, rows: u32) -> CellProfile {
    CellProfile {
        name: name.to_string(),
        width,
        height: RH * rows as i64,
        height_rows: rows,
        pins: vec![],
        shapes: vec![ColoredRect::new("M1", Mask::Mask1, Rect::new(0, 0, width, 40))],
    }
}

/// Random library of `n` cells, about one in five multi-height.
pub fn random_library(rng: &mut impl Rng, n: usize, allow_multi: bool) -> CellLibrary {
    let cells = (0..n)
        .map(|i| {
            let rows = if allow_multi && rng.gen_ratio(1, 5) { rng.gen_range(2..=3) } else { 1 };
            bare_cell(&format!("C{i}"), SITE * rng.gen_range(2..=12), rows)
        })
        .collect();
    CellLibrary {
        name: "rand".into(),
        row_height: RH,
        site_width: SITE,
        cells,
    }
}

pub fn random_rect(rng: &mut impl Rng, span: i64, max_side: i64) -> Rect {
    let x = rng.gen_range(-span..span);
    let y = rng.gen_range(-span..span);
    Rect::new(x, y, x + rng.gen_range(1..=max_side), y + rng.gen_range(1..=max_side))
}

pub fn random_layout(rng: &mut impl Rng, n: usize, layers: usize, span: i64, max_side: i64, bin: i64) -> FlatLayout {
    let shapes = (0..n)
        .map(|_| FlatShape {
            id: 0,
            layer: rng.gen_range(0..layers) as u16,
            mask: match rng.gen_range(0..3) {
                0 => Mask::None,
                1 => Mask::Mask1,
                _ => Mask::Mask2,
            },
            rect: random_rect(rng, span, max_side),
            instance: 0,
        })
        .collect();
    let names = (0..layers).map(|i| format!("M{}", i + 1)).collect();
    FlatLayout::from_shapes(Rect::new(-span, -span, span + max_side, span + max_side), names, vec!["u".into()], shapes, bin)
}
