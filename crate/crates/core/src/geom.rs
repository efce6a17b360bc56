//! Layout geometry: rectangles, orientation transforms, flattening of placed
//! cells, a uniform-grid spatial index and parallel-run extraction.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abut::{Orientation, Placement};
use crate::libio::{CellLibrary, Mask};

/// Axis-aligned rectangle in database units. Corners are kept normalized
/// (`x1 < x2`, `y1 < y2`) by every constructor in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rect {
    pub x1: i64,
    pub y1: i64,
    pub x2: i64,
    pub y2: i64,
}

impl Rect {
    pub const fn new(x1: i64, y1: i64, x2: i64, y2: i64) -> Self {
        Rect { x1, y1, x2, y2 }
    }

    /// Builds a rectangle from two arbitrary corners.
    pub fn from_corners(ax: i64, ay: i64, bx: i64, by: i64) -> Self {
        Rect {
            x1: ax.min(bx),
            y1: ay.min(by),
            x2: ax.max(bx),
            y2: ay.max(by),
        }
    }

    pub fn width(&self) -> i64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> i64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> i64 {
        self.width() * self.height()
    }

    pub fn short_side(&self) -> i64 {
        self.width().min(self.height())
    }

    pub fn is_valid(&self) -> bool {
        self.x1 < self.x2 && self.y1 < self.y2
    }

    /// Closed-set intersection: rectangles sharing only an edge or a corner
    /// intersect.
    pub fn intersects(&self, other: &Rect) -> bool {
        self.x1 <= other.x2 && other.x1 <= self.x2 && self.y1 <= other.y2 && other.y1 <= self.y2
    }

    pub fn contains(&self, other: &Rect) -> bool {
        self.x1 <= other.x1 && self.y1 <= other.y1 && other.x2 <= self.x2 && other.y2 <= self.y2
    }

    pub fn union(&self, other: &Rect) -> Rect {
        Rect {
            x1: self.x1.min(other.x1),
            y1: self.y1.min(other.y1),
            x2: self.x2.max(other.x2),
            y2: self.y2.max(other.y2),
        }
    }

    pub fn expand(&self, by: i64) -> Rect {
        Rect {
            x1: self.x1 - by,
            y1: self.y1 - by,
            x2: self.x2 + by,
            y2: self.y2 + by,
        }
    }

    pub fn translate(&self, dx: i64, dy: i64) -> Rect {
        Rect {
            x1: self.x1 + dx,
            y1: self.y1 + dy,
            x2: self.x2 + dx,
            y2: self.y2 + dy,
        }
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {}) ({} {})", self.x1, self.y1, self.x2, self.y2)
    }
}

/// Maps a rectangle given in cell-local coordinates into die coordinates.
///
/// `origin` is the lower-left corner of the placed cell bounding box, which
/// is how DEF interprets `PLACED ( x y ) <orient>`.
pub fn transform_rect(
    rect: &Rect,
    cell_w: i64,
    cell_h: i64,
    orientation: Orientation,
    origin: (i64, i64),
) -> Rect {
    let (mirror_x, mirror_y) = match orientation {
        Orientation::R0 => (false, false),
        Orientation::MY => (true, false),
        Orientation::MX => (false, true),
        Orientation::R180 => (true, true),
    };
    let (x1, x2) = if mirror_x {
        (cell_w - rect.x2, cell_w - rect.x1)
    } else {
        (rect.x1, rect.x2)
    };
    let (y1, y2) = if mirror_y {
        (cell_h - rect.y2, cell_h - rect.y1)
    } else {
        (rect.y1, rect.y2)
    };
    Rect::from_corners(x1, y1, x2, y2).translate(origin.0, origin.1)
}

pub type ShapeId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlatShape {
    pub id: ShapeId,
    /// Index into [`FlatLayout::layers`].
    pub layer: u16,
    pub mask: Mask,
    pub rect: Rect,
    /// Index into [`FlatLayout::instances`].
    pub instance: u32,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeomError {
    #[error("placement {instance} references unknown cell {cell}")]
    UnknownCellRef { instance: String, cell: String },
    #[error("shape of {instance} at {rect} falls outside the die area {die}")]
    OutsideDie {
        instance: String,
        rect: Rect,
        die: Rect,
    },
    #[error("more than {} distinct layers", u16::MAX)]
    TooManyLayers,
}

/// Uniform grid over shape bounding boxes. Each shape is registered in every
/// bin it touches.
#[derive(Debug, Clone)]
pub struct GridIndex {
    bin: i64,
    bins: HashMap<(i64, i64), Vec<ShapeId>>,
}

impl GridIndex {
    pub fn new(bin: i64) -> Self {
        GridIndex {
            bin: bin.max(1),
            bins: HashMap::new(),
        }
    }

    fn key_range(&self, r: &Rect) -> (i64, i64, i64, i64) {
        (
            r.x1.div_euclid(self.bin),
            r.y1.div_euclid(self.bin),
            r.x2.div_euclid(self.bin),
            r.y2.div_euclid(self.bin),
        )
    }

    pub fn insert(&mut self, id: ShapeId, rect: &Rect) {
        let (bx1, by1, bx2, by2) = self.key_range(rect);
        for bx in bx1..=bx2 {
            for by in by1..=by2 {
                self.bins.entry((bx, by)).or_default().push(id);
            }
        }
    }

    /// Candidate ids whose bins touch `window`, sorted and deduplicated.
    pub fn candidates(&self, window: &Rect) -> Vec<ShapeId> {
        let (bx1, by1, bx2, by2) = self.key_range(window);
        let mut out = Vec::new();
        let span = (bx2 - bx1 + 1).saturating_mul(by2 - by1 + 1);
        if span as usize > self.bins.len() {
            // Window covers more bins than exist; walk the populated ones.
            for (&(bx, by), ids) in &self.bins {
                if bx >= bx1 && bx <= bx2 && by >= by1 && by <= by2 {
                    out.extend_from_slice(ids);
                }
            }
        } else {
            for bx in bx1..=bx2 {
                for by in by1..=by2 {
                    if let Some(ids) = self.bins.get(&(bx, by)) {
                        out.extend_from_slice(ids);
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Flattened, die-level view of a placed testcase.
#[derive(Debug, Clone)]
pub struct FlatLayout {
    pub die: Rect,
    pub layers: Vec<String>,
    pub shapes: Vec<FlatShape>,
    pub instances: Vec<String>,
    index: Vec<GridIndex>,
    bin: i64,
}

impl FlatLayout {
    /// Builds a layout directly from shapes, mostly for tests and synthetic
    /// inputs. Shape ids are reassigned to their position.
    pub fn from_shapes(
        die: Rect,
        layers: Vec<String>,
        instances: Vec<String>,
        mut shapes: Vec<FlatShape>,
        bin: i64,
    ) -> Self {
        for (i, s) in shapes.iter_mut().enumerate() {
            s.id = i as ShapeId;
        }
        let mut index = vec![GridIndex::new(bin); layers.len()];
        for s in &shapes {
            index[s.layer as usize].insert(s.id, &s.rect);
        }
        FlatLayout {
            die,
            layers,
            shapes,
            instances,
            index,
            bin,
        }
    }

    pub fn bin_size(&self) -> i64 {
        self.bin
    }

    pub fn layer_id(&self, name: &str) -> Option<u16> {
        self.layers.iter().position(|l| l == name).map(|i| i as u16)
    }

    pub fn layer_name(&self, id: u16) -> &str {
        &self.layers[id as usize]
    }

    pub fn shape(&self, id: ShapeId) -> &FlatShape {
        &self.shapes[id as usize]
    }

    pub fn shapes_on(&self, layer: u16) -> impl Iterator<Item = &FlatShape> {
        self.shapes.iter().filter(move |s| s.layer == layer)
    }

    /// Ids of all shapes (any layer) intersecting `window`, ascending.
    pub fn query_window(&self, window: &Rect) -> Vec<ShapeId> {
        let mut out: Vec<ShapeId> = (0..self.layers.len() as u16)
            .flat_map(|l| self.query_layer(l, window))
            .collect();
        out.sort_unstable();
        out
    }

    /// Ids of shapes on `layer` intersecting `window`, ascending.
    pub fn query_layer(&self, layer: u16, window: &Rect) -> Vec<ShapeId> {
        let Some(grid) = self.index.get(layer as usize) else {
            return Vec::new();
        };
        grid.candidates(window)
            .into_iter()
            .filter(|&id| self.shapes[id as usize].rect.intersects(window))
            .collect()
    }

    /// Copy of this layout with the masks replaced. Geometry and the index
    /// are shared unchanged.
    pub fn with_masks(&self, masks: impl Fn(&FlatShape) -> Mask) -> FlatLayout {
        let mut next = self.clone();
        for s in &mut next.shapes {
            s.mask = masks(s);
        }
        next
    }
}

/// Flattens `placements` against the library geometry. Shape ids follow
/// placement order, then the cell's own shape order.
pub fn flatten(
    library: &CellLibrary,
    placements: &[Placement],
    die: Rect,
    bin: i64,
) -> Result<FlatLayout, GeomError> {
    let by_name: HashMap<&str, usize> = library
        .cells
        .iter()
        .enumerate()
        .map(|(i, c)| (c.name.as_str(), i))
        .collect();
    let mut layers: Vec<String> = Vec::new();
    let mut layer_ids: HashMap<String, u16> = HashMap::new();
    let mut shapes = Vec::new();
    let mut instances = Vec::with_capacity(placements.len());
    for (inst_idx, p) in placements.iter().enumerate() {
        let cell = by_name
            .get(p.cell.as_str())
            .map(|&i| &library.cells[i])
            .ok_or_else(|| GeomError::UnknownCellRef {
                instance: p.name.clone(),
                cell: p.cell.clone(),
            })?;
        instances.push(p.name.clone());
        for s in &cell.shapes {
            let layer = match layer_ids.get(&s.layer) {
                Some(&id) => id,
                None => {
                    let id = u16::try_from(layers.len()).map_err(|_| GeomError::TooManyLayers)?;
                    layers.push(s.layer.clone());
                    layer_ids.insert(s.layer.clone(), id);
                    id
                }
            };
            let rect = transform_rect(&s.rect, cell.width, cell.height, p.orientation, p.origin);
            if !die.contains(&rect) {
                return Err(GeomError::OutsideDie {
                    instance: p.name.clone(),
                    rect,
                    die,
                });
            }
            shapes.push(FlatShape {
                id: 0,
                layer,
                mask: s.mask,
                rect,
                instance: inst_idx as u32,
            });
        }
    }
    Ok(FlatLayout::from_shapes(die, layers, instances, shapes, bin))
}

/// Direction in which two facing shapes are separated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum RunAxis {
    /// Side by side: the gap is measured along x, the run along y.
    Horizontal,
    /// Stacked: the gap is measured along y, the run along x.
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ParallelRun {
    pub a: ShapeId,
    pub b: ShapeId,
    pub spacing: i64,
    pub run_length: i64,
    pub axis: RunAxis,
}

/// Facing relation between two rectangles, if any.
///
/// Overlapping rectangles report spacing 0 along the axis of the smaller
/// overlap. Corner-only proximity has no positive run and yields `None`.
pub fn facing(a: &Rect, b: &Rect) -> Option<(i64, i64, RunAxis)> {
    let x_overlap = a.x2.min(b.x2) - a.x1.max(b.x1);
    let y_overlap = a.y2.min(b.y2) - a.y1.max(b.y1);
    match (x_overlap > 0, y_overlap > 0) {
        (true, true) => {
            if y_overlap <= x_overlap {
                Some((0, y_overlap, RunAxis::Horizontal))
            } else {
                Some((0, x_overlap, RunAxis::Vertical))
            }
        }
        (false, true) => Some((-x_overlap, y_overlap, RunAxis::Horizontal)),
        (true, false) => Some((-y_overlap, x_overlap, RunAxis::Vertical)),
        (false, false) => None,
    }
}

/// All same-layer pairs with facing parallel edges at `spacing <= max_spacing`
/// and positive projected overlap, each pair once with `a < b`.
pub fn parallel_runs(layout: &FlatLayout, layer: u16, max_spacing: i64) -> Vec<ParallelRun> {
    let mut runs = Vec::new();
    for s in layout.shapes_on(layer) {
        let window = s.rect.expand(max_spacing);
        for other in layout.query_layer(layer, &window) {
            if other <= s.id {
                continue;
            }
            let o = &layout.shapes[other as usize];
            if let Some((spacing, run_length, axis)) = facing(&s.rect, &o.rect) {
                if spacing <= max_spacing {
                    runs.push(ParallelRun {
                        a: s.id,
                        b: other,
                        spacing,
                        run_length,
                        axis,
                    });
                }
            }
        }
    }
    runs
}
