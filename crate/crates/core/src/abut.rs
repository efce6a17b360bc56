//! Reduced enumeration of side-to-side abutment testcases.
//!
//! Every cell gets one A-A row `[MY, R0, R0, MY]` whose three seams realize
//! the three mirror classes of an identical pair. Every unordered pair of
//! single-height cells gets one A-B row `B A B A B` with orientations
//! `[R0, R0, MY, MY, R0]`, whose four seams realize the four mirror classes
//! of a distinct pair in both orders. A multi-height cell of `k` rows is
//! paired with each single-height cell in the same A-B pattern, each `B`
//! column being a stack of `k` single-height instances.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::libio::{CellLibrary, CellProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Orientation {
    R0,
    R180,
    MX,
    MY,
}

impl Orientation {
    pub const ALL: [Orientation; 4] = [
        Orientation::R0,
        Orientation::R180,
        Orientation::MX,
        Orientation::MY,
    ];

    pub fn def_code(self) -> &'static str {
        match self {
            Orientation::R0 => "N",
            Orientation::R180 => "S",
            Orientation::MX => "FS",
            Orientation::MY => "FN",
        }
    }

    pub fn from_def_code(code: &str) -> Option<Orientation> {
        match code {
            "N" => Some(Orientation::R0),
            "S" => Some(Orientation::R180),
            "FS" => Some(Orientation::MX),
            "FN" => Some(Orientation::MY),
            _ => None,
        }
    }

    /// Orientation after mirroring about a vertical axis.
    pub fn mirror_y(self) -> Orientation {
        match self {
            Orientation::R0 => Orientation::MY,
            Orientation::MY => Orientation::R0,
            Orientation::MX => Orientation::R180,
            Orientation::R180 => Orientation::MX,
        }
    }

    /// Orientation after mirroring about a horizontal axis, as needed on an
    /// odd row.
    pub fn flip_vertical(self) -> Orientation {
        match self {
            Orientation::R0 => Orientation::MX,
            Orientation::MX => Orientation::R0,
            Orientation::MY => Orientation::R180,
            Orientation::R180 => Orientation::MY,
        }
    }

    pub fn is_flipped_vertically(self) -> bool {
        matches!(self, Orientation::MX | Orientation::R180)
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Orientation::R0 => "R0",
            Orientation::R180 => "R180",
            Orientation::MX => "MX",
            Orientation::MY => "MY",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowParity {
    Even,
    Odd,
}

impl RowParity {
    pub fn of(row: i64) -> RowParity {
        if row.rem_euclid(2) == 0 {
            RowParity::Even
        } else {
            RowParity::Odd
        }
    }
}

/// Orientations that keep the power rails aligned on a row of the given
/// parity.
pub fn legal_orientations(parity: RowParity) -> [Orientation; 2] {
    match parity {
        RowParity::Even => [Orientation::R0, Orientation::MY],
        RowParity::Odd => [Orientation::MX, Orientation::R180],
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Placement {
    pub name: String,
    pub cell: String,
    /// Lower-left corner of the placed outline.
    pub origin: (i64, i64),
    pub orientation: Orientation,
}

impl Placement {
    pub fn new(
        name: impl Into<String>,
        cell: impl Into<String>,
        origin: (i64, i64),
        orientation: Orientation,
    ) -> Self {
        Placement {
            name: name.into(),
            cell: cell.into(),
            origin,
            orientation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum CaseKind {
    AaSingle,
    AbSingle,
    AaMulti,
    AbSingleMulti,
}

/// One side-to-side contact inside a case: placement indices on each side
/// of the boundary and the row (relative to the case) where they touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Contact {
    pub left: usize,
    pub right: usize,
    pub row: u32,
}

/// A vertical abutment boundary within a case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Seam {
    /// Case-local x coordinate of the shared edge.
    pub x: i64,
    pub row: u32,
    pub row_span: u32,
    pub contacts: Vec<Contact>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AbutmentCase {
    pub kind: CaseKind,
    pub cell_a: String,
    pub cell_b: Option<String>,
    /// Case-local placements; instance names are `U1`, `U2`, ...
    pub placements: Vec<Placement>,
    pub seams: Vec<Seam>,
    pub width: i64,
    pub rows: u32,
}

impl AbutmentCase {
    /// Verilog module name of the case.
    pub fn module_name(&self) -> String {
        match (&self.kind, &self.cell_b) {
            (CaseKind::AaSingle | CaseKind::AaMulti, _) => format!("scell_{}", self.cell_a),
            (CaseKind::AbSingle, Some(b)) => format!("scell_{}_{}", self.cell_a, b),
            (CaseKind::AbSingleMulti, Some(b)) => format!("mcell_{}_{}", self.cell_a, b),
            (_, None) => format!("scell_{}", self.cell_a),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AbutError {
    #[error("cell {cell} is {rows} row(s) tall; a multi-height partner needs at least 2")]
    HeightMismatch { cell: String, rows: u32 },
    #[error("cell {cell} must be single-height for this case")]
    NotSingleHeight { cell: String },
}

/// Lays out one row of columns from left to right. Each column is a cell, a
/// base orientation and a stack height; stacked instances above the first
/// are flipped on odd rows.
fn build_row(columns: &[(&CellProfile, Orientation, u32)], row_height: i64) -> (Vec<Placement>, Vec<Seam>, i64) {
    let mut placements = Vec::new();
    let mut col_members: Vec<Vec<(usize, u32, u32)>> = Vec::new();
    let mut x = 0;
    let mut xs = Vec::new();
    for (cell, orient, stack) in columns {
        let mut members = Vec::new();
        for level in 0..*stack {
            let row = level * cell.height_rows;
            let o = if row % 2 == 1 { orient.flip_vertical() } else { *orient };
            let idx = placements.len();
            placements.push(Placement::new(
                format!("U{}", idx + 1),
                cell.name.clone(),
                (x, row as i64 * row_height),
                o,
            ));
            members.push((idx, row, cell.height_rows));
        }
        col_members.push(members);
        xs.push(x);
        x += cell.width;
    }
    let mut seams = Vec::new();
    for c in 1..columns.len() {
        let left = &col_members[c - 1];
        let right = &col_members[c];
        let mut contacts = Vec::new();
        for &(li, lrow, lspan) in left {
            for &(ri, rrow, rspan) in right {
                let lo = lrow.max(rrow);
                let hi = (lrow + lspan).min(rrow + rspan);
                for row in lo..hi {
                    contacts.push(Contact {
                        left: li,
                        right: ri,
                        row,
                    });
                }
            }
        }
        contacts.sort_by_key(|c| (c.row, c.left, c.right));
        let span = columns[c - 1].0.height_rows * columns[c - 1].2;
        let span = span.min(columns[c].0.height_rows * columns[c].2);
        seams.push(Seam {
            x: xs[c],
            row: 0,
            row_span: span,
            contacts,
        });
    }
    (placements, seams, x)
}

/// Orientation sequence of the A-A row.
pub const AA_ORIENTATIONS: [Orientation; 4] = [
    Orientation::MY,
    Orientation::R0,
    Orientation::R0,
    Orientation::MY,
];

/// Orientation sequence of the A-B row `B A B A B`.
pub const AB_ORIENTATIONS: [Orientation; 5] = [
    Orientation::R0,
    Orientation::R0,
    Orientation::MY,
    Orientation::MY,
    Orientation::R0,
];

pub fn gen_type_aa(cell: &CellProfile, row_height: i64) -> AbutmentCase {
    let cols: Vec<_> = AA_ORIENTATIONS.iter().map(|&o| (cell, o, 1)).collect();
    let (placements, seams, width) = build_row(&cols, row_height);
    AbutmentCase {
        kind: if cell.is_single_height() {
            CaseKind::AaSingle
        } else {
            CaseKind::AaMulti
        },
        cell_a: cell.name.clone(),
        cell_b: None,
        placements,
        seams,
        width,
        rows: cell.height_rows,
    }
}

pub fn gen_type_ab(
    cell_a: &CellProfile,
    cell_b: &CellProfile,
    row_height: i64,
) -> Result<AbutmentCase, AbutError> {
    for c in [cell_a, cell_b] {
        if !c.is_single_height() {
            return Err(AbutError::NotSingleHeight {
                cell: c.name.clone(),
            });
        }
    }
    let seq = [cell_b, cell_a, cell_b, cell_a, cell_b];
    let cols: Vec<_> = seq
        .iter()
        .zip(AB_ORIENTATIONS)
        .map(|(&c, o)| (c, o, 1))
        .collect();
    let (placements, seams, width) = build_row(&cols, row_height);
    Ok(AbutmentCase {
        kind: CaseKind::AbSingle,
        cell_a: cell_a.name.clone(),
        cell_b: Some(cell_b.name.clone()),
        placements,
        seams,
        width,
        rows: 1,
    })
}

/// A-B row between a multi-height cell `A` (k rows) and single-height `B`:
/// `[B-stack, A, B-stack, A, B-stack]`, 3k+2 instances.
pub fn gen_single_multi(
    cell_a: &CellProfile,
    cell_b: &CellProfile,
    row_height: i64,
) -> Result<AbutmentCase, AbutError> {
    let k = cell_a.height_rows;
    if k < 2 {
        return Err(AbutError::HeightMismatch {
            cell: cell_a.name.clone(),
            rows: k,
        });
    }
    if !cell_b.is_single_height() {
        return Err(AbutError::NotSingleHeight {
            cell: cell_b.name.clone(),
        });
    }
    let seq = [(cell_b, k), (cell_a, 1), (cell_b, k), (cell_a, 1), (cell_b, k)];
    let cols: Vec<_> = seq
        .iter()
        .zip(AB_ORIENTATIONS)
        .map(|(&(c, n), o)| (c, o, n))
        .collect();
    let (placements, seams, width) = build_row(&cols, row_height);
    Ok(AbutmentCase {
        kind: CaseKind::AbSingleMulti,
        cell_a: cell_a.name.clone(),
        cell_b: Some(cell_b.name.clone()),
        placements,
        seams,
        width,
        rows: k,
    })
}

/// All reduced testcases for a library, in library order: A-A cases for
/// every cell, then A-B cases for each unordered single-height pair `(i, j)`
/// with `i < j`, then single/multi cases per (multi, single) pair.
pub fn enumerate_library(library: &CellLibrary) -> Vec<AbutmentCase> {
    let rh = library.row_height;
    let singles: Vec<&CellProfile> = library.cells.iter().filter(|c| c.is_single_height()).collect();
    let multis: Vec<&CellProfile> = library.cells.iter().filter(|c| !c.is_single_height()).collect();
    let mut cases: Vec<AbutmentCase> = library.cells.iter().map(|c| gen_type_aa(c, rh)).collect();
    for (i, a) in singles.iter().enumerate() {
        for b in &singles[i + 1..] {
            cases.push(gen_type_ab(a, b, rh).expect("both single-height"));
        }
    }
    for a in &multis {
        for b in &singles {
            cases.push(gen_single_multi(a, b, rh).expect("heights checked"));
        }
    }
    cases
}

pub fn total_placements(cases: &[AbutmentCase]) -> u64 {
    cases.iter().map(|c| c.placements.len() as u64).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountMode {
    Proposed,
    Conventional,
}

/// Cell count needed to cover every side-to-side abutment of `n`
/// single-height cells.
pub fn expected_count(n: u64, mode: CountMode) -> u64 {
    let pairs = n * n.saturating_sub(1);
    match mode {
        CountMode::Proposed => 4 * n + 5 * pairs / 2,
        CountMode::Conventional => 8 * n + 8 * pairs,
    }
}

/// A side of an abutment: cell, orientation, and which row of the cell
/// touches the boundary (always 0 for single-height cells).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Side {
    pub cell: String,
    pub orientation: Orientation,
    pub row: u32,
}

/// Ordered left|right topology.
pub type Topology = (Side, Side);

/// Mirror image about a vertical axis: sides swap and each orientation is
/// mirrored.
pub fn mirror(t: &Topology) -> Topology {
    let flip = |s: &Side| Side {
        cell: s.cell.clone(),
        orientation: s.orientation.mirror_y(),
        row: s.row,
    };
    (flip(&t.1), flip(&t.0))
}

/// Representative of a topology's mirror class.
pub fn canonical(t: &Topology) -> Topology {
    let m = mirror(t);
    if m < *t {
        m
    } else {
        t.clone()
    }
}

/// Brings a topology to even-row form: if the contact row is flipped, flip
/// both sides vertically, which preserves every horizontal relation.
fn normalize_rows(t: Topology) -> Topology {
    if t.0.orientation.is_flipped_vertically() && t.0.row == 0 && t.1.row == 0 {
        let f = |s: Side| Side {
            orientation: s.orientation.flip_vertical(),
            ..s
        };
        (f(t.0), f(t.1))
    } else {
        t
    }
}

/// Topologies realized at the seams of one case.
pub fn seam_topologies(case: &AbutmentCase, library: &CellLibrary) -> Vec<Topology> {
    let mut out = Vec::new();
    for seam in &case.seams {
        for c in &seam.contacts {
            let side = |i: usize| {
                let p = &case.placements[i];
                let rows = library.cell(&p.cell).map_or(1, |c| c.height_rows);
                let base_row = (p.origin.1 / library.row_height) as u32;
                let row_in_cell = if rows > 1 { c.row - base_row } else { 0 };
                Side {
                    cell: p.cell.clone(),
                    orientation: p.orientation,
                    row: row_in_cell,
                }
            };
            let l = side(c.left);
            let r = side(c.right);
            // Single-height neighbour of a multi-height cell: the contact row
            // parity is part of the topology, recorded via the flipped
            // orientation; plain single-height pairs are normalized.
            out.push(normalize_rows((l, r)));
        }
    }
    out
}

/// Mirror classes an abutment testbench has to realize for `library`.
pub fn required_classes(library: &CellLibrary) -> BTreeSet<Topology> {
    let mut req = BTreeSet::new();
    let even = legal_orientations(RowParity::Even);
    let side = |c: &CellProfile, o, row| Side {
        cell: c.name.clone(),
        orientation: o,
        row,
    };
    for c in &library.cells {
        // A-A at the base row; rails alternate identically inside a tall cell.
        for &o1 in &even {
            for &o2 in &even {
                req.insert(canonical(&(side(c, o1, 0), side(c, o2, 0))));
            }
        }
    }
    let singles: Vec<&CellProfile> = library.cells.iter().filter(|c| c.is_single_height()).collect();
    for (i, a) in singles.iter().enumerate() {
        for b in &singles[i + 1..] {
            for &o1 in &even {
                for &o2 in &even {
                    req.insert(canonical(&(side(a, o1, 0), side(b, o2, 0))));
                    req.insert(canonical(&(side(b, o1, 0), side(a, o2, 0))));
                }
            }
        }
    }
    for a in library.cells.iter().filter(|c| !c.is_single_height()) {
        for b in &singles {
            for row in 0..a.height_rows {
                let parity = RowParity::of(row as i64);
                for &oa in &even {
                    for &ob in &legal_orientations(parity) {
                        req.insert(canonical(&(side(a, oa, row), side(b, ob, 0))));
                        req.insert(canonical(&(side(b, ob, 0), side(a, oa, row))));
                    }
                }
            }
        }
    }
    req
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverageReport {
    pub required: usize,
    pub covered: usize,
    pub missing: Vec<Topology>,
}

impl CoverageReport {
    pub fn is_complete(&self) -> bool {
        self.missing.is_empty()
    }
}

pub fn coverage_check(cases: &[AbutmentCase], library: &CellLibrary) -> CoverageReport {
    let required = required_classes(library);
    let realized: BTreeSet<Topology> = cases
        .iter()
        .flat_map(|c| seam_topologies(c, library))
        .map(|t| canonical(&t))
        .collect();
    let missing: Vec<Topology> = required.difference(&realized).cloned().collect();
    CoverageReport {
        required: required.len(),
        covered: required.len() - missing.len(),
        missing,
    }
}
