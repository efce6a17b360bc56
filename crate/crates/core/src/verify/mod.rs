//! Checking engines and the end-to-end verification flow.
//!
//! * [`drc`]: width and spacing rules, including same-mask spacing on
//!   double-patterning layers.
//! * [`dpt`]: conflict graphs and two-mask decomposition.
//! * [`hotspot`]: parallel-track pattern matching.
//!
//! [`run_all`] enumerates the abutment testcases of a library, floorplans
//! and flattens them, optionally recolors the double-patterning layers, and
//! runs every check.

pub mod dpt;
pub mod drc;
pub mod hotspot;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::abut::{enumerate_library, AbutmentCase, Placement};
use crate::emitio::{def_design, plan_floorplan, EmitError, Floorplan};
use crate::geom::{flatten, FlatLayout, GeomError, Rect, ShapeId};
use crate::libio::{CellLibrary, LayerRule, RuleDeck};
use crate::par::par_map;

pub use dpt::{
    apply_colors, build_conflict_graph, color_decompose, decompose, ConflictGraph, Decomposition,
    MaskAssignment,
};
pub use drc::{check_spacing, check_width};
pub use hotspot::{match_hotspots, HotspotPattern};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ViolationKind {
    Width,
    SpacingAnyMask,
    SpacingSameMask,
    ColorMissing,
    OddCycle,
    Hotspot,
}

impl ViolationKind {
    /// Pattern-matching result rather than a rule check.
    pub fn is_drc_plus(self) -> bool {
        self == ViolationKind::Hotspot
    }

    /// Caused by mask assignment rather than by geometry alone.
    pub fn is_color_related(self) -> bool {
        matches!(
            self,
            ViolationKind::SpacingSameMask
                | ViolationKind::ColorMissing
                | ViolationKind::OddCycle
                | ViolationKind::Hotspot
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::Width => "Width",
            ViolationKind::SpacingAnyMask => "SpacingAnyMask",
            ViolationKind::SpacingSameMask => "SpacingSameMask",
            ViolationKind::ColorMissing => "ColorMissing",
            ViolationKind::OddCycle => "OddCycle",
            ViolationKind::Hotspot => "Hotspot",
        }
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub layer: String,
    pub bbox: Rect,
    pub shapes: Vec<ShapeId>,
    pub pattern: Option<String>,
    /// Testcase the first involved shape belongs to, filled in by
    /// [`run_all`].
    pub case: Option<usize>,
}

impl Violation {
    pub fn new(kind: ViolationKind, layer: &str, bbox: Rect, shapes: Vec<ShapeId>) -> Self {
        Violation {
            kind,
            layer: layer.to_string(),
            bbox,
            shapes,
            pattern: None,
            case: None,
        }
    }

    fn sort_key(&self) -> (Option<usize>, &str, ViolationKind, Rect, &[ShapeId], &Option<String>) {
        (self.case, &self.layer, self.kind, self.bbox, &self.shapes, &self.pattern)
    }
}

/// Sorts by (case, layer, kind, bbox, shapes).
pub fn sort_violations(v: &mut [Violation]) {
    v.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum DptOption {
    /// Check the masks the library cells were drawn with.
    FixedColors,
    /// Decompose the placed layout and check the result.
    Recolor,
}

impl DptOption {
    pub fn label(self) -> &'static str {
        match self {
            DptOption::FixedColors => "I",
            DptOption::Recolor => "II",
        }
    }
}

impl fmt::Display for DptOption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VerifyError {
    #[error("mask assignment for {layer} does not cover shape {shape}")]
    IncompleteAssignment { layer: String, shape: ShapeId },
    #[error("library row height {library} differs from the rule deck row height {rules}")]
    RowHeightMismatch { library: i64, rules: i64 },
    #[error(transparent)]
    Emit(#[from] EmitError),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Row width for floorplanning; `None` picks the larger of 100 µm and
    /// the widest case.
    pub max_row_width: Option<i64>,
}

/// Shapes whose mask changed during recoloring, per instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecolorDiff {
    pub instance: String,
    pub changed: usize,
}

#[derive(Debug, Clone)]
pub struct VerificationResult {
    pub library: String,
    pub option: DptOption,
    pub cases: Vec<AbutmentCase>,
    pub floorplan: Floorplan,
    pub placements: Vec<Placement>,
    /// Checked layout; recolored under [`DptOption::Recolor`].
    pub layout: FlatLayout,
    /// Sorted by (case, layer, kind, bbox).
    pub violations: Vec<Violation>,
    pub recolor_diff: Vec<RecolorDiff>,
}

impl VerificationResult {
    pub fn drc_count(&self) -> usize {
        self.violations.iter().filter(|v| !v.kind.is_drc_plus()).count()
    }

    pub fn drc_plus_count(&self) -> usize {
        self.violations.iter().filter(|v| v.kind.is_drc_plus()).count()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

pub const DEFAULT_ROW_WIDTH: i64 = 100_000;

/// Recolors every double-patterning layer. Two-colorable groups get fresh
/// masks; groups inside a non-bipartite component keep the masks they were
/// drawn with and are reported as odd cycles.
pub fn recolor(layout: &FlatLayout, rules: &RuleDeck) -> Result<(FlatLayout, Vec<Violation>), VerifyError> {
    let dpt: Vec<(u16, &LayerRule)> = layout
        .layers
        .iter()
        .enumerate()
        .filter_map(|(i, name)| rules.layer(name).filter(|r| r.dpt).map(|r| (i as u16, r)))
        .collect();
    let per_layer = par_map(&dpt, |&(layer, rule)| {
        let graph = build_conflict_graph(layout, layer, rule);
        let d = decompose(&graph);
        let mut assignment = dpt::assignment_from(&graph, &d);
        for (node, _) in graph.nodes.iter().zip(&d.node_masks).filter(|(_, m)| m.is_none()) {
            for &s in &node.shapes {
                assignment.masks.insert(s, layout.shape(s).mask);
            }
        }
        (assignment, dpt::odd_cycle_violations(&graph, &d))
    });
    let mut current = layout.clone();
    let mut odd = Vec::new();
    for (assignment, v) in per_layer {
        current = apply_colors(&current, &assignment)?;
        odd.extend(v);
    }
    Ok((current, odd))
}

/// Width, spacing and hotspot checks over one layout.
pub fn check_layout(layout: &FlatLayout, rules: &RuleDeck, option: DptOption) -> Vec<Violation> {
    let layers: Vec<(u16, &LayerRule)> = layout
        .layers
        .iter()
        .enumerate()
        .filter_map(|(i, name)| rules.layer(name).map(|r| (i as u16, r)))
        .collect();
    let mut out: Vec<Violation> = par_map(&layers, |&(layer, rule)| {
        let mut v = drc::check_width_layer(layout, layer, rule);
        v.extend(drc::check_spacing_layer(layout, layer, rule, option));
        v
    })
    .into_iter()
    .flatten()
    .collect();
    let hs = par_map(&rules.hotspot_patterns, |p| hotspot::match_pattern(layout, p));
    out.extend(hs.into_iter().flatten());
    out
}

/// Full flow for one library and one coloring option.
pub fn run_all(
    library: &CellLibrary,
    rules: &RuleDeck,
    option: DptOption,
    opts: &RunOptions,
) -> Result<VerificationResult, VerifyError> {
    if library.row_height != rules.row_height {
        return Err(VerifyError::RowHeightMismatch {
            library: library.row_height,
            rules: rules.row_height,
        });
    }
    let cases = enumerate_library(library);
    let widest = cases.iter().map(|c| c.width).max().unwrap_or(0);
    let max_row_width = opts
        .max_row_width
        .unwrap_or_else(|| DEFAULT_ROW_WIDTH.max(widest));
    let floorplan = plan_floorplan(&cases, rules, max_row_width)?;
    let placements = def_design(&cases, &floorplan).components;
    let drawn = flatten(library, &placements, floorplan.die_area, rules.interaction_distance)?;

    let (layout, mut violations, recolor_diff) = match option {
        DptOption::FixedColors => (drawn, Vec::new(), Vec::new()),
        DptOption::Recolor => {
            let (colored, odd) = recolor(&drawn, rules)?;
            let mut changed: BTreeMap<u32, usize> = BTreeMap::new();
            for (before, after) in drawn.shapes.iter().zip(&colored.shapes) {
                if before.mask != after.mask {
                    *changed.entry(before.instance).or_default() += 1;
                }
            }
            let diff = changed
                .into_iter()
                .map(|(i, n)| RecolorDiff {
                    instance: colored.instances[i as usize].clone(),
                    changed: n,
                })
                .collect();
            (colored, odd, diff)
        }
    };
    violations.extend(check_layout(&layout, rules, option));

    let mut case_of_instance = Vec::with_capacity(placements.len());
    for (ci, c) in cases.iter().enumerate() {
        case_of_instance.extend(std::iter::repeat_n(ci, c.placements.len()));
    }
    for v in &mut violations {
        v.case = v
            .shapes
            .first()
            .map(|&s| case_of_instance[layout.shape(s).instance as usize]);
    }
    sort_violations(&mut violations);

    Ok(VerificationResult {
        library: library.name.clone(),
        option,
        cases,
        floorplan,
        placements,
        layout,
        violations,
        recolor_diff,
    })
}

/// Whether recoloring left no same-mask conflict or missing color.
pub fn mask_clean(layout: &FlatLayout, rules: &RuleDeck) -> bool {
    !drc::check_spacing(layout, rules, DptOption::FixedColors)
        .iter()
        .any(|v| matches!(v.kind, ViolationKind::SpacingSameMask | ViolationKind::ColorMissing))
}
