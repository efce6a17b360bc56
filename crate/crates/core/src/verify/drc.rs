//! Rule-based width and spacing checks.

use crate::geom::{parallel_runs, FlatLayout, ParallelRun, Rect, RunAxis, ShapeId};
use crate::libio::{LayerRule, RuleDeck};

use super::{DptOption, Violation, ViolationKind};

/// Connected components of touching or overlapping shapes on one layer.
#[derive(Debug, Clone)]
pub struct Connectivity {
    pub layer: u16,
    /// Shapes on the layer, ascending.
    pub shapes: Vec<ShapeId>,
    /// Component number per entry of `shapes`, numbered in order of each
    /// component's smallest shape id.
    pub component: Vec<u32>,
    pub component_count: usize,
}

impl Connectivity {
    pub fn position(&self, id: ShapeId) -> Option<usize> {
        self.shapes.binary_search(&id).ok()
    }

    pub fn component_of(&self, id: ShapeId) -> Option<u32> {
        self.position(id).map(|i| self.component[i])
    }

    pub fn connected(&self, a: ShapeId, b: ShapeId) -> bool {
        match (self.component_of(a), self.component_of(b)) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        }
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Builds connectivity from runs that include every spacing-0 pair.
pub fn connectivity_from_runs(layout: &FlatLayout, layer: u16, runs: &[ParallelRun]) -> Connectivity {
    let shapes: Vec<ShapeId> = layout.shapes_on(layer).map(|s| s.id).collect();
    let mut parent: Vec<usize> = (0..shapes.len()).collect();
    for r in runs.iter().filter(|r| r.spacing == 0) {
        let (Ok(a), Ok(b)) = (shapes.binary_search(&r.a), shapes.binary_search(&r.b)) else {
            continue;
        };
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            // Keep the smaller index as root so numbering follows shape order.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent[hi] = lo;
        }
    }
    let mut number = vec![u32::MAX; shapes.len()];
    let mut component = Vec::with_capacity(shapes.len());
    let mut next = 0u32;
    for i in 0..shapes.len() {
        let root = find(&mut parent, i);
        if number[root] == u32::MAX {
            number[root] = next;
            next += 1;
        }
        component.push(number[root]);
    }
    Connectivity {
        layer,
        shapes,
        component,
        component_count: next as usize,
    }
}

pub fn connectivity(layout: &FlatLayout, layer: u16) -> Connectivity {
    let runs = parallel_runs(layout, layer, 0);
    connectivity_from_runs(layout, layer, &runs)
}

/// The empty region between two facing shapes.
pub fn gap_rect(a: &Rect, b: &Rect, axis: RunAxis) -> Rect {
    match axis {
        RunAxis::Horizontal => {
            let (l, r) = if a.x2 <= b.x1 { (a, b) } else { (b, a) };
            Rect::new(l.x2, a.y1.max(b.y1), r.x1.max(l.x2), a.y2.min(b.y2))
        }
        RunAxis::Vertical => {
            let (lo, hi) = if a.y2 <= b.y1 { (a, b) } else { (b, a) };
            Rect::new(a.x1.max(b.x1), lo.y2, a.x2.min(b.x2), hi.y1.max(lo.y2))
        }
    }
}

pub fn check_width(layout: &FlatLayout, rules: &RuleDeck) -> Vec<Violation> {
    let mut out = Vec::new();
    for (layer_id, name) in layout.layers.iter().enumerate() {
        let Some(rule) = rules.layer(name) else {
            continue;
        };
        out.extend(check_width_layer(layout, layer_id as u16, rule));
    }
    out
}

pub fn check_width_layer(layout: &FlatLayout, layer: u16, rule: &LayerRule) -> Vec<Violation> {
    layout
        .shapes_on(layer)
        .filter(|s| s.rect.short_side() < rule.min_width)
        .map(|s| Violation::new(ViolationKind::Width, &rule.name, s.rect, vec![s.id]))
        .collect()
}

pub fn check_spacing(layout: &FlatLayout, rules: &RuleDeck, option: DptOption) -> Vec<Violation> {
    let mut out = Vec::new();
    for (layer_id, name) in layout.layers.iter().enumerate() {
        let Some(rule) = rules.layer(name) else {
            continue;
        };
        out.extend(check_spacing_layer(layout, layer_id as u16, rule, option));
    }
    out
}

/// Spacing checks on one layer.
///
/// Any two unconnected shapes facing each other closer than the any-mask
/// spacing violate; on double-patterning layers two colored shapes on the
/// same mask closer than the same-mask spacing violate as well. With fixed
/// colors every uncolored double-patterning shape is reported.
pub fn check_spacing_layer(
    layout: &FlatLayout,
    layer: u16,
    rule: &LayerRule,
    option: DptOption,
) -> Vec<Violation> {
    let reach = rule.spacing_any_mask.max(if rule.dpt { rule.spacing_same_mask } else { 0 }) - 1;
    let runs = parallel_runs(layout, layer, reach.max(0));
    let conn = connectivity_from_runs(layout, layer, &runs);
    let mut out = Vec::new();
    if rule.dpt && option == DptOption::FixedColors {
        for s in layout.shapes_on(layer).filter(|s| !s.mask.is_colored()) {
            out.push(Violation::new(ViolationKind::ColorMissing, &rule.name, s.rect, vec![s.id]));
        }
    }
    for r in &runs {
        if r.spacing == 0 || conn.connected(r.a, r.b) {
            continue;
        }
        let (sa, sb) = (layout.shape(r.a), layout.shape(r.b));
        let gap = gap_rect(&sa.rect, &sb.rect, r.axis);
        if r.spacing < rule.spacing_any_mask {
            out.push(Violation::new(ViolationKind::SpacingAnyMask, &rule.name, gap, vec![r.a, r.b]));
        }
        if rule.dpt && sa.mask.is_colored() && sa.mask == sb.mask && r.spacing < rule.spacing_same_mask {
            out.push(Violation::new(ViolationKind::SpacingSameMask, &rule.name, gap, vec![r.a, r.b]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::FlatShape;
    use crate::libio::{parse_rules, Mask};

    fn deck() -> RuleDeck {
        parse_rules(
            "row_height = 576\nsite_width = 50\n[[layer]]\nname = \"M1\"\nmin_width = 32\nspacing_any_mask = 32\nspacing_same_mask = 64\ndpt = true\n",
        )
        .unwrap()
    }

    fn layout(shapes: &[(Mask, Rect)]) -> FlatLayout {
        let shapes = shapes
            .iter()
            .map(|&(mask, rect)| FlatShape {
                id: 0,
                layer: 0,
                mask,
                rect,
                instance: 0,
            })
            .collect();
        FlatLayout::from_shapes(Rect::new(0, 0, 1000, 1000), vec!["M1".into()], vec!["u".into()], shapes, 64)
    }

    fn kinds(v: &[Violation]) -> Vec<ViolationKind> {
        v.iter().map(|v| v.kind).collect()
    }

    #[test]
    fn width_boundary() {
        let l = layout(&[(Mask::Mask1, Rect::new(0, 0, 30, 300)), (Mask::Mask1, Rect::new(500, 0, 532, 300))]);
        let v = check_width(&l, &deck());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].shapes, vec![0]);
    }

    #[test]
    fn layer_without_rule_is_skipped() {
        let mut l = layout(&[(Mask::None, Rect::new(0, 0, 10, 10))]);
        l.layers[0] = "POLY".into();
        assert!(check_width(&l, &deck()).is_empty());
        assert!(check_spacing(&l, &deck(), DptOption::FixedColors).is_empty());
    }

    #[test]
    fn same_mask_spacing() {
        let l = layout(&[(Mask::Mask1, Rect::new(0, 0, 32, 300)), (Mask::Mask1, Rect::new(72, 0, 104, 300))]);
        let v = check_spacing(&l, &deck(), DptOption::FixedColors);
        assert_eq!(kinds(&v), [ViolationKind::SpacingSameMask]);
        assert_eq!(v[0].bbox, Rect::new(32, 0, 72, 300));
        let l = layout(&[(Mask::Mask1, Rect::new(0, 0, 32, 300)), (Mask::Mask2, Rect::new(72, 0, 104, 300))]);
        assert!(check_spacing(&l, &deck(), DptOption::FixedColors).is_empty());
    }

    #[test]
    fn missing_color_under_fixed_colors() {
        let l = layout(&[(Mask::None, Rect::new(0, 0, 32, 300))]);
        assert_eq!(kinds(&check_spacing(&l, &deck(), DptOption::FixedColors)), [ViolationKind::ColorMissing]);
        assert!(check_spacing(&l, &deck(), DptOption::Recolor).is_empty());
    }

    #[test]
    fn any_mask_spacing_and_connected_shapes() {
        let l = layout(&[
            (Mask::Mask1, Rect::new(0, 0, 32, 300)),
            (Mask::Mask2, Rect::new(52, 0, 84, 300)),
            (Mask::Mask1, Rect::new(0, 300, 32, 332)),
        ]);
        let v = check_spacing(&l, &deck(), DptOption::FixedColors);
        assert_eq!(kinds(&v), [ViolationKind::SpacingAnyMask]);
        // A U shape: both legs belong to one connected polygon.
        let l = layout(&[
            (Mask::Mask1, Rect::new(0, 0, 32, 300)),
            (Mask::Mask1, Rect::new(72, 0, 104, 300)),
            (Mask::Mask1, Rect::new(0, 300, 104, 332)),
        ]);
        assert!(check_spacing(&l, &deck(), DptOption::FixedColors).is_empty());
    }
}
