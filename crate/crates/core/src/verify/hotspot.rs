//! Pattern matching for parallel multi-track hotspots.
//!
//! A pattern describes `n` parallel same-layer lines, adjacent lines facing
//! each other at a gap within `[min_gap, max_gap]` and all of them sharing a
//! common run of at least `min_run_length`. The masks of the lines, read in
//! position order, must equal the pattern's sequence or its reverse.

use serde::Serialize;

use crate::geom::{facing, parallel_runs, FlatLayout, Rect, RunAxis, ShapeId};
use crate::libio::Mask;

use super::drc::gap_rect;
use super::{Violation, ViolationKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HotspotPattern {
    pub name: String,
    pub layer: String,
    pub mask_sequence: Vec<Mask>,
    pub min_gap: i64,
    pub max_gap: i64,
    pub min_run_length: i64,
}

impl HotspotPattern {
    pub fn track_count(&self) -> usize {
        self.mask_sequence.len()
    }

    fn masks_match(&self, masks: &[Mask]) -> bool {
        masks == self.mask_sequence.as_slice() || masks.iter().eq(self.mask_sequence.iter().rev())
    }
}

/// Span along the run direction.
fn run_span(r: &Rect, axis: RunAxis) -> (i64, i64) {
    match axis {
        RunAxis::Horizontal => (r.y1, r.y2),
        RunAxis::Vertical => (r.x1, r.x2),
    }
}

/// True if some other shape on the layer cuts into the gap between `a`
/// and `b`, so the two are not adjacent tracks.
fn obstructed(layout: &FlatLayout, layer: u16, a: ShapeId, b: ShapeId, axis: RunAxis) -> bool {
    let gap = gap_rect(&layout.shape(a).rect, &layout.shape(b).rect, axis);
    layout.query_layer(layer, &gap).into_iter().any(|id| {
        if id == a || id == b {
            return false;
        }
        let r = layout.shape(id).rect;
        r.x2.min(gap.x2) > r.x1.max(gap.x1) && r.y2.min(gap.y2) > r.y1.max(gap.y1)
    })
}

pub fn match_pattern(layout: &FlatLayout, pattern: &HotspotPattern) -> Vec<Violation> {
    let Some(layer) = layout.layer_id(&pattern.layer) else {
        return Vec::new();
    };
    let tracks = pattern.track_count();
    let mut out = Vec::new();
    let runs = parallel_runs(layout, layer, pattern.max_gap);
    for axis in [RunAxis::Horizontal, RunAxis::Vertical] {
        // Directed edges from the lower track to the higher one.
        let mut next: std::collections::BTreeMap<ShapeId, Vec<ShapeId>> = Default::default();
        for r in runs.iter().filter(|r| {
            r.axis == axis
                && r.spacing >= pattern.min_gap
                && r.spacing <= pattern.max_gap
                && r.run_length >= pattern.min_run_length
        }) {
            let (ra, rb) = (layout.shape(r.a).rect, layout.shape(r.b).rect);
            let a_first = match axis {
                RunAxis::Horizontal => ra.x2 <= rb.x1,
                RunAxis::Vertical => ra.y2 <= rb.y1,
            };
            if obstructed(layout, layer, r.a, r.b, axis) {
                continue;
            }
            let (lo, hi) = if a_first { (r.a, r.b) } else { (r.b, r.a) };
            next.entry(lo).or_default().push(hi);
        }
        for list in next.values_mut() {
            list.sort_unstable();
        }
        let starts: Vec<ShapeId> = next.keys().copied().collect();
        let mut chain = Vec::with_capacity(tracks);
        for s in starts {
            chain.clear();
            chain.push(s);
            let span = run_span(&layout.shape(s).rect, axis);
            extend(layout, pattern, axis, &next, &mut chain, span, &mut out);
        }
    }
    out
}

fn extend(
    layout: &FlatLayout,
    pattern: &HotspotPattern,
    axis: RunAxis,
    next: &std::collections::BTreeMap<ShapeId, Vec<ShapeId>>,
    chain: &mut Vec<ShapeId>,
    span: (i64, i64),
    out: &mut Vec<Violation>,
) {
    if chain.len() == pattern.track_count() {
        let masks: Vec<Mask> = chain.iter().map(|&id| layout.shape(id).mask).collect();
        if pattern.masks_match(&masks) {
            let union = chain
                .iter()
                .map(|&id| layout.shape(id).rect)
                .reduce(|a, b| a.union(&b))
                .expect("non-empty chain");
            let bbox = match axis {
                RunAxis::Horizontal => Rect::new(union.x1, span.0, union.x2, span.1),
                RunAxis::Vertical => Rect::new(span.0, union.y1, span.1, union.y2),
            };
            let mut v = Violation::new(ViolationKind::Hotspot, &pattern.layer, bbox, chain.clone());
            v.pattern = Some(pattern.name.clone());
            out.push(v);
        }
        return;
    }
    let last = *chain.last().expect("non-empty chain");
    let Some(cands) = next.get(&last) else {
        return;
    };
    for &c in cands {
        let (lo, hi) = run_span(&layout.shape(c).rect, axis);
        let s = (span.0.max(lo), span.1.min(hi));
        if s.1 - s.0 < pattern.min_run_length {
            continue;
        }
        debug_assert!(facing(&layout.shape(last).rect, &layout.shape(c).rect).is_some());
        chain.push(c);
        extend(layout, pattern, axis, next, chain, s, out);
        chain.pop();
    }
}

pub fn match_hotspots(layout: &FlatLayout, patterns: &[HotspotPattern]) -> Vec<Violation> {
    patterns.iter().flat_map(|p| match_pattern(layout, p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::FlatShape;

    fn pattern() -> HotspotPattern {
        HotspotPattern {
            name: "BRIDGE4".into(),
            layer: "M1".into(),
            mask_sequence: vec![Mask::Mask1, Mask::Mask2, Mask::Mask1, Mask::Mask2],
            min_gap: 1,
            max_gap: 50,
            min_run_length: 100,
        }
    }

    /// Four vertical bars of width 32 starting at x0 with the given gaps.
    fn bars(gaps: [i64; 3], masks: [Mask; 4], ys: [(i64, i64); 4]) -> FlatLayout {
        let mut x = 100;
        let mut shapes = Vec::new();
        for i in 0..4 {
            shapes.push(FlatShape {
                id: 0,
                layer: 0,
                mask: masks[i],
                rect: Rect::new(x, ys[i].0, x + 32, ys[i].1),
                instance: 0,
            });
            x += 32 + if i < 3 { gaps[i] } else { 0 };
        }
        FlatLayout::from_shapes(Rect::new(0, 0, 2000, 2000), vec!["M1".into()], vec!["u".into()], shapes, 64)
    }

    const ALT: [Mask; 4] = [Mask::Mask1, Mask::Mask2, Mask::Mask1, Mask::Mask2];
    const FULL: [(i64, i64); 4] = [(0, 200); 4];

    #[test]
    fn planted_match() {
        let l = bars([48, 48, 48], ALT, FULL);
        let v = match_hotspots(&l, &[pattern()]);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].shapes, vec![0, 1, 2, 3]);
        assert_eq!(v[0].bbox, Rect::new(100, 0, 372, 200));
        assert_eq!(v[0].pattern.as_deref(), Some("BRIDGE4"));
    }

    #[test]
    fn gap_too_wide() {
        let l = bars([48, 60, 48], ALT, FULL);
        assert!(match_hotspots(&l, &[pattern()]).is_empty());
    }

    #[test]
    fn common_run_too_short() {
        let l = bars([48, 48, 48], ALT, [(0, 200), (0, 200), (0, 200), (120, 300)]);
        assert!(match_hotspots(&l, &[pattern()]).is_empty());
    }

    #[test]
    fn reversed_masks_match_and_others_do_not() {
        let rev = [Mask::Mask2, Mask::Mask1, Mask::Mask2, Mask::Mask1];
        assert_eq!(match_hotspots(&bars([48; 3], rev, FULL), &[pattern()]).len(), 1);
        let other = [Mask::Mask1, Mask::Mask1, Mask::Mask2, Mask::Mask2];
        assert!(match_hotspots(&bars([48; 3], other, FULL), &[pattern()]).is_empty());
    }
}
