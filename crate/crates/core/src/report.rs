//! Seam attribution, summary tables, line-delimited violation records and
//! SVG snapshots of violation neighbourhoods.

use std::fmt::Write as _;

use serde::Serialize;

use crate::abut::{AbutmentCase, Orientation, RowParity};
use crate::emitio::Floorplan;
use crate::geom::{FlatLayout, Rect};
use crate::libio::Mask;
use crate::verify::{DptOption, VerificationResult, Violation};

/// Cells meeting at one seam contact, with die-level orientations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeamSide {
    pub row: u32,
    pub left_cell: String,
    pub left_orientation: Orientation,
    pub right_cell: String,
    pub right_orientation: Orientation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeamReport {
    pub case: usize,
    pub module: String,
    /// Index of the seam within its case, left to right.
    pub seam: usize,
    /// Die-level x of the shared edge.
    pub x: i64,
    pub y0: i64,
    pub y1: i64,
    pub sides: Vec<SeamSide>,
    /// Indices into the attributed violation list.
    pub violations: Vec<usize>,
}

impl SeamReport {
    pub fn label(&self) -> String {
        format!("{}#{}", self.module, self.seam)
    }

    /// `A/R0 | B/MY` per contact row.
    pub fn sides_text(&self) -> String {
        self.sides
            .iter()
            .map(|s| format!("{}/{} | {}/{}", s.left_cell, s.left_orientation, s.right_cell, s.right_orientation))
            .collect::<Vec<_>>()
            .join("; ")
    }

    fn band(&self, window: i64) -> Rect {
        Rect::new(self.x - window, self.y0, self.x + window, self.y1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Attribution {
    /// Every seam of every case, in case order.
    pub seams: Vec<SeamReport>,
    /// Violations that touch no seam band.
    pub residual: Vec<usize>,
    /// Seam indices per violation.
    pub per_violation: Vec<Vec<usize>>,
}

impl Attribution {
    pub fn attributed_count(&self) -> usize {
        self.per_violation.iter().filter(|s| !s.is_empty()).count()
    }
}

/// Lays out every seam in die coordinates.
pub fn seam_reports(cases: &[AbutmentCase], floorplan: &Floorplan) -> Vec<SeamReport> {
    let mut out = Vec::new();
    for (ci, (case, slot)) in cases.iter().zip(&floorplan.slots).enumerate() {
        let flip = RowParity::of(slot.row as i64) == RowParity::Odd;
        let orient = |o: Orientation| if flip { o.flip_vertical() } else { o };
        for (si, seam) in case.seams.iter().enumerate() {
            let (x, y0, y1) = floorplan.seam_position(ci, seam);
            let sides = seam
                .contacts
                .iter()
                .map(|c| {
                    let (l, r) = (&case.placements[c.left], &case.placements[c.right]);
                    SeamSide {
                        row: c.row,
                        left_cell: l.cell.clone(),
                        left_orientation: orient(l.orientation),
                        right_cell: r.cell.clone(),
                        right_orientation: orient(r.orientation),
                    }
                })
                .collect();
            out.push(SeamReport {
                case: ci,
                module: case.module_name(),
                seam: si,
                x,
                y0,
                y1,
                sides,
                violations: Vec::new(),
            });
        }
    }
    out
}

/// Assigns each violation to every seam whose band
/// `[x - window, x + window] x [y0, y1]` meets its bbox.
pub fn attribute_to_seams(
    violations: &[Violation],
    cases: &[AbutmentCase],
    floorplan: &Floorplan,
    window: i64,
) -> Attribution {
    let window = window.max(0);
    let mut seams = seam_reports(cases, floorplan);
    let mut by_x: Vec<usize> = (0..seams.len()).collect();
    by_x.sort_by_key(|&i| (seams[i].x, i));
    let xs: Vec<i64> = by_x.iter().map(|&i| seams[i].x).collect();

    let mut residual = Vec::new();
    let mut per_violation = Vec::with_capacity(violations.len());
    for (vi, v) in violations.iter().enumerate() {
        let lo = xs.partition_point(|&x| x < v.bbox.x1 - window);
        let hi = xs.partition_point(|&x| x <= v.bbox.x2 + window);
        let mut hits: Vec<usize> = by_x[lo..hi]
            .iter()
            .copied()
            .filter(|&si| seams[si].band(window).intersects(&v.bbox))
            .collect();
        hits.sort_unstable();
        for &si in &hits {
            seams[si].violations.push(vi);
        }
        if hits.is_empty() {
            residual.push(vi);
        }
        per_violation.push(hits);
    }
    Attribution {
        seams,
        residual,
        per_violation,
    }
}

/// Seams with at least one violation, as text lines.
pub fn seam_report_text(attr: &Attribution) -> String {
    let mut out = String::new();
    for s in attr.seams.iter().filter(|s| !s.violations.is_empty()) {
        let _ = writeln!(
            out,
            "{}  x={} y={}..{}  {}  violations={}",
            s.label(),
            s.x,
            s.y0,
            s.y1,
            s.sides_text(),
            s.violations.len()
        );
    }
    let _ = writeln!(out, "intra-cell violations: {}", attr.residual.len());
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SummaryRow {
    pub library: String,
    /// `(DRC, DRC+)` under option I, if run.
    pub option_i: Option<(usize, usize)>,
    pub option_ii: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

fn cell_text(n: Option<usize>) -> String {
    match n {
        None => "-".into(),
        Some(0) => "Clean".into(),
        Some(n) => n.to_string(),
    }
}

/// One row per library, in first-seen order.
pub fn summarize<'a>(results: impl IntoIterator<Item = &'a VerificationResult>) -> SummaryTable {
    let mut table = SummaryTable::default();
    for r in results {
        let idx = match table.rows.iter().position(|row| row.library == r.library) {
            Some(i) => i,
            None => {
                table.rows.push(SummaryRow {
                    library: r.library.clone(),
                    option_i: None,
                    option_ii: None,
                });
                table.rows.len() - 1
            }
        };
        let counts = Some((r.drc_count(), r.drc_plus_count()));
        match r.option {
            DptOption::FixedColors => table.rows[idx].option_i = counts,
            DptOption::Recolor => table.rows[idx].option_ii = counts,
        }
    }
    table
}

impl SummaryTable {
    pub fn to_text(&self) -> String {
        let header = ["Library", "DRC (I)", "DRC+ (I)", "DRC (II)", "DRC+ (II)"];
        let body: Vec<[String; 5]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.library.clone(),
                    cell_text(r.option_i.map(|c| c.0)),
                    cell_text(r.option_i.map(|c| c.1)),
                    cell_text(r.option_ii.map(|c| c.0)),
                    cell_text(r.option_ii.map(|c| c.1)),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &body {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect();
            parts.join(" | ").trim_end().to_string() + "\n"
        };
        let mut out = line(&header.map(String::from));
        out += &(widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("-+-") + "\n");
        for row in &body {
            out += &line(row);
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn any_violation(&self) -> bool {
        self.rows.iter().any(|r| {
            [r.option_i, r.option_ii]
                .iter()
                .flatten()
                .any(|&(a, b)| a + b > 0)
        })
    }
}

#[derive(Serialize)]
struct Record<'a> {
    library: &'a str,
    option: &'static str,
    kind: &'static str,
    layer: &'a str,
    bbox: [i64; 4],
    case: Option<String>,
    seams: Vec<String>,
    shapes: &'a [u32],
    pattern: Option<&'a str>,
}

/// One JSON object per violation and line.
pub fn violation_records(result: &VerificationResult, attr: &Attribution) -> String {
    let mut out = String::new();
    for (vi, v) in result.violations.iter().enumerate() {
        let rec = Record {
            library: &result.library,
            option: result.option.label(),
            kind: v.kind.as_str(),
            layer: &v.layer,
            bbox: [v.bbox.x1, v.bbox.y1, v.bbox.x2, v.bbox.y2],
            case: v.case.map(|c| result.cases[c].module_name()),
            seams: attr
                .per_violation
                .get(vi)
                .into_iter()
                .flatten()
                .map(|&s| attr.seams[s].label())
                .collect(),
            shapes: &v.shapes,
            pattern: v.pattern.as_deref(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        out.push('\n');
    }
    out
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn fill(mask: Mask) -> &'static str {
    match mask {
        Mask::Mask1 => "#3b7dd8",
        Mask::Mask2 => "#e0932b",
        Mask::None => "#9a9a9a",
    }
}

/// SVG of the shapes on the violation's layer within `bbox + margin`.
/// Layout y grows upward, so the drawing is flipped vertically. Shapes of
/// the violation are outlined; seams crossing the window are drawn as
/// dashed lines.
pub fn render_svg(layout: &FlatLayout, violation: &Violation, margin: i64, seam_xs: &[i64]) -> String {
    let view = violation.bbox.expand(margin.max(0));
    let (w, h) = (view.width().max(1), view.height().max(1));
    let tx = |x: i64| x - view.x1;
    let ty = |y: i64| view.y2 - y;
    let stroke = (w.max(h) / 200).max(1);

    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="0 0 {w} {h}" width="{}" height="{}">"#,
        w.min(800),
        (h * w.min(800) / w).max(1)
    );
    let mut title = format!("{} on {}", violation.kind, violation.layer);
    if let Some(p) = &violation.pattern {
        let _ = write!(title, " ({p})");
    }
    let _ = writeln!(out, "<title>{}</title>", escape(&title));
    let _ = writeln!(out, r##"<rect x="0" y="0" width="{w}" height="{h}" fill="#ffffff"/>"##);

    let mut ids = match layout.layer_id(&violation.layer) {
        Some(layer) => layout.query_layer(layer, &view),
        None => Vec::new(),
    };
    ids.sort_unstable();
    for id in ids {
        let s = layout.shape(id);
        let r = Rect::new(
            s.rect.x1.max(view.x1),
            s.rect.y1.max(view.y1),
            s.rect.x2.min(view.x2),
            s.rect.y2.min(view.y2),
        );
        let hit = violation.shapes.contains(&id);
        let _ = writeln!(
            out,
            r##"<rect class="{}" data-shape="{id}" data-mask="{}" x="{}" y="{}" width="{}" height="{}" fill="{}" fill-opacity="0.7"{}/>"##,
            if hit { "hit" } else { "shape" },
            match s.mask {
                Mask::Mask1 => "1",
                Mask::Mask2 => "2",
                Mask::None => "0",
            },
            tx(r.x1),
            ty(r.y2),
            r.width(),
            r.height(),
            fill(s.mask),
            if hit { format!(r##" stroke="#000000" stroke-width="{stroke}""##) } else { String::new() },
        );
    }
    for &x in seam_xs.iter().filter(|&&x| x >= view.x1 && x <= view.x2) {
        let _ = writeln!(
            out,
            r##"<line class="seam" x1="{0}" y1="0" x2="{0}" y2="{h}" stroke="#2e9e44" stroke-width="{stroke}" stroke-dasharray="{1} {1}"/>"##,
            tx(x),
            stroke * 4
        );
    }
    let b = violation.bbox;
    let _ = writeln!(
        out,
        r##"<rect class="bbox" x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#d0021b" stroke-width="{stroke}"/>"##,
        tx(b.x1),
        ty(b.y2),
        b.width(),
        b.height()
    );
    out.push_str("</svg>\n");
    out
}

/// Die x of every seam a violation was attributed to.
pub fn seam_xs(attr: &Attribution, violation: usize) -> Vec<i64> {
    attr.per_violation
        .get(violation)
        .into_iter()
        .flatten()
        .map(|&s| attr.seams[s].x)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abut::{gen_type_aa, Contact, Seam};
    use crate::emitio::CaseSlot;
    use crate::geom::FlatShape;
    use crate::verify::ViolationKind;

    fn one_case() -> (Vec<AbutmentCase>, Floorplan) {
        let cell = crate::synth::clean_cell("A", 200, 1);
        let case = gen_type_aa(&cell, 576);
        let fp = Floorplan {
            max_row_width: 10_000,
            case_gap: 300,
            row_height: 576,
            slots: vec![CaseSlot { row: 0, x: 0 }],
            die_area: Rect::new(0, 0, 800, 576),
        };
        (vec![case], fp)
    }

    fn v(bbox: Rect) -> Violation {
        Violation::new(ViolationKind::SpacingSameMask, "M1", bbox, vec![0, 1])
    }

    #[test]
    fn straddling_seam_is_attributed() {
        let (cases, fp) = one_case();
        let a = attribute_to_seams(&[v(Rect::new(190, 100, 210, 400))], &cases, &fp, 64);
        assert_eq!(a.per_violation[0], vec![0]);
        assert!(a.residual.is_empty());
        assert_eq!(a.seams[0].x, 200);
        assert_eq!(a.seams[0].sides_text(), "A/MY | A/R0");
    }

    #[test]
    fn far_from_seams_is_residual() {
        let (mut cases, fp) = one_case();
        cases[0].seams = vec![Seam {
            x: 1000,
            row: 0,
            row_span: 1,
            contacts: vec![Contact { left: 0, right: 1, row: 0 }],
        }];
        let a = attribute_to_seams(&[v(Rect::new(490, 100, 510, 400))], &cases, &fp, 64);
        assert_eq!(a.residual, vec![0]);
        assert_eq!(a.attributed_count(), 0);
    }

    #[test]
    fn near_two_seams_goes_to_both() {
        let (cases, fp) = one_case();
        let a = attribute_to_seams(&[v(Rect::new(250, 100, 350, 400))], &cases, &fp, 64);
        assert_eq!(a.per_violation[0], vec![0, 1]);
    }

    #[test]
    fn window_band_edge_is_closed() {
        let (cases, fp) = one_case();
        let a = attribute_to_seams(&[v(Rect::new(264, 100, 270, 400))], &cases, &fp, 64);
        assert_eq!(a.per_violation[0], vec![0]);
        let a = attribute_to_seams(&[v(Rect::new(265, 100, 270, 400))], &cases, &fp, 64);
        assert!(a.per_violation[0].is_empty());
    }

    #[test]
    fn table_renders_clean() {
        let t = SummaryTable {
            rows: vec![
                SummaryRow {
                    library: "lib1".into(),
                    option_i: Some((0, 218)),
                    option_ii: Some((0, 0)),
                },
                SummaryRow {
                    library: "lib2".into(),
                    option_i: Some((0, 0)),
                    option_ii: None,
                },
            ],
        };
        let text = t.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[2], "lib1    | Clean   | 218      | Clean    | Clean");
        assert_eq!(lines[3], "lib2    | Clean   | Clean    | -        | -");
        assert!(t.any_violation());
    }

    fn layout() -> FlatLayout {
        let shapes = (0..4)
            .map(|i| FlatShape {
                id: 0,
                layer: 0,
                mask: if i % 2 == 0 { Mask::Mask1 } else { Mask::Mask2 },
                rect: Rect::new(100 + 80 * i, 0, 132 + 80 * i, 300),
                instance: 0,
            })
            .collect();
        FlatLayout::from_shapes(Rect::new(0, 0, 1000, 1000), vec!["M1<&>".into()], vec!["u".into()], shapes, 64)
    }

    #[test]
    fn svg_draws_matched_shapes_and_outline() {
        let l = layout();
        let mut viol = Violation::new(ViolationKind::Hotspot, "M1<&>", Rect::new(100, 0, 372, 300), vec![0, 1, 2, 3]);
        viol.pattern = Some("P\"1".into());
        let svg = render_svg(&l, &viol, 0, &[236]);
        assert_eq!(svg.matches(r#"class="hit""#).count(), 4);
        assert_eq!(svg.matches(r#"class="bbox""#).count(), 1);
        assert!(svg.contains(r#"viewBox="0 0 272 300""#));
        assert!(svg.contains("M1&lt;&amp;&gt;"));
        assert!(svg.contains("P&quot;1"));
        assert_eq!(svg, render_svg(&l, &viol, 0, &[236]));
    }
}
