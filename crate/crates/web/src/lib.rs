//! Browser demo: draws abutment testcase rows, tabulates the placement
//! count reduction and runs the verification flow on the synthetic
//! libraries. Every export is a thin wrapper over a plain function so the
//! logic can be tested natively.

use std::fmt::Write as _;

use seamcheck::abut::{gen_single_multi, gen_type_aa, gen_type_ab, AbutmentCase, Orientation};
use seamcheck::libio::CellProfile;
use seamcheck::report::{attribute_to_seams, render_svg, seam_xs, summarize};
use seamcheck::synth;
use seamcheck::{expected_count, parse_rules, run_all, CountMode, DptOption, RunOptions};
use wasm_bindgen::prelude::*;

const PX_PER_DBU: f64 = 0.25;

fn case_for(kind: &str, a_sites: u32, b_sites: u32, rows: u32) -> Result<AbutmentCase, String> {
    let site = synth::SITE_WIDTH;
    let a = |r| synth::clean_cell("A", site * a_sites.clamp(2, 40) as i64, r);
    let b = synth::clean_cell("B", site * b_sites.clamp(2, 40) as i64, 1);
    match kind {
        "aa" => Ok(gen_type_aa(&a(1), synth::ROW_HEIGHT)),
        "ab" => gen_type_ab(&a(1), &b, synth::ROW_HEIGHT).map_err(|e| e.to_string()),
        "multi" => gen_single_multi(&a(rows.clamp(2, 4)), &b, synth::ROW_HEIGHT).map_err(|e| e.to_string()),
        other => Err(format!("unknown case kind {other}")),
    }
}

/// Outline of a cell with a notch in its original lower-left corner, so
/// the orientation can be read off the drawing.
fn cell_svg(out: &mut String, cell: &CellProfile, x: f64, y: f64, o: Orientation, fill: &str) {
    let (w, h) = (cell.width as f64 * PX_PER_DBU, cell.height as f64 * PX_PER_DBU);
    let _ = writeln!(
        out,
        r##"<rect x="{x}" y="{y}" width="{w}" height="{h}" fill="{fill}" stroke="#333333"/>"##
    );
    let n = h.min(w) * 0.25;
    let (left, bottom) = match o {
        Orientation::R0 => (true, true),
        Orientation::MY => (false, true),
        Orientation::MX => (true, false),
        Orientation::R180 => (false, false),
    };
    let cx = if left { x } else { x + w - n };
    let cy = if bottom { y + h - n } else { y };
    let _ = writeln!(out, r##"<rect x="{cx}" y="{cy}" width="{n}" height="{n}" fill="#333333"/>"##);
    let _ = writeln!(
        out,
        r##"<text x="{}" y="{}" font-size="14" text-anchor="middle" font-family="monospace">{}/{}</text>"##,
        x + w / 2.0,
        y + h / 2.0,
        cell.name,
        o
    );
}

/// SVG of one testcase row: cells, orientations and seams.
pub fn row_svg(kind: &str, a_sites: u32, b_sites: u32, rows: u32) -> Result<String, String> {
    let case = case_for(kind, a_sites, b_sites, rows)?;
    let site = synth::SITE_WIDTH;
    let cells = [
        synth::clean_cell("A", site * a_sites.clamp(2, 40) as i64, if kind == "multi" { rows.clamp(2, 4) } else { 1 }),
        synth::clean_cell("B", site * b_sites.clamp(2, 40) as i64, 1),
    ];
    let rh = synth::ROW_HEIGHT as f64 * PX_PER_DBU;
    let (w, h) = (case.width as f64 * PX_PER_DBU, case.rows as f64 * rh);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="-2 -2 {} {}" width="{}" height="{}">"#,
        w + 4.0,
        h + 4.0,
        w + 4.0,
        h + 4.0
    );
    for p in &case.placements {
        let cell = if p.cell == "A" { &cells[0] } else { &cells[1] };
        let x = p.origin.0 as f64 * PX_PER_DBU;
        // SVG y grows downward.
        let y = h - p.origin.1 as f64 * PX_PER_DBU - cell.height as f64 * PX_PER_DBU;
        let fill = if p.cell == "A" { "#cfe0f7" } else { "#f7e3c8" };
        cell_svg(&mut out, cell, x, y, p.orientation, fill);
    }
    for s in &case.seams {
        let x = s.x as f64 * PX_PER_DBU;
        let y0 = h - (s.row + s.row_span) as f64 * rh;
        let _ = writeln!(
            out,
            r##"<line x1="{x}" y1="{y0}" x2="{x}" y2="{}" stroke="#d0021b" stroke-width="3" stroke-dasharray="6 4"/>"##,
            y0 + s.row_span as f64 * rh
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Proposed and conventional placement counts for each `n`.
pub fn count_rows(ns: &[u32]) -> String {
    let rows: Vec<serde_json::Value> = ns
        .iter()
        .map(|&n| {
            let p = expected_count(n as u64, CountMode::Proposed);
            let c = expected_count(n as u64, CountMode::Conventional);
            serde_json::json!({
                "n": n,
                "proposed": p,
                "conventional": c,
                "ratio": if p == 0 { 0.0 } else { c as f64 / p as f64 },
            })
        })
        .collect();
    serde_json::Value::Array(rows).to_string()
}

/// Runs the full flow on a synthetic library and returns the summary
/// table, the violation list and an SVG of the first violation.
pub fn verify_library(library: &str, option: &str) -> Result<String, String> {
    let lib = match library {
        "clean" => synth::clean_library(),
        "seam_conflict" => synth::seam_conflict_library(),
        "odd_cycle" => synth::odd_cycle_library(),
        other => return Err(format!("unknown library {other}")),
    };
    let option = match option {
        "I" => DptOption::FixedColors,
        "II" => DptOption::Recolor,
        other => return Err(format!("unknown option {other}")),
    };
    let rules = parse_rules(synth::RULES_TOML).map_err(|e| e.to_string())?;
    let r = run_all(&lib, &rules, option, &RunOptions::default()).map_err(|e| e.to_string())?;
    let attr = attribute_to_seams(&r.violations, &r.cases, &r.floorplan, rules.interaction_distance);
    let violations: Vec<serde_json::Value> = r
        .violations
        .iter()
        .enumerate()
        .map(|(i, v)| {
            serde_json::json!({
                "kind": v.kind.as_str(),
                "case": v.case.map(|c| r.cases[c].module_name()),
                "seams": attr.per_violation[i].iter().map(|&s| attr.seams[s].sides_text()).collect::<Vec<_>>(),
                "bbox": [v.bbox.x1, v.bbox.y1, v.bbox.x2, v.bbox.y2],
            })
        })
        .collect();
    let svg = r
        .violations
        .first()
        .map(|v| render_svg(&r.layout, v, 300, &seam_xs(&attr, 0)));
    Ok(serde_json::json!({
        "summary": summarize([&r]).to_text(),
        "placements": r.placements.len(),
        "violations": violations,
        "svg": svg,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn abutment_row_svg(kind: &str, a_sites: u32, b_sites: u32, rows: u32) -> Result<String, JsValue> {
    row_svg(kind, a_sites, b_sites, rows).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn count_table(ns: Vec<u32>) -> String {
    count_rows(&ns)
}

#[wasm_bindgen]
pub fn verify_demo(library: &str, option: &str) -> Result<String, JsValue> {
    verify_library(library, option).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_have_expected_cells_and_seams() {
        let svg = row_svg("aa", 4, 4, 1).unwrap();
        assert_eq!(svg.matches("stroke-dasharray").count(), 3);
        assert!(svg.contains("A/MY") && svg.contains("A/R0"));
        let svg = row_svg("ab", 4, 6, 1).unwrap();
        assert_eq!(svg.matches("stroke-dasharray").count(), 4);
        let svg = row_svg("multi", 4, 6, 2).unwrap();
        assert!(svg.contains("B/MX"));
        assert!(row_svg("zz", 4, 4, 1).is_err());
    }

    #[test]
    fn counts() {
        let v: serde_json::Value = serde_json::from_str(&count_rows(&[1, 1000])).unwrap();
        assert_eq!(v[0]["proposed"], 4);
        assert_eq!(v[1]["conventional"], 8_000_000);
        assert_eq!(v[1]["proposed"], 2_501_500);
    }

    #[test]
    fn verify_options() {
        let i: serde_json::Value = serde_json::from_str(&verify_library("seam_conflict", "I").unwrap()).unwrap();
        assert!(!i["violations"].as_array().unwrap().is_empty());
        assert!(i["svg"].as_str().unwrap().starts_with("<?xml"));
        let ii: serde_json::Value = serde_json::from_str(&verify_library("seam_conflict", "II").unwrap()).unwrap();
        assert!(ii["violations"].as_array().unwrap().is_empty());
        assert!(ii["svg"].is_null());
    }
}
