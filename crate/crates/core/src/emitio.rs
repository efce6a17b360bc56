//! Testcase serialization: floorplanning of cases into a die, the
//! structural Verilog netlist and the DEF placement file, plus a DEF reader
//! for the same subset.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::abut::{AbutmentCase, Orientation, Placement, RowParity, Seam};
use crate::geom::Rect;
use crate::libio::RuleDeck;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CaseSlot {
    /// First row occupied by the case.
    pub row: u32,
    pub x: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Floorplan {
    pub max_row_width: i64,
    pub case_gap: i64,
    pub row_height: i64,
    pub slots: Vec<CaseSlot>,
    pub die_area: Rect,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EmitError {
    #[error("case {module} is {width} DBU wide, more than the row width {max_row_width}")]
    CaseTooWide {
        module: String,
        width: i64,
        max_row_width: i64,
    },
    #[error("case {module}: instance {instance} at x={x} is off the {site} DBU site grid")]
    OffGrid {
        module: String,
        instance: String,
        x: i64,
        site: i64,
    },
    #[error("module name {0} is produced by more than one case")]
    NameCollision(String),
    #[error("DEF {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("DEF {line}: unknown orientation code {code}")]
    UnknownOrientationCode { line: usize, code: String },
}

/// Horizontal spacer between cases: wide enough that no rule sees across it,
/// rounded up to the site grid.
pub fn case_gap(rules: &RuleDeck) -> i64 {
    let raw = (2 * rules.interaction_distance).max(rules.site_width);
    (raw + rules.site_width - 1) / rules.site_width * rules.site_width
}

struct Band {
    row: u32,
    rows: u32,
    cursor: i64,
}

/// First-fit packing of cases into horizontal bands. A band holds cases of
/// one height; a case of `k` rows reserves `k` consecutive rows. Multi-row
/// bands start on even rows, where a tall cell keeps its rails in R0/MY.
pub fn plan_floorplan(
    cases: &[AbutmentCase],
    rules: &RuleDeck,
    max_row_width: i64,
) -> Result<Floorplan, EmitError> {
    let gap = case_gap(rules);
    let mut bands: Vec<Band> = Vec::new();
    let mut next_row = 0u32;
    let mut slots = Vec::with_capacity(cases.len());
    let mut die_w = 0;
    for case in cases {
        if case.width > max_row_width {
            return Err(EmitError::CaseTooWide {
                module: case.module_name(),
                width: case.width,
                max_row_width,
            });
        }
        for p in &case.placements {
            if p.origin.0 % rules.site_width != 0 {
                return Err(EmitError::OffGrid {
                    module: case.module_name(),
                    instance: p.name.clone(),
                    x: p.origin.0,
                    site: rules.site_width,
                });
            }
        }
        if case.width % rules.site_width != 0 {
            return Err(EmitError::OffGrid {
                module: case.module_name(),
                instance: "(outline)".into(),
                x: case.width,
                site: rules.site_width,
            });
        }
        let fit = bands
            .iter_mut()
            .find(|b| b.rows == case.rows && b.cursor + gap + case.width <= max_row_width);
        let slot = match fit {
            Some(b) => {
                let x = b.cursor + gap;
                b.cursor = x + case.width;
                CaseSlot { row: b.row, x }
            }
            None => {
                if case.rows > 1 && next_row % 2 == 1 {
                    next_row += 1;
                }
                let row = next_row;
                next_row += case.rows;
                bands.push(Band {
                    row,
                    rows: case.rows,
                    cursor: case.width,
                });
                CaseSlot { row, x: 0 }
            }
        };
        die_w = die_w.max(slot.x + case.width);
        slots.push(slot);
    }
    Ok(Floorplan {
        max_row_width,
        case_gap: gap,
        row_height: rules.row_height,
        slots,
        die_area: Rect::new(0, 0, die_w, next_row as i64 * rules.row_height),
    })
}

/// TOP-level instance name of a case module.
pub fn case_instance_name(case: &AbutmentCase) -> String {
    let module = sanitize(&case.module_name());
    match module.strip_prefix("scell_") {
        Some(rest) => format!("sinst_{rest}"),
        None => match module.strip_prefix("mcell_") {
            Some(rest) => format!("minst_{rest}"),
            None => format!("inst_{module}"),
        },
    }
}

impl Floorplan {
    /// Die-level placements in case order. Cases on odd rows are flipped
    /// vertically so the rails stay aligned.
    pub fn global_placements(&self, cases: &[AbutmentCase]) -> Vec<Placement> {
        let mut out = Vec::new();
        for (case, slot) in cases.iter().zip(&self.slots) {
            let prefix = case_instance_name(case);
            // Only single-row cases land on odd rows; flipping each instance
            // in place mirrors the whole case.
            let flip = RowParity::of(slot.row as i64) == RowParity::Odd;
            for p in &case.placements {
                let o = if flip {
                    p.orientation.flip_vertical()
                } else {
                    p.orientation
                };
                out.push(Placement::new(
                    format!("{prefix}/{}", p.name),
                    p.cell.clone(),
                    (slot.x + p.origin.0, slot.row as i64 * self.row_height + p.origin.1),
                    o,
                ));
            }
        }
        out
    }

    /// Die-level x of a seam and the y extent of the rows it spans.
    pub fn seam_position(&self, case_idx: usize, seam: &Seam) -> (i64, i64, i64) {
        let slot = self.slots[case_idx];
        let y0 = (slot.row + seam.row) as i64 * self.row_height;
        let y1 = y0 + seam.row_span as i64 * self.row_height;
        (slot.x + seam.x, y0, y1)
    }
}

/// Maps a cell name onto a legal Verilog identifier.
pub fn sanitize(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '$' { c } else { '_' })
        .collect();
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit() || c == '$') {
        out.insert(0, '_');
    }
    out
}

pub fn emit_verilog(cases: &[AbutmentCase]) -> Result<String, EmitError> {
    let mut out = String::new();
    let mut seen = HashSet::new();
    let mut names = Vec::with_capacity(cases.len());
    for case in cases {
        let module = sanitize(&case.module_name());
        if !seen.insert(module.clone()) {
            return Err(EmitError::NameCollision(module));
        }
        names.push(module);
    }
    for (case, module) in cases.iter().zip(&names) {
        let _ = writeln!(out, "module {module} ();");
        for p in &case.placements {
            let _ = writeln!(out, "  {} {} ();", sanitize(&p.cell), p.name);
        }
        out.push_str("endmodule\n\n");
    }
    out.push_str("module TOP ();\n");
    for (case, module) in cases.iter().zip(&names) {
        let _ = writeln!(out, "  {module} {} ();", case_instance_name(case));
    }
    out.push_str("endmodule\n");
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefDesign {
    pub design: String,
    pub die_area: Rect,
    pub components: Vec<Placement>,
}

pub fn write_def(design: &DefDesign) -> String {
    let mut out = String::with_capacity(64 * design.components.len() + 256);
    out.push_str("VERSION 5.6 ;\n");
    let _ = writeln!(out, "DESIGN {} ;", design.design);
    out.push_str("UNITS DISTANCE MICRONS 1000 ;\n");
    let d = design.die_area;
    let _ = writeln!(out, "DIEAREA ( {} {} ) ( {} {} ) ;", d.x1, d.y1, d.x2, d.y2);
    let _ = writeln!(out, "COMPONENTS {} ;", design.components.len());
    for p in &design.components {
        let _ = writeln!(
            out,
            "- {} {} + PLACED ( {} {} ) {} ;",
            p.name,
            p.cell,
            p.origin.0,
            p.origin.1,
            p.orientation.def_code()
        );
    }
    out.push_str("END COMPONENTS\n");
    out.push_str("END DESIGN\n");
    out
}

pub fn def_design(cases: &[AbutmentCase], floorplan: &Floorplan) -> DefDesign {
    DefDesign {
        design: "TOP".into(),
        die_area: floorplan.die_area,
        components: floorplan.global_placements(cases),
    }
}

pub fn emit_def(cases: &[AbutmentCase], floorplan: &Floorplan) -> String {
    write_def(&def_design(cases, floorplan))
}

struct DefTokens<'a> {
    toks: Vec<(&'a str, usize, usize)>,
    pos: usize,
}

impl<'a> DefTokens<'a> {
    fn new(text: &'a str) -> Self {
        let mut toks = Vec::new();
        for (li, line) in text.lines().enumerate() {
            let base = line.as_ptr() as usize;
            for tok in line.split_ascii_whitespace() {
                let col = tok.as_ptr() as usize - base + 1;
                toks.push((tok, li + 1, col));
            }
        }
        DefTokens { toks, pos: 0 }
    }

    fn err(&self, msg: impl Into<String>) -> EmitError {
        let (line, col) = self
            .toks
            .get(self.pos.saturating_sub(1))
            .map(|t| (t.1, t.2))
            .unwrap_or((1, 1));
        EmitError::Syntax {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn next(&mut self) -> Result<(&'a str, usize, usize), EmitError> {
        let t = self
            .toks
            .get(self.pos)
            .copied()
            .ok_or_else(|| self.err("unexpected end of file"))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, word: &str) -> Result<(), EmitError> {
        let (t, ..) = self.next()?;
        if t == word {
            Ok(())
        } else {
            Err(self.err(format!("expected `{word}`, found `{t}`")))
        }
    }

    fn int(&mut self) -> Result<i64, EmitError> {
        let (t, ..) = self.next()?;
        t.parse().map_err(|_| self.err(format!("expected an integer, found `{t}`")))
    }

    fn point(&mut self) -> Result<(i64, i64), EmitError> {
        self.expect("(")?;
        let x = self.int()?;
        let y = self.int()?;
        self.expect(")")?;
        Ok((x, y))
    }

    fn skip_statement(&mut self) -> Result<(), EmitError> {
        loop {
            if self.next()?.0 == ";" {
                return Ok(());
            }
        }
    }
}

/// Reads the DEF subset written by [`write_def`]. Unknown top-level
/// statements are skipped; `UNITS` must be 1000 DBU per micron.
pub fn parse_def(text: &str) -> Result<DefDesign, EmitError> {
    let mut t = DefTokens::new(text);
    let mut design = String::new();
    let mut die_area = None;
    let mut components = Vec::new();
    loop {
        let (tok, ..) = t.next()?;
        match tok {
            "DESIGN" => {
                design = t.next()?.0.to_string();
                t.expect(";")?;
            }
            "UNITS" => {
                t.expect("DISTANCE")?;
                t.expect("MICRONS")?;
                let u = t.int()?;
                if u != 1000 {
                    return Err(t.err(format!("unsupported UNITS DISTANCE MICRONS {u}")));
                }
                t.expect(";")?;
            }
            "DIEAREA" => {
                let a = t.point()?;
                let b = t.point()?;
                t.expect(";")?;
                die_area = Some(Rect::from_corners(a.0, a.1, b.0, b.1));
            }
            "COMPONENTS" => {
                let n = t.int()?;
                t.expect(";")?;
                loop {
                    let (head, ..) = t.next()?;
                    if head == "END" {
                        t.expect("COMPONENTS")?;
                        break;
                    }
                    if head != "-" {
                        return Err(t.err(format!("expected `-` or `END COMPONENTS`, found `{head}`")));
                    }
                    let name = t.next()?.0.to_string();
                    let cell = t.next()?.0.to_string();
                    t.expect("+")?;
                    let (kw, ..) = t.next()?;
                    if kw != "PLACED" && kw != "FIXED" {
                        return Err(t.err(format!("expected PLACED or FIXED, found `{kw}`")));
                    }
                    let origin = t.point()?;
                    let (code, line, _) = t.next()?;
                    let orientation = Orientation::from_def_code(code).ok_or_else(|| {
                        EmitError::UnknownOrientationCode {
                            line,
                            code: code.to_string(),
                        }
                    })?;
                    t.expect(";")?;
                    components.push(Placement {
                        name,
                        cell,
                        origin,
                        orientation,
                    });
                }
                if components.len() as i64 != n {
                    return Err(t.err(format!(
                        "COMPONENTS declares {n} entries but lists {}",
                        components.len()
                    )));
                }
            }
            "END" => {
                t.expect("DESIGN")?;
                break;
            }
            _ => t.skip_statement()?,
        }
    }
    let die_area = die_area.ok_or_else(|| t.err("missing DIEAREA"))?;
    Ok(DefDesign {
        design,
        die_area,
        components,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abut::{gen_type_aa, gen_type_ab};
    use crate::libio::{parse_rules, CellProfile};

    fn cell(name: &str, width: i64) -> CellProfile {
        CellProfile {
            name: name.into(),
            width,
            height: 576,
            height_rows: 1,
            pins: vec![],
            shapes: vec![],
        }
    }

    fn deck(interaction: i64) -> RuleDeck {
        parse_rules(&format!(
            "row_height = 576\nsite_width = 50\ninteraction_distance = {interaction}\n"
        ))
        .unwrap()
    }

    #[test]
    fn single_case_floorplan() {
        let c = gen_type_aa(&cell("INV", 200), 576);
        let fp = plan_floorplan(&[c], &deck(64), 10_000).unwrap();
        assert_eq!(fp.die_area, Rect::new(0, 0, 800, 576));
    }

    #[test]
    fn second_case_wraps() {
        let c = gen_type_aa(&cell("INV", 200), 576);
        let d = deck(64);
        assert_eq!(case_gap(&d), 150);
        let fp = plan_floorplan(&[c.clone(), c], &d, 1000).unwrap();
        assert_eq!(fp.slots[1], CaseSlot { row: 1, x: 0 });
        assert_eq!(fp.die_area, Rect::new(0, 0, 800, 1152));
        let gp = fp.global_placements(&[gen_type_aa(&cell("INV", 200), 576), gen_type_aa(&cell("INV", 200), 576)]);
        assert_eq!(gp[4].orientation, Orientation::R180);
        assert_eq!(gp[5].orientation, Orientation::MX);
    }

    #[test]
    fn gap_respects_interaction_distance() {
        for d in [1, 49, 64, 100, 333] {
            let deck = deck(d);
            let g = case_gap(&deck);
            assert!(g >= 2 * d && g >= deck.site_width && g % deck.site_width == 0);
        }
    }

    #[test]
    fn too_wide() {
        let c = gen_type_aa(&cell("INV", 200), 576);
        assert!(matches!(
            plan_floorplan(&[c], &deck(64), 700),
            Err(EmitError::CaseTooWide { .. })
        ));
    }

    #[test]
    fn verilog_shapes() {
        let inv = cell("INV", 200);
        let nand = cell("NAND2", 300);
        let v = emit_verilog(&[gen_type_aa(&inv, 576)]).unwrap();
        assert!(v.contains("module scell_INV ();\n  INV U1 ();\n  INV U2 ();\n  INV U3 ();\n  INV U4 ();\nendmodule"));
        assert!(v.contains("module TOP ();\n  scell_INV sinst_INV ();\nendmodule"));
        let v = emit_verilog(&[gen_type_ab(&inv, &nand, 576).unwrap()]).unwrap();
        assert!(v.contains(
            "module scell_INV_NAND2 ();\n  NAND2 U1 ();\n  INV U2 ();\n  NAND2 U3 ();\n  INV U4 ();\n  NAND2 U5 ();\nendmodule"
        ));
        assert_eq!(emit_verilog(&[]).unwrap(), "module TOP ();\nendmodule\n");
        let a = gen_type_aa(&cell("X.1", 200), 576);
        let b = gen_type_aa(&cell("X-1", 200), 576);
        assert_eq!(emit_verilog(&[a, b]), Err(EmitError::NameCollision("scell_X_1".into())));
    }

    #[test]
    fn def_lines() {
        let c = gen_type_aa(&cell("INV", 200), 576);
        let fp = plan_floorplan(std::slice::from_ref(&c), &deck(64), 10_000).unwrap();
        let def = emit_def(std::slice::from_ref(&c), &fp);
        assert!(def.starts_with("VERSION 5.6 ;\nDESIGN TOP ;\nUNITS DISTANCE MICRONS 1000 ;\n"));
        assert!(def.contains("COMPONENTS 4 ;\n"));
        assert!(def.contains("- sinst_INV/U2 INV + PLACED ( 200 0 ) N ;\n"));
        assert!(def.contains("- sinst_INV/U4 INV + PLACED ( 600 0 ) FN ;\n"));
        assert!(def.contains("DIEAREA ( 0 0 ) ( 800 576 ) ;\n"));
        let parsed = parse_def(&def).unwrap();
        assert_eq!(parsed.components[0].orientation, Orientation::MY);
        assert_eq!(write_def(&parsed), def);
    }

    #[test]
    fn def_unknown_orientation() {
        let text = "VERSION 5.6 ;\nDESIGN TOP ;\nDIEAREA ( 0 0 ) ( 10 10 ) ;\nCOMPONENTS 1 ;\n- a/U1 INV + PLACED ( 0 0 ) FW ;\nEND COMPONENTS\nEND DESIGN\n";
        assert_eq!(
            parse_def(text),
            Err(EmitError::UnknownOrientationCode {
                line: 5,
                code: "FW".into()
            })
        );
    }

    #[test]
    fn def_syntax_error() {
        assert!(matches!(
            parse_def("VERSION 5.6 ;\nDIEAREA ( 0 0 ( 1 1 ) ;\n"),
            Err(EmitError::Syntax { line: 2, .. })
        ));
    }
}
