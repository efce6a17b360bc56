//! Library and rule-deck input.
//!
//! Cell libraries are read from a small LEF subset: `SITE` gives the row
//! height and placement grid, each `MACRO` gives a cell outline, its pins and
//! its `OBS` geometry. Double-patterning masks are carried in the layer name:
//! `M1_E1` is layer `M1` on mask 1, `M1_E2` is mask 2, plain `M1` is
//! uncolored. All coordinates are converted to integer database units at
//! 1000 DBU per micron; values that do not convert exactly are rejected.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Rect;
use crate::verify::HotspotPattern;

/// Database units per micron.
pub const DBU_PER_MICRON: i64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub enum Mask {
    #[default]
    None,
    Mask1,
    Mask2,
}

impl Mask {
    pub fn is_colored(self) -> bool {
        self != Mask::None
    }

    pub fn opposite(self) -> Mask {
        match self {
            Mask::Mask1 => Mask::Mask2,
            Mask::Mask2 => Mask::Mask1,
            Mask::None => Mask::None,
        }
    }

    /// Layer-name suffix used in library files.
    pub fn suffix(self) -> &'static str {
        match self {
            Mask::None => "",
            Mask::Mask1 => "_E1",
            Mask::Mask2 => "_E2",
        }
    }

    /// Splits `M1_E2` into (`M1`, Mask2).
    pub fn split_layer(name: &str) -> (&str, Mask) {
        if let Some(base) = name.strip_suffix("_E1") {
            if !base.is_empty() {
                return (base, Mask::Mask1);
            }
        }
        if let Some(base) = name.strip_suffix("_E2") {
            if !base.is_empty() {
                return (base, Mask::Mask2);
            }
        }
        (name, Mask::None)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColoredRect {
    pub layer: String,
    pub mask: Mask,
    pub rect: Rect,
}

impl ColoredRect {
    pub fn new(layer: impl Into<String>, mask: Mask, rect: Rect) -> Self {
        ColoredRect {
            layer: layer.into(),
            mask,
            rect,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PinDef {
    pub name: String,
    pub rects: Vec<ColoredRect>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellProfile {
    pub name: String,
    pub width: i64,
    pub height: i64,
    /// Height as a multiple of the library row height.
    pub height_rows: u32,
    pub pins: Vec<PinDef>,
    pub shapes: Vec<ColoredRect>,
}

impl CellProfile {
    pub fn is_single_height(&self) -> bool {
        self.height_rows == 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellLibrary {
    pub name: String,
    pub row_height: i64,
    pub site_width: i64,
    /// Cells in file order; this order drives testcase enumeration.
    pub cells: Vec<CellProfile>,
}

impl CellLibrary {
    pub fn cell(&self, name: &str) -> Option<&CellProfile> {
        self.cells.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LibError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}: duplicate cell {name}")]
    DuplicateCell { name: String, line: usize },
    #[error("{line}: duplicate pin {pin} in cell {cell}")]
    DuplicatePin {
        cell: String,
        pin: String,
        line: usize,
    },
    #[error("cell {cell}: height {height} is not a multiple of the row height {row_height}")]
    NonIntegerHeight {
        cell: String,
        height: i64,
        row_height: i64,
    },
    #[error("cell {cell}: shape on {layer} at {rect} lies outside the cell outline")]
    ShapeOutOfBounds {
        cell: String,
        layer: String,
        rect: Rect,
    },
    #[error("library has no SITE definition; the row height is unknown")]
    MissingSite,
}

/// Converts a decimal micron string to DBU without rounding.
pub fn parse_dbu(token: &str) -> Result<i64, String> {
    let (neg, body) = match token.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, token.strip_prefix('+').unwrap_or(token)),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(format!("expected a number, found `{token}`"));
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("expected a number, found `{token}`"));
    }
    if frac_part.len() > 3 {
        return Err(format!("`{token}` has more than 3 decimals and is not an exact DBU value"));
    }
    let int_val: i64 = if int_part.is_empty() {
        0
    } else {
        int_part
            .parse()
            .map_err(|_| format!("number `{token}` out of range"))?
    };
    let mut frac_val: i64 = if frac_part.is_empty() {
        0
    } else {
        frac_part.parse().unwrap_or(0)
    };
    for _ in frac_part.len()..3 {
        frac_val *= 10;
    }
    let v = int_val
        .checked_mul(DBU_PER_MICRON)
        .and_then(|v| v.checked_add(frac_val))
        .ok_or_else(|| format!("number `{token}` out of range"))?;
    Ok(if neg { -v } else { v })
}

/// Renders DBU as a micron decimal string with trailing zeros trimmed.
pub fn format_um(dbu: i64) -> String {
    let sign = if dbu < 0 { "-" } else { "" };
    let a = dbu.unsigned_abs();
    let int = a / DBU_PER_MICRON as u64;
    let frac = a % DBU_PER_MICRON as u64;
    if frac == 0 {
        format!("{sign}{int}")
    } else {
        let f = format!("{frac:03}");
        format!("{sign}{int}.{}", f.trim_end_matches('0'))
    }
}

#[derive(Debug, Clone)]
struct Token<'a> {
    text: &'a str,
    line: usize,
    col: usize,
}

fn tokenize<'a>(text: &'a str) -> Vec<Token<'a>> {
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let line = match line.find('#') {
            Some(p) => &line[..p],
            None => line,
        };
        let mut start: Option<usize> = None;
        let bytes = line.as_bytes();
        let push = |s: usize, e: usize, out: &mut Vec<Token<'a>>| {
            out.push(Token {
                text: &line[s..e],
                line: li + 1,
                col: s + 1,
            })
        };
        for (i, &b) in bytes.iter().enumerate() {
            if b.is_ascii_whitespace() || b == b';' {
                if let Some(s) = start.take() {
                    push(s, i, &mut out);
                }
                if b == b';' {
                    push(i, i + 1, &mut out);
                }
            } else if start.is_none() {
                start = Some(i);
            }
        }
        if let Some(s) = start {
            push(s, bytes.len(), &mut out);
        }
    }
    out
}

struct Parser<'a> {
    toks: Vec<Token<'a>>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token<'a>> {
        self.toks.get(self.pos)
    }

    fn err_at(&self, tok: Option<&Token<'_>>, msg: impl Into<String>) -> LibError {
        let (line, col) = match tok {
            Some(t) => (t.line, t.col),
            None => self
                .toks
                .last()
                .map(|t| (t.line, t.col + t.text.len()))
                .unwrap_or((1, 1)),
        };
        LibError::Syntax {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn next(&mut self, what: &str) -> Result<Token<'a>, LibError> {
        match self.toks.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => Err(self.err_at(None, format!("unexpected end of file, expected {what}"))),
        }
    }

    fn expect(&mut self, word: &str) -> Result<Token<'a>, LibError> {
        let t = self.next(&format!("`{word}`"))?;
        if t.text.eq_ignore_ascii_case(word) {
            Ok(t)
        } else {
            Err(self.err_at(Some(&t), format!("expected `{word}`, found `{}`", t.text)))
        }
    }

    fn number(&mut self) -> Result<i64, LibError> {
        let t = self.next("a number")?;
        parse_dbu(t.text).map_err(|m| self.err_at(Some(&t), m))
    }

    fn skip_statement(&mut self) -> Result<(), LibError> {
        loop {
            let t = self.next("`;`")?;
            if t.text == ";" {
                return Ok(());
            }
        }
    }

    /// `SIZE w BY h ;`
    fn size(&mut self) -> Result<(i64, i64), LibError> {
        let w = self.number()?;
        self.expect("BY")?;
        let h = self.number()?;
        self.expect(";")?;
        Ok((w, h))
    }

    /// Body of `PORT` or `OBS` up to and including its `END`.
    fn geometry(&mut self) -> Result<Vec<ColoredRect>, LibError> {
        let mut out = Vec::new();
        let mut layer: Option<(String, Mask)> = None;
        loop {
            let t = self.next("`END`")?;
            match t.text.to_ascii_uppercase().as_str() {
                "END" => return Ok(out),
                "LAYER" => {
                    let name = self.next("a layer name")?;
                    let (base, mask) = Mask::split_layer(name.text);
                    layer = Some((base.to_string(), mask));
                    self.skip_statement()?;
                }
                "RECT" => {
                    let Some((ref lname, mask)) = layer else {
                        return Err(self.err_at(Some(&t), "RECT before any LAYER"));
                    };
                    let x1 = self.number()?;
                    let y1 = self.number()?;
                    let x2 = self.number()?;
                    let y2 = self.number()?;
                    self.expect(";")?;
                    let rect = Rect::from_corners(x1, y1, x2, y2);
                    if !rect.is_valid() {
                        return Err(self.err_at(Some(&t), "degenerate RECT with zero area"));
                    }
                    out.push(ColoredRect::new(lname.clone(), mask, rect));
                }
                _ => {
                    self.pos -= 1;
                    self.skip_statement()?;
                }
            }
        }
    }

    fn pin(&mut self, name: &str) -> Result<PinDef, LibError> {
        let mut rects = Vec::new();
        loop {
            let t = self.next("`END`")?;
            match t.text.to_ascii_uppercase().as_str() {
                "END" => {
                    let n = self.next("the pin name")?;
                    if n.text != name {
                        return Err(self.err_at(Some(&n), format!("expected `END {name}`")));
                    }
                    return Ok(PinDef {
                        name: name.to_string(),
                        rects,
                    });
                }
                "PORT" => rects.extend(self.geometry()?),
                _ => {
                    self.pos -= 1;
                    self.skip_statement()?;
                }
            }
        }
    }
}

struct RawMacro {
    name: String,
    line: usize,
    size: Option<(i64, i64)>,
    pins: Vec<(PinDef, usize)>,
    shapes: Vec<ColoredRect>,
}

/// Parses a library file. The library takes the name `library`; see
/// [`parse_library_named`].
pub fn parse_library(text: &str) -> Result<CellLibrary, LibError> {
    parse_library_named("library", text)
}

pub fn parse_library_named(name: &str, text: &str) -> Result<CellLibrary, LibError> {
    let mut p = Parser {
        toks: tokenize(text),
        pos: 0,
    };
    let mut site: Option<(i64, i64)> = None;
    let mut macros: Vec<RawMacro> = Vec::new();

    while let Some(t) = p.peek().cloned() {
        p.pos += 1;
        match t.text.to_ascii_uppercase().as_str() {
            "SITE" => {
                let sname = p.next("a site name")?;
                let mut size = None;
                loop {
                    let k = p.next("`END`")?;
                    if k.text.eq_ignore_ascii_case("END") {
                        let n = p.next("the site name")?;
                        if n.text != sname.text {
                            return Err(p.err_at(Some(&n), format!("expected `END {}`", sname.text)));
                        }
                        break;
                    } else if k.text.eq_ignore_ascii_case("SIZE") {
                        size = Some(p.size()?);
                    } else {
                        p.pos -= 1;
                        p.skip_statement()?;
                    }
                }
                let Some(size) = size else {
                    return Err(p.err_at(Some(&sname), "SITE without SIZE"));
                };
                if size.0 <= 0 || size.1 <= 0 {
                    return Err(p.err_at(Some(&sname), "SITE SIZE must be positive"));
                }
                // The first site defines the core row.
                site.get_or_insert(size);
            }
            "MACRO" => {
                let mname = p.next("a macro name")?;
                let mut m = RawMacro {
                    name: mname.text.to_string(),
                    line: mname.line,
                    size: None,
                    pins: Vec::new(),
                    shapes: Vec::new(),
                };
                loop {
                    let k = p.next("`END`")?;
                    match k.text.to_ascii_uppercase().as_str() {
                        "END" => {
                            let n = p.next("the macro name")?;
                            if n.text != m.name {
                                return Err(p.err_at(Some(&n), format!("expected `END {}`", m.name)));
                            }
                            break;
                        }
                        "SIZE" => m.size = Some(p.size()?),
                        "PIN" => {
                            let pname = p.next("a pin name")?;
                            let pin = p.pin(pname.text)?;
                            m.pins.push((pin, pname.line));
                        }
                        "OBS" => m.shapes.extend(p.geometry()?),
                        _ => {
                            p.pos -= 1;
                            p.skip_statement()?;
                        }
                    }
                }
                if m.size.is_none() {
                    return Err(p.err_at(Some(&mname), format!("macro {} has no SIZE", m.name)));
                }
                macros.push(m);
            }
            "UNITS" => loop {
                let k = p.next("`END UNITS`")?;
                if k.text.eq_ignore_ascii_case("END") {
                    p.expect("UNITS")?;
                    break;
                }
            },
            "END" => {
                p.expect("LIBRARY")?;
                break;
            }
            _ => {
                p.pos -= 1;
                p.skip_statement()?;
            }
        }
    }

    let (site_width, row_height) = site.ok_or(LibError::MissingSite)?;
    let mut seen = HashSet::new();
    let mut cells = Vec::with_capacity(macros.len());
    for m in macros {
        if !seen.insert(m.name.clone()) {
            return Err(LibError::DuplicateCell {
                name: m.name,
                line: m.line,
            });
        }
        let (width, height) = m.size.expect("checked above");
        if width <= 0 || height <= 0 {
            return Err(LibError::Syntax {
                line: m.line,
                col: 1,
                msg: format!("macro {} has a non-positive SIZE", m.name),
            });
        }
        if height % row_height != 0 {
            return Err(LibError::NonIntegerHeight {
                cell: m.name,
                height,
                row_height,
            });
        }
        let outline = Rect::new(0, 0, width, height);
        let mut pin_names = HashSet::new();
        for (pin, line) in &m.pins {
            if !pin_names.insert(pin.name.as_str()) {
                return Err(LibError::DuplicatePin {
                    cell: m.name.clone(),
                    pin: pin.name.clone(),
                    line: *line,
                });
            }
        }
        for r in m.shapes.iter().chain(m.pins.iter().flat_map(|(p, _)| p.rects.iter())) {
            if !outline.contains(&r.rect) {
                return Err(LibError::ShapeOutOfBounds {
                    cell: m.name.clone(),
                    layer: r.layer.clone(),
                    rect: r.rect,
                });
            }
        }
        cells.push(CellProfile {
            name: m.name,
            width,
            height,
            height_rows: (height / row_height) as u32,
            pins: m.pins.into_iter().map(|(p, _)| p).collect(),
            shapes: m.shapes,
        });
    }
    Ok(CellLibrary {
        name: name.to_string(),
        row_height,
        site_width,
        cells,
    })
}

fn write_geometry(out: &mut String, indent: &str, rects: &[ColoredRect]) {
    let mut current: Option<String> = None;
    for r in rects {
        let lname = format!("{}{}", r.layer, r.mask.suffix());
        if current.as_deref() != Some(lname.as_str()) {
            let _ = writeln!(out, "{indent}LAYER {lname} ;");
            current = Some(lname);
        }
        let _ = writeln!(
            out,
            "{indent}  RECT {} {} {} {} ;",
            format_um(r.rect.x1),
            format_um(r.rect.y1),
            format_um(r.rect.x2),
            format_um(r.rect.y2)
        );
    }
}

/// Writes a library in the same LEF subset that [`parse_library`] reads.
pub fn write_library(lib: &CellLibrary) -> String {
    let mut out = String::new();
    out.push_str("VERSION 5.8 ;\n\n");
    let _ = writeln!(out, "SITE core");
    out.push_str("  CLASS CORE ;\n");
    let _ = writeln!(
        out,
        "  SIZE {} BY {} ;",
        format_um(lib.site_width),
        format_um(lib.row_height)
    );
    out.push_str("END core\n\n");
    for c in &lib.cells {
        let _ = writeln!(out, "MACRO {}", c.name);
        out.push_str("  CLASS CORE ;\n");
        let _ = writeln!(out, "  SIZE {} BY {} ;", format_um(c.width), format_um(c.height));
        for p in &c.pins {
            let _ = writeln!(out, "  PIN {}", p.name);
            if !p.rects.is_empty() {
                out.push_str("    PORT\n");
                write_geometry(&mut out, "      ", &p.rects);
                out.push_str("    END\n");
            }
            let _ = writeln!(out, "  END {}", p.name);
        }
        if !c.shapes.is_empty() {
            out.push_str("  OBS\n");
            write_geometry(&mut out, "    ", &c.shapes);
            out.push_str("  END\n");
        }
        let _ = writeln!(out, "END {}\n", c.name);
    }
    out.push_str("END LIBRARY\n");
    out
}

/// Width and row-count histograms of a library.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct LibraryStats {
    pub library: String,
    pub width_histogram: BTreeMap<i64, usize>,
    pub rows_histogram: BTreeMap<u32, usize>,
    pub n_single: usize,
    pub n_multi: usize,
    pub pin_count: usize,
}

impl LibraryStats {
    pub fn total(&self) -> usize {
        self.n_single + self.n_multi
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "library {}", self.library);
        let _ = writeln!(
            out,
            "cells {} (single-height {}, multi-height {}), pins {}",
            self.total(),
            self.n_single,
            self.n_multi,
            self.pin_count
        );
        out.push_str("width_dbu count\n");
        for (w, n) in &self.width_histogram {
            let _ = writeln!(out, "{w} {n}");
        }
        out.push_str("height_rows count\n");
        for (r, n) in &self.rows_histogram {
            let _ = writeln!(out, "{r} {n}");
        }
        out
    }
}

pub fn profile(library: &CellLibrary) -> LibraryStats {
    let mut stats = LibraryStats {
        library: library.name.clone(),
        ..Default::default()
    };
    for c in &library.cells {
        *stats.width_histogram.entry(c.width).or_default() += 1;
        *stats.rows_histogram.entry(c.height_rows).or_default() += 1;
        if c.is_single_height() {
            stats.n_single += 1;
        } else {
            stats.n_multi += 1;
        }
        stats.pin_count += c.pins.len();
    }
    stats
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerRule {
    pub name: String,
    pub min_width: i64,
    /// Minimum spacing between any two unconnected shapes.
    pub spacing_any_mask: i64,
    /// Minimum spacing between two shapes on the same mask.
    pub spacing_same_mask: i64,
    pub dpt: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleDeck {
    pub row_height: i64,
    pub site_width: i64,
    pub layers: Vec<LayerRule>,
    /// Largest distance any rule or pattern can look across.
    pub interaction_distance: i64,
    pub hotspot_patterns: Vec<HotspotPattern>,
}

impl RuleDeck {
    pub fn layer(&self, name: &str) -> Option<&LayerRule> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn is_dpt(&self, layer: &str) -> bool {
        self.layer(layer).is_some_and(|l| l.dpt)
    }

    pub fn dpt_layers(&self) -> impl Iterator<Item = &LayerRule> {
        self.layers.iter().filter(|l| l.dpt)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RuleError {
    #[error("rule deck syntax: {0}")]
    Syntax(String),
    #[error("rule deck is missing {0}")]
    MissingRule(String),
    #[error("layer {layer}: same-mask spacing {same} is below the any-mask spacing {any}")]
    InconsistentSpacing { layer: String, same: i64, any: i64 },
    #[error("{what}: {reason}")]
    Invalid { what: String, reason: String },
    #[error("interaction distance {given} is below the largest rule reach {required}")]
    InteractionTooSmall { given: i64, required: i64 },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDeck {
    row_height: Option<i64>,
    site_width: Option<i64>,
    interaction_distance: Option<i64>,
    #[serde(default, rename = "layer")]
    layers: Vec<RawLayer>,
    #[serde(default, rename = "pattern")]
    patterns: Vec<RawPattern>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    name: Option<String>,
    min_width: Option<i64>,
    spacing_any_mask: Option<i64>,
    spacing_same_mask: Option<i64>,
    #[serde(default)]
    dpt: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPattern {
    name: Option<String>,
    layer: Option<String>,
    masks: Option<Vec<u8>>,
    min_gap: Option<i64>,
    max_gap: Option<i64>,
    min_run_length: Option<i64>,
}

fn positive(what: impl Into<String>, v: i64) -> Result<i64, RuleError> {
    if v > 0 {
        Ok(v)
    } else {
        Err(RuleError::Invalid {
            what: what.into(),
            reason: format!("must be positive, got {v}"),
        })
    }
}

/// Parses a TOML rule deck.
///
/// ```toml
/// row_height = 576
/// site_width = 50
/// interaction_distance = 128   # optional, defaults to the largest rule reach
///
/// [[layer]]
/// name = "M1"
/// min_width = 32
/// spacing_any_mask = 32
/// spacing_same_mask = 64
/// dpt = true
///
/// [[pattern]]
/// name = "M1_BRIDGE"
/// layer = "M1"
/// masks = [1, 2, 1, 2]
/// min_gap = 64                 # optional, defaults to 1
/// max_gap = 80
/// min_run_length = 200
/// ```
pub fn parse_rules(text: &str) -> Result<RuleDeck, RuleError> {
    let raw: RawDeck = toml::from_str(text).map_err(|e| RuleError::Syntax(e.to_string()))?;
    let row_height = positive(
        "row_height",
        raw.row_height
            .ok_or_else(|| RuleError::MissingRule("row_height".into()))?,
    )?;
    let site_width = positive(
        "site_width",
        raw.site_width
            .ok_or_else(|| RuleError::MissingRule("site_width".into()))?,
    )?;

    let mut layers = Vec::new();
    let mut names = HashSet::new();
    for (i, l) in raw.layers.into_iter().enumerate() {
        let name = l
            .name
            .ok_or_else(|| RuleError::MissingRule(format!("name of layer #{}", i + 1)))?;
        if !names.insert(name.clone()) {
            return Err(RuleError::Invalid {
                what: format!("layer {name}"),
                reason: "declared twice".into(),
            });
        }
        let min_width = positive(
            format!("layer {name} min_width"),
            l.min_width
                .ok_or_else(|| RuleError::MissingRule(format!("min_width of layer {name}")))?,
        )?;
        let any = positive(
            format!("layer {name} spacing_any_mask"),
            l.spacing_any_mask
                .ok_or_else(|| RuleError::MissingRule(format!("spacing_any_mask of layer {name}")))?,
        )?;
        let same = match (l.spacing_same_mask, l.dpt) {
            (Some(s), _) => s,
            (None, false) => any,
            (None, true) => {
                return Err(RuleError::MissingRule(format!(
                    "spacing_same_mask of double-patterning layer {name}"
                )))
            }
        };
        if same < any {
            return Err(RuleError::InconsistentSpacing {
                layer: name,
                same,
                any,
            });
        }
        layers.push(LayerRule {
            name,
            min_width,
            spacing_any_mask: any,
            spacing_same_mask: same,
            dpt: l.dpt,
        });
    }

    let mut patterns = Vec::new();
    for (i, p) in raw.patterns.into_iter().enumerate() {
        let name = p
            .name
            .ok_or_else(|| RuleError::MissingRule(format!("name of pattern #{}", i + 1)))?;
        let layer = p
            .layer
            .ok_or_else(|| RuleError::MissingRule(format!("layer of pattern {name}")))?;
        if !names.contains(&layer) {
            return Err(RuleError::MissingRule(format!(
                "layer rule for {layer} (used by pattern {name})"
            )));
        }
        let masks = p
            .masks
            .ok_or_else(|| RuleError::MissingRule(format!("masks of pattern {name}")))?;
        let masks = masks
            .into_iter()
            .map(|m| match m {
                1 => Ok(Mask::Mask1),
                2 => Ok(Mask::Mask2),
                other => Err(RuleError::Invalid {
                    what: format!("pattern {name} masks"),
                    reason: format!("mask must be 1 or 2, got {other}"),
                }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        if masks.len() < 2 {
            return Err(RuleError::Invalid {
                what: format!("pattern {name} masks"),
                reason: "a pattern needs at least two tracks".into(),
            });
        }
        let max_gap = positive(
            format!("pattern {name} max_gap"),
            p.max_gap
                .ok_or_else(|| RuleError::MissingRule(format!("max_gap of pattern {name}")))?,
        )?;
        let min_gap = positive(format!("pattern {name} min_gap"), p.min_gap.unwrap_or(1))?;
        if min_gap > max_gap {
            return Err(RuleError::Invalid {
                what: format!("pattern {name}"),
                reason: format!("min_gap {min_gap} exceeds max_gap {max_gap}"),
            });
        }
        let min_run_length = positive(
            format!("pattern {name} min_run_length"),
            p.min_run_length
                .ok_or_else(|| RuleError::MissingRule(format!("min_run_length of pattern {name}")))?,
        )?;
        patterns.push(HotspotPattern {
            name,
            layer,
            mask_sequence: masks,
            min_gap,
            max_gap,
            min_run_length,
        });
    }

    let required = layers
        .iter()
        .map(|l| l.spacing_same_mask.max(l.spacing_any_mask))
        .chain(patterns.iter().map(|p| p.max_gap))
        .max()
        .unwrap_or(0);
    let interaction_distance = match raw.interaction_distance {
        Some(d) if d < required || d <= 0 => {
            return Err(RuleError::InteractionTooSmall {
                given: d,
                required: required.max(1),
            })
        }
        Some(d) => d,
        None => required.max(site_width),
    };

    Ok(RuleDeck {
        row_height,
        site_width,
        layers,
        interaction_distance,
        hotspot_patterns: patterns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_CELL: &str = "
SITE core
  SIZE 0.05 BY 0.576 ;
END core
MACRO INV
  CLASS CORE ;
  SIZE 0.2 BY 0.576 ;
  PIN A
    DIRECTION INPUT ;
    PORT
      LAYER M1 ;
        RECT 0.04 0.12 0.072 0.456 ;
    END
  END A
  OBS
    LAYER M1_E1 ;
      RECT 0 0 0.2 0.04 ;
    LAYER M1_E2 ;
      RECT 0.128 0.12 0.16 0.456 ;
  END
END INV
END LIBRARY
";

    #[test]
    fn single_cell_dimensions_and_masks() {
        let lib = parse_library(ONE_CELL).unwrap();
        assert_eq!(lib.row_height, 576);
        assert_eq!(lib.site_width, 50);
        let c = &lib.cells[0];
        assert_eq!((c.width, c.height, c.height_rows), (200, 576, 1));
        assert_eq!(c.pins.len(), 1);
        assert_eq!(c.pins[0].rects[0].rect, Rect::new(40, 120, 72, 456));
        assert_eq!(c.shapes[0].mask, Mask::Mask1);
        assert_eq!(c.shapes[0].layer, "M1");
        assert_eq!(c.shapes[1].mask, Mask::Mask2);
    }

    #[test]
    fn double_height_cell() {
        let text = ONE_CELL.replace("SIZE 0.2 BY 0.576", "SIZE 0.4 BY 1.152");
        let lib = parse_library(&text).unwrap();
        assert_eq!(lib.cells[0].height_rows, 2);
    }

    #[test]
    fn non_integer_height_rejected() {
        let text = ONE_CELL.replace("SIZE 0.2 BY 0.576", "SIZE 0.2 BY 0.8");
        assert!(matches!(
            parse_library(&text),
            Err(LibError::NonIntegerHeight { height: 800, row_height: 576, .. })
        ));
    }

    #[test]
    fn shape_out_of_bounds_rejected() {
        let text = ONE_CELL.replace("RECT 0 0 0.2 0.04", "RECT 0 0 0.25 0.04");
        assert!(matches!(
            parse_library(&text),
            Err(LibError::ShapeOutOfBounds { .. })
        ));
    }

    #[test]
    fn duplicate_cell_rejected() {
        let body = ONE_CELL.replace("END LIBRARY", "");
        let macro_text = &body[body.find("MACRO").unwrap()..];
        let text = format!("{body}{macro_text}END LIBRARY\n");
        assert!(matches!(
            parse_library(&text),
            Err(LibError::DuplicateCell { .. })
        ));
    }

    #[test]
    fn syntax_error_is_located() {
        let text = ONE_CELL.replace("SIZE 0.2 BY 0.576", "SIZE 0.2 XY 0.576");
        match parse_library(&text) {
            Err(LibError::Syntax { line, col, .. }) => {
                assert_eq!(line, 7);
                assert_eq!(col, 12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn excess_precision_rejected() {
        assert!(parse_dbu("0.0005").is_err());
        assert_eq!(parse_dbu("0.576"), Ok(576));
        assert_eq!(parse_dbu("-1.5"), Ok(-1500));
        assert_eq!(parse_dbu(".25"), Ok(250));
        assert!(parse_dbu("1e3").is_err());
        assert!(parse_dbu(".").is_err());
    }

    #[test]
    fn stats_histograms() {
        let mut lib = parse_library(ONE_CELL).unwrap();
        let mut c2 = lib.cells[0].clone();
        c2.name = "INV2".into();
        let mut c3 = lib.cells[0].clone();
        c3.name = "BUF".into();
        c3.width = 400;
        lib.cells.push(c2);
        lib.cells.push(c3);
        let s = profile(&lib);
        assert_eq!(s.width_histogram, BTreeMap::from([(200, 2), (400, 1)]));
        assert_eq!(s.rows_histogram, BTreeMap::from([(1, 3)]));
        assert_eq!((s.n_single, s.n_multi), (3, 0));
    }

    const DECK: &str = r#"
row_height = 576
site_width = 50
[[layer]]
name = "M1"
min_width = 32
spacing_any_mask = 32
spacing_same_mask = 64
dpt = true
"#;

    #[test]
    fn deck_valid() {
        let d = parse_rules(DECK).unwrap();
        assert_eq!(d.layers[0].spacing_same_mask, 64);
        assert_eq!(d.interaction_distance, 64);
        assert!(d.is_dpt("M1"));
    }

    #[test]
    fn deck_inconsistent_spacing() {
        let t = DECK
            .replace("spacing_any_mask = 32", "spacing_any_mask = 40")
            .replace("spacing_same_mask = 64", "spacing_same_mask = 20");
        assert!(matches!(
            parse_rules(&t),
            Err(RuleError::InconsistentSpacing { same: 20, any: 40, .. })
        ));
    }

    #[test]
    fn deck_missing_row_height() {
        let t = DECK.replace("row_height = 576", "");
        assert_eq!(
            parse_rules(&t),
            Err(RuleError::MissingRule("row_height".into()))
        );
    }

    #[test]
    fn deck_interaction_too_small() {
        let t = format!("interaction_distance = 50\n{DECK}");
        assert!(matches!(
            parse_rules(&t),
            Err(RuleError::InteractionTooSmall { given: 50, required: 64 })
        ));
    }
}
