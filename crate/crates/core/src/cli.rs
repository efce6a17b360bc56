//! Command-line front end: `profile`, `generate`, `verify` and `report`.
//!
//! Settings come from an optional TOML config file and from flags; flags
//! win. Summaries go to stdout, diagnostics to stderr. Exit codes: 0 clean,
//! 1 violations found (or a count self-check failed), 2 execution error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abut::{enumerate_library, expected_count, total_placements, CaseKind, CountMode};
use crate::emitio::{emit_def, emit_verilog, plan_floorplan, EmitError};
use crate::libio::{parse_library_named, parse_rules, profile, CellLibrary, LibError, RuleDeck, RuleError};
use crate::report::{attribute_to_seams, render_svg, seam_report_text, seam_xs, summarize, violation_records};
use crate::verify::{run_all, DptOption, RunOptions, VerificationResult, VerifyError, DEFAULT_ROW_WIDTH};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_VIOLATIONS: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "seamcheck", version, about = "Abutment testcase generation and seam-level verification")]
pub struct Cli {
    /// TOML file with default settings; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Width and height histograms per library.
    Profile(Flags),
    /// Write Verilog, DEF and a count manifest per library.
    Generate(Flags),
    /// Check every library and write violation records and the summary.
    Verify(Flags),
    /// Like verify, plus SVG snapshots and seam reports.
    Report(Flags),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum OptionArg {
    #[value(name = "I")]
    #[serde(rename = "I")]
    I,
    #[value(name = "II")]
    #[serde(rename = "II")]
    II,
    #[value(name = "both")]
    #[serde(rename = "both")]
    Both,
}

impl OptionArg {
    fn options(self) -> Vec<DptOption> {
        match self {
            OptionArg::I => vec![DptOption::FixedColors],
            OptionArg::II => vec![DptOption::Recolor],
            OptionArg::Both => vec![DptOption::FixedColors, DptOption::Recolor],
        }
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flags {
    /// Library files (LEF subset); the file stem names the library.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    #[serde(default)]
    pub libs: Vec<PathBuf>,
    /// Rule deck (TOML).
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Coloring option: I keeps the drawn masks, II recolors after placement.
    #[arg(long, value_enum)]
    pub dpt_option: Option<OptionArg>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Row width for packing testcases, in DBU.
    #[arg(long)]
    pub max_row_width: Option<i64>,
    /// Most SVG files written per run.
    #[arg(long)]
    pub svg_cap: Option<usize>,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Half-width of the band around a seam that attributes violations to
    /// it, in DBU. Defaults to the rule deck's interaction distance.
    #[arg(long)]
    pub seam_window: Option<i64>,
    /// Space drawn around a violation in SVG snapshots, in DBU.
    #[arg(long)]
    pub svg_margin: Option<i64>,
}

impl Flags {
    /// Fields set here win over `base`.
    fn over(self, base: Flags) -> Flags {
        Flags {
            libs: if self.libs.is_empty() { base.libs } else { self.libs },
            rules: self.rules.or(base.rules),
            dpt_option: self.dpt_option.or(base.dpt_option),
            out: self.out.or(base.out),
            max_row_width: self.max_row_width.or(base.max_row_width),
            svg_cap: self.svg_cap.or(base.svg_cap),
            jobs: self.jobs.or(base.jobs),
            seam_window: self.seam_window.or(base.seam_window),
            svg_margin: self.svg_margin.or(base.svg_margin),
        }
    }
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub libs: Vec<PathBuf>,
    pub rules: Option<PathBuf>,
    pub options: Vec<DptOption>,
    pub out: PathBuf,
    pub max_row_width: Option<i64>,
    pub svg_cap: usize,
    pub jobs: usize,
    pub seam_window: Option<i64>,
    pub svg_margin: i64,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Library { path: PathBuf, source: LibError },
    #[error("{path}: {source}")]
    Rules { path: PathBuf, source: RuleError },
    #[error("config {path}: {msg}")]
    Config { path: PathBuf, msg: String },
    #[error("{0}")]
    Usage(String),
    #[error("library {library}: {source}")]
    Verify { library: String, source: VerifyError },
    #[error("library {library}: {source}")]
    Emit { library: String, source: EmitError },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

fn load_config(path: &Path) -> Result<Flags, CliError> {
    let text = read(path)?;
    let mut flags: Flags = toml::from_str(&text).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        msg: e.message().to_string(),
    })?;
    // Paths in a config file are relative to the file.
    let dir = path.parent().unwrap_or(Path::new(""));
    let rebase = |p: PathBuf| if p.is_relative() { dir.join(p) } else { p };
    flags.libs = flags.libs.into_iter().map(rebase).collect();
    flags.rules = flags.rules.map(rebase);
    flags.out = flags.out.map(rebase);
    Ok(flags)
}

pub fn resolve(config: Option<&Path>, flags: Flags) -> Result<RunConfig, CliError> {
    let base = match config {
        Some(p) => load_config(p)?,
        None => Flags::default(),
    };
    let f = flags.over(base);
    if f.libs.is_empty() {
        return Err(CliError::Usage("no libraries given (--libs)".into()));
    }
    if f.jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    Ok(RunConfig {
        libs: f.libs,
        rules: f.rules,
        options: f.dpt_option.unwrap_or(OptionArg::Both).options(),
        out: f.out.unwrap_or_else(|| PathBuf::from("seamcheck-out")),
        max_row_width: f.max_row_width,
        svg_cap: f.svg_cap.unwrap_or(100),
        jobs: f
            .jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
        seam_window: f.seam_window,
        svg_margin: f.svg_margin.unwrap_or(200),
    })
}

fn library_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "library".into())
}

pub fn load_library(path: &Path) -> Result<CellLibrary, CliError> {
    let text = read(path)?;
    parse_library_named(&library_name(path), &text).map_err(|source| CliError::Library {
        path: path.to_path_buf(),
        source,
    })
}

fn load_rules(cfg: &RunConfig) -> Result<RuleDeck, CliError> {
    let path = cfg
        .rules
        .as_deref()
        .ok_or_else(|| CliError::Usage("no rule deck given (--rules)".into()))?;
    parse_rules(&read(path)?).map_err(|source| CliError::Rules {
        path: path.to_path_buf(),
        source,
    })
}

fn load_libraries(cfg: &RunConfig) -> Result<Vec<CellLibrary>, CliError> {
    let libs: Vec<CellLibrary> = cfg.libs.iter().map(|p| load_library(p)).collect::<Result<_, _>>()?;
    for (i, l) in libs.iter().enumerate() {
        if libs[..i].iter().any(|o| o.name == l.name) {
            return Err(CliError::Usage(format!("two libraries are named {}", l.name)));
        }
    }
    Ok(libs)
}

/// Output of one subcommand: exit code plus the text for stdout.
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
}

pub fn cmd_profile(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut stdout = String::new();
    for lib in load_libraries(cfg)? {
        let stats = profile(&lib);
        let text = stats.to_text();
        write(&cfg.out.join(format!("{}.profile.txt", lib.name)), &text)?;
        let json = serde_json::to_string_pretty(&stats).expect("stats serialize") + "\n";
        write(&cfg.out.join(format!("{}.profile.json", lib.name)), &json)?;
        stdout += &text;
    }
    Ok(Outcome { code: EXIT_CLEAN, stdout })
}

/// Placement totals of one library checked against the closed forms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub library: String,
    pub n_single: u64,
    pub n_multi: u64,
    pub cases: usize,
    pub placements: u64,
    pub single_height_placements: u64,
    pub single_height_expected: u64,
    pub conventional_expected: u64,
    pub multi_height_placements: u64,
    pub multi_height_expected: u64,
    pub consistent: bool,
}

pub fn manifest(library: &CellLibrary) -> Manifest {
    let cases = enumerate_library(library);
    let n_single = library.cells.iter().filter(|c| c.is_single_height()).count() as u64;
    let single_height_placements = cases
        .iter()
        .filter(|c| matches!(c.kind, CaseKind::AaSingle | CaseKind::AbSingle))
        .map(|c| c.placements.len() as u64)
        .sum();
    let multi_height_expected = library
        .cells
        .iter()
        .filter(|c| !c.is_single_height())
        .map(|c| 4 + n_single * (3 * c.height_rows as u64 + 2))
        .sum();
    let placements = total_placements(&cases);
    let single_height_expected = expected_count(n_single, CountMode::Proposed);
    Manifest {
        library: library.name.clone(),
        n_single,
        n_multi: library.cells.len() as u64 - n_single,
        cases: cases.len(),
        placements,
        single_height_placements,
        single_height_expected,
        conventional_expected: expected_count(n_single, CountMode::Conventional),
        multi_height_placements: placements - single_height_placements,
        multi_height_expected,
        consistent: single_height_placements == single_height_expected
            && placements - single_height_placements == multi_height_expected,
    }
}

fn row_width(cfg: &RunConfig, widest: i64) -> i64 {
    cfg.max_row_width.unwrap_or_else(|| DEFAULT_ROW_WIDTH.max(widest))
}

pub fn cmd_generate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let rules = load_rules(cfg)?;
    let mut stdout = String::new();
    let mut code = EXIT_CLEAN;
    for lib in load_libraries(cfg)? {
        let emit = |source| CliError::Emit {
            library: lib.name.clone(),
            source,
        };
        let cases = enumerate_library(&lib);
        let widest = cases.iter().map(|c| c.width).max().unwrap_or(0);
        let fp = plan_floorplan(&cases, &rules, row_width(cfg, widest)).map_err(emit)?;
        let dir = cfg.out.join(&lib.name);
        write(&dir.join("cases.v"), &emit_verilog(&cases).map_err(emit)?)?;
        write(&dir.join("cases.def"), &emit_def(&cases, &fp))?;
        let m = manifest(&lib);
        write(&dir.join("manifest.json"), &(serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n"))?;
        stdout += &format!(
            "{}: {} cases, {} placements (single-height {} expected {}, multi-height {} expected {}){}\n",
            m.library,
            m.cases,
            m.placements,
            m.single_height_placements,
            m.single_height_expected,
            m.multi_height_placements,
            m.multi_height_expected,
            if m.consistent { "" } else { "  MISMATCH" }
        );
        if !m.consistent {
            code = EXIT_VIOLATIONS;
        }
    }
    Ok(Outcome { code, stdout })
}

fn verify_all(cfg: &RunConfig, rules: &RuleDeck) -> Result<Vec<(CellLibrary, Vec<VerificationResult>)>, CliError> {
    let mut out = Vec::new();
    for lib in load_libraries(cfg)? {
        let mut results = Vec::new();
        for &option in &cfg.options {
            let opts = RunOptions {
                max_row_width: cfg.max_row_width,
            };
            let r = run_all(&lib, rules, option, &opts).map_err(|source| CliError::Verify {
                library: lib.name.clone(),
                source,
            })?;
            results.push(r);
        }
        out.push((lib, results));
    }
    Ok(out)
}

fn write_reports(cfg: &RunConfig, rules: &RuleDeck, svgs: bool) -> Result<Outcome, CliError> {
    let all = verify_all(cfg, rules)?;
    let window = cfg.seam_window.unwrap_or(rules.interaction_distance);
    let mut svg_budget = if svgs { cfg.svg_cap } else { 0 };
    for (lib, results) in &all {
        let dir = cfg.out.join(&lib.name);
        for r in results {
            let tag = r.option.label();
            let attr = attribute_to_seams(&r.violations, &r.cases, &r.floorplan, window);
            write(&dir.join(format!("violations_{tag}.jsonl")), &violation_records(r, &attr))?;
            write(&dir.join(format!("seams_{tag}.txt")), &seam_report_text(&attr))?;
            if r.option == DptOption::Recolor {
                let mut text = String::new();
                for d in &r.recolor_diff {
                    text += &format!("{} {}\n", d.instance, d.changed);
                }
                write(&dir.join("recolor_diff_II.txt"), &text)?;
            }
            for (vi, v) in r.violations.iter().enumerate() {
                if svg_budget == 0 {
                    break;
                }
                svg_budget -= 1;
                let svg = render_svg(&r.layout, v, cfg.svg_margin, &seam_xs(&attr, vi));
                write(&dir.join(format!("svg_{tag}/v{vi:05}_{}.svg", v.kind)), &svg)?;
            }
        }
    }
    let table = summarize(all.iter().flat_map(|(_, rs)| rs.iter()));
    let text = table.to_text();
    write(&cfg.out.join("summary.txt"), &text)?;
    write(&cfg.out.join("summary.json"), &(table.to_json() + "\n"))?;
    let code = if table.any_violation() { EXIT_VIOLATIONS } else { EXIT_CLEAN };
    Ok(Outcome { code, stdout: text })
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let rules = load_rules(cfg)?;
    write_reports(cfg, &rules, false)
}

/// Reruns verification and adds SVGs. Exits 0 on success whatever the
/// counts are.
pub fn cmd_report(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let rules = load_rules(cfg)?;
    let mut o = write_reports(cfg, &rules, true)?;
    o.code = EXIT_CLEAN;
    Ok(o)
}

type Cmd = fn(&RunConfig) -> Result<Outcome, CliError>;

fn dispatch(cli: Cli) -> Result<Outcome, CliError> {
    let (cmd, flags): (Cmd, Flags) = match cli.command {
        Command::Profile(f) => (cmd_profile, f),
        Command::Generate(f) => (cmd_generate, f),
        Command::Verify(f) => (cmd_verify, f),
        Command::Report(f) => (cmd_report, f),
    };
    let cfg = resolve(cli.config.as_deref(), flags)?;
    with_jobs(cfg.jobs, || cmd(&cfg))
}

#[cfg(feature = "parallel")]
fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_jobs<T: Send>(_jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    f()
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_CLEAN };
            let _ = if e.use_stderr() {
                write!(stderr, "{e}")
            } else {
                write!(stdout, "{e}")
            };
            return code;
        }
    };
    match dispatch(cli) {
        Ok(o) => {
            let _ = stdout.write_all(o.stdout.as_bytes());
            o.code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_ERROR
        }
    }
}
