//! Abutment testcase generation and seam-aware verification for standard
//! cell libraries on double-patterning layers.
//!
//! The flow reads a cell library ([`libio`]), enumerates a reduced set of
//! abutment testcases that still realizes every side-to-side neighbour
//! relation ([`abut`]), packs them into a die and writes Verilog and DEF
//! ([`emitio`]), flattens the placed geometry ([`geom`]) and checks it for
//! width, spacing, mask conflicts and hotspot patterns ([`verify`]).
//! [`report`] attributes violations to seams and renders them.

pub mod abut;
#[cfg(feature = "cli")]
pub mod cli;
pub mod emitio;
pub mod geom;
pub mod libio;
pub mod par;
pub mod report;
pub mod synth;
pub mod verify;

pub use abut::{enumerate_library, expected_count, AbutmentCase, CountMode, Orientation, Placement};
pub use geom::{FlatLayout, Rect};
pub use libio::{parse_library, parse_rules, CellLibrary, Mask, RuleDeck};
pub use verify::{run_all, DptOption, RunOptions, VerificationResult, Violation, ViolationKind};
