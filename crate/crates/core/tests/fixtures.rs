//! The shipped fixture files must match the builders they were written
//! from. Set `SEAMCHECK_BLESS=1` to rewrite them.

use std::path::PathBuf;

use seamcheck::libio::{parse_library_named, parse_rules, write_library};
use seamcheck::synth;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn check(name: &str, expected: &str) {
    let path = fixture(name);
    if std::env::var_os("SEAMCHECK_BLESS").is_some() {
        std::fs::write(&path, expected).unwrap();
    }
    let actual = std::fs::read_to_string(&path).unwrap();
    assert_eq!(actual, expected, "{} is stale; rerun with SEAMCHECK_BLESS=1", path.display());
}

#[test]
fn fixtures_are_current() {
    check("rules.toml", synth::RULES_TOML);
    check("seam_conflict.lef", &write_library(&synth::seam_conflict_library()));
    check("odd_cycle.lef", &write_library(&synth::odd_cycle_library()));
    check("clean.lef", &write_library(&synth::clean_library()));
}

#[test]
fn fixtures_parse() {
    parse_rules(&std::fs::read_to_string(fixture("rules.toml")).unwrap()).unwrap();
    for name in ["seam_conflict", "odd_cycle", "clean"] {
        let text = std::fs::read_to_string(fixture(&format!("{name}.lef"))).unwrap();
        assert_eq!(parse_library_named(name, &text).unwrap().name, name);
    }
}
