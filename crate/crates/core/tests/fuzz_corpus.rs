//! Replays the checked-in fuzz seeds through the same entry points the fuzz
//! targets exercise, so the corpus stays meaningful without cargo-fuzz.

use hedonica::domain::{validate_config, SimConfig};
use hedonica::trace::{parse_trace, replay_check, TraceLine};
use std::fs;
use std::path::PathBuf;

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut out: Vec<(String, String)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            (path.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&path).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn config_json_seeds() {
    for (name, text) in seeds("config_json") {
        match SimConfig::from_json(&text) {
            Ok(c) => assert_eq!(validate_config(&c).is_empty(), name != "invalid", "{name}"),
            Err(_) => assert_eq!(name, "unknown_key"),
        }
    }
}

#[test]
fn config_override_seeds() {
    for (name, text) in seeds("config_override") {
        let mut config = SimConfig::default();
        let results: Vec<bool> = text.lines().map(|l| config.apply_override(l).is_ok()).collect();
        match name.as_str() {
            "basic" => assert!(results.iter().all(|&ok| ok)),
            _ => assert!(results.iter().all(|&ok| !ok), "{name}: {results:?}"),
        }
    }
}

#[test]
fn trace_line_seeds_round_trip() {
    for (name, text) in seeds("trace_line") {
        let line: TraceLine = text.trim().parse().unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(line.to_string(), text.trim(), "{name}");
    }
}

#[test]
fn trace_replay_seeds_are_consistent() {
    for (name, text) in seeds("trace_replay") {
        let trace = parse_trace(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        replay_check(&trace).unwrap_or_else(|d| panic!("{name}: {d}"));
    }
}
