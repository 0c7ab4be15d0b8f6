use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hedonica(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hedonica"))
        .args(args)
        .env_remove("HEDONICA_OUT")
        .output()
        .expect("binary runs")
}

fn small_run(out: &Path, extra: &[&str]) -> Output {
    let out = out.to_str().unwrap();
    let mut args = vec![
        "run",
        "--out",
        out,
        "--seed",
        "42",
        "--overrides",
        "n_runs=3",
        "n_steps=40",
        "n_agents=10",
    ];
    args.extend_from_slice(extra);
    hedonica(&args)
}

#[test]
fn run_writes_stable_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_run(dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let steps = fs::read_to_string(dir.path().join("steps.csv")).unwrap();
    let mut lines = steps.lines();
    assert_eq!(
        lines.next(),
        Some("run,step,alone,solicited,initiator,coalitions_active,formed_this_step,mean_coalition_size")
    );
    assert_eq!(lines.count(), 3 * 40);
    assert!(!steps.contains('\r'));
    let honesty = fs::read_to_string(dir.path().join("honesty.csv")).unwrap();
    assert!(honesty.starts_with("bin_center,mean_gained_utility,agent_count\n0.000000,"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seeds"], serde_json::json!([42, 43, 44]));
    assert_eq!(summary["config"]["n_agents"], 10);
    assert!(summary["version"].is_string());
    assert!(summary["durations"]["count"].is_u64());
}

#[test]
fn identical_invocations_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(small_run(a.path(), &["--trace"]).status.code(), Some(0));
    assert_eq!(small_run(b.path(), &["--trace"]).status.code(), Some(0));
    for file in ["steps.csv", "honesty.csv", "summary.json", "traces/run_000.trace", "traces/run_002.trace"] {
        let x = fs::read(a.path().join(file)).unwrap();
        let y = fs::read(b.path().join(file)).unwrap();
        assert!(x == y, "{file} differs");
    }
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    assert_eq!(hedonica(&["run", "--out", out_dir, "--overrides", "n_agents=1"]).status.code(), Some(2));
    assert_eq!(hedonica(&["run", "--out", out_dir, "--overrides", "bogus=3"]).status.code(), Some(2));
    assert_eq!(hedonica(&["run", "--out", out_dir, "--overrides", "no-equals"]).status.code(), Some(2));
    let missing = dir.path().join("nope.json");
    assert_eq!(
        hedonica(&["run", "--out", out_dir, "--config", missing.to_str().unwrap()]).status.code(),
        Some(2)
    );
    assert_eq!(hedonica(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn config_file_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("base.json");
    fs::write(&cfg, r#"{"n_agents": 6, "n_steps": 5, "n_runs": 2, "risk_mix": "all-neutral"}"#).unwrap();
    let out = dir.path().join("o");
    let code = hedonica(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.code();
    assert_eq!(code, Some(0));
    let steps = fs::read_to_string(out.join("steps.csv")).unwrap();
    assert_eq!(steps.lines().count(), 1 + 2 * 5);
}

#[test]
fn unwritable_output_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let code = hedonica(&["run", "--out", out.to_str().unwrap(), "--overrides", "n_runs=1", "n_steps=2"])
        .status
        .code();
    assert_eq!(code, Some(1));
}

#[test]
fn env_var_sets_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_hedonica"))
        .args(["run", "--overrides", "n_runs=1", "n_steps=3", "n_agents=4"])
        .env("HEDONICA_OUT", dir.path())
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    assert!(dir.path().join("steps.csv").exists());
}

#[test]
fn replay_check_accepts_fresh_and_rejects_tampered_traces() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(small_run(dir.path(), &["--trace"]).status.code(), Some(0));
    let trace_path = dir.path().join("traces/run_000.trace");
    let ok = hedonica(&["replay-check", trace_path.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));

    let text = fs::read_to_string(&trace_path).unwrap();
    let target = text
        .lines()
        .find(|l| l.contains(" ledger."))
        .expect("trace has ledger lines")
        .to_string();
    let step = target.split(' ').next().unwrap().to_string();
    let tampered: String = {
        let mut removed = false;
        text.lines()
            .filter(|l| {
                if !removed && *l == target {
                    removed = true;
                    false
                } else {
                    true
                }
            })
            .map(|l| format!("{l}\n"))
            .collect()
    };
    let bad = dir.path().join("bad.trace");
    fs::write(&bad, tampered).unwrap();
    let out = hedonica(&["replay-check", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(&format!("step {step}")), "{err}");

    let missing = dir.path().join("missing.trace");
    assert_eq!(hedonica(&["replay-check", missing.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn experiment_writes_four_populations_and_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let out = hedonica(&[
        "experiment",
        "--out",
        dir.path().to_str().unwrap(),
        "--overrides",
        "n_runs=2",
        "n_steps=30",
        "n_agents=8",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for sub in ["seeking", "averse", "neutral", "mixed"] {
        for f in ["steps.csv", "honesty.csv", "summary.json"] {
            assert!(dir.path().join(sub).join(f).exists(), "{sub}/{f}");
        }
    }
    let cmp: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("comparison.json")).unwrap()).unwrap();
    assert!(cmp["orderings"]["duration_seeking_lt_averse_lt_neutral"].is_boolean());
    assert!(cmp["populations"]["neutral"]["durations"].is_object());
}

#[test]
fn trust_dump_has_one_row_per_observer() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(small_run(dir.path(), &["--trust-csv"]).status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("trust/run_000.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
}
