use std::path::{Path, PathBuf};
use std::process::Command;

use qshare::scenario::ScenarioFile;
use qshare::{run_file, run_scenario, sweep, CliError};

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

fn mask_time(report: &str) -> String {
    report
        .lines()
        .map(|l| match l.find("\"wall_time_ms\": ") {
            Some(i) => format!("{}\"wall_time_ms\": \"masked\"", &l[..i]),
            None => l.to_string(),
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

fn qshare(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_qshare")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

#[test]
fn basic_report_matches_golden() {
    let out = run_scenario(&scenarios().join("basic_2_3.json"), None).unwrap();
    assert_eq!(mask_time(&out.report.to_json()), golden("basic_2_3.report.json"));
    assert_eq!(out.state.unwrap().to_string(), golden("basic_2_3.state.txt"));
    let out = run_scenario(&scenarios().join("superposition_2_3.json"), None).unwrap();
    assert_eq!(mask_time(&out.report.to_json()), golden("superposition_2_3.report.json"));
}

#[test]
fn basic_scenario_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let dump = dir.path().join("s.txt");
    let path = scenarios().join("basic_2_3.json");
    let (code, _, _) = qshare(&[
        "run",
        path.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
        "--dump-state",
        dump.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["final_secret"]["digit"], 0);
    assert!(v["oracle_checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
    assert_eq!(v["oracle_checks"].as_array().unwrap().len(), 7);
    assert_eq!(std::fs::read_to_string(&dump).unwrap(), golden("basic_2_3.state.txt"));
}

#[test]
fn exit_codes() {
    let run = |name: &str| qshare(&["run", scenarios().join(name).to_str().unwrap()]);
    let (code, out, _) = run("quitters_triple_3_5.json");
    assert_eq!(code, 2);
    assert!(out.contains("\"event\": \"aborted\""));
    let (code, _, err) = run("invalid_2_4.json");
    assert_eq!(code, 1);
    assert!(err.contains("`n`") && err.contains("2k"), "{err}");
    let (code, _, err) = qshare(&["run", "/nonexistent.json"]);
    assert_eq!(code, 1);
    assert!(err.contains("nonexistent"));
}

#[test]
fn resolved_echo_reproduces_transcript() {
    for name in ["basic_2_3.json", "measured_2_3.json", "quitters_pair_3_5.json"] {
        let first = run_scenario(&scenarios().join(name), None).unwrap().report;
        let echo = serde_json::to_string(&first.scenario).unwrap();
        let again = run_file(&ScenarioFile::parse(&echo).unwrap()).unwrap().report;
        assert_eq!(first.transcript_hash, again.transcript_hash, "{name}");
    }
}

#[test]
fn seed_override_changes_only_measurements() {
    let path = scenarios().join("measured_2_3.json");
    let a = run_scenario(&path, Some(1)).unwrap().report;
    let b = run_scenario(&path, Some(1)).unwrap().report;
    assert_eq!(a.transcript_hash, b.transcript_hash);
    assert_eq!(a.scenario.seed, 1);
}

#[test]
fn sweep_is_independent_of_jobs() {
    let pattern = format!("{}/*.json", scenarios().display());
    let one = sweep(&pattern, 1).unwrap();
    let many = sweep(&pattern, 8).unwrap();
    assert_eq!(one, many);
    assert!(one.iter().all(|r| r.passed), "{one:?}");
    let (code, out, _) = qshare(&["sweep", &pattern, "--jobs", "3"]);
    assert_eq!(code, 0, "{out}");
}

#[test]
fn empty_glob_is_an_error() {
    assert!(matches!(sweep("/nonexistent/*.json", 2), Err(CliError::EmptyGlob(_))));
    let (code, _, err) = qshare(&["sweep", "/nonexistent/*.json"]);
    assert_eq!(code, 1);
    assert!(err.contains("matches no files"));
}

#[test]
fn secrecy_command() {
    let (code, out, _) = qshare(&["secrecy", "--k", "2", "--n", "3", "--subset-size", "1"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["q"], 3);
    assert_eq!(v["passed"], true);
    let (code, _, _) = qshare(&["secrecy", "--k", "2", "--n", "3", "--subset-size", "2"]);
    assert_eq!(code, 1);
}

#[test]
fn version_flag() {
    let (code, out, _) = qshare(&["--version"]);
    assert_eq!(code, 0);
    assert!(out.contains(env!("CARGO_PKG_VERSION")));
}
