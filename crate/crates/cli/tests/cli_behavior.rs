//! CLI contract tests: determinism, the golden report fixture, identity
//! catalogue coverage, tolerance machinery and exit codes.

use dynell_cli::config::{RunConfig, Suite};
use dynell_cli::{catalogue, output, run};
use std::process::Command;

fn dynell() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dynell"))
}

#[test]
fn golden_report_matches_fixture() {
    let mut cfg = RunConfig::default();
    cfg.zero_wall_time = true;
    let outcome = run(&cfg).unwrap();
    let doc = output::write_document(&cfg, &outcome);
    let fixture = include_str!("fixtures/golden_seed1.json");
    assert_eq!(
        doc, fixture,
        "default seed-1 report deviates from the committed fixture"
    );
}

#[test]
fn identical_config_and_seed_reproduce_reports() {
    let mut cfg = RunConfig::default();
    cfg.suites = [Suite::Theta, Suite::Felder].into_iter().collect();
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(a.reports.len(), b.reports.len());
    for (x, y) in a.reports.iter().zip(b.reports.iter()) {
        let mut x = x.clone();
        let mut y = y.clone();
        x.wall_time_ms = 0;
        y.wall_time_ms = 0;
        assert_eq!(x, y);
    }
}

#[test]
fn different_seed_changes_residuals() {
    let mut cfg = RunConfig::default();
    cfg.suites = [Suite::Felder].into_iter().collect();
    let a = run(&cfg).unwrap();
    cfg.seed = 2;
    let b = run(&cfg).unwrap();
    let moved = a
        .reports
        .iter()
        .zip(b.reports.iter())
        .any(|(x, y)| x.max_rel != y.max_rel && x.max_rel > 0.0);
    assert!(moved, "changing the seed should move sampled residuals");
}

#[test]
fn report_round_trip() {
    let mut cfg = RunConfig::default();
    cfg.suites = [Suite::Theta].into_iter().collect();
    cfg.zero_wall_time = true;
    let outcome = run(&cfg).unwrap();
    let doc = output::write_document(&cfg, &outcome);
    let parsed = output::parse_reports(&doc).unwrap();
    assert_eq!(parsed, outcome.reports);
}

#[test]
fn unattainable_tolerance_fails_every_sampled_check() {
    let mut cfg = RunConfig::default();
    cfg.suites = [Suite::Felder].into_iter().collect();
    cfg.tol = Some(1e-30);
    let outcome = run(&cfg).unwrap();
    assert!(outcome.failed > 0, "1e-30 must be unattainable");
    assert!(!outcome.all_passed());
}

#[test]
fn catalogue_is_auditable() {
    let cfg = RunConfig::default();
    let checks = catalogue(&cfg);
    assert!(checks.len() >= 25, "catalogue has {} identities", checks.len());
    let ids: Vec<&str> = checks.iter().map(|c| c.id.as_str()).collect();
    assert!(ids.iter().any(|id| id.contains("DYBE")));
    assert!(ids.iter().any(|id| id.contains("Q_Ltilde")));
    assert!(ids.iter().any(|id| id.contains("tt_tt0")));
    // Ids are unique.
    let mut sorted = ids.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted.len(), ids.len(), "duplicate identity ids");
    // Every check carries an anchor.
    assert!(checks.iter().all(|c| !c.anchor.is_empty()));
}

#[test]
fn binary_list_identities() {
    let out = dynell().arg("list-identities").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("DYBE"));
    assert!(text.contains("Q_Ltilde"));
    assert!(text.contains("identities"));
}

#[test]
fn binary_exit_codes() {
    // Fast passing run.
    let ok = dynell()
        .args(["verify", "--suites", "theta", "--seed", "1"])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0), "theta suite should pass");

    // Unattainable tolerance: nonzero exit.
    let fail = dynell()
        .args(["verify", "--suites", "theta", "--tol", "1e-30"])
        .output()
        .unwrap();
    assert_eq!(fail.status.code(), Some(1));

    // Invalid config: usage error.
    let usage = dynell()
        .args(["verify", "--n", "7"])
        .output()
        .unwrap();
    assert_eq!(usage.status.code(), Some(2));
    let usage2 = dynell()
        .args(["verify", "--suites", "bogus"])
        .output()
        .unwrap();
    assert_eq!(usage2.status.code(), Some(2));
}

#[test]
fn binary_writes_json() {
    let dir = std::env::temp_dir().join("dynell-test-json");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("theta.json");
    let out = dynell()
        .args([
            "verify",
            "--suites",
            "theta",
            "--seed",
            "3",
            "--zero-wall-time",
            "--json",
        ])
        .arg(&path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let doc = std::fs::read_to_string(&path).unwrap();
    let reports = output::parse_reports(&doc).unwrap();
    assert_eq!(reports.len(), 4);
    assert!(doc.contains("\"schema\": 1"));
    std::fs::remove_file(&path).ok();
}

#[test]
fn env_config_file_is_used() {
    let dir = std::env::temp_dir().join("dynell-test-cfg");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("cfg.json");
    std::fs::write(&path, r#"{"suites": ["theta"], "seed": 9, "samples": 4}"#).unwrap();
    let out = dynell()
        .env("DYNELL_CONFIG", &path)
        .args(["verify"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("passed 4 / 4"), "config file should limit the run to theta: {text}");
    std::fs::remove_file(&path).ok();
}
