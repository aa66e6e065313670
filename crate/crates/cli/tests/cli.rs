//! End-to-end checks of the `pfrlab` binary: every subcommand, both
//! output modes, config-file resolution, and failure paths.

use std::fs;
use std::process::{Command, Output};

fn pfrlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pfrlab"))
        .args(args)
        .env_remove("RUST_BACKTRACE")
        .output()
        .expect("spawn pfrlab")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn example_table_prints_the_frozen_session() {
    let out = pfrlab(&["example-table1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    // Spot cells from the hand-frozen table, plus the totals.
    assert!(text.contains("a17 - b19 + c25"));
    assert!(text.contains("a14 - b16 + c26"));
    assert!(text.contains("b5 - c13"));
    assert!(text.contains("30 symbols per database (90 overall)"));
    assert!(text.contains("rate 3/5"));
}

#[test]
fn example_table_json_lists_every_cell() {
    let out = pfrlab(&["--json", "example-table1"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["cells"].as_array().unwrap().len(), 18);
    assert_eq!(v["rate"], "3/5");
    assert_eq!(v["download"], 90);
}

#[test]
fn gen_code_builds_and_verifies() {
    let out = pfrlab(&["gen-code", "--n", "4", "--k", "2", "--q", "5"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("profile:  mds"));
    assert!(text.contains("verified: true"));
}

#[test]
fn gen_code_reports_the_cyclic_fallback() {
    let out = pfrlab(&["--json", "gen-code", "--n", "4", "--k", "2", "--q", "2"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["profile"], "cyclic-windows");
    assert_eq!(v["verified"], true);
}

#[test]
fn run_retrieves_over_both_transports() {
    for transport in ["inproc", "socket"] {
        let out = pfrlab(&[
            "run", "--n", "3", "--k", "2", "--m", "2", "--q", "2", "--nu", "3", "--seed", "42",
            "--transport", transport,
        ]);
        assert!(out.status.success(), "{transport} run failed");
        let text = stdout(&out);
        assert!(text.contains("rate:         3/5"));
        assert!(text.contains("verified:     true"));
    }
}

#[test]
fn run_exports_the_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("transcript.json");
    let out = pfrlab(&["--out", path.to_str().unwrap(), "run", "--nu", "1", "--seed", "5"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["verified"], true);
    assert_eq!(v["transcript"]["download"], 90);
    assert_eq!(v["transcript"]["answers"].as_array().unwrap().len(), 3);
}

#[test]
fn run_rejects_an_out_of_range_target() {
    let out = pfrlab(&["run", "--nu", "4"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("1..=3"));
}

#[test]
fn rate_table_tabulates_a_grid() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.txt");
    fs::write(&path, "# shape grid\n2 1 2 2\n3 2 2 2  # worked example\n3 2 2 3\n").unwrap();
    let out = pfrlab(&["rate-table", "--grid", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.lines().any(|l| l.contains("2/3")), "missing (2,1) rate");
    assert!(text.lines().filter(|l| l.contains("3/5")).count() == 2, "missing 3/5 rates");

    let out = pfrlab(&["--json", "rate-table", "--grid", path.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1]["rate"]["download_counted"], 90);
    assert_eq!(rows[2]["rate"]["download_counted"], 270);
}

#[test]
fn rate_table_rejects_malformed_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.txt");
    fs::write(&path, "3 2 2\n").unwrap();
    let out = pfrlab(&["rate-table", "--grid", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("expected `N K M q`"));
}

#[test]
fn audit_privacy_passes_with_modest_samples() {
    let out = pfrlab(&["audit-privacy", "--samples", "120"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("fingerprints identical"));
    assert!(text.contains("verdict:     PASS"));
}

#[test]
fn config_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lab.conf");
    fs::write(&path, "# defaults\nn=2\nk=1\nm=2\nq=2\nnu=2\nseed=11\n").unwrap();
    let conf = path.to_str().unwrap();

    let out = pfrlab(&["--config", conf, "run"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("retrieval of combination 2 of 3"));

    // An explicit flag beats the config value.
    let out = pfrlab(&["--config", conf, "run", "--nu", "1"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("retrieval of combination 1 of 3"));
}

#[test]
fn config_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lab.conf");
    fs::write(&path, "bogus=1\n").unwrap();
    let out = pfrlab(&["--config", path.to_str().unwrap(), "run"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));
}
