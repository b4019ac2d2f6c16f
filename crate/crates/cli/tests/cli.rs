//! End-to-end runs of the compiled binary: exit codes, record streams,
//! determinism, and the flag/env/config resolution order.

use std::io::Write;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_splitweight"));
    c.current_dir(env!("CARGO_MANIFEST_DIR"));
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_lines(out: &Output) -> Vec<serde_json::Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).expect("JSON line"))
        .collect()
}

fn find<'a>(records: &'a [serde_json::Value], kind: &str) -> &'a serde_json::Value {
    records
        .iter()
        .find(|r| r["record"] == kind)
        .unwrap_or_else(|| panic!("no `{kind}` record in {records:?}"))
}

#[test]
fn unknown_flags_and_subcommands_exit_two() {
    assert_eq!(run(&["fibration", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["not-a-command"]).status.code(), Some(2));
    // Bad input files are usage errors too.
    assert_eq!(run(&["cartan", "--g", "no-such-file.json"]).status.code(), Some(2));
}

#[test]
fn every_report_starts_with_its_config() {
    let out = run(&["fibration", "--p", "3", "--seed", "11"]);
    let records = stdout_lines(&out);
    assert_eq!(records[0]["record"], "config");
    assert_eq!(records[0]["command"], "fibration");
    assert_eq!(records[0]["seed"], 11);
    assert_eq!(records[0]["params"]["p"], 3);
}

#[test]
fn fibration_passes_at_small_primes() {
    for (p, regular, classes) in [("3", 4, 2), ("5", 16, 4), ("7", 36, 2)] {
        let out = run(&["fibration", "--p", p]);
        assert_eq!(out.status.code(), Some(0), "p={p}");
        let records = stdout_lines(&out);
        let summary = find(&records, "fibration-summary");
        assert_eq!(summary["theta_regular"], regular);
        assert_eq!(summary["classes"], classes);
        assert_eq!(summary["ok"], true);
    }
}

#[test]
fn plancherel_default_run_reports_zero_deviation() {
    let out = run(&["plancherel", "--p", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let records = stdout_lines(&out);
    let summary = find(&records, "plancherel-summary");
    assert_eq!(summary["max_deviation"], 0.0);
    assert_eq!(summary["all_ok"], true);
}

#[test]
fn plancherel_accepts_a_function_table_file() {
    let out = run(&["plancherel", "--p", "3", "--table", "fixtures/table_p3_sl2.json"]);
    assert_eq!(out.status.code(), Some(0));
    let records = stdout_lines(&out);
    assert_eq!(find(&records, "plancherel-summary")["functions"], 1);
}

#[test]
fn reports_are_byte_identical_for_equal_config_and_seed() {
    let args =
        ["plancherel", "--p", "3", "--level", "2", "--seed", "9", "--funcs", "4", "--jobs", "3"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);

    let args = ["verify-lemma", "--random", "2", "--mu2", "1,-1", "--dmax", "8", "--seed", "5"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn cartan_parses_prime_power_entries() {
    let out = run(&["cartan", "--g", r#"[["p^2","1"],["0","1"]]"#, "--prime", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let records = stdout_lines(&out);
    let rec = find(&records, "cartan");
    assert_eq!(rec["invariant"], serde_json::json!([2, 0]));
    assert_eq!(rec["verified"], true);
}

#[test]
fn weights_agree_on_identity_element() {
    let out = run(&[
        "omega",
        "--g",
        r#"[["1","0"],["0","1"]]"#,
        "--mu",
        "2,0",
        "--prime",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let records = stdout_lines(&out);
    for op in ["trunc.omega_m", "trunc.omega_m_asymp", "trunc.theta_split_asymp"] {
        let rec = records.iter().find(|r| r["op"] == op).unwrap();
        assert_eq!(rec["count"]["exact"], 3, "{op}");
    }
}

#[test]
fn lemma_fixture_suite_exits_zero_with_thresholds() {
    let out = run(&[
        "verify-lemma",
        "--samples",
        "fixtures/gl2_q5_samples.json",
        "--mu2",
        "1,-1",
        "--dmax",
        "14",
        "--prime",
        "5",
        "--jobs",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let records = stdout_lines(&out);
    let summary = find(&records, "lemma-summary");
    assert_eq!(summary["all_agree"], true);
    assert_eq!(summary["samples"], 4);
    assert!(records.iter().filter(|r| r["record"] == "lemma-row").all(|r| !r["threshold"].is_null()));
}

#[test]
fn fit_commands_recover_the_linear_count() {
    let out = run(&[
        "nu-fit",
        "--g",
        r#"[["1","0"],["0","1"]]"#,
        "--mu2",
        "1,-1",
        "--window",
        "0..4",
        "--holdout",
        "8,10,12,14,16",
        "--prime",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let records = stdout_lines(&out);
    let fit = find(&records, "fit");
    assert_eq!(fit["degree"], 1);
    assert_eq!(fit["diffs"], serde_json::json!([1, 2, 0]));

    let out = run(&[
        "fit",
        "--name",
        "gl2",
        "--family",
        "fixtures/dilation_family.json",
        "--lattice",
        "fixtures/z2_lattice.json",
        "--window",
        "0..6",
        "--holdout",
        "8,10,12,14,16",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let records = stdout_lines(&out);
    assert_eq!(find(&records, "fit")["degree"], 1);
}

#[test]
fn count_slices_the_segment_hull() {
    let out = run(&[
        "count",
        "--name",
        "gl2",
        "--set",
        "fixtures/segment_set.json",
        "--lattice",
        "fixtures/z2_lattice.json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(find(&stdout_lines(&out), "count")["count"], 3);
}

#[test]
fn csv_projection_prints_headers_on_shape_change() {
    let out = run(&["fibration", "--p", "3", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    // config header, config row, class header, two class rows, summary
    // header, summary row.
    assert!(lines[0].starts_with("command,"));
    assert!(lines[2].starts_with("centralizer_size,"));
    assert_eq!(lines.len(), 7);
}

#[test]
fn settings_resolve_flag_over_env_over_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::File::create(&cfg)
        .unwrap()
        .write_all(br#"{"prime": 7, "seed": 2}"#)
        .unwrap();
    let cfg = cfg.to_str().unwrap();

    // Config alone.
    let out = run(&["--config", cfg, "cartan", "--g", r#"[["p","0"],["0","1"]]"#]);
    let records = stdout_lines(&out);
    assert_eq!(records[0]["prime"], 7);
    assert_eq!(records[0]["seed"], 2);

    // Env beats config.
    let out = bin()
        .env("SPLITWEIGHT_PRIME", "3")
        .args(["--config", cfg, "cartan", "--g", r#"[["p","0"],["0","1"]]"#])
        .output()
        .unwrap();
    assert_eq!(stdout_lines(&out)[0]["prime"], 3);

    // Flag beats both.
    let out = bin()
        .env("SPLITWEIGHT_PRIME", "3")
        .args(["--config", cfg, "--prime", "11", "cartan", "--g", r#"[["p","0"],["0","1"]]"#])
        .output()
        .unwrap();
    assert_eq!(stdout_lines(&out)[0]["prime"], 11);

    // Unknown config keys are schema violations.
    let bad = dir.path().join("bad.json");
    std::fs::File::create(&bad).unwrap().write_all(br#"{"prme": 7}"#).unwrap();
    let out = run(&["--config", bad.to_str().unwrap(), "fibration", "--p", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn module_failures_exit_one_with_provenance() {
    // 2 is not an odd prime: the finite algebra refuses it.
    let out = run(&["fibration", "--p", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let records = stdout_lines(&out);
    let err = find(&records, "error");
    assert_eq!(err["module"], "finfield");

    // A singular matrix cannot be decomposed.
    let out = run(&["cartan", "--g", r#"[["1","1"],["1","1"]]"#, "--prime", "5"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(find(&stdout_lines(&out), "error")["module"], "padic");
}
