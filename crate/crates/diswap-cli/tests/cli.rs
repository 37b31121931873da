//! End-to-end tests of the `diswap` binary: argument plumbing, config
//! precedence, exit codes, artifact layout and byte-level reproducibility.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_diswap"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn fair_value(json: &str) -> f64 {
    let v: serde_json::Value = serde_json::from_str(json).expect("valid JSON artifact");
    v["fair_value"].as_f64().expect("fair_value field")
}

#[test]
fn help_lists_every_subcommand_and_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    for name in ["price", "hedge", "verify-ap", "residual", "delta", "premium", "chain-gen"] {
        assert!(text.contains(name), "help is missing `{name}`:\n{text}");
    }
}

#[test]
fn version_exits_zero() {
    let out = run(&["--version"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("diswap"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = run(&["price", "--payoff", r#"{"lv": true}"#, "--no-such-flag"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn missing_seed_is_reported_with_the_flag_name() {
    let out = run(&["premium", "--payoff", r#"{"lv": true}"#]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("--seed"), "stderr: {}", stderr(&out));
}

#[test]
fn classic_payoffs_are_rejected_where_analytics_are_needed() {
    let spec = r#"{"classic": "squared-log-return"}"#;
    let out = run(&["price", "--payoff", spec]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("premium"), "stderr should point at `premium`");
    let out = run(&["hedge", "--payoff", spec, "--seed", "1"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn chain_gen_then_price_reproduces_the_log_variance_rate() {
    let dir = tempfile::tempdir().unwrap();
    let chain = dir.path().join("chain.csv");
    let chain_str = chain.to_str().unwrap();
    let out = run(&[
        "chain-gen", "--f0", "1", "--sigma", "0.2", "--tau", "1", "--strikes", "2048",
        "--width", "10", "--out", chain_str,
    ]);
    assert_eq!(code(&out), 0, "chain-gen failed: {}", stderr(&out));
    assert!(chain.exists());

    let out = run(&["price", "--payoff", r#"{"lv": true}"#, "--f0", "1", "--chain", chain_str]);
    assert_eq!(code(&out), 0, "price failed: {}", stderr(&out));
    let fair = fair_value(&stdout(&out));
    // sigma^2 T = 0.04 up to strike-grid truncation and quadrature error.
    assert!((fair - 0.04).abs() < 1e-3, "chain-implied rate {fair}");
}

#[test]
fn config_supplies_defaults_and_explicit_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("diswap.conf");
    std::fs::write(&cfg, "sigma = 0.5\nf0 = 1\n").unwrap();
    let cfg_str = cfg.to_str().unwrap();

    let out = run(&["price", "--payoff", r#"{"lv": true}"#, "--config", cfg_str]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let fair = fair_value(&stdout(&out));
    assert!((fair - 0.25).abs() < 1e-12, "config sigma ignored: {fair}");

    let out = run(&[
        "price", "--payoff", r#"{"lv": true}"#, "--config", cfg_str, "--sigma", "0.2",
    ]);
    let fair = fair_value(&stdout(&out));
    assert!((fair - 0.04).abs() < 1e-12, "flag did not override config: {fair}");
}

#[test]
fn out_dir_env_prefixes_relative_output_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["price", "--payoff", r#"{"lv": true}"#, "--out", "report.json"])
        .env("DISWAP_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let artifact = dir.path().join("report.json");
    assert!(artifact.exists(), "artifact not under DISWAP_OUT_DIR");
    let fair = fair_value(&std::fs::read_to_string(artifact).unwrap());
    assert!((fair - 0.04).abs() < 1e-12);
}

#[test]
fn inline_and_file_payoff_specs_agree_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"{"moment": {"n": 3, "x0": -0.02}}"#;
    let path = dir.path().join("payoff.json");
    std::fs::write(&path, spec).unwrap();
    let a = run(&["price", "--payoff", spec, "--f0", "1"]);
    let b = run(&["price", "--payoff", path.to_str().unwrap(), "--f0", "1"]);
    assert_eq!(code(&a), 0);
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn hedge_writes_the_per_time_table() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("hedge.csv");
    let json = dir.path().join("hedge.json");
    let out = run(&[
        "hedge", "--payoff", r#"{"lv": true}"#, "--partition", "12", "--seed", "7",
        "--out-csv", csv.to_str().unwrap(), "--out", json.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let table = std::fs::read_to_string(&csv).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("time,value,realised,implied"));
    assert_eq!(lines.count(), 13, "12 monthly steps plus inception");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert!(report["max_abs_residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn verification_failure_exits_two() {
    // Plain squared log returns are not in the pay-off space; at sigma = 0.5
    // the monthly bias is far outside 4 SE of the one-shot estimate.
    let out = run(&[
        "verify-ap", "--payoff", r#"{"classic": "squared-log-return"}"#, "--sigma", "0.5",
        "--partitions", "12", "--paths", "20000", "--seed", "3",
    ]);
    assert_eq!(code(&out), 2, "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("FAIL"));
}

#[test]
fn residual_tolerance_gates_the_exit_code() {
    let ok = run(&["residual", "--payoff", r#"{"lv": true}"#, "--points", "8"]);
    assert_eq!(code(&ok), 0);
    let tight = run(&[
        "residual", "--payoff", r#"{"lv": true}"#, "--points", "8", "--fd", "--tol", "1e-30",
    ]);
    assert_eq!(code(&tight), 2, "fd noise cannot meet 1e-30");
    let misuse = run(&["residual", "--payoff", r#"{"lv": true}"#, "--step", "1e-3"]);
    assert_eq!(code(&misuse), 1, "--step without --fd must be rejected");
}

#[test]
fn artifacts_are_byte_reproducible_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, threads: &str| -> Vec<u8> {
        let path = dir.path().join(name);
        let out = run(&[
            "verify-ap", "--payoff", r#"{"lv": true}"#, "--partitions", "1,12",
            "--paths", "2000", "--seed", "42", "--threads", threads,
            "--out", path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
        std::fs::read(path).unwrap()
    };
    let one = write("a.json", "1");
    let four = write("b.json", "4");
    let again = write("c.json", "1");
    assert_eq!(one, four, "thread count changed the artifact");
    assert_eq!(one, again, "rerun with the same seed changed the artifact");
}

#[test]
fn atomic_writes_leave_no_temp_droppings() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = run(&[
        "price", "--payoff", r#"{"lv": true}"#, "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let entries: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(entries.len(), 1, "stray files: {entries:?}");
    assert_eq!(Path::new(&entries[0]), Path::new("r.json"));
}
