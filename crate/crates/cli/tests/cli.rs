//! End-to-end tests of the `cxl0` binary: exit codes, report output, and
//! byte-level determinism of JSON reports across worker counts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cxl0"))
}

/// Path of a file bundled in the repository.
fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

// ---------------------------------------------------------------------------
// litmus
// ---------------------------------------------------------------------------

#[test]
fn bundled_litmus_suites_pass() {
    let out = run(&["litmus", repo("suites/store-crash").to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("9 passed, 0 failed"));

    let out = run(&["litmus", repo("suites/read-twice").to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("4 passed, 0 failed"));
}

#[test]
fn failed_expectation_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // The realizable owner-crash trace, deliberately expected forbidden.
    let path = dir.path().join("inverted.lit");
    std::fs::write(
        &path,
        "test \"inverted\"\nmachines 1\nloc x @ 1\n\
         trace { 1: RStore x 1 ; crash 1 ; 1: Load x = 0 }\nexpect forbidden\n",
    )
    .unwrap();
    let out = run(&["litmus", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("fail"));
}

#[test]
fn unparsable_litmus_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.lit");
    std::fs::write(&path, "test \"broken\"\nthis is not a litmus test\n").unwrap();
    let out = run(&["litmus", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("broken.lit"));
}

#[test]
fn missing_input_exits_two() {
    let out = run(&["litmus", "no/such/path.lit"]);
    assert_eq!(code(&out), 2);

    let dir = tempfile::tempdir().unwrap();
    let out = run(&["litmus", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2, "empty directory has no tests");
}

#[test]
fn broken_semantics_are_caught_by_the_suite() {
    // Crashes that spare the cache break three store-crash verdicts.
    let out = run(&[
        "litmus",
        repo("suites/store-crash").to_str().unwrap(),
        "--mutate",
        "crash-keep-cache",
    ]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("3 failed"));

    let out = run(&[
        "litmus",
        repo("suites/store-crash").to_str().unwrap(),
        "--mutate",
        "no-such-mutant",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("unknown mutant"));
}

// ---------------------------------------------------------------------------
// props
// ---------------------------------------------------------------------------

#[test]
fn strength_laws_hold_on_the_default_universe() {
    let out = run(&["props", "--items", "1-8"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    for item in 1..=8 {
        assert!(text.contains(&format!("item {item}: ok")), "missing item {item}: {text}");
    }
}

#[test]
fn out_of_range_item_exits_two() {
    let out = run(&["props", "--items", "9"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("out of range"));
}

#[test]
fn volatile_durability_item_needs_a_workload() {
    let out = run(&["props", "--items", "p2"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--workload"));

    let out = run(&[
        "props",
        "--items",
        "p2",
        "--workload",
        repo("suites/workloads/register-volatile.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("item p2: ok"));
}

// ---------------------------------------------------------------------------
// flit
// ---------------------------------------------------------------------------

#[test]
fn untransformed_register_loses_writes() {
    let workload = repo("suites/workloads/register-rw.json");
    let out = run(&["flit", workload.to_str().unwrap()]);
    assert_eq!(code(&out), 1, "baseline must violate durability");
    assert!(stdout(&out).contains("violations:"));

    let out = run(&["flit", workload.to_str().unwrap(), "--expect-violation"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn memory_store_transformations_protect_the_register() {
    let workload = repo("suites/workloads/register-rw.json");
    for variant in ["mstore", "naive", "naive-mstore"] {
        let out = run(&["flit", workload.to_str().unwrap(), "--variant", variant]);
        assert_eq!(code(&out), 0, "variant {variant}: {}", stderr(&out));
        assert!(stdout(&out).contains("violations: 0"));
    }
}

#[test]
fn volatile_memory_workload_with_protected_owner_is_clean() {
    let out = run(&[
        "flit",
        repo("suites/workloads/register-volatile.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("violations: 0"));
}

#[test]
fn two_key_set_workload_runs() {
    let out = run(&["flit", repo("suites/workloads/set-basic.json").to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("object two-key-set"));
}

#[test]
fn bad_workload_inputs_exit_two() {
    let out = run(&["flit", "no/such/workload.json"]);
    assert_eq!(code(&out), 2);

    let workload = repo("suites/workloads/register-rw.json");
    let out = run(&["flit", workload.to_str().unwrap(), "--variant", "bogus"]);
    assert_eq!(code(&out), 2);

    let out = run(&["flit", workload.to_str().unwrap(), "--counter-class", "x"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn exhausted_state_budget_exits_three() {
    let out = bin()
        .args([
            "flit",
            repo("suites/workloads/register-volatile.json").to_str().unwrap(),
        ])
        .env("CXL0_STATE_BUDGET", "10")
        .output()
        .unwrap();
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("budget"));
}

// ---------------------------------------------------------------------------
// check-history
// ---------------------------------------------------------------------------

#[test]
fn bundled_histories_check_as_expected() {
    let out = run(&[
        "check-history",
        repo("suites/histories/register-ok.jsonl").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("durably linearizable"));

    let out = run(&[
        "check-history",
        repo("suites/histories/register-lost-write.jsonl").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("NOT durably linearizable"));

    let out = run(&[
        "check-history",
        repo("suites/histories/set-ok.jsonl").to_str().unwrap(),
        "--object",
        "two-key-set",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
}

#[test]
fn history_parse_and_usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("garbage.jsonl");
    std::fs::write(&path, "{\"e\":\"wat\"}\n").unwrap();
    let out = run(&["check-history", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);

    let out = run(&[
        "check-history",
        repo("suites/histories/register-ok.jsonl").to_str().unwrap(),
        "--object",
        "stack",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("unknown object"));
}

#[test]
fn oversized_history_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.jsonl");
    let mut text = String::new();
    for i in 0..17 {
        text.push_str(&format!("{{\"e\":\"inv\",\"p\":{0},\"op\":\"write\",\"args\":[1],\"m\":1}}\n", i + 1));
        text.push_str(&format!("{{\"e\":\"res\",\"p\":{}}}\n", i + 1));
    }
    std::fs::write(&path, text).unwrap();
    let out = run(&["check-history", path.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
}

// ---------------------------------------------------------------------------
// determinism
// ---------------------------------------------------------------------------

/// Run the same command twice with different worker counts, writing the
/// JSON report to the same path, and require byte-identical output.
fn assert_deterministic(args: &[&str]) {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let mut first = None;
    for jobs in ["4", "1"] {
        let out = bin()
            .args(["--jobs", jobs, "--json", report.to_str().unwrap()])
            .args(args)
            .output()
            .unwrap();
        assert!(
            code(&out) == 0 || code(&out) == 1,
            "unexpected exit {} for {:?}: {}",
            code(&out),
            args,
            stderr(&out)
        );
        let bytes = std::fs::read(&report).unwrap();
        match &first {
            None => first = Some(bytes),
            Some(expected) => assert_eq!(expected, &bytes, "report differs across --jobs"),
        }
    }
}

#[test]
fn reports_are_byte_identical_across_worker_counts() {
    assert_deterministic(&["litmus", repo("suites/store-crash").to_str().unwrap()]);
    assert_deterministic(&["props", "--items", "1,5,8"]);
    assert_deterministic(&[
        "flit",
        repo("suites/workloads/register-rw.json").to_str().unwrap(),
        "--expect-violation",
    ]);
    assert_deterministic(&[
        "check-history",
        repo("suites/histories/register-ok.jsonl").to_str().unwrap(),
    ]);
}
