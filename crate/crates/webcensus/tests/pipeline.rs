//! End-to-end CLI tests: stage wiring, exit codes, config precedence, and
//! the version-mismatch refusals. Everything runs offline against small
//! fixtures written into the target tmp dir.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn workdir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::remove_dir_all(&dir).ok();
    std::fs::create_dir_all(&dir).expect("create test workdir");
    dir
}

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_webcensus"));
    for (key, _) in std::env::vars() {
        if key.starts_with("WEBCENSUS_") {
            cmd.env_remove(key);
        }
    }
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary spawns")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn single_run_dir(out_dir: &Path) -> PathBuf {
    let mut runs: Vec<PathBuf> = std::fs::read_dir(out_dir)
        .expect("out dir exists")
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    assert_eq!(runs.len(), 1, "expected one run dir in {}", out_dir.display());
    runs.pop().unwrap()
}

#[test]
fn analyze_then_report_over_demo_corpus_exits_zero() {
    let dir = workdir("cli-analyze-report");
    let har_path = dir.join("demo.har");
    std::fs::write(&har_path, webcensus::fixture::demo_har()).unwrap();

    let analyze_out = dir.join("analyze-out");
    let output = run(bin().args([
        "analyze",
        "--input",
        &har_path.display().to_string(),
        "--out-dir",
        &analyze_out.display().to_string(),
    ]));
    assert!(output.status.success(), "analyze failed: {}", stderr(&output));
    let record_log = single_run_dir(&analyze_out).join("records.jsonl");
    assert!(record_log.is_file());

    let report_out = dir.join("report-out");
    let output = run(bin().args([
        "report",
        "--input",
        &record_log.display().to_string(),
        "--out-dir",
        &report_out.display().to_string(),
        "--sample-n",
        "3",
        "--seed",
        "1",
    ]));
    assert!(output.status.success(), "report failed: {}", stderr(&output));
    let report_dir = single_run_dir(&report_out).join("report");
    for table in [
        "summary.json",
        "tld_prevalence.csv",
        "extension_histogram.csv",
        "owner_ranking.csv",
        "top_elements.csv",
        "load_failures.csv",
        "leakage.csv",
    ] {
        assert!(report_dir.join(table).is_file(), "missing report table {table}");
    }

    // The demo corpus has a known shape: cdc page carries google analytics.
    let owners = std::fs::read_to_string(report_dir.join("owner_ranking.csv")).unwrap();
    assert!(owners.lines().any(|l| l.starts_with("google,")), "google missing from {owners}");
}

#[test]
fn scan_with_unreachable_endpoint_reports_capture_endpoint() {
    let dir = workdir("cli-scan-endpoint");
    let pages = dir.join("pages.txt");
    std::fs::write(&pages, "http://example.com/\n").unwrap();

    let output = run(bin().args([
        "scan",
        "--input",
        &pages.display().to_string(),
        "--out-dir",
        &dir.join("out").display().to_string(),
        "--browser-endpoint",
        "127.0.0.1:9",
        "--settle-seconds",
        "1",
        "--hard-timeout-seconds",
        "2",
    ]));
    assert!(!output.status.success(), "scan must fail without a browser");
    assert!(
        stderr(&output).contains("capture:endpoint"),
        "stderr missing capture:endpoint: {}",
        stderr(&output)
    );
}

#[test]
fn report_refuses_mismatched_ownership_db() {
    let dir = workdir("cli-version-mismatch");
    let har_path = dir.join("demo.har");
    std::fs::write(&har_path, webcensus::fixture::demo_har()).unwrap();

    let analyze_out = dir.join("analyze-out");
    let output = run(bin().args([
        "analyze",
        "--input",
        &har_path.display().to_string(),
        "--out-dir",
        &analyze_out.display().to_string(),
    ]));
    assert!(output.status.success(), "analyze failed: {}", stderr(&output));
    let record_log = single_run_dir(&analyze_out).join("records.jsonl");

    // A different ownership db version than the one recorded at analyze time.
    let other_db = dir.join("other-owners.txt");
    std::fs::write(
        &other_db,
        "version: something-else\nowner: google\nname: Google\nrevenue: Advertising\ndomains: google-analytics.com\n",
    )
    .unwrap();

    let output = run(bin().args([
        "report",
        "--input",
        &record_log.display().to_string(),
        "--out-dir",
        &dir.join("report-out").display().to_string(),
        "--owner-db",
        &other_db.display().to_string(),
    ]));
    assert!(!output.status.success(), "report must refuse a mismatched db");
    assert!(
        stderr(&output).contains("version-mismatch"),
        "stderr missing version-mismatch: {}",
        stderr(&output)
    );
}

#[test]
fn pagelist_builds_deduplicated_filtered_list() {
    let dir = workdir("cli-pagelist");
    let results = dir.join("results");
    std::fs::create_dir_all(&results).unwrap();
    std::fs::write(
        results.join("hiv.tsv"),
        "hiv\t1\thttp://www.cdc.gov/hiv/#frag\nhiv\t2\tHTTP://WWW.CDC.GOV/hiv/\nhiv\t3\thttp://a.com/report.pdf\nhiv\t4\thttp://b.org/hiv-facts\n",
    )
    .unwrap();

    let out = dir.join("out");
    let output = run(bin().args([
        "pagelist",
        "--input",
        &results.display().to_string(),
        "--out-dir",
        &out.display().to_string(),
    ]));
    assert!(output.status.success(), "pagelist failed: {}", stderr(&output));

    let pages = std::fs::read_to_string(single_run_dir(&out).join("pages.txt")).unwrap();
    let lines: Vec<&str> = pages.lines().collect();
    assert_eq!(lines, vec!["http://www.cdc.gov/hiv/", "http://b.org/hiv-facts"]);
}

#[test]
fn config_subcommand_shows_origins() {
    let defaults = run(bin().arg("config"));
    assert!(defaults.status.success());
    let text = stdout(&defaults);
    assert!(text.contains("settle_seconds = 30  (default)"), "{text}");
    assert!(text.contains("sample_n = 500  (default)"), "{text}");

    let flagged = run(bin().args(["config", "--sample-n", "50"]));
    assert!(stdout(&flagged).contains("sample_n = 50  (flag)"), "{}", stdout(&flagged));

    let via_env = run(bin().arg("config").env("WEBCENSUS_SAMPLE_N", "77"));
    assert!(stdout(&via_env).contains("sample_n = 77  (env)"), "{}", stdout(&via_env));

    // File + flag conflict: flag wins, both origins shown.
    let dir = workdir("cli-config-file");
    let file = dir.join("census.toml");
    std::fs::write(&file, "sample_n = 200\ntop_n = 25\n").unwrap();
    let both = run(bin().args([
        "config",
        "--config-file",
        &file.display().to_string(),
        "--sample-n",
        "50",
    ]));
    let text = stdout(&both);
    assert!(text.contains("sample_n = 50  (flag, overrides file=200)"), "{text}");
    assert!(text.contains("top_n = 25  (file)"), "{text}");
}

#[test]
fn invalid_config_is_rejected_nonzero() {
    let output = run(bin().args(["config", "--settle-seconds", "90"]));
    assert!(!output.status.success(), "settle beyond hard timeout must fail");
    assert!(stderr(&output).contains("settle_seconds"), "{}", stderr(&output));
}

#[test]
fn missing_input_is_a_stage_scoped_error() {
    let output = run(bin().args(["analyze", "--out-dir", &workdir("cli-missing").display().to_string()]));
    assert!(!output.status.success());
    assert!(stderr(&output).contains("analyze"), "{}", stderr(&output));
}

#[test]
fn tolerant_read_skips_corrupt_lines() {
    let dir = workdir("cli-tolerant");
    let har_path = dir.join("demo.har");
    std::fs::write(&har_path, webcensus::fixture::demo_har()).unwrap();
    let analyze_out = dir.join("analyze-out");
    let output = run(bin().args([
        "analyze",
        "--input",
        &har_path.display().to_string(),
        "--out-dir",
        &analyze_out.display().to_string(),
    ]));
    assert!(output.status.success());
    let record_log = single_run_dir(&analyze_out).join("records.jsonl");

    // Corrupt one record line.
    let mut text = std::fs::read_to_string(&record_log).unwrap();
    let insert_at = text.find('\n').unwrap() + 1;
    text.insert_str(insert_at, "{corrupt\n");
    std::fs::write(&record_log, text).unwrap();

    let strict = run(bin().args([
        "report",
        "--input",
        &record_log.display().to_string(),
        "--out-dir",
        &dir.join("strict-out").display().to_string(),
    ]));
    assert!(!strict.status.success(), "fail-fast read must reject the corrupt line");

    let tolerant = run(bin().args([
        "report",
        "--input",
        &record_log.display().to_string(),
        "--out-dir",
        &dir.join("tolerant-out").display().to_string(),
        "--tolerant-read",
        "--sample-n",
        "2",
    ]));
    assert!(tolerant.status.success(), "tolerant read failed: {}", stderr(&tolerant));
}
