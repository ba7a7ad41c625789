use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output};

use expstrat::report::{from_json, to_csv, to_json, to_table, ReportRow, NEGATIVE_MSE_FLAG};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_expstrat"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn config() -> String {
    data("synthetic.toml").display().to_string()
}

#[test]
fn json_is_byte_identical_across_runs() {
    let args = [
        "--config",
        &config(),
        "--format",
        "json",
        "--verify",
        "mc",
        "--replicates",
        "5000",
        "--seed",
        "11",
    ];
    let (a, b) = (run(&args), run(&args));
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn json_round_trips() {
    let out = run(&["--config", &config(), "--format", "json"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let report = from_json(&text).unwrap();
    assert_eq!(to_json(&report), text);
    let again = from_json(&to_json(&report)).unwrap();
    assert_eq!(again, report);
    assert_eq!(report.rows.len(), 4);
    assert!(report.rows.iter().all(|r| r.exact.is_some()));
    assert!(!report.metadata.corrections.is_empty());
}

#[test]
fn csv_has_one_record_per_estimator_metric() {
    let out = run(&["--config", &config(), "--format", "csv"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("estimator,metric,value"));
    let records: Vec<&str> = lines.collect();
    // 6 approximation metrics + 6 printed + 2 exact
    assert_eq!(records.len(), 4 * 14);
    for kind in ["t1s", "t2s", "t3s", "t4s"] {
        assert_eq!(
            records
                .iter()
                .filter(|l| l.starts_with(&format!("{kind},")))
                .count(),
            14
        );
    }
}

#[test]
fn table_mirrors_the_four_by_four_layout() {
    let out = run(&["--config", &config(), "--verify", "none"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("Bias (1st)") && text.contains("MSE (2nd)"));
    for kind in ["t1s", "t2s", "t3s", "t4s"] {
        assert!(text.lines().any(|l| l.starts_with(kind)), "{kind}");
    }
}

#[test]
fn negative_mse_is_flagged_in_table() {
    let out = run(&["--config", &config(), "--format", "json"]);
    let mut report = from_json(&stdout(&out)).unwrap();
    let row: &mut ReportRow = &mut report.rows[0];
    row.mse2 = Some(-1.0);
    row.flags.push(NEGATIVE_MSE_FLAG.to_owned());
    let table = to_table(&report);
    assert!(table
        .lines()
        .any(|l| l.starts_with("t1s") && l.ends_with('!')));
    assert!(!table
        .lines()
        .any(|l| l.starts_with("t2s") && l.ends_with('!')));
    assert!(to_csv(&report).contains("t1s,mse2,-1.0000000000000000e0"));
}

#[test]
fn flags_override_config_values() {
    let out = run(&[
        "--config",
        &config(),
        "--format",
        "json",
        "--verify",
        "none",
        "--order",
        "1",
        "--estimator",
        "t3s:0.5",
        "--n",
        "A=2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = from_json(&stdout(&out)).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert_eq!(report.rows[0].parameter1, Some(0.5));
    assert_eq!(report.rows[0].mse2, None);
    assert_eq!(report.metadata.strata[0].small_n, 2);
}

#[test]
fn bare_tuned_estimator_needs_optimize_flag() {
    let pop = data("synthetic.csv").display().to_string();
    let base = [
        "--population",
        &pop,
        "--n",
        "A=3",
        "--n",
        "B=3",
        "--estimator",
        "t3s",
    ];
    let out = run(&base);
    assert_eq!(out.status.code(), Some(1));
    let mut with_flag = base.to_vec();
    with_flag.push("--optimize");
    assert!(run(&with_flag).status.success());
}

#[test]
fn validation_errors_exit_with_one() {
    let missing = run(&["--population", "/nonexistent/pop.csv", "--n", "A=3"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("i/o"));

    let mut bad = tempfile::NamedTempFile::new().unwrap();
    writeln!(bad, "stratum,x,y\nA,1,2\nA,1,abc\nA,3,4").unwrap();
    let path = bad.path().display().to_string();
    let out = run(&["--population", &path, "--n", "A=2"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("population") && stderr.contains("line 3"),
        "{stderr}"
    );

    let no_reps = run(&["--config", &config(), "--verify", "mc"]);
    assert_eq!(no_reps.status.code(), Some(1));

    let too_big = run(&["--config", &config(), "--max-enum", "100"]);
    assert_eq!(too_big.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&too_big.stderr).contains("Monte Carlo"));
}

#[test]
fn computation_errors_exit_with_two() {
    let mut flat = tempfile::NamedTempFile::new().unwrap();
    writeln!(flat, "stratum,x,y\nA,5,1\nA,5,2\nA,5,4\nA,5,3\nA,5,6").unwrap();
    let path = flat.path().display().to_string();
    let out = run(&[
        "--population",
        &path,
        "--n",
        "A=2",
        "--estimator",
        "t3s:optimize",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: optimizer:"));
}
