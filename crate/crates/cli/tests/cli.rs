use std::path::Path;
use std::process::{Command, Output};

fn sonar(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sonar"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn unknown_preset_lists_the_valid_names() {
    let dir = tempfile::tempdir().unwrap();
    let out = sonar(&["generate", "--preset", "spiral", "--out", "x.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    for name in ["stationary2", "mild4", "transfer2", "adversarial10", "hemisphere2"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn generate_writes_the_preset_stream() {
    let dir = tempfile::tempdir().unwrap();
    let out = sonar(
        &["generate", "--preset", "mild4", "--seed", "5", "--out", "m.csv"],
        dir.path(),
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x0,x1,label,phase"));
    assert_eq!(lines.count(), 40_000);
}

#[test]
fn run_writes_outputs_and_reproduces_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = sonar(
        &[
            "run",
            "--preset",
            "stationary2",
            "--runs",
            "2",
            "--seed",
            "9",
            "--output",
            "a",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["runs"], 2);
    assert_eq!(summary["feature_dim"], 60);
    for f in [
        "aggregate.csv",
        "aggregate_smoothed.csv",
        "manifest.json",
        "run_000.csv",
        "run_001.json",
        "state_001.json",
    ] {
        assert!(dir.path().join("a").join(f).exists(), "{f}");
    }

    let again = sonar(&["run", "--manifest", "a/manifest.json", "--output", "b"], dir.path());
    assert!(again.status.success());
    for f in ["run_000.csv", "run_001.csv", "aggregate.csv"] {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn failed_assertion_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = sonar(
        &[
            "run",
            "--preset",
            "stationary2",
            "--runs",
            "1",
            "--assert-tail-type1",
            "0.0001",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    let ok = sonar(
        &[
            "run",
            "--preset",
            "stationary2",
            "--runs",
            "1",
            "--assert-restarts",
            "0,0",
        ],
        dir.path(),
    );
    assert!(ok.status.success());
}

#[test]
fn invalid_values_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = sonar(&["run", "--lambda", "1.5"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda"));
    let out = sonar(&["run", "--algorithm", "svm"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = sonar(&["tune-cpd", "--cpd-mode", "sometimes"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_or_malformed_data_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = sonar(&["run", "--csv", "absent.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(dir.path().join("bad.csv"), "a,b\n1.0,2.0\n3.0,oops\n").unwrap();
    let out = sonar(&["run", "--csv", "bad.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 2"));
}

#[test]
fn csv_run_and_offline_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("when;a;b;anomaly\n");
    for i in 0..400 {
        let t = i as f64 * 0.1;
        let label = u8::from(i % 50 == 49);
        let (a, b) = if label == 1 { (8.0, -8.0) } else { (t.sin(), t.cos()) };
        text.push_str(&format!("{i};{a};{b};{label}\n"));
    }
    std::fs::write(dir.path().join("d.csv"), text).unwrap();
    let csv_args = [
        "--csv",
        "d.csv",
        "--delimiter",
        ";",
        "--label-column",
        "anomaly",
        "--exclude-columns",
        "when",
    ];

    let mut args = vec!["run", "--output", "o", "--runs", "1"];
    args.extend(csv_args);
    let out = sonar(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let mut args = vec!["eval-offline", "--snapshot", "o/state_000.json"];
    args.extend(csv_args);
    let out = sonar(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let eval = stdout_json(&out);
    assert_eq!(eval["normals"], 392);
    assert_eq!(eval["outliers"], 8);
    assert!(eval["type2"].as_f64().unwrap() < 0.5);
}

#[test]
fn grid_export_from_training_and_snapshot_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out = sonar(
        &[
            "run",
            "--preset",
            "stationary2",
            "--runs",
            "1",
            "--seed",
            "4",
            "--output",
            "o",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let grid = "-2,2,-2,2,11,11";
    let a = sonar(
        &[
            "grid-export",
            "--snapshot",
            "o/state_000.json",
            "--grid",
            grid,
            "--out",
            "a.csv",
        ],
        dir.path(),
    );
    let b = sonar(
        &[
            "grid-export",
            "--preset",
            "stationary2",
            "--seed",
            "4",
            "--grid",
            grid,
            "--out",
            "b.csv",
        ],
        dir.path(),
    );
    assert!(a.status.success() && b.status.success());
    let a = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert_eq!(a.lines().count(), 122);
    assert_eq!(a, b);
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.toml"),
        "algorithm = \"sgd_ocsvm\"\nruns = 1\n[source]\nkind = \"preset\"\nname = \"stationary2\"\n",
    )
    .unwrap();
    let out = sonar(&["run", "--config", "c.toml", "--algorithm", "sonar"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["algorithm"], "sonar");

    std::fs::write(dir.path().join("bad.toml"), "lambda = 0.1\nmystery = 3\n").unwrap();
    let out = sonar(&["run", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}
