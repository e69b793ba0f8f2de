use std::path::Path;
use std::process::{Command, Output};

fn ajscc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ajscc"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn staircase_prints_sixteen_plateaus() {
    let o = ajscc(&["staircase", "--levels", "16"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x2,encoded"));
    let mut values: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    values.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    assert_eq!(values.len(), 16);
}

#[test]
fn simulate_writes_report_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = ajscc(&[
            "simulate",
            "--seed",
            "7",
            "--duration",
            "2",
            "--levels",
            "20",
            "--channel",
            "flat",
            "--csnr-db",
            "0",
            "--out",
            p(out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 7);
    assert_eq!(report["config"]["codec"]["levels"], 20);
    assert_eq!(report["config"]["channel"]["family"], "flat");
    for f in ["signals.csv", "source_peaks.csv", "receiver_peaks.csv"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn simulate_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "x1": {"kind": "cytometry"},
        "x2": {"kind": "gsr"},
        "duration": 1.0,
        "codec": {"levels": 11, "x1_max": 2.25, "x2_max": 3.0},
        "profile": "slow",
        "interpolate": false,
        "channel": {"family": "jtc-outdoor", "csnr_db": 10, "doppler_hz": 20},
        "analysis": {"x2_median_order": 20},
        "seed": 3
    }"#;
    let path = dir.path().join("run.json");
    std::fs::write(&path, cfg).unwrap();
    let out = dir.path().join("out");
    let o = ajscc(&["simulate", "--config", p(&path), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let signals = std::fs::read_to_string(out.join("signals.csv")).unwrap();
    assert_eq!(signals.lines().count(), 101);
}

#[test]
fn sweep_writes_table_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let o = ajscc(&[
        "sweep",
        "--levels",
        "4,8",
        "--duration",
        "1",
        "--no-interp",
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(table.starts_with("L,mse_x1,mse_x2,sum\n"));
    assert!(dir.path().join("report_L4.json").is_file());
    assert!(dir.path().join("report_L8.json").is_file());
}

#[test]
fn reproduce_fig4() {
    let dir = tempfile::tempdir().unwrap();
    let o = ajscc(&["reproduce", "--id", "fig4", "--out", p(dir.path())]);
    assert_eq!(code(&o), 0);
    let plateaus = std::fs::read_to_string(dir.path().join("fig4_plateaus.csv")).unwrap();
    assert_eq!(plateaus.lines().count(), 17);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path());
    assert_eq!(
        code(&ajscc(&[
            "simulate",
            "--channel",
            "satellite",
            "--out",
            out
        ])),
        2
    );
    assert_eq!(
        code(&ajscc(&[
            "simulate",
            "--config",
            "/no/such/run.json",
            "--out",
            out
        ])),
        2
    );
    assert_eq!(
        code(&ajscc(&["reproduce", "--id", "fig9", "--out", out])),
        2
    );
    assert_eq!(
        code(&ajscc(&["sweep", "--levels", "10:5", "--out", out])),
        2
    );
    assert_eq!(
        code(&ajscc(&[
            "simulate",
            "--channel",
            "awgn",
            "--doppler-hz",
            "5",
            "--out",
            out
        ])),
        2
    );
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(
        code(&ajscc(&["simulate", "--config", p(&bad), "--out", out])),
        2
    );
}

#[test]
fn stage_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{
        "x1": {"kind": "cytometry"},
        "x2": {"kind": "gsr"},
        "duration": 0.1,
        "codec": {"levels": 8, "x1_max": 2.25, "x2_max": 3.0},
        "profile": "fast",
        "channel": {"family": "awgn", "csnr_db": "inf"},
        "seed": 1
    }"#;
    let path = dir.path().join("run.json");
    std::fs::write(&path, cfg).unwrap();
    let o = ajscc(&[
        "simulate",
        "--config",
        p(&path),
        "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("filter"));
}
