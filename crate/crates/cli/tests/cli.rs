use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ivbounds(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ivbounds"))
        .args(args)
        .env_remove("IVBOUNDS_THREADS")
        .output()
        .expect("binary runs")
}

fn simulate(dir: &Path, n: usize, extra: &[&str]) -> std::path::PathBuf {
    let out = dir.join("sim.csv");
    let n = n.to_string();
    let mut args = vec![
        "simulate",
        "--n",
        &n,
        "--seed",
        "11",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let o = ivbounds(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("valid json")
}

#[test]
fn simulate_writes_sample_and_latents() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(dir.path(), 1000, &["--emit-latents"]);
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("y,d,z"));
    assert_eq!(lines.count(), 1000);
    let side = fs::read_to_string(dir.path().join("sim.latents.csv")).unwrap();
    assert!(side.starts_with("D0,D1,T,Y1,Y0\n"));
    assert_eq!(side.lines().count(), 1001);
}

#[test]
fn simulate_output_ignores_thread_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let one = simulate(a.path(), 70_000, &["--threads", "1"]);
    let many = simulate(b.path(), 70_000, &["--threads", "3"]);
    assert_eq!(fs::read(one).unwrap(), fs::read(many).unwrap());
}

#[test]
fn analyze_reports_every_section() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), 20_000, &[]);
    let v = json(&ivbounds(&[
        "analyze",
        "--data",
        data.to_str().unwrap(),
        "--grid",
        "11",
    ]));
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["input"]["n"], 20_000);
    for key in [
        "cell_stats",
        "monotone_shares",
        "validity",
        "sets",
        "a3_effects",
        "robust",
        "inference",
    ] {
        assert!(!v[key].is_null(), "missing {key}");
    }
    for menu in ["a1", "a2", "a3"] {
        assert!(!v["sets"][menu].is_null());
    }
    let menus = v["robust"]["active_menus"].as_array().unwrap();
    assert!(!menus.is_empty());
    assert!(v["anchors"]["validity.slacks"].is_string());
}

#[test]
fn analyze_can_write_to_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), 5_000, &[]);
    let report = dir.path().join("report.json");
    let o = ivbounds(&[
        "analyze",
        "--data",
        data.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
        "--bins",
        "25",
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(v["input"]["grid"]["cells"], 25);
}

#[test]
fn test_and_ci_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path(), 10_000, &[]);
    let path = data.to_str().unwrap();
    let t = json(&ivbounds(&["test", "--data", path]));
    assert!(t["validity"]["slacks"]["slack_d1"].as_f64().unwrap() >= 0.0);
    assert!(t["a1_empty"].is_boolean());
    assert!(t["validity"]["first_stage"].as_f64().unwrap() < 0.0);
    fails_with(&["ci", "--data", path], "first stage");

    let flipped = dir.path().join("flipped.csv");
    let text = fs::read_to_string(&data).unwrap();
    let mut rows = vec!["y,d,z".to_string()];
    for line in text.lines().skip(1) {
        let (head, z) = line.rsplit_once(',').unwrap();
        rows.push(format!("{head},{}", if z == "1" { 0 } else { 1 }));
    }
    fs::write(&flipped, rows.join("\n") + "\n").unwrap();
    let c = json(&ivbounds(&[
        "ci",
        "--data",
        flipped.to_str().unwrap(),
        "--level",
        "0.9",
    ]));
    assert_eq!(c["inference"]["level"], 0.9);
    let lb = c["inference"]["delta_0n"]["lb"].as_f64().unwrap();
    let ci_lo = c["inference"]["delta_0n"]["ci"]["interval"]["lo"]
        .as_f64()
        .unwrap();
    assert!(ci_lo <= lb);
}

#[test]
fn custom_column_names() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("named.csv");
    fs::write(
        &data,
        "wage,college,near\n1.0,1,1\n2.0,0,1\n1.5,1,0\n0.5,0,0\n3.0,1,1\n",
    )
    .unwrap();
    let v = json(&ivbounds(&[
        "test",
        "--data",
        data.to_str().unwrap(),
        "--y",
        "wage",
        "--d",
        "college",
        "--z",
        "near",
    ]));
    assert_eq!(v["input"]["n"], 5);
}

fn fails_with(args: &[&str], needle: &str) {
    let o = ivbounds(args);
    assert_eq!(o.status.code(), Some(2), "args {args:?}");
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(needle), "stderr: {err}");
    assert_eq!(err.trim_end().lines().count(), 1, "stderr: {err}");
}

#[test]
fn input_errors_exit_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "y,d,z\n1.0,1,1\n2.0,3,0\n").unwrap();
    let p = data.to_str().unwrap();
    fails_with(&["analyze", "--data", p], "row 2");
    fails_with(&["analyze", "--data", p, "--y", "wage"], "wage");
    fails_with(
        &[
            "simulate",
            "--rho",
            "2",
            "--n",
            "10",
            "--out",
            dir.path().join("x.csv").to_str().unwrap(),
        ],
        "rho",
    );
    fails_with(&["replicate", "card"], "--data");

    let ok = dir.path().join("ok.csv");
    fs::write(&ok, "y,d,z\n1.0,1,1\n2.0,0,0\n").unwrap();
    fails_with(
        &["analyze", "--data", ok.to_str().unwrap(), "--bins", "zero"],
        "--bins",
    );
    fails_with(
        &["ci", "--data", ok.to_str().unwrap(), "--level", "1.5"],
        "1.5",
    );
}

#[test]
fn replicate_prints_one_verdict_per_check() {
    let o = ivbounds(&["replicate", "double-hurdle", "--n", "200000"]);
    let text = String::from_utf8_lossy(&o.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 8);
    assert!(lines
        .iter()
        .all(|l| l.starts_with("PASS ") || l.starts_with("FAIL ")));
    let any_fail = lines.iter().any(|l| l.starts_with("FAIL "));
    assert_eq!(o.status.code(), Some(if any_fail { 1 } else { 0 }));
}
