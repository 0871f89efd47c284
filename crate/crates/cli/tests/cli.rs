use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use tempfile::TempDir;

fn pnav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pnav"))
        .args(args)
        .output()
        .expect("spawn pnav")
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

/// One calibration shared by every test in this file.
fn calib_dir() -> &'static Path {
    static DIR: OnceLock<TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let d = TempDir::new().unwrap();
        let out = pnav(&["calibrate", "--out", d.path().to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        d
    })
    .path()
}

/// The reference hall with a single loop, written next to a copy of the map.
fn short_scenario(dir: &Path) -> PathBuf {
    let text = std::fs::read_to_string(scenarios().join("hall.scn")).unwrap();
    let text = text.replace("route.loops = 5", "route.loops = 1");
    std::fs::copy(scenarios().join("hall.map"), dir.join("hall.map")).unwrap();
    let p = dir.join("short.scn");
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn calibrate_writes_four_files_and_is_reproducible() {
    let first = calib_dir();
    let again = TempDir::new().unwrap();
    let out = pnav(&["calibrate", "--out", s(again.path())]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("residual"), "{stdout}");
    let r2: f64 = stdout
        .split("R^2 ")
        .nth(1)
        .and_then(|t| t.split(',').next())
        .and_then(|t| t.trim().parse().ok())
        .expect("R^2 line");
    assert!(r2 >= 0.8);
    for f in [
        "motor_plant.txt",
        "motor_model.txt",
        "embedded_model.txt",
        "timeline.txt",
    ] {
        let a = std::fs::read(first.join(f)).unwrap();
        let b = std::fs::read(again.path().join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between runs");
    }
}

#[test]
fn run_is_deterministic_and_writes_the_schema_header() {
    let tmp = TempDir::new().unwrap();
    let scn = short_scenario(tmp.path());
    let (a, b) = (tmp.path().join("a.csv"), tmp.path().join("b.csv"));
    for out in [&a, &b] {
        let o = pnav(&[
            "run",
            "--scenario",
            s(&scn),
            "--policy",
            "PNAV",
            "--seed",
            "4",
            "--out",
            s(out),
            "--calib-dir",
            s(calib_dir()),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (ta, tb) = (
        std::fs::read_to_string(&a).unwrap(),
        std::fs::read_to_string(&b).unwrap(),
    );
    assert_eq!(ta, tb);
    assert_eq!(ta.lines().next(), Some("# pnav-metrics v1"));
    assert!(ta.lines().nth(1).unwrap().starts_with("time,"));
    let sa = std::fs::read(tmp.path().join("a.summary.json")).unwrap();
    let sb = std::fs::read(tmp.path().join("b.summary.json")).unwrap();
    assert_eq!(sa, sb);
    let summary: serde_json::Value = serde_json::from_slice(&sa).unwrap();
    assert_eq!(summary["policy"], "PNAV");
    assert_eq!(summary["seed"], 4);
    assert!(tmp.path().join("a.decisions.jsonl").exists());
}

#[test]
fn usage_and_config_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let scn = short_scenario(tmp.path());
    let out = tmp.path().join("x.csv");

    let o = pnav(&[
        "run",
        "--scenario",
        s(&scn),
        "--policy",
        "warp",
        "--out",
        s(&out),
        "--calib-dir",
        s(calib_dir()),
    ]);
    assert_eq!(o.status.code(), Some(2));

    let o = pnav(&[
        "run",
        "--scenario",
        s(&scn),
        "--out",
        s(&out),
        "--calib-dir",
        s(&tmp.path().join("nowhere")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("pnav calibrate"));

    let bad = tmp.path().join("bad.scn");
    std::fs::write(&bad, "map.path = builtin:hall\nrobot.start = 3 4 0\nroute.speed = 3\n").unwrap();
    let o = pnav(&[
        "run",
        "--scenario",
        s(&bad),
        "--out",
        s(&out),
        "--calib-dir",
        s(calib_dir()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&o.stderr).contains("bad.scn:3"),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );

    let o = pnav(&[
        "compare",
        "--scenario",
        s(&scn),
        "--policy",
        "SP",
        "--out",
        s(&out),
        "--calib-dir",
        s(calib_dir()),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn aborted_run_exits_with_one() {
    let tmp = TempDir::new().unwrap();
    let scn = short_scenario(tmp.path());
    let text = std::fs::read_to_string(&scn)
        .unwrap()
        .replace("run.max_time = 1800", "run.max_time = 2");
    std::fs::write(&scn, text).unwrap();
    let o = pnav(&[
        "run",
        "--scenario",
        s(&scn),
        "--out",
        s(&tmp.path().join("x.csv")),
        "--calib-dir",
        s(calib_dir()),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn compare_reports_energy_reduction() {
    let tmp = TempDir::new().unwrap();
    let scn = short_scenario(tmp.path());
    let report = tmp.path().join("report.json");
    let o = pnav(&[
        "compare",
        "--scenario",
        s(&scn),
        "--policy",
        "SP,PNAV",
        "--out",
        s(&report),
        "--calib-dir",
        s(calib_dir()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(r["reference"], "PNAV");
    let red = &r["reductions"][0];
    assert_eq!(red["baseline"], "SP");
    let energy = |p: &str| {
        r["summaries"]
            .as_array()
            .unwrap()
            .iter()
            .find(|s| s["policy"] == p)
            .unwrap()["total_energy"]
            .as_f64()
            .unwrap()
    };
    let want = 100.0 * (energy("SP") - energy("PNAV")) / energy("SP");
    assert!((red["energy_pct"].as_f64().unwrap() - want).abs() < 1e-9);
    assert!(want >= 20.0, "reduction {want}%");
}
