use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn ltcache(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ltcache"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = r#"{
    "n": 4, "k": 30, "M": 2, "alpha": 0.0,
    "gamma": [1.0],
    "distribution": {"kind": "robust_soliton", "c": 0.1, "delta": 0.5},
    "delta_cap": 300,
    "seed": 7,
    "sweep": {"M": [0, 1, 2, 3], "alpha": [0.0, 0.5, 1.0]},
    "simulation": {"trials": 400}
}"#;

fn run_ok(args: &[&str]) -> String {
    let out = ltcache(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn pfail_degree_one_closed_form() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "d1.json",
        r#"{"n": 1, "k": 2, "M": 0, "gamma": [1.0], "delta_cap": 40,
            "distribution": {"kind": "point_mass", "degree": 1}}"#,
    );
    let out = dir.path().join("out");
    run_ok(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--plot", "pfail"]);
    let text = fs::read_to_string(out.join("pfail.csv")).unwrap();
    assert!(text.starts_with("delta,pf\n"));
    for row in csv_rows(&out.join("pfail.csv")) {
        let d: i32 = row[0].parse().unwrap();
        let pf: f64 = row[1].parse().unwrap();
        assert!((pf - 0.5f64.powi(d + 1)).abs() < 1e-15, "delta {d}: {pf}");
        // 17 significant digits.
        assert_eq!(row[1].split('e').next().unwrap().replace('.', "").len(), 17);
    }
    assert!(out.join("pfail.gp").exists());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let files: Vec<&str> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["file"].as_str().unwrap())
        .collect();
    assert_eq!(files, ["pfail.csv", "pfail.json", "pfail.gp"]);
}

#[test]
fn truncated_curve_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "t.json",
        r#"{"n": 1, "k": 50, "M": 0, "gamma": [1.0], "delta_cap": 5,
            "distribution": {"kind": "ideal_soliton"}}"#,
    );
    let out = ltcache(&["--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap(), "pfail"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("truncated"));
    let out = ltcache(&["--config", cfg.to_str().unwrap(), "--out", dir.path().join("o2").to_str().unwrap(), "overhead"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn config_errors_exit_2_with_key_path() {
    let dir = TempDir::new().unwrap();
    let bad = write_config(dir.path(), "bad.json", &SMALL.replace("\"M\": 2", "\"M\": 9"));
    let out = ltcache(&["--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "optimize"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`M`"));

    let bad = write_config(dir.path(), "bad2.json", &SMALL.replace("\"delta\": 0.5", "\"delta\": 2"));
    let out = ltcache(&["--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "pfail"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("distribution.delta"));

    let out = ltcache(&["--out", dir.path().to_str().unwrap(), "pfail"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ltcache(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rate_vs_m_uniform_structure() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "s.json", SMALL);
    let out = dir.path().join("out");
    run_ok(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "overhead"]);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("overhead.json")).unwrap()).unwrap();
    let e_delta_norm = report["e_delta_normalized"].as_f64().unwrap();

    run_ok(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--plot", "rate-vs-m"]);
    let rows = csv_rows(&out.join("rate_vs_m.csv"));
    assert_eq!(rows.len(), 8);
    for pair in rows.chunks(2) {
        let m: f64 = pair[0][0].parse().unwrap();
        assert_eq!((pair[0][2].as_str(), pair[1][2].as_str()), ("LT", "MDS"));
        let lt: f64 = pair[0][3].parse().unwrap();
        let mds: f64 = pair[1][3].parse().unwrap();
        assert!((mds - (1.0 - m / 4.0)).abs() < 1e-12);
        assert!((lt - mds - e_delta_norm).abs() < 1e-12, "M = {m}");
    }
}

#[test]
fn rate_vs_alpha_and_optimize() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "s.json", SMALL);
    let out = dir.path().join("out");
    run_ok(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "rate-vs-alpha", "--M", "1"]);
    let rows = csv_rows(&out.join("rate_vs_alpha.csv"));
    let mds: Vec<f64> = rows.iter().filter(|r| r[2] == "MDS").map(|r| r[3].parse().unwrap()).collect();
    assert_eq!(mds.len(), 3);
    assert!(mds.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(rows.iter().all(|r| r[0] == "1"));

    run_ok(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "optimize"]);
    let w: Vec<u64> = csv_rows(&out.join("placement.csv")).iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(w, vec![15; 4]);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("optimize.json")).unwrap()).unwrap();
    assert_eq!(report["relaxed"]["certified"], true);
}

#[test]
fn manifest_replay_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "s.json", &SMALL.replace("\"alpha\": 0.0", "\"alpha\": 0.7"));
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    run_ok(&["--config", cfg.to_str().unwrap(), "--out", first.to_str().unwrap(), "--seed", "99", "simulate", "--per-trial", "--trials", "300"]);
    let manifest = first.join("manifest.json");
    run_ok(&["--config", manifest.to_str().unwrap(), "--out", second.to_str().unwrap(), "--threads", "1", "simulate"]);
    for name in ["trials.csv", "simulate.json", "manifest.json"] {
        assert_eq!(fs::read(first.join(name)).unwrap(), fs::read(second.join(name)).unwrap(), "{name}");
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(first.join("simulate.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 99);
    assert_eq!(report["trials"], 300);
    assert!(report["z_score"].as_f64().unwrap().abs() <= 3.0, "{report}");
}

#[test]
fn distribution_file_and_connectivity() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("omega.txt"), "1 0.1\n2 0.5\n3 0.4\n").unwrap();
    let cfg = write_config(
        dir.path(),
        "f.json",
        r#"{"n": 2, "k": 10, "M": 1, "gamma": [1.0], "delta_cap": 200,
            "distribution": {"kind": "file", "path": "omega.txt"}}"#,
    );
    let out = dir.path().join("out");
    run_ok(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "overhead"]);
    // The manifest pins the distribution file to an absolute path.
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert!(Path::new(manifest["config"]["distribution"]["path"].as_str().unwrap()).is_absolute());

    let conn = dir.path().join("conn");
    let stdout = run_ok(&["--out", conn.to_str().unwrap(), "connectivity", "--radius", "10", "--spacing", "100", "--samples", "20000"]);
    assert!(stdout.contains("gamma = (1.0000)"));
    assert!(stdout.contains("covered by no transmitter"));
    let rows = csv_rows(&conn.join("connectivity.csv"));
    assert_eq!(rows[1][0], "1");
    assert_eq!(rows[1][2].parse::<f64>().unwrap(), 1.0);
}
