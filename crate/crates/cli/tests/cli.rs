use std::path::Path;
use std::process::{Command, Output};

fn wavesym(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavesym"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn admissible_corner_point() {
    let o = wavesym(&["admissible", "--d", "4", "--p", "inf", "--q", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "true");
    let o = wavesym(&["admissible", "--d", "3", "--p", "2", "--q", "inf"]);
    assert_eq!(stdout(&o).trim(), "false");
}

#[test]
fn gwp_threshold_and_range() {
    let o = wavesym(&["gwp", "--d", "3", "--gamma", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "0.5");
    let o = wavesym(&["gwp", "--d", "3", "--gamma", "6"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.trim().lines().count(), 1);
    assert!(err.starts_with("error[2]:"));
}

#[test]
fn missing_parameter_is_a_config_error() {
    let o = wavesym(&["gwp", "--d", "3"]);
    assert_eq!(o.status.code(), Some(2));
    let o = wavesym(&["--root-system", "Q7", "phi", "--lambda", "1", "--h", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn small_time_decay_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = wavesym(&["decay", "--root-system", "A1", "--regime", "small", "--output-dir", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["theoretical_slope"], -1.0);
    assert!(report["fitted_slope"].as_f64().unwrap() < -0.85);
    let csv = std::fs::read_to_string(dir.path().join("decay.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,sup_ratio"));
    assert_eq!(csv.lines().count(), 13);
    let manifest = json(&dir.path().join("decay.json"));
    assert_eq!(manifest["params"]["decay"]["regime"], "small");
    assert_eq!(manifest["artifacts"][0], "decay.csv");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "root_system = \"A1\"\n[gwp]\nd = 3\ngamma = 1.5\n").unwrap();
    let c = cfg.to_str().unwrap();
    let o = wavesym(&["--config", c, "gwp"]);
    assert_eq!(stdout(&o).trim(), "0.001");
    let o = wavesym(&["--config", c, "gwp", "--gamma", "3"]);
    assert_eq!(stdout(&o).trim(), "0.5");
    std::fs::write(&cfg, "[gwp]\nd = 3\nunknown = 1\n").unwrap();
    let o = wavesym(&["--config", c, "gwp"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unresolved_transform_is_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = wavesym(&["transform", "--width", "3", "--radial-radius", "2", "--output-dir", out]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn transform_outputs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = wavesym(&["transform", "--output-dir", d.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    for name in ["radial.csv", "spectral.csv", "roundtrip.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let m = json(&a.path().join("transform.json"));
    assert!(m["results"]["roundtrip_sup_relative_error"].as_f64().unwrap() < 1e-6);
    assert!(m["versions"]["wavesym"].is_string());
    let header = std::fs::read_to_string(a.path().join("spectral.csv")).unwrap();
    assert!(header.starts_with("lambda_1,re,im"));
}

#[test]
fn kernel_csv_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = wavesym(&["--root-system", "A2", "kernel", "--t", "0.5", "--part", "low", "--output-dir", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("kernel.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,abs_H,H_1,H_2,re,im,abs,weighted_abs"));
    let m = json(&dir.path().join("kernel.json"));
    assert_eq!(m["results"]["diagnostics"][0]["piece"], "low");
}

#[test]
fn short_semilinear_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = wavesym(&["solve", "--t-final", "1", "--snapshot-every", "5", "--output-dir", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = json(&dir.path().join("solve.json"));
    assert_eq!(m["results"]["converged"], true);
    let text = std::fs::read_to_string(dir.path().join("solve.json")).unwrap();
    // top-level keys come out sorted
    let keys: Vec<&str> = ["\"artifacts\"", "\"command\"", "\"params\"", "\"results\"", "\"versions\""].to_vec();
    let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]));
    assert!(dir.path().join("snapshots/step_00000.csv").exists());
    let o = wavesym(&["solve", "--t-final", "4", "--raw-amplitude", "--amplitude", "30", "--output-dir", out]);
    assert_eq!(o.status.code(), Some(1));
}
