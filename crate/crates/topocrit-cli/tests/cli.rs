use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("topocrit-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn topocrit(args: &[&str], env_workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_topocrit"));
    cmd.args(args);
    cmd.env_remove("TOPOCRIT_WORKERS");
    if let Some(w) = env_workers {
        cmd.env("TOPOCRIT_WORKERS", w);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn band_has_1024_rows_with_minimum_at_zero() {
    let dir = scratch("band");
    let cfg = write_config(&dir, r#"{"experiment": "BAND", "couplings": [1, -1]}"#);
    let out = topocrit(&["run", &cfg, "--out", dir.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.join("band.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k,energy"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (k, e) = l.split_once(',').unwrap();
            (k.parse().unwrap(), e.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 1024);
    let (k_min, e_min) = rows.iter().copied().fold((0.0, f64::INFINITY), |a, r| if r.1 < a.1 { r } else { a });
    assert!(k_min.abs() < 1e-12 && e_min.abs() < 1e-12, "{k_min} {e_min}");
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("band.json")).unwrap()).unwrap();
    assert_eq!(meta["details"]["touching"]["order_p"], 1);
    assert_eq!(meta["config"]["couplings"], serde_json::json!([1, -1]));
    assert!(meta["version"].is_string() && meta["wall_time_seconds"].is_number());
}

#[test]
fn output_is_independent_of_worker_count() {
    let dir = scratch("determinism");
    let cfg = write_config(
        &dir,
        r#"{"experiment": "PHASE_DIAGRAM", "model": "ESSH", "base": [1, -1, 0.5],
            "axis1": {"index": 1, "start": -3, "end": 3, "points": 7},
            "axis2": {"index": 2, "start": -2, "end": 2, "points": 5}}"#,
    );
    let (a, b) = (dir.join("one"), dir.join("eight"));
    assert!(topocrit(&["run", &cfg, "--workers", "1", "--out", a.to_str().unwrap()], None).status.success());
    assert!(topocrit(&["run", &cfg, "--out", b.to_str().unwrap()], Some("8")).status.success());
    let one = std::fs::read(a.join("phase_diagram.csv")).unwrap();
    let eight = std::fs::read(b.join("phase_diagram.csv")).unwrap();
    assert_eq!(one, eight);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(b.join("phase_diagram.json")).unwrap()).unwrap();
    assert_eq!(meta["workers"], 8);
}

#[test]
fn empty_sizes_exit_with_error() {
    let dir = scratch("empty");
    let cfg = write_config(&dir, r#"{"experiment": "QFI_SCALING", "couplings": [1, -1], "sizes": []}"#);
    let out = topocrit(&["run", &cfg, "--out", dir.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sizes"));
}

#[test]
fn validate_reports_unknown_field_line() {
    let dir = scratch("validate");
    let cfg = write_config(&dir, "{\n  \"experiment\": \"BAND\",\n  \"couplings\": [1, -1],\n  \"nk\": 5\n}\n");
    let out = topocrit(&["validate", &cfg], None);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4") && err.contains("nk"), "{err}");
    let good = write_config(&dir, r#"{"experiment": "BAND", "couplings": [1, -1]}"#);
    assert!(topocrit(&["validate", &good], None).status.success());
}

#[test]
fn failed_fit_exits_with_two() {
    let dir = scratch("fitfail");
    let cfg = write_config(
        &dir,
        r#"{"experiment": "GAP_SCALING", "couplings": [1, -1], "sizes": [16, 32, 64, 128], "reference_exponent": -3, "tolerance": 0.1}"#,
    );
    let out = topocrit(&["run", &cfg, "--out", dir.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_worker_env_is_an_error() {
    let dir = scratch("env");
    let cfg = write_config(&dir, r#"{"experiment": "BAND", "couplings": [1, -1]}"#);
    let out = topocrit(&["run", &cfg, "--out", dir.to_str().unwrap()], Some("zero"));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn list_experiments_names_every_kind() {
    let out = topocrit(&["list-experiments"], None);
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["BAND", "PHASE_DIAGRAM", "QFI_SCALING", "GAP_SCALING", "GHZ_SURFACE", "EDGE_ANALYSIS", "HOTI_SCALING", "CHERN_SCALING"] {
        assert!(text.contains(name), "{name}");
    }
}

fn shipped_configs() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    paths
}

#[test]
fn shipped_configs_validate() {
    let paths = shipped_configs();
    assert!(paths.len() >= 8);
    for p in paths {
        let out = topocrit(&["validate", p.to_str().unwrap()], None);
        assert!(out.status.success(), "{}: {}", p.display(), String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn quick_shipped_configs_pass_their_fits() {
    let dir = scratch("shipped");
    for name in ["band", "edge_analysis", "gap_scaling", "phase_diagram_essh", "phase_diagram_chern", "qfi_scaling", "hoti_scaling"] {
        let p = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("../../configs/{name}.json"));
        let out = topocrit(&["run", p.to_str().unwrap(), "--out", dir.to_str().unwrap()], None);
        assert_eq!(out.status.code(), Some(0), "{name}: {}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    }
}
