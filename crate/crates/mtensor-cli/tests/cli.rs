use std::path::PathBuf;
use std::process::{Command, Output};

fn mtensor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtensor")).args(args).output().expect("run mtensor")
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn scalar(out: &Output) -> f64 {
    let text = String::from_utf8_lossy(&out.stdout);
    let line = text.lines().next().expect("output line");
    line.split("= ").nth(1).expect("scalar summary").trim().parse().expect("number")
}

#[test]
fn cube_first_intrinsic_volume() {
    let out = mtensor(&["compute", "--body", "cube", "--k", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!((scalar(&out) - 3.0).abs() < 1e-12);
}

#[test]
fn segment_length() {
    let out = mtensor(&["compute", "--body", "segment:L=2", "--k", "1"]);
    assert!(out.status.success());
    assert!((scalar(&out) - 2.0).abs() < 1e-12);
}

#[test]
fn tensor_written_as_text() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.txt");
    let out = mtensor(&["compute", "--body", "cube", "--k", "2", "--s", "2", "--out", path.to_str().unwrap(), "--format", "csv"]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let t = minkowski_tensors::symtensor::SymTensor::from_text(&text).unwrap();
    assert_eq!(t.rank(), 2);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("index,value\n"));
}

#[test]
fn polytope_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tet.json");
    std::fs::write(&path, r#"{"dimension": 3, "vertices": [[0,0,0],[1,0,0],[0,1,0],[0,0,1]]}"#).unwrap();
    let out = mtensor(&["compute", "--polytope", path.to_str().unwrap(), "--k", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // half the surface area
    let area = 1.5 + 3f64.sqrt() / 2.0;
    assert!((scalar(&out) - area / 2.0).abs() < 1e-12);
}

#[test]
fn malformed_polytope_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"dimension": 3, "vertices": [[0,0]]}"#).unwrap();
    let out = mtensor(&["compute", "--polytope", path.to_str().unwrap(), "--k", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = mtensor(&["compute", "--body", "cube", "--k", "7"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn identity_suite_passes() {
    let out = mtensor(&["identity-suite", "--all", "--format", "summary"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains(", 0 failed"));
}

#[test]
fn experiment_csv_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("j1_n3.toml");
    let runs: Vec<Vec<u8>> = (0..2)
        .map(|i| {
            let path = dir.path().join(format!("run{i}.csv"));
            let threads = if i == 0 { "1" } else { "2" };
            let out = mtensor(&["--threads", threads, "experiment", "run", cfg.to_str().unwrap(), "--out", path.to_str().unwrap()]);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
            std::fs::read(&path).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert!(String::from_utf8_lossy(&runs[0]).starts_with("t,W_k,gamma_e,gamma_thetaE,defect,delta_Eprime,lemma51_ratio,quad_err\n"));
}

#[test]
fn bad_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "n = 3\nk = 1\nepsilon = -1\n").unwrap();
    let out = mtensor(&["experiment", "run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = mtensor(&["experiment", "run", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn coarse_step_is_a_regime_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("j2_n4.toml")).unwrap();
    let coarse: String = text.lines().map(|l| if l.starts_with("t = ") { "t = [0.04]".to_string() } else { l.to_string() } + "\n").collect();
    let path = dir.path().join("coarse.toml");
    std::fs::write(&path, coarse).unwrap();
    let out = mtensor(&["experiment", "run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
