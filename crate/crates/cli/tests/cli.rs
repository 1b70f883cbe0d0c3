use std::path::Path;
use std::process::{Command, Output};

fn systole(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_systole"))
        .arg("--quiet")
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn loss_curves_schema_and_symmetry() {
    let dir = tempfile::tempdir().unwrap();
    let out = systole(dir.path(), &["loss-curves", "--out", "c"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (h, shift) = read_csv(&dir.path().join("c/shift_sweep.csv"));
    assert_eq!(h, ["delta_t", "sed", "kl", "js", "ws"]);
    assert_eq!(shift.len(), 101);
    for (a, b) in shift.iter().zip(shift.iter().rev()) {
        assert_eq!(a[0], -b[0]);
        assert!((a[4] - b[4]).abs() <= 1e-9);
    }
    let (h, sharp) = read_csv(&dir.path().join("c/sharpness_sweep.csv"));
    assert_eq!(h, ["sigma2", "sed", "kl", "js", "ws"]);
    assert!(sharp.len() >= 31);
    let checks: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("c/curve_checks.json")).unwrap()).unwrap();
    assert_eq!(checks["ws_symmetric"], true);
}

#[test]
fn missing_inputs_exit_nonzero_with_message() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["hrv", "--peaks-dir", "nowhere"][..],
        &["classify", "--features", "missing.csv"],
        &["infer", "--input", "missing.json", "--model", "missing.json"],
        &["pipeline", "--corpus", "nowhere"],
        &["pipeline", "--model", "missing.json"],
    ] {
        let out = systole(dir.path(), args);
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(String::from_utf8_lossy(&out.stderr).contains("error"), "{args:?}");
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"seed": 3, "gen": {"n_subjects_per_class": 2, "clips_per_subject": 1, "duration_s": 12.0, "classes": ["sr"]}}"#,
    )
    .unwrap();
    let out = systole(dir.path(), &["--config", "cfg.json", "gen", "--clips", "2", "--out", "g"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("g/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 3);
    assert_eq!(m["duration_s"], 12.0);
    assert_eq!(m["clips"].as_array().unwrap().len(), 4);
}

#[test]
fn gen_hrv_classify_chain() {
    let dir = tempfile::tempdir().unwrap();
    let ok = |args: &[&str]| {
        let out = systole(dir.path(), args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    };
    ok(&["gen", "--subjects", "4", "--clips", "2", "--duration", "20", "--classes", "sr,af", "--out", "corpus"]);
    ok(&["infer", "--method", "bandpass", "--input", "corpus", "--out", "peaks"]);
    ok(&["hrv", "--peaks-dir", "corpus", "--segment", "10", "--out", "hrv"]);
    let (h, rows) = {
        let mut r = csv::Reader::from_path(dir.path().join("hrv/features.csv")).unwrap();
        let h: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
        (h, r.records().count())
    };
    assert_eq!(h.len(), 22);
    assert_eq!(rows, 32);
    ok(&["classify", "--task", "af-vs-sr", "--folds", "2", "--features", "hrv/features.csv", "--out", "cls"]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("cls/report.json")).unwrap()).unwrap();
    assert_eq!(report["evaluation"]["protocol"], "k_fold");
    assert_eq!(report["evaluation"]["subject_independent"], true);
    assert!(report["config_hash"].as_str().unwrap().len() == 64);
    let peaks = std::fs::read_dir(dir.path().join("peaks/af")).unwrap().count();
    assert_eq!(peaks, 4);
}
