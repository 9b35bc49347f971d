use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use canvas_core::harness::{canvas_error_study, det_time_rate_study, StudyConfig, StudyKind};
use canvas_core::NoiseMatrix;
use serde_json::Value;

fn lab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_canvas-lab"))
        .current_dir(dir)
        .env_remove("CANVAS_LAB_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

fn small_config(dir: &Path, extra: &str) -> String {
    let p = dir.join("lab.toml");
    fs::write(&p, format!("steps = 16\nslabs = 8\nmodes = 4\nelements_sweep = [8]\n{extra}")).unwrap();
    p.display().to_string()
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn sample_path_is_byte_identical_for_a_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    ok(&lab(dir.path(), &["--config", &cfg, "--seed", "5", "--out-dir", "a", "sample-path"]));
    ok(&lab(dir.path(), &["--config", &cfg, "--seed", "5", "--out-dir", "b", "sample-path"]));
    let a = fs::read(dir.path().join("a/sample_path.csv")).unwrap();
    let b = fs::read(dir.path().join("b/sample_path.csv")).unwrap();
    assert_eq!(a, b);
    ok(&lab(dir.path(), &["--config", &cfg, "--seed", "6", "--out-dir", "c", "sample-path"]));
    assert_ne!(a, fs::read(dir.path().join("c/sample_path.csv")).unwrap());
}

#[test]
fn first_snapshot_is_zero_and_paths_move_later() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    ok(&lab(dir.path(), &["--config", &cfg, "sample-path", "--points", "8"]));
    let rows = data_rows(&fs::read_to_string(dir.path().join("out/sample_path.csv")).unwrap());
    assert_eq!(rows.len(), 17 * 9);
    for r in rows.iter().filter(|r| r[0] == "0") {
        assert_eq!(r[3].parse::<f64>().unwrap(), 0.0);
        assert_eq!(r[4].parse::<f64>().unwrap(), 0.0);
    }
    assert!(rows.iter().any(|r| r[3].parse::<f64>().unwrap() != 0.0));
}

#[test]
fn zero_modes_give_an_all_zero_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    ok(&lab(dir.path(), &["--config", &cfg, "sample-path", "--every", "4"]));
    fs::write(dir.path().join("zero.toml"), "steps = 16\nslabs = 8\nmodes = 0\nelements_sweep = [8]\n").unwrap();
    ok(&lab(dir.path(), &["--config", "zero.toml", "--out-dir", "z", "sample-path", "--every", "4"]));
    let rows = data_rows(&fs::read_to_string(dir.path().join("z/sample_path.csv")).unwrap());
    assert_eq!(rows.len(), 5 * 65);
    assert!(rows.iter().all(|r| r[3].parse::<f64>().unwrap() == 0.0 && r[4].parse::<f64>().unwrap() == 0.0));
}

#[test]
fn every_output_carries_hash_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "seed = 77\n");
    ok(&lab(dir.path(), &["--config", &cfg, "sample-path"]));
    ok(&lab(dir.path(), &["--config", &cfg, "noise-dump"]));
    let mut hashes = Vec::new();
    for name in ["sample_path.csv", "noise.csv"] {
        let text = fs::read_to_string(dir.path().join("out").join(name)).unwrap();
        let header: Vec<&str> = text.lines().take_while(|l| l.starts_with('#')).collect();
        assert!(header.contains(&"# seed=77"), "{name}");
        let hash = header.iter().find_map(|l| l.strip_prefix("# config_sha256=")).unwrap();
        assert_eq!(hash.len(), 64);
        hashes.push(hash.to_string());
    }
    assert_eq!(hashes[0], hashes[1]);
    for name in ["sample_path_manifest.json", "noise_manifest.json"] {
        let m = read_json(&dir.path().join("out").join(name));
        assert_eq!(m["config_sha256"], hashes[0].as_str());
        assert_eq!(m["seed"], 77);
        assert_eq!(m["config"]["seed"], 77);
    }
}

#[test]
fn noise_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    ok(&lab(dir.path(), &["--config", &cfg, "noise-dump"]));
    let noise = NoiseMatrix::read_dump(&fs::read(dir.path().join("out/noise.bin")).unwrap()[..]).unwrap();
    assert_eq!((noise.grid().slabs(), noise.grid().modes()), (8, 4));
    let rows = data_rows(&fs::read_to_string(dir.path().join("out/noise.csv")).unwrap());
    assert_eq!(rows.len(), 32);
    for r in rows {
        let (n, k): (usize, usize) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        assert_eq!(r[2].parse::<f64>().unwrap(), noise.get(n, k));
    }
}

#[test]
fn output_dir_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let o = Command::new(env!("CARGO_BIN_EXE_canvas-lab"))
        .current_dir(dir.path())
        .env("CANVAS_LAB_OUT_DIR", "from-env")
        .args(["--config", &cfg, "noise-dump"])
        .output()
        .unwrap();
    ok(&o);
    assert!(dir.path().join("from-env/noise.bin").exists());
}

#[test]
fn unknown_study_lists_valid_names() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(dir.path(), &["study", "det-tim"]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    for k in StudyKind::ALL {
        assert!(err.contains(k.name()), "{err}");
    }
}

#[test]
fn missing_config_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(dir.path(), &["--config", "nowhere/lab.toml", "study", "det-time"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("nowhere/lab.toml"));
}

#[test]
fn unknown_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "time_steps = 3\n");
    let o = lab(dir.path(), &["--config", &cfg, "noise-dump"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("time_steps"));
}

#[test]
fn invalid_values_fail_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(dir.path(), &["--degree", "5", "noise-dump"]);
    assert!(!o.status.success());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn det_time_summary_reports_the_harness_rate() {
    let dir = tempfile::tempdir().unwrap();
    ok(&lab(dir.path(), &["study", "det-time"]));
    let s = read_json(&dir.path().join("out/det-time_summary.json"));
    let expected = det_time_rate_study(&StudyConfig::for_study(StudyKind::DetTime)).unwrap();
    let rate = s["fitted_rate"].as_f64().unwrap();
    assert_eq!(rate, expected.slope().unwrap());
    assert!(rate > 0.5, "first-order scheme, pre-asymptotic sweep: {rate}");
    let ci = s["fit"]["ci95"].as_array().unwrap();
    assert!(ci[0].as_f64().unwrap() <= rate && rate <= ci[1].as_f64().unwrap());
    let rows = data_rows(&fs::read_to_string(dir.path().join("out/det-time.csv")).unwrap());
    assert_eq!(rows.len(), 5);
    assert!(dir.path().join("out/det-time_manifest.json").exists());
}

#[test]
fn canvas_summary_reports_mode_slopes() {
    let dir = tempfile::tempdir().unwrap();
    ok(&lab(dir.path(), &["study", "canvas"]));
    let s = read_json(&dir.path().join("out/canvas_summary.json"));
    let expected = canvas_error_study(&StudyConfig::for_study(StudyKind::Canvas)).unwrap();
    assert_eq!(s["slope_M"].as_f64().unwrap(), expected.modes.slope().unwrap());
    let truncated = s["slope_M_truncated"].as_f64().unwrap();
    assert!((truncated + 0.5).abs() < 0.05, "{truncated}");
}

#[test]
fn studies_are_reproducible_and_flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("tdr.toml"),
        "slabs = 16\nmodes = 4\nsteps_sweep = [4, 8, 16]\nmu = 3.0\n",
    )
    .unwrap();
    let args = ["--config", "tdr.toml", "--mu", "-1", "study", "--study", "tdr"];
    ok(&lab(dir.path(), &args));
    let first = fs::read(dir.path().join("out/tdr.csv")).unwrap();
    let summary = fs::read(dir.path().join("out/tdr_summary.json")).unwrap();
    ok(&lab(dir.path(), &args));
    assert_eq!(first, fs::read(dir.path().join("out/tdr.csv")).unwrap());
    assert_eq!(summary, fs::read(dir.path().join("out/tdr_summary.json")).unwrap());
    let s: Value = serde_json::from_slice(&summary).unwrap();
    assert_eq!(s["config"]["mu"], -1.0);
    assert_eq!(s["config"]["modes"], 4);
}

#[test]
fn several_studies_in_one_call() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("s.toml"),
        "slabs = 8\nmodes = 2\nsteps = 8\nsteps_sweep = [4, 8, 16]\nelements_sweep = [4, 8, 16]\nsamples = 100\n",
    )
    .unwrap();
    let o = lab(dir.path(), &["--config", "s.toml", "--threads", "2", "study", "tdr", "sdr", "total"]);
    ok(&o);
    for f in ["tdr.csv", "sdr.csv", "total.csv", "total_summary.json", "sdr_manifest.json"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
    let total = data_rows(&fs::read_to_string(dir.path().join("out/total.csv")).unwrap());
    assert_eq!(total.len(), 3);
    for r in total {
        let v: Vec<f64> = r.iter().map(|x| x.parse().unwrap()).collect();
        assert!(v[5] >= v[1].max(v[2]).max(v[3]));
    }
}
