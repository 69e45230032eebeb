//! End-to-end tests of the binary: artifact contents, determinism, the
//! strict configuration mode, and the exit-code contract (0 success,
//! 1 validation, 2 numerical, 3 budget).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const LOG2_OVER_LOG3: f64 = 0.6309297535714574;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fracq"))
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process exited without a code")
}

fn stderr_text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn solve_moran_writes_named_value_csv() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"schema_version": 1,
            "ratios": [0.3333333333333333, 0.3333333333333333]}"#,
    );
    let out_dir = tmp.path().join("artifacts");
    let out = bin()
        .args(["solve-moran", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0, "{}", stderr_text(&out));
    let text = fs::read_to_string(out_dir.join("moran.csv")).unwrap();
    let value: f64 = text
        .trim_end()
        .strip_prefix("s,")
        .expect("name,value line")
        .parse()
        .unwrap();
    assert!((value - LOG2_OVER_LOG3).abs() < 1e-9, "{}", text);
}

#[test]
fn seeded_artifacts_are_byte_identical_across_runs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"schema_version": 1,
            "seed": 11,
            "system": {"builtin": "cantor3", "probs": [0.5, 0.5]},
            "samples": 5000}"#,
    );
    let run = |dir: &str| {
        let out_dir = tmp.path().join(dir);
        let out = bin()
            .args(["chaos-game", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert_eq!(exit_code(&out), 0, "{}", stderr_text(&out));
        fs::read(out_dir.join("measure.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn strict_mode_rejects_unknown_fields_with_path() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"schema_version": 1,
            "ratios": [0.5, 0.5],
            "system": {"builtin": "binary", "typo_field": 1}}"#,
    );
    let out_dir = tmp.path().join("strictout");
    let strict = bin()
        .args(["solve-moran", "--strict", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(exit_code(&strict), 1);
    assert!(
        stderr_text(&strict).contains("system.typo_field"),
        "{}",
        stderr_text(&strict)
    );
    assert!(!out_dir.exists(), "failed run must not leave artifacts");

    let lenient = bin()
        .args(["solve-moran", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(exit_code(&lenient), 0, "{}", stderr_text(&lenient));
    assert!(out_dir.join("moran.csv").exists());
}

#[test]
fn saturated_size_grid_is_a_numerical_failure() {
    let tmp = TempDir::new().unwrap();
    // Four atoms and a grid entry of four reach zero quantization error,
    // which cannot enter the log-log fit.
    let cfg = write_config(
        tmp.path(),
        r#"{"schema_version": 1,
            "atom_count": 4,
            "r": 1.0,
            "n_grid": [2, 4],
            "backend": "exact-1d"}"#,
    );
    let out_dir = tmp.path().join("qdim");
    let out = bin()
        .args(["estimate-qdim", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 2, "{}", stderr_text(&out));
    assert!(!out_dir.exists(), "failed run must not leave artifacts");
}

#[test]
fn enumeration_budget_maps_to_exit_three() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"schema_version": 1, "system": {"builtin": "binary"}, "depth": 64}"#,
    );
    let out = bin()
        .args(["attractor", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(tmp.path().join("deep"))
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 3, "{}", stderr_text(&out));
}

#[test]
fn chaos_game_requires_seed_and_emits_weight_column() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"schema_version": 1,
            "system": {"builtin": "cantor3", "probs": [0.5, 0.5]},
            "samples": 100}"#,
    );
    let out_dir = tmp.path().join("measure");
    let missing = bin()
        .args(["chaos-game", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(exit_code(&missing), 1);
    assert!(
        stderr_text(&missing).contains("seed"),
        "{}",
        stderr_text(&missing)
    );

    let seeded = bin()
        .args(["chaos-game", "--seed", "5", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(exit_code(&seeded), 0, "{}", stderr_text(&seeded));
    let text = fs::read_to_string(out_dir.join("measure.csv")).unwrap();
    assert!(
        text.starts_with("x1,weight\n"),
        "{}",
        &text[..30.min(text.len())]
    );
    assert_eq!(text.lines().count(), 101);
}

#[test]
fn tops_addresses_interval_points() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"schema_version": 1,
            "system": {"builtin": "thirds"},
            "points": [[0.1], [0.5]],
            "tops_depth": 12}"#,
    );
    let out_dir = tmp.path().join("tops");
    let out = bin()
        .args(["tops", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0, "{}", stderr_text(&out));
    let text = fs::read_to_string(out_dir.join("tops.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,code,certified"));
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 3, "{}", line);
        assert_eq!(cols[1].len(), 12, "{}", line);
        assert!(cols[1].chars().all(|c| c == '1' || c == '2'), "{}", line);
        assert_eq!(cols[2], "true");
    }
}

#[test]
fn missing_config_flag_is_a_validation_failure() {
    let out = bin().arg("solve-moran").output().unwrap();
    assert_eq!(exit_code(&out), 1);
    assert!(stderr_text(&out).contains("--config"));
}

#[test]
fn out_dir_falls_back_to_configuration() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"schema_version": 1, "ratios": [0.5, 0.5], "out_dir": "from-config"}"#,
    );
    let out = bin()
        .current_dir(tmp.path())
        .args(["solve-moran", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0, "{}", stderr_text(&out));
    let text = fs::read_to_string(tmp.path().join("from-config/moran.csv")).unwrap();
    let value: f64 = text.trim_end().strip_prefix("s,").unwrap().parse().unwrap();
    assert!((value - 1.0).abs() < 1e-9, "{}", text);
}

#[test]
fn verify_battery_passes_and_reports_each_check() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("verify");
    let out = bin()
        .arg("verify")
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(exit_code(&out), 0, "{}\n{}", stdout, stderr_text(&out));
    assert_eq!(stdout.matches("PASS").count(), 9, "{}", stdout);
    assert!(!stdout.contains("FAIL"), "{}", stdout);
    let rows: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("verify.json")).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 9);
}
