use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qad"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn solvable_equation_exits_zero_with_witness() {
    let out = qad(&["decide", "--equation", "x1 - 2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["decision"], "solution-exists");
    assert_eq!(v["witness"], serde_json::json!([2]));
    for key in ["probability", "T", "config", "seed"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    for key in ["gap_min", "truncation", "extrapolation"] {
        assert!(v["diagnostics"].get(key).is_some(), "missing diagnostics.{key}");
    }
}

#[test]
fn unsolvable_equation_exits_one() {
    let out = qad(&["decide", "--equation", "x1 + 1"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["decision"], "no-solution");
    assert!(v["witness"].is_null());
}

#[test]
fn malformed_equation_reports_position() {
    let out = qad(&["decide", "--equation", "x1 + * 2"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("position 5"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "equation = \"x1 + 1\"\nalpha = [1.0]\ncutoff = 12\nseed = 7\n").unwrap();
    let from_file = qad(&["--config", cfg.to_str().unwrap(), "decide"]);
    assert_eq!(from_file.status.code(), Some(1));
    let v = json(&from_file);
    assert_eq!(v["seed"], 7);
    assert_eq!(v["config"]["cutoff"], 12);

    let overridden = qad(&["--config", cfg.to_str().unwrap(), "decide", "--equation", "x1 - 2"]);
    assert_eq!(overridden.status.code(), Some(0));
}

#[test]
fn unknown_config_key_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "equation = \"x1\"\n[schedule]\nt_zero = 2.0\n").unwrap();
    let out = qad(&["--config", cfg.to_str().unwrap(), "decide"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("t_zero"));
}

#[test]
fn invalid_config_value_names_the_field() {
    let out = qad(&["decide", "--equation", "x1 - 2", "--margin", "0.7"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("margin"));
}

#[test]
fn too_small_cutoff_is_rejected_before_evolution() {
    let out = qad(&["decide", "--equation", "x1 - 2", "--cutoff", "4"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cutoff too small"));
}

#[test]
fn verdict_is_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = qad(&["decide", "--equation", "x1 - 2", "--seed", "3", "--out-dir", d.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
    }
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(read(&a, "verdict.json"), read(&b, "verdict.json"));
    assert_eq!(read(&a, "evolution.csv"), read(&b, "evolution.csv"));

    let strip = |d: &Path| {
        let mut m: Value = serde_json::from_slice(&read(d, "manifest.json")).unwrap();
        m.as_object_mut().unwrap().remove("timestamps");
        m
    };
    let (ma, mb) = (strip(&a), strip(&b));
    assert_eq!(ma, mb);
    assert_eq!(ma["seed"], 3);
    assert_eq!(ma["instance_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn spectral_writes_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = qad(&["spectral", "--equation", "x1 - 2", "--cutoff", "8", "--coherent-tolerance", "1e-5", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&dir.path().join("spectral_flow.csv"));
    assert_eq!(rows.len(), 1 + 102);
    assert_eq!(rows[0].first().unwrap(), "s");
    assert_eq!(rows[0].last().unwrap(), "gap");
    assert_eq!(rows[0].len(), 2 + 9);
    assert_eq!(rows[1][0], "0");
    assert_eq!(rows[102][0], "1");
}

#[test]
fn figure_one_preset_writes_both_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = qad(&["twolevel", "--preset", "fig1", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let curves = v["curves"].as_array().unwrap();
    assert_eq!(curves.len(), 2);
    assert_eq!(curves[0]["exceeds_half"], true);
    assert_eq!(curves[1]["exceeds_half"], false);
    for label in ["A", "B"] {
        let rows = csv_rows(&dir.path().join(format!("twolevel_{label}.csv")));
        assert_eq!(rows[0], ["T", "ground_probability", "excited_probability"]);
        assert_eq!(rows.len(), 1 + 200);
        for r in &rows[1..] {
            let g: f64 = r[1].parse().unwrap();
            let e: f64 = r[2].parse().unwrap();
            assert!((g + e - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn sample_draws_the_weak_law_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = qad(&[
        "sample", "--equation", "x1 - 2", "--epsilon", "0.1", "--delta", "0.05",
        "--out-dir", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["outcome"]["plan"]["repetitions"], 501);
    assert_eq!(v["outcome"]["dominant"], serde_json::json!([2]));
    let rows = csv_rows(&dir.path().join("histogram.csv"));
    let total: u64 = rows[1..].iter().map(|r| r[1].parse::<u64>().unwrap()).sum();
    assert_eq!(total, 501);
}

#[test]
fn oracle_search_sets_exit_status() {
    let found = qad(&["oracle", "--equation", "x1^2 - 5*x1 + 6", "--bound", "10"]);
    assert_eq!(found.status.code(), Some(0));
    assert_eq!(json(&found)["witness"], serde_json::json!([2]));
    let none = qad(&["oracle", "--equation", "(x1+1)^2 - 2*(x2+1)^2", "--bound", "20"]);
    assert_eq!(none.status.code(), Some(1));
}
