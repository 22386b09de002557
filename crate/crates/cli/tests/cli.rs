use std::path::Path;
use std::process::{Command, Output};

use smoothsgd::config::{KernelSpec, ObjectiveSpec, StageSpec};
use smoothsgd::io::{read_trajectory, trajectory_path, Table};
use smoothsgd::ExperimentConfig;

fn smoothsgd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smoothsgd")).args(args).output().unwrap()
}

fn quadratic_config(dir: &Path, eta: f64, steps: usize) -> String {
    let mut cfg = ExperimentConfig::spiky_default();
    cfg.objective = ObjectiveSpec::Quadratic { center: vec![0.0] };
    cfg.init_box = vec![[-1.0, 1.0]];
    cfg.stages = vec![StageSpec {
        eta,
        steps,
        kernel: KernelSpec::ball(1.0),
    }];
    cfg.n_trials = 8;
    cfg.figure3 = None;
    cfg.out_dir = dir.join("out").display().to_string();
    let path = dir.join("cfg.json");
    cfg.save(&path).unwrap();
    path.display().to_string()
}

#[test]
fn default_config_round_trips_through_stdout() {
    let out = smoothsgd(&["default-config"]);
    assert!(out.status.success());
    let cfg = ExperimentConfig::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg, ExperimentConfig::spiky_default());
}

#[test]
fn bounds_prints_hand_computed_constants() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quadratic_config(dir.path(), 0.1, 10);
    let out = smoothsgd(&["bounds", "--config", &cfg, "--c", "1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let field = |key: &str| -> String {
        text.lines()
            .find_map(|l| {
                let mut it = l.split_whitespace();
                (it.next() == Some(key)).then(|| it.next().unwrap().to_string())
            })
            .unwrap_or_else(|| panic!("no {key} in {text}"))
    };
    // lambda = 2 eta c - eta^2 L^2, b = eta^2 r^2 (1 + eta L)^2 with c = L = r = 1.
    let lambda: f64 = field("lambda").parse().unwrap();
    let b: f64 = field("b").parse().unwrap();
    assert!((lambda - 0.19).abs() < 1e-12);
    assert!((b - 0.0121).abs() < 1e-12);
    // ceil(ln(1 * 0.19 / 0.0121) / 0.19) for y0_dist2 = 1.
    assert_eq!(field("T1_min"), "15");
    assert_eq!(field("eta_valid"), "true");
    let json = text.lines().last().unwrap();
    let v: serde_json::Value = serde_json::from_str(json).unwrap();
    assert_eq!(v["t1_min"], 15);
}

#[test]
fn run_writes_a_readable_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quadratic_config(dir.path(), 0.1, 50);
    let out = smoothsgd(&["run", "--config", &cfg, "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_trajectory(&trajectory_path(&dir.path().join("out"), 0)).unwrap();
    assert_eq!(rows.len(), 51);
    for (t, row) in rows.iter().enumerate() {
        assert_eq!(row.t, t);
        assert!((row.f - 0.5 * row.x[0] * row.x[0]).abs() <= 1e-12 * row.f.max(1.0));
        assert_eq!(row.dist2, Some(row.x[0] * row.x[0]));
    }
}

#[test]
fn divergence_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quadratic_config(dir.path(), 3.0, 5000);
    let out = smoothsgd(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    // The partial trajectory is still written.
    let rows = read_trajectory(&trajectory_path(&dir.path().join("out"), 0)).unwrap();
    assert!(rows.len() < 5001);
}

#[test]
fn bad_config_exits_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, "{\"objective\": 3}").unwrap();
    let out = smoothsgd(&["ensemble", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn ensemble_and_certify_outputs_parse() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quadratic_config(dir.path(), 0.1, 200);
    let outdir = dir.path().join("out");
    assert!(smoothsgd(&["ensemble", "--config", &cfg]).status.success());
    let finals = Table::read(&outdir.join("finals.csv")).unwrap();
    assert_eq!(finals.rows.len(), 8);
    for i in 0..8 {
        assert!(!read_trajectory(&trajectory_path(&outdir, i)).unwrap().is_empty());
    }
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(outdir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["trials"].as_array().unwrap().len(), 8);
    assert!(std::fs::read_to_string(outdir.join("histogram.svg")).unwrap().starts_with("<svg"));

    let out = smoothsgd(&["certify", "--config", &cfg]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("certifies=true"));
    let table = Table::read(&outdir.join("certify.csv")).unwrap();
    let c_hat = table.column("c_hat").unwrap();
    for row in &table.rows {
        let c: f64 = row[c_hat].parse().unwrap();
        assert!((c - 1.0).abs() < 0.05, "c_hat {c}");
    }
}
