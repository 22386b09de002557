//! The work behind each subcommand, callable without the binary.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use smoothsgd_core::certifier::{CertifierSettings, ScanReport};
use smoothsgd_core::optimizer::StepSchedule;
use smoothsgd_core::smoothing::{smoothed_value_closed, smoothed_value_mc};
use smoothsgd_core::theory::{constants, TheoremConstants};
use smoothsgd_core::{NoiseKernel, Objective, Point, RngStream};

use crate::calibrate::par_region_scan;
use crate::config::{build_schedule, ExperimentConfig, StageSpec};
use crate::ensemble::{run_ensemble, run_trial, write_ensemble, EnsembleReport, EnsembleSettings, TrialOutcome};
use crate::error::{Error, Result};
use crate::io::{self, fmt_f64, fmt_opt, indexed, Table, TrajectoryRow};
use crate::svg;

/// Stream ids keep the randomness of different artifacts apart.
pub mod streams {
    pub const ENSEMBLE: u64 = 0;
    pub const SMOOTH: u64 = 1 << 32;
    pub const CERTIFY: u64 = 2 << 32;
    pub const STAGED: u64 = 3 << 32;
}

/// Theorem constants for the first stage of `stages`, with `c = c_min` and
/// the start distance taken as the farthest init-box corner.
pub fn stage_constants(cfg: &ExperimentConfig, obj: &Objective, stage: &StageSpec, c: f64) -> Result<TheoremConstants> {
    let target = obj.target().cloned().unwrap_or_else(|| Point::zeros(obj.dimension()));
    let r = stage.kernel.build(obj.dimension())?.norm_bound();
    Ok(constants(c, stage.eta, obj.smoothness(), r, cfg.init_box_max_dist2(&target), cfg.t2)?)
}

pub fn ensemble_settings(
    cfg: &ExperimentConfig,
    obj: &Objective,
    stages: &[StageSpec],
    init_box: Vec<(f64, f64)>,
    stream: u64,
) -> Result<EnsembleSettings> {
    let k = stage_constants(cfg, obj, &stages[0], cfg.c_min)?;
    Ok(EnsembleSettings {
        n_trials: cfg.n_trials,
        init_box,
        seed: cfg.seed,
        stream,
        record_every: cfg.record_every,
        cluster_tol: cfg.cluster_tol,
        bins: cfg.bins,
        success_radius2: (k.lambda > 0.0).then_some(k.stay_radius2),
    })
}

pub fn schedule_title(stages: &[StageSpec]) -> String {
    let parts: Vec<String> = stages
        .iter()
        .map(|s| format!("eta={} r={} steps={}", s.eta, s.kernel.radius, s.steps))
        .collect();
    parts.join("; ")
}

/// Runs one ensemble of `stages` and writes it to `dir`.
pub fn ensemble_into(
    cfg: &ExperimentConfig,
    obj: &Objective,
    stages: &[StageSpec],
    init_box: Vec<(f64, f64)>,
    stream: u64,
    dir: &Path,
) -> Result<EnsembleReport> {
    let schedule = build_schedule(stages, obj.dimension())?;
    let settings = ensemble_settings(cfg, obj, stages, init_box, stream)?;
    let (report, rows) = run_ensemble(obj, &schedule, &settings)?;
    write_ensemble(dir, &report, &rows, &schedule_title(stages))?;
    Ok(report)
}

pub fn ensemble(cfg: &ExperimentConfig, out: &Path) -> Result<EnsembleReport> {
    let obj = cfg.build_objective()?;
    ensemble_into(cfg, &obj, &cfg.stages, cfg.init_box_pairs(), streams::ENSEMBLE, out)
}

/// Trial 0 of the ensemble, every step recorded. Divergence is an error.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<(TrialOutcome, Vec<TrajectoryRow>)> {
    let obj = cfg.build_objective()?;
    let schedule: StepSchedule = cfg.schedule()?;
    let mut settings = ensemble_settings(cfg, &obj, &cfg.stages, cfg.init_box_pairs(), streams::ENSEMBLE)?;
    settings.record_every = 1;
    let (outcome, rows) = run_trial(&obj, &schedule, &settings, 0)?;
    io::create_dir(out)?;
    io::write_trajectory(&io::trajectory_path(out, 0), &rows, obj.dimension())?;
    if outcome.diverged {
        return Err(Error::Diverged { steps: outcome.steps });
    }
    Ok((outcome, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothRow {
    pub y: Vec<f64>,
    pub f: f64,
    pub g_mc: f64,
    pub g_closed: Option<f64>,
    pub ci_halfwidth: f64,
}

/// Smoothed values on `ys`; point `j` uses `rng.substream(j)`.
pub fn smooth_rows(
    obj: &Objective,
    kernel: &NoiseKernel,
    eta: f64,
    ys: &[Point],
    n: usize,
    confidence: f64,
    rng: &RngStream,
) -> Result<Vec<SmoothRow>> {
    // In one dimension every built-in kernel is uniform on [-r, r].
    let closed_ok = obj.dimension() == 1;
    ys.par_iter()
        .enumerate()
        .map(|(j, y)| {
            let mut sub = rng.substream(j as u64);
            let est = smoothed_value_mc(obj, kernel, eta, y, n, confidence, &mut sub)?;
            let g_closed = match obj.spiky_params() {
                Some(p) if closed_ok => Some(smoothed_value_closed(p, kernel.norm_bound(), eta, y)?),
                _ => None,
            };
            Ok(SmoothRow {
                y: y.to_vec(),
                f: obj.value(y)?,
                g_mc: est.mean,
                g_closed,
                ci_halfwidth: est.confidence_halfwidth,
            })
        })
        .collect()
}

pub fn smooth_table(rows: &[SmoothRow]) -> Table {
    let d = rows.first().map_or(1, |r| r.y.len());
    let mut headers = if d == 1 { vec!["y".to_string()] } else { indexed("y", d) };
    headers.extend(["f", "g_mc", "g_closed", "ci_halfwidth"].map(String::from));
    let mut t = Table::new(headers);
    for r in rows {
        let mut row: Vec<String> = r.y.iter().map(|v| fmt_f64(*v)).collect();
        row.push(fmt_f64(r.f));
        row.push(fmt_f64(r.g_mc));
        row.push(fmt_opt(r.g_closed));
        row.push(fmt_f64(r.ci_halfwidth));
        t.push(row);
    }
    t
}

pub fn smooth_svg(rows: &[SmoothRow], title: &str) -> String {
    let pick = |f: &dyn Fn(&SmoothRow) -> Option<f64>| -> Vec<(f64, f64)> {
        rows.iter().filter_map(|r| f(r).map(|v| (r.y[0], v))).collect()
    };
    let f = pick(&|r| Some(r.f));
    let mc = pick(&|r| Some(r.g_mc));
    let closed = pick(&|r| r.g_closed);
    svg::render_curves(&[("f", &f), ("g_mc", &mc), ("g_closed", &closed)], title)
}

/// Smoothed curve of the first stage's kernel over the config grid.
pub fn smooth(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<SmoothRow>> {
    let obj = cfg.build_objective()?;
    let stage = &cfg.stages[0];
    let kernel = stage.kernel.build(obj.dimension())?;
    let ys = cfg.grid.build(obj.dimension())?;
    let rng = RngStream::new(cfg.seed, streams::SMOOTH);
    let rows = smooth_rows(&obj, &kernel, stage.eta, &ys, cfg.samples, cfg.confidence, &rng)?;
    io::create_dir(out)?;
    smooth_table(&rows).write(&out.join("smooth.csv"))?;
    if obj.dimension() == 1 {
        svg::write_svg(&out.join("smooth.svg"), &smooth_svg(&rows, &schedule_title(&cfg.stages[..1])))?;
    }
    Ok(rows)
}

pub fn certify_table(report: &ScanReport) -> Table {
    let d = report.certificates.first().map_or(1, |c| c.x.dimension());
    let mut headers = indexed("x", d);
    headers.extend(["inner", "dist2", "c_hat", "ci", "pass", "degenerate"].map(String::from));
    let mut t = Table::new(headers);
    for c in &report.certificates {
        let mut row: Vec<String> = c.x.iter().map(|v| fmt_f64(*v)).collect();
        row.push(fmt_f64(c.inner));
        row.push(fmt_f64(c.dist2));
        row.push(fmt_opt(c.c_hat));
        row.push(fmt_f64(c.ci_halfwidth));
        row.push(c.pass.to_string());
        row.push(c.degenerate.to_string());
        t.push(row);
    }
    t
}

pub fn certify_summary(report: &ScanReport) -> String {
    format!(
        "certified_c={} c_min={} pass_fraction={} degenerate={} certifies={}",
        fmt_opt(report.certified_c),
        report.c_min,
        report.pass_fraction,
        report.degenerate_count,
        report.certifies()
    )
}

/// Certificates for the first stage over the config grid.
pub fn certify(cfg: &ExperimentConfig, out: &Path) -> Result<ScanReport> {
    let obj = cfg.build_objective()?;
    let stage = &cfg.stages[0];
    let kernel = stage.kernel.build(obj.dimension())?;
    let settings = CertifierSettings::new(stage.eta, cfg.c_min)
        .with_samples(cfg.samples)
        .with_confidence(cfg.confidence);
    let target = obj
        .target()
        .cloned()
        .ok_or_else(|| Error::Config("objective has no target to certify against".into()))?;
    let grid = cfg.grid.build(obj.dimension())?;
    let report = par_region_scan(&obj, &kernel, &settings, &target, &grid, &RngStream::new(cfg.seed, streams::CERTIFY))?;
    io::create_dir(out)?;
    certify_table(&report).write(&out.join("certify.csv"))?;
    Ok(report)
}

/// Constants for the first stage, with `c` defaulting to `c_min`.
pub fn bounds(cfg: &ExperimentConfig, c: Option<f64>) -> Result<TheoremConstants> {
    let obj = cfg.build_objective()?;
    stage_constants(cfg, &obj, &cfg.stages[0], c.unwrap_or(cfg.c_min))
}

pub fn format_bounds(k: &TheoremConstants) -> String {
    let t1 = k.t1_min.map_or_else(|| "none".to_string(), |t| t.to_string());
    let rows: [(&str, String); 14] = [
        ("c", k.c.to_string()),
        ("eta", k.eta.to_string()),
        ("L", k.smoothness.to_string()),
        ("r", k.r.to_string()),
        ("y0_dist2", k.y0_dist2.to_string()),
        ("T2", k.t2.to_string()),
        ("lambda", k.lambda.to_string()),
        ("b", k.b.to_string()),
        ("T1_min", t1),
        ("stay_radius2", k.stay_radius2.to_string()),
        ("zeta", k.zeta.to_string()),
        ("mu", k.mu.to_string()),
        ("delta2", k.delta2.to_string()),
        ("eta_valid", k.eta_valid.to_string()),
    ];
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (key, v) in rows {
        let _ = writeln!(out, "{key:<width$}  {v}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{KernelSpec, ObjectiveSpec};

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::spiky_default();
        cfg.n_trials = 8;
        cfg.stages[0].steps = 200;
        cfg.samples = 500;
        cfg.grid.points = 7;
        cfg.figure3 = None;
        cfg
    }

    #[test]
    fn bounds_text_is_aligned() {
        let mut cfg = small();
        cfg.objective = ObjectiveSpec::Quadratic { center: vec![0.0] };
        cfg.stages[0] = StageSpec {
            eta: 0.1,
            steps: 10,
            kernel: KernelSpec::ball(1.0),
        };
        cfg.init_box = vec![[-1.0, 1.0]];
        let k = bounds(&cfg, Some(1.0)).unwrap();
        assert!((k.lambda - 0.19).abs() < 1e-15);
        let text = format_bounds(&k);
        assert!(text.contains("lambda        0.19"), "{text}");
        assert_eq!(text.lines().count(), 14);
    }

    #[test]
    fn smooth_and_certify_write_readable_csv() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small();
        let rows = smooth(&cfg, dir.path()).unwrap();
        let t = Table::read(&dir.path().join("smooth.csv")).unwrap();
        assert_eq!(t.headers, ["y", "f", "g_mc", "g_closed", "ci_halfwidth"]);
        for (r, cells) in rows.iter().zip(&t.rows) {
            assert_eq!(io::parse_cell(&cells[2]), Some(r.g_mc));
            assert_eq!(io::parse_cell(&cells[3]), r.g_closed);
        }
        let report = certify(&cfg, dir.path()).unwrap();
        let t = Table::read(&dir.path().join("certify.csv")).unwrap();
        assert_eq!(t.rows.len(), report.certificates.len());
        assert_eq!(t.headers[..3], ["x_0", "inner", "dist2"]);
        assert!(certify_summary(&report).starts_with("certified_c="));
    }

    #[test]
    fn run_reports_divergence() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small();
        cfg.objective = ObjectiveSpec::Quadratic { center: vec![0.0] };
        cfg.stages[0] = StageSpec {
            eta: 3.0,
            steps: 100,
            kernel: KernelSpec::ZERO,
        };
        let err = run(&cfg, dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(io::trajectory_path(dir.path(), 0).exists());
    }

    #[test]
    fn run_matches_ensemble_trial_zero() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small();
        let (one, rows) = run(&cfg, &dir.path().join("run")).unwrap();
        let report = ensemble(&cfg, &dir.path().join("ens")).unwrap();
        assert_eq!(one, report.trials[0]);
        assert_eq!(rows.len(), cfg.stages[0].steps + 1);
        let back = io::read_trajectory(&io::trajectory_path(&dir.path().join("run"), 0)).unwrap();
        assert_eq!(back, rows);
    }
}
