//! Three-row landscape figure.
//!
//! - Row 1: the landscape convolved at each noise level (closed form and Monte Carlo).
//! - Row 2: one ensemble per noise level at a common step size; level 0 is plain GD.
//! - Row 3: staged ensembles, each stage re-initialized inside the `[q10, q90]`
//!   spread of the previous stage's final iterates.
//!
//! Layout under the output directory:
//!
//! ```text
//! row1/curve_{i}.csv, row1/curve_{i}.svg
//! row2/noise_{i}/{trial_*.csv, finals.csv, summary.json, histogram.svg}
//! row3/stage_{k}/...
//! figure3.json
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use smoothsgd_core::RngStream;

use crate::commands::{ensemble_into, smooth_rows, smooth_svg, smooth_table, streams};
use crate::config::{ExperimentConfig, Figure3Spec, KernelSpec, StageSpec};
use crate::ensemble::{quantile, EnsembleReport};
use crate::error::{Error, Result};
use crate::io;
use crate::svg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub radius: f64,
    /// Points where the closed form lies outside the Monte Carlo interval.
    pub outside_ci: usize,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSummary {
    pub eta: f64,
    pub radius: f64,
    pub cluster_count: usize,
    pub median_dist: Option<f64>,
    pub diverged: usize,
    pub init_box: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure3Summary {
    pub row1: Vec<CurveSummary>,
    pub row2: Vec<PanelSummary>,
    pub row3: Vec<PanelSummary>,
}

fn panel(stage: &StageSpec, report: &EnsembleReport, init_box: Vec<(f64, f64)>) -> PanelSummary {
    PanelSummary {
        eta: stage.eta,
        radius: stage.kernel.radius,
        cluster_count: report.cluster_count,
        median_dist: report.median_dist,
        diverged: report.diverged_count,
        init_box,
    }
}

/// Row-2 stage for noise level `r`; level 0 uses the zero kernel so the
/// panel is exactly the GD ensemble.
pub fn row2_stage(spec: &Figure3Spec, r: f64) -> StageSpec {
    StageSpec {
        eta: spec.eta,
        steps: spec.steps,
        kernel: if r == 0.0 { KernelSpec::ZERO } else { KernelSpec::ball(r) },
    }
}

/// Per-coordinate `[q10, q90]` of the final iterates.
pub fn spread_box(report: &EnsembleReport) -> Option<Vec<(f64, f64)>> {
    let finals = report.finals();
    let d = finals.first()?.dimension();
    (0..d)
        .map(|i| {
            let col: Vec<f64> = finals.iter().map(|p| p[i]).collect();
            Some((quantile(&col, 0.1)?, quantile(&col, 0.9)?))
        })
        .collect()
}

pub fn figure3(cfg: &ExperimentConfig, out: &Path) -> Result<Figure3Summary> {
    let spec = cfg.figure3.clone().unwrap_or_else(Figure3Spec::spiky_default);
    let mut cfg = cfg.clone();
    cfg.figure3 = Some(spec.clone());
    cfg.validate()?;
    let obj = cfg.build_objective()?;
    let d = obj.dimension();

    let row1_dir = out.join("row1");
    io::create_dir(&row1_dir)?;
    let ys = spec.curve_grid.build(d)?;
    let mut row1 = Vec::new();
    for (i, &r) in spec.noise_levels.iter().enumerate() {
        let kernel = row2_stage(&spec, r).kernel.build(d)?;
        let rng = RngStream::new(cfg.seed, streams::SMOOTH + i as u64);
        let rows = smooth_rows(&obj, &kernel, spec.eta, &ys, spec.curve_samples, cfg.confidence, &rng)?;
        smooth_table(&rows).write(&row1_dir.join(format!("curve_{i}.csv")))?;
        if d == 1 {
            let title = format!("eta={} r={}", spec.eta, r);
            svg::write_svg(&row1_dir.join(format!("curve_{i}.svg")), &smooth_svg(&rows, &title))?;
        }
        let outside_ci = rows
            .iter()
            // The zero kernel has a zero-width interval; allow for rounding.
            .filter(|row| row.g_closed.is_some_and(|g| (g - row.g_mc).abs() > row.ci_halfwidth + 1e-12 * g.abs().max(1.0)))
            .count();
        row1.push(CurveSummary {
            radius: r,
            outside_ci,
            points: rows.len(),
        });
    }

    let mut row2 = Vec::new();
    for (i, &r) in spec.noise_levels.iter().enumerate() {
        let stage = row2_stage(&spec, r);
        let dir = out.join("row2").join(format!("noise_{i}"));
        let report = ensemble_into(&cfg, &obj, &[stage], cfg.init_box_pairs(), streams::ENSEMBLE, &dir)?;
        row2.push(panel(&stage, &report, cfg.init_box_pairs()));
    }

    let mut row3 = Vec::new();
    let mut init_box = cfg.init_box_pairs();
    for (k, stage) in spec.stages.iter().enumerate() {
        let dir = out.join("row3").join(format!("stage_{k}"));
        let report = ensemble_into(&cfg, &obj, &[*stage], init_box.clone(), streams::STAGED + k as u64, &dir)?;
        row3.push(panel(stage, &report, init_box));
        init_box = spread_box(&report).ok_or_else(|| Error::Config(format!("every trial of stage {k} diverged")))?;
    }

    let summary = Figure3Summary { row1, row2, row3 };
    io::write_json(&out.join("figure3.json"), &summary)?;
    Ok(summary)
}
