//! Parallel SGD ensembles and their summaries.
//!
//! Trial `i` draws its initialization and then its noise from
//! `RngStream::new(seed, stream).substream(i)`, so results do not depend on
//! thread count or scheduling; they are collected in trial order.

use std::path::Path;

use petgraph::unionfind::UnionFind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smoothsgd_core::optimizer::{sgd_run_observed, StepSchedule, StepView};
use smoothsgd_core::{Objective, Point, RngStream};

use crate::error::Result;
use crate::io::{self, fmt_f64, fmt_opt, indexed, Table, TrajectoryRow};
use crate::svg::{self, Histogram};

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSettings {
    pub n_trials: usize,
    pub init_box: Vec<(f64, f64)>,
    pub seed: u64,
    pub stream: u64,
    /// Keep every `record_every`-th step (plus the final one) in memory.
    /// 0 keeps nothing.
    pub record_every: usize,
    pub cluster_tol: f64,
    pub bins: usize,
    /// Squared radius for the success fraction (final `y` within it).
    pub success_radius2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub index: usize,
    pub x0: Vec<f64>,
    pub final_x: Vec<f64>,
    pub final_y: Vec<f64>,
    /// `|final_x - x*|^2`, when the objective has a target.
    pub dist2: Option<f64>,
    pub final_y_dist2: Option<f64>,
    pub steps: usize,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub trials: Vec<TrialOutcome>,
    pub diverged_count: usize,
    pub success_radius2: Option<f64>,
    /// Share of trials whose final `y` lies within `success_radius2` of `x*`.
    pub success_fraction: Option<f64>,
    pub cluster_tol: f64,
    /// Single-linkage clusters among the final iterates of non-diverged trials.
    pub cluster_count: usize,
    /// Median of `|final_x - x*|` over non-diverged trials.
    pub median_dist: Option<f64>,
    /// Final first coordinates, binned.
    pub histogram: Histogram,
}

impl EnsembleReport {
    pub fn finals(&self) -> Vec<Point> {
        self.trials
            .iter()
            .filter(|t| !t.diverged)
            .map(|t| Point::new(t.final_x.clone()).expect("finite final iterate"))
            .collect()
    }
}

/// Number of single-linkage clusters when points closer than `tol` merge.
pub fn cluster_count(points: &[Point], tol: f64) -> usize {
    assert!(tol > 0.0, "tol must be > 0");
    let n = points.len();
    let mut uf = UnionFind::<usize>::new(n);
    let tol2 = tol * tol;
    for i in 0..n {
        for j in i + 1..n {
            if points[i].dist2(&points[j]) <= tol2 {
                uf.union(i, j);
            }
        }
    }
    let mut labels = uf.into_labeling();
    labels.sort_unstable();
    labels.dedup();
    labels.len()
}

/// Linear-interpolation quantile of unsorted data (`q` in `[0, 1]`).
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

/// One trial: initialization from the box, then the schedule.
pub fn run_trial(
    obj: &Objective,
    schedule: &StepSchedule,
    settings: &EnsembleSettings,
    index: usize,
) -> Result<(TrialOutcome, Vec<TrajectoryRow>)> {
    let mut rng = RngStream::new(settings.seed, settings.stream).substream(index as u64);
    let x0: Vec<f64> = settings.init_box.iter().map(|&(lo, hi)| rng.uniform_in(lo, hi)).collect();
    let x0 = Point::new(x0)?;
    let mut rows = Vec::new();
    let every = settings.record_every;
    let mut observer = |v: &StepView<'_>| {
        if every > 0 && (v.t % every == 0 || v.noise.is_none()) {
            rows.push(TrajectoryRow::from_view(v));
        }
    };
    let summary = sgd_run_observed(obj, schedule, &x0, &mut rng, &mut observer)?;
    let target = obj.target();
    let outcome = TrialOutcome {
        index,
        x0: x0.into_vec(),
        dist2: target.map(|c| summary.final_x.dist2(c)),
        final_y_dist2: target.map(|c| summary.final_y.dist2(c)),
        final_x: summary.final_x.into_vec(),
        final_y: summary.final_y.into_vec(),
        steps: summary.steps,
        diverged: summary.diverged,
    };
    Ok((outcome, rows))
}

pub fn run_ensemble(
    obj: &Objective,
    schedule: &StepSchedule,
    settings: &EnsembleSettings,
) -> Result<(EnsembleReport, Vec<Vec<TrajectoryRow>>)> {
    let results = (0..settings.n_trials)
        .into_par_iter()
        .map(|i| run_trial(obj, schedule, settings, i))
        .collect::<Result<Vec<_>>>()?;
    let (trials, rows): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok((summarize(trials, settings), rows))
}

pub fn summarize(trials: Vec<TrialOutcome>, settings: &EnsembleSettings) -> EnsembleReport {
    let live: Vec<&TrialOutcome> = trials.iter().filter(|t| !t.diverged).collect();
    let finals: Vec<Point> = live
        .iter()
        .map(|t| Point::new(t.final_x.clone()).expect("finite final iterate"))
        .collect();
    let dists: Vec<f64> = live.iter().filter_map(|t| t.dist2.map(f64::sqrt)).collect();
    let success_fraction = settings.success_radius2.map(|r2| {
        trials
            .iter()
            .filter(|t| !t.diverged && t.final_y_dist2.is_some_and(|d| d <= r2))
            .count() as f64
            / trials.len().max(1) as f64
    });
    let firsts: Vec<f64> = finals.iter().map(|p| p[0]).collect();
    let (blo, bhi) = settings.init_box.first().copied().unwrap_or((0.0, 0.0));
    let lo = firsts.iter().copied().fold(blo, f64::min);
    let hi = firsts.iter().copied().fold(bhi, f64::max);
    EnsembleReport {
        diverged_count: trials.len() - live.len(),
        success_radius2: settings.success_radius2,
        success_fraction,
        cluster_tol: settings.cluster_tol,
        cluster_count: cluster_count(&finals, settings.cluster_tol),
        median_dist: median(&dists),
        histogram: Histogram::with_range(&firsts, settings.bins.max(1), lo, hi),
        trials,
    }
}

pub fn finals_table(report: &EnsembleReport) -> Table {
    let d = report.trials.first().map_or(0, |t| t.x0.len());
    let mut headers = vec!["trial".to_string()];
    headers.extend(indexed("x0", d));
    headers.extend(indexed("final_x", d));
    headers.extend(indexed("final_y", d));
    headers.extend(["dist2", "steps", "diverged"].map(String::from));
    let mut table = Table::new(headers);
    for t in &report.trials {
        let mut row = vec![t.index.to_string()];
        row.extend(t.x0.iter().map(|v| fmt_f64(*v)));
        row.extend(t.final_x.iter().map(|v| fmt_f64(*v)));
        row.extend(t.final_y.iter().map(|v| fmt_f64(*v)));
        row.push(fmt_opt(t.dist2));
        row.push(t.steps.to_string());
        row.push(t.diverged.to_string());
        table.push(row);
    }
    table
}

/// Writes `trial_{i}.csv` per trial (when rows were kept), `finals.csv`,
/// `summary.json` and `histogram.svg` into `dir`.
pub fn write_ensemble(dir: &Path, report: &EnsembleReport, rows: &[Vec<TrajectoryRow>], title: &str) -> Result<()> {
    io::create_dir(dir)?;
    let d = report.trials.first().map_or(1, |t| t.x0.len());
    for (i, r) in rows.iter().enumerate() {
        if !r.is_empty() {
            io::write_trajectory(&io::trajectory_path(dir, i), r, d)?;
        }
    }
    finals_table(report).write(&dir.join("finals.csv"))?;
    io::write_json(&dir.join("summary.json"), report)?;
    svg::write_svg(&dir.join("histogram.svg"), &svg::render_histogram(&report.histogram, title))
}

#[cfg(test)]
mod tests {
    use super::*;
    use smoothsgd_core::objectives::make_quadratic;
    use smoothsgd_core::NoiseKernel;

    fn pts(v: &[f64]) -> Vec<Point> {
        v.iter().map(|x| Point::new(vec![*x]).unwrap()).collect()
    }

    #[test]
    fn cluster_examples() {
        assert_eq!(cluster_count(&pts(&[0.3; 5]), 0.01), 1);
        assert_eq!(cluster_count(&pts(&[0.0, 1.0]), 0.5), 2);
        assert_eq!(cluster_count(&pts(&[0.0, 1.0]), 1.5), 1);
        assert_eq!(cluster_count(&[], 1.0), 0);
        // Chaining: 0 - 0.4 - 0.8 link even though 0 and 0.8 are far apart.
        assert_eq!(cluster_count(&pts(&[0.8, 0.0, 0.4, 5.0]), 0.5), 2);
    }

    #[test]
    fn cluster_count_is_order_independent() {
        let a = pts(&[0.1, 2.0, 0.15, 3.3, 2.04, -1.0]);
        let mut b = a.clone();
        b.reverse();
        b.swap(0, 3);
        assert_eq!(cluster_count(&a, 0.05), cluster_count(&b, 0.05));
        assert_eq!(cluster_count(&a, 0.05), 4);
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(quantile(&[0.0, 10.0], 0.1), Some(1.0));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn ensemble_is_deterministic_and_ordered() {
        let q = make_quadratic(1, Point::zeros(1)).unwrap();
        let sched = StepSchedule::single(0.1, 50, NoiseKernel::uniform_ball(0.5, 1).unwrap()).unwrap();
        let settings = EnsembleSettings {
            n_trials: 16,
            init_box: vec![(-2.0, 2.0)],
            seed: 9,
            stream: 0,
            record_every: 7,
            cluster_tol: 0.05,
            bins: 10,
            success_radius2: Some(1.0),
        };
        let (a, ra) = run_ensemble(&q, &sched, &settings).unwrap();
        let (b, rb) = run_ensemble(&q, &sched, &settings).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert!(a.trials.iter().enumerate().all(|(i, t)| t.index == i));
        // Steps 0, 7, ..., 49 plus the final record at t = 50.
        assert_eq!(ra[0].len(), 9);
        assert_eq!(ra[0].last().unwrap().t, 50);
        let (one, _) = run_trial(&q, &sched, &settings, 5).unwrap();
        assert_eq!(one, a.trials[5]);
        let s = a.success_fraction.unwrap();
        assert!((0.0..=1.0).contains(&s));
        assert!(a.cluster_count <= 16);
        assert_eq!(a.histogram.counts.iter().sum::<usize>(), 16);
    }
}
