//! JSON experiment configs.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use smoothsgd_core::objectives::{make_quadratic, make_spiky};
use smoothsgd_core::optimizer::{Stage, StepSchedule};
use smoothsgd_core::{KernelKind, NoiseKernel, Objective, Point, SpikyParams};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ObjectiveSpec {
    Spiky(SpikyParams),
    Quadratic { center: Vec<f64> },
}

impl ObjectiveSpec {
    pub fn dimension(&self) -> usize {
        match self {
            ObjectiveSpec::Spiky(p) => p.dimension,
            ObjectiveSpec::Quadratic { center } => center.len(),
        }
    }

    pub fn build(&self) -> Result<Objective> {
        Ok(match self {
            ObjectiveSpec::Spiky(p) => make_spiky(*p)?,
            ObjectiveSpec::Quadratic { center } => make_quadratic(center.len(), Point::new(center.clone())?)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub radius: f64,
}

impl KernelSpec {
    pub const ZERO: KernelSpec = KernelSpec {
        kind: KernelKind::Zero,
        radius: 0.0,
    };

    pub fn ball(radius: f64) -> Self {
        KernelSpec {
            kind: KernelKind::UniformBall,
            radius,
        }
    }

    pub fn build(&self, dimension: usize) -> Result<NoiseKernel> {
        Ok(NoiseKernel::new(self.kind, self.radius, dimension)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub eta: f64,
    pub steps: usize,
    pub kernel: KernelSpec,
}

pub fn build_schedule(stages: &[StageSpec], dimension: usize) -> Result<StepSchedule> {
    let stages = stages
        .iter()
        .map(|s| {
            Ok(Stage {
                eta: s.eta,
                steps: s.steps,
                kernel: s.kernel.build(dimension)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StepSchedule::new(stages)?)
}

/// Product grid with `points` equally spaced values in `[lo, hi]` per coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn axis(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.lo];
        }
        (0..self.points)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (self.points - 1) as f64)
            .collect()
    }

    pub fn build(&self, dimension: usize) -> Result<Vec<Point>> {
        let axis = self.axis();
        let total = axis
            .len()
            .checked_pow(dimension as u32)
            .filter(|n| *n <= 10_000_000)
            .ok_or_else(|| Error::Config("grid has too many points".into()))?;
        let mut out = Vec::with_capacity(total);
        for mut k in 0..total {
            let mut p = Vec::with_capacity(dimension);
            for _ in 0..dimension {
                p.push(axis[k % axis.len()]);
                k /= axis.len();
            }
            out.push(Point::new(p)?);
        }
        Ok(out)
    }
}

/// Settings for the three-row landscape figure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Figure3Spec {
    /// Kernel radii for rows 1 and 2; include 0 for the plain GD panel.
    pub noise_levels: Vec<f64>,
    /// Step size for rows 1 and 2.
    pub eta: f64,
    /// Steps per trial in row 2.
    pub steps: usize,
    /// Evaluation grid for the smoothed curves of row 1.
    pub curve_grid: GridSpec,
    /// Monte Carlo samples per row-1 point.
    pub curve_samples: usize,
    /// Row 3: one ensemble per stage, each re-initialized inside the
    /// `[q10, q90]` spread of the previous stage's final iterates.
    pub stages: Vec<StageSpec>,
}

impl Figure3Spec {
    pub fn spiky_default() -> Self {
        Figure3Spec {
            noise_levels: vec![0.0, 3.0, 10.0, 40.0],
            eta: 0.03,
            steps: 3000,
            curve_grid: GridSpec {
                lo: -5.0,
                hi: 5.0,
                points: 201,
            },
            curve_samples: 4000,
            stages: vec![
                StageSpec {
                    eta: 0.01,
                    steps: 3000,
                    kernel: KernelSpec::ball(40.0),
                },
                StageSpec {
                    eta: 0.005,
                    steps: 6000,
                    kernel: KernelSpec::ball(40.0),
                },
                StageSpec {
                    eta: 0.0025,
                    steps: 12000,
                    kernel: KernelSpec::ball(40.0),
                },
            ],
        }
    }
}

fn default_cluster_tol() -> f64 {
    0.05
}

fn default_record_every() -> usize {
    1
}

fn default_bins() -> usize {
    40
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub objective: ObjectiveSpec,
    pub stages: Vec<StageSpec>,
    pub n_trials: usize,
    /// Per-coordinate `[lo, hi]` for uniform initializations.
    pub init_box: Vec<[f64; 2]>,
    pub seed: u64,
    pub out_dir: String,
    pub grid: GridSpec,
    pub confidence: f64,
    /// Monte Carlo samples per smoothed estimate.
    pub samples: usize,
    /// One-point-convexity constant required by `certify` and used by `bounds`.
    pub c_min: f64,
    /// Length of the stay window.
    pub t2: usize,
    #[serde(default = "default_cluster_tol")]
    pub cluster_tol: f64,
    /// Stride of the rows written to `trial_{i}.csv`; the final iterate is always kept.
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub figure3: Option<Figure3Spec>,
}

impl ExperimentConfig {
    /// SGD on the default spiky landscape with a moderately large kernel.
    pub fn spiky_default() -> Self {
        ExperimentConfig {
            objective: ObjectiveSpec::Spiky(SpikyParams::DEFAULT),
            stages: vec![StageSpec {
                eta: 0.01,
                steps: 3000,
                kernel: KernelSpec::ball(40.0),
            }],
            n_trials: 100,
            init_box: vec![[-5.0, 5.0]],
            seed: 0,
            out_dir: "out".into(),
            grid: GridSpec {
                lo: -3.0,
                hi: 3.0,
                points: 30,
            },
            confidence: 0.99,
            samples: 10_000,
            c_min: 0.25,
            t2: 500,
            cluster_tol: default_cluster_tol(),
            record_every: 100,
            bins: default_bins(),
            figure3: Some(Figure3Spec::spiky_default()),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn dimension(&self) -> usize {
        self.objective.dimension()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dimension();
        let bad = |m: &str| Err(Error::Config(m.into()));
        if d == 0 {
            return bad("objective dimension must be >= 1");
        }
        if self.init_box.len() != d {
            return bad("init_box must have one [lo, hi] pair per coordinate");
        }
        if self.init_box.iter().any(|[lo, hi]| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
            return bad("init_box entries must be finite with lo <= hi");
        }
        if self.stages.is_empty() {
            return bad("need at least one stage");
        }
        if self.n_trials == 0 {
            return bad("n_trials must be >= 1");
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return bad("confidence must be in (0, 1)");
        }
        if self.samples < 2 {
            return bad("samples must be >= 2");
        }
        if self.grid.points == 0 || !(self.grid.lo <= self.grid.hi) {
            return bad("grid needs points >= 1 and lo <= hi");
        }
        if !(self.cluster_tol > 0.0) {
            return bad("cluster_tol must be > 0");
        }
        if self.record_every == 0 || self.bins == 0 {
            return bad("record_every and bins must be >= 1");
        }
        self.objective.build()?;
        build_schedule(&self.stages, d)?;
        if let Some(f) = &self.figure3 {
            if f.noise_levels.len() < 3 {
                return bad("figure3 needs at least three noise levels");
            }
            if f.stages.len() < 2 {
                return bad("figure3 needs at least two stages");
            }
            if f.curve_samples < 2 || f.curve_grid.points == 0 {
                return bad("figure3 curve grid needs points and >= 2 samples");
            }
            for &r in &f.noise_levels {
                build_schedule(
                    &[StageSpec {
                        eta: f.eta,
                        steps: f.steps,
                        kernel: KernelSpec::ball(r),
                    }],
                    d,
                )?;
            }
            build_schedule(&f.stages, d)?;
        }
        Ok(())
    }

    pub fn build_objective(&self) -> Result<Objective> {
        self.objective.build()
    }

    pub fn schedule(&self) -> Result<StepSchedule> {
        build_schedule(&self.stages, self.dimension())
    }

    pub fn init_box_pairs(&self) -> Vec<(f64, f64)> {
        self.init_box.iter().map(|[a, b]| (*a, *b)).collect()
    }

    /// Largest squared distance from a corner of the init box to `target`.
    pub fn init_box_max_dist2(&self, target: &Point) -> f64 {
        self.init_box
            .iter()
            .zip(target.iter())
            .map(|([lo, hi], t)| {
                let m = (lo - t).abs().max((hi - t).abs());
                m * m
            })
            .sum()
    }
}
