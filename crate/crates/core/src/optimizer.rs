//! SGD `x_{t+1} = x_t - eta (grad f(x_t) + w_t)` with its shadow sequence.
//!
//! The shadow point `y_t = x_t - eta grad f(x_t)` is never needed by SGD
//! itself but is what the convergence analysis tracks. Within a stage of
//! constant `eta` it obeys
//! `y_{t+1} = y_t - eta w_t - eta grad f(y_t - eta w_t)`,
//! which [`shadow_check`] verifies on recorded runs.
//!
//! Iterates are never projected back into the objective's domain box; leaving
//! it only sets the `out_of_box` flag on the record.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::noise::{NoiseKernel, RngStream};
use crate::objectives::Objective;
use crate::point::{check_dim, dist2, norm, Point};

/// A run is abandoned once `|x_t|` exceeds this.
pub const DIVERGENCE_NORM: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Stage {
    pub eta: f64,
    pub steps: usize,
    pub kernel: NoiseKernel,
}

/// Ordered stages of constant step size and noise kernel. Each stage starts
/// from wherever the previous one stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSchedule {
    stages: Vec<Stage>,
}

impl StepSchedule {
    pub fn new(stages: Vec<Stage>) -> Result<Self> {
        if stages.is_empty() {
            return Err(invalid("stages", "need at least one stage"));
        }
        if stages.iter().any(|s| !(s.eta.is_finite() && s.eta > 0.0)) {
            return Err(invalid("eta", "every stage needs a finite eta > 0"));
        }
        Ok(StepSchedule { stages })
    }

    pub fn single(eta: f64, steps: usize, kernel: NoiseKernel) -> Result<Self> {
        StepSchedule::new(vec![Stage { eta, steps, kernel }])
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn total_steps(&self) -> usize {
        self.stages.iter().map(|s| s.steps).sum()
    }

    fn last_eta(&self) -> f64 {
        self.stages[self.stages.len() - 1].eta
    }
}

/// Borrowed view of one step handed to a [`StepObserver`].
#[derive(Debug, Clone, Copy)]
pub struct StepView<'a> {
    pub t: usize,
    pub stage: usize,
    pub eta: f64,
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub f: f64,
    pub grad_norm: f64,
    /// The noise drawn at this step; `None` on the final record.
    pub noise: Option<&'a [f64]>,
    pub dist2: Option<f64>,
    pub out_of_box: bool,
}

/// Receives every step of a run in order.
pub trait StepObserver {
    fn observe(&mut self, step: &StepView<'_>);
}

impl StepObserver for () {
    fn observe(&mut self, _: &StepView<'_>) {}
}

impl<F: FnMut(&StepView<'_>)> StepObserver for F {
    fn observe(&mut self, step: &StepView<'_>) {
        self(step)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// Number of updates performed.
    pub steps: usize,
    pub diverged: bool,
    pub final_x: Point,
    pub final_y: Point,
}

/// One recorded step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub stage: usize,
    pub eta: f64,
    pub x: Point,
    pub y: Point,
    pub f: f64,
    pub grad_norm: f64,
    pub noise: Option<Point>,
    pub noise_norm: f64,
    pub dist2: Option<f64>,
    pub out_of_box: bool,
}

/// Full record of a run: `total_steps + 1` entries unless it diverged.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
    pub diverged: bool,
}

impl StepObserver for Trajectory {
    fn observe(&mut self, s: &StepView<'_>) {
        let noise = s.noise.map(|w| Point::from_vec_unchecked(w.to_vec()));
        self.records.push(StepRecord {
            t: s.t,
            stage: s.stage,
            eta: s.eta,
            x: Point::from_vec_unchecked(s.x.to_vec()),
            y: Point::from_vec_unchecked(s.y.to_vec()),
            f: s.f,
            grad_norm: s.grad_norm,
            noise_norm: s.noise.map_or(0.0, norm),
            noise,
            dist2: s.dist2,
            out_of_box: s.out_of_box,
        });
    }
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&StepRecord> {
        self.records.last()
    }
}

fn check_run_inputs(obj: &Objective, schedule: &StepSchedule, x0: &Point) -> Result<()> {
    let d = obj.dimension();
    check_dim(d, x0.dimension())?;
    for stage in schedule.stages() {
        check_dim(d, stage.kernel.dimension)?;
    }
    Ok(())
}

/// Runs the schedule from `x0`, streaming every step to `observer`.
///
/// Stops early (with `diverged = true`) if an iterate, value or gradient
/// becomes non-finite or `|x_t|` exceeds [`DIVERGENCE_NORM`]; the offending
/// iterate is not reported.
pub fn sgd_run_observed<O: StepObserver + ?Sized>(
    obj: &Objective,
    schedule: &StepSchedule,
    x0: &Point,
    rng: &mut RngStream,
    observer: &mut O,
) -> Result<RunSummary> {
    check_run_inputs(obj, schedule, x0)?;
    let d = obj.dimension();
    let target = obj.target().cloned();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut w = vec![0.0; d];
    let mut next = vec![0.0; d];
    let mut t = 0;
    let mut diverged = false;

    'stages: for (stage_idx, stage) in schedule.stages().iter().enumerate() {
        let eta = stage.eta;
        for _ in 0..stage.steps {
            obj.gradient_unchecked(&x, &mut g);
            let f = obj.value_unchecked(&x);
            if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
                diverged = true;
                break 'stages;
            }
            for i in 0..d {
                y[i] = x[i] - eta * g[i];
            }
            stage.kernel.sample_unchecked(rng, &mut w);
            observer.observe(&StepView {
                t,
                stage: stage_idx,
                eta,
                x: &x,
                y: &y,
                f,
                grad_norm: norm(&g),
                noise: Some(&w),
                dist2: target.as_ref().map(|c| dist2(&x, c)),
                out_of_box: !obj.in_box(&x),
            });
            for i in 0..d {
                next[i] = y[i] - eta * w[i];
            }
            if next.iter().any(|v| !v.is_finite()) || norm(&next) > DIVERGENCE_NORM {
                diverged = true;
                break 'stages;
            }
            core::mem::swap(&mut x, &mut next);
            t += 1;
        }
    }

    let eta = schedule.last_eta();
    obj.gradient_unchecked(&x, &mut g);
    for i in 0..d {
        y[i] = x[i] - eta * g[i];
    }
    if !diverged {
        let f = obj.value_unchecked(&x);
        if f.is_finite() && g.iter().all(|v| v.is_finite()) {
            observer.observe(&StepView {
                t,
                stage: schedule.stages().len() - 1,
                eta,
                x: &x,
                y: &y,
                f,
                grad_norm: norm(&g),
                noise: None,
                dist2: target.as_ref().map(|c| dist2(&x, c)),
                out_of_box: !obj.in_box(&x),
            });
        } else {
            diverged = true;
        }
    }
    Ok(RunSummary {
        steps: t,
        diverged,
        final_x: Point::from_vec_unchecked(x),
        final_y: Point::from_vec_unchecked(y),
    })
}

/// Runs SGD and records every step.
pub fn sgd_run(
    obj: &Objective,
    schedule: &StepSchedule,
    x0: &Point,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    let mut traj = Trajectory::default();
    let summary = sgd_run_observed(obj, schedule, x0, rng, &mut traj)?;
    traj.diverged = summary.diverged;
    Ok(traj)
}

/// Full-gradient descent: [`sgd_run`] with the zero kernel.
pub fn gd_run(obj: &Objective, eta: f64, steps: usize, x0: &Point) -> Result<Trajectory> {
    let schedule = StepSchedule::single(eta, steps, NoiseKernel::zero(obj.dimension()))?;
    // The zero kernel never draws from the stream.
    let mut rng = RngStream::new(0, 0);
    sgd_run(obj, &schedule, x0, &mut rng)
}

/// Largest residual of `y_{t+1} = y_t - eta w_t - eta grad f(y_t - eta w_t)`
/// over consecutive records of the same stage. Pairs that straddle a stage
/// boundary are skipped.
pub fn shadow_check(traj: &Trajectory, obj: &Objective) -> f64 {
    let d = obj.dimension();
    let mut z = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut worst: f64 = 0.0;
    for pair in traj.records.windows(2) {
        let (cur, nxt) = (&pair[0], &pair[1]);
        let Some(w) = &cur.noise else { continue };
        if cur.stage != nxt.stage || cur.x.dimension() != d {
            continue;
        }
        let eta = cur.eta;
        for i in 0..d {
            z[i] = cur.y[i] - eta * w[i];
        }
        obj.gradient_unchecked(&z, &mut g);
        let mut r2 = 0.0;
        for i in 0..d {
            let predicted = z[i] - eta * g[i];
            r2 += (nxt.y[i] - predicted) * (nxt.y[i] - predicted);
        }
        worst = worst.max(libm::sqrt(r2));
    }
    worst
}
