//! Statistical certificates of one-point strong convexity after convolution.
//!
//! For a pair `x`, `y = x - eta grad f(x)` the certified quantity is
//!
//! ```text
//! <-E_w grad f(y - eta w), x* - y>  >=  c |x* - y|^2
//! ```
//!
//! The expectation is estimated by [`smoothed_grad_mc`]; its per-coordinate
//! Hoeffding half-width `h` turns into a half-width `h * |x* - y|_1` on the
//! inner product. A certificate passes when the lower confidence bound of the
//! inner product still clears `c_min |x* - y|^2`.
//!
//! The probes [`trajectory_opc`], [`neighborhood_opc`] and [`line_probe`] are
//! the plain (unsmoothed) inner-product diagnostics used on recorded runs.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::noise::{NoiseKernel, RngStream};
use crate::objectives::Objective;
use crate::optimizer::Trajectory;
use crate::point::{check_dim, dist2, dot, Point};
use crate::smoothing::{smoothed_grad_mc, DEFAULT_CONFIDENCE, DEFAULT_SAMPLES};

/// Below this `|x* - y|^2` the ratio is meaningless and no verdict is given.
pub const DEGENERATE_DIST2: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifierSettings {
    pub eta: f64,
    pub samples: usize,
    pub confidence: f64,
    pub c_min: f64,
}

impl CertifierSettings {
    pub fn new(eta: f64, c_min: f64) -> Self {
        CertifierSettings {
            eta,
            samples: DEFAULT_SAMPLES,
            confidence: DEFAULT_CONFIDENCE,
            c_min,
        }
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpcCertificate {
    pub x: Point,
    /// Shadow point `x - eta grad f(x)`.
    pub y: Point,
    /// Estimate of `<-E grad f(y - eta w), x* - y>`.
    pub inner: f64,
    pub dist2: f64,
    /// `inner / dist2`; `None` when degenerate.
    pub c_hat: Option<f64>,
    /// `(inner - ci_halfwidth) / dist2`; `None` when degenerate.
    pub c_lower: Option<f64>,
    pub samples: usize,
    pub ci_halfwidth: f64,
    pub pass: bool,
    pub degenerate: bool,
}

/// Estimates the convolved one-point-convexity ratio at the pair `(x, y)`.
pub fn assumption1_estimate(
    obj: &Objective,
    kernel: &NoiseKernel,
    settings: &CertifierSettings,
    x: &Point,
    target: &Point,
    rng: &mut RngStream,
) -> Result<OpcCertificate> {
    if settings.samples < 2 {
        return Err(invalid("samples", "need at least two samples"));
    }
    if !(settings.eta.is_finite() && settings.eta > 0.0) {
        return Err(invalid("eta", "must be finite and > 0"));
    }
    check_dim(obj.dimension(), target.dimension())?;
    let grad = obj.gradient(x)?;
    let y: Vec<f64> = x.iter().zip(grad.iter()).map(|(a, g)| a - settings.eta * g).collect();
    let y = Point::new(y)?;
    let est = smoothed_grad_mc(obj, kernel, settings.eta, &y, settings.samples, settings.confidence, rng)?;

    let to_target: Vec<f64> = target.iter().zip(y.iter()).map(|(t, v)| t - v).collect();
    let inner = -dot(&est.mean, &to_target);
    let l1: f64 = to_target.iter().map(|v| v.abs()).sum();
    let ci_halfwidth = est.confidence_halfwidth * l1;
    let dist2 = dot(&to_target, &to_target);
    let degenerate = dist2 < DEGENERATE_DIST2;
    let (c_hat, c_lower, pass) = if degenerate {
        (None, None, false)
    } else {
        (
            Some(inner / dist2),
            Some((inner - ci_halfwidth) / dist2),
            inner - ci_halfwidth >= settings.c_min * dist2,
        )
    };
    Ok(OpcCertificate {
        x: x.clone(),
        y,
        inner,
        dist2,
        c_hat,
        c_lower,
        samples: settings.samples,
        ci_halfwidth,
        pass,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub certificates: Vec<OpcCertificate>,
    pub c_min: f64,
    /// Passing share of the non-degenerate certificates (0 when there are none).
    pub pass_fraction: f64,
    pub degenerate_count: usize,
    /// Infimum of `c_lower` over the non-degenerate points: the `c` that the
    /// grid certifies at the requested confidence.
    pub certified_c: Option<f64>,
}

impl ScanReport {
    pub fn from_certificates(certificates: Vec<OpcCertificate>, c_min: f64) -> Self {
        let live: Vec<&OpcCertificate> = certificates.iter().filter(|c| !c.degenerate).collect();
        let passed = live.iter().filter(|c| c.pass).count();
        let pass_fraction = if live.is_empty() {
            0.0
        } else {
            passed as f64 / live.len() as f64
        };
        let certified_c = live
            .iter()
            .filter_map(|c| c.c_lower)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
        let degenerate_count = certificates.len() - live.len();
        ScanReport {
            certificates,
            c_min,
            pass_fraction,
            degenerate_count,
            certified_c,
        }
    }

    pub fn certifies(&self) -> bool {
        self.certified_c.is_some_and(|c| c >= self.c_min)
    }
}

/// Certificate for grid point `index`, drawn from `rng.substream(index)`.
/// [`region_scan`] is this applied to every point in order, so callers may
/// evaluate points in any order (or concurrently) and get the same report.
pub fn scan_point(
    obj: &Objective,
    kernel: &NoiseKernel,
    settings: &CertifierSettings,
    target: &Point,
    grid: &[Point],
    index: usize,
    rng: &RngStream,
) -> Result<OpcCertificate> {
    let mut sub = rng.substream(index as u64);
    assumption1_estimate(obj, kernel, settings, &grid[index], target, &mut sub)
}

/// Certifies every grid point and summarizes the result.
pub fn region_scan(
    obj: &Objective,
    kernel: &NoiseKernel,
    settings: &CertifierSettings,
    target: &Point,
    grid: &[Point],
    rng: &RngStream,
) -> Result<ScanReport> {
    if grid.is_empty() {
        return Err(invalid("grid", "must not be empty"));
    }
    let certs = (0..grid.len())
        .map(|i| scan_point(obj, kernel, settings, target, grid, i, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanReport::from_certificates(certs, settings.c_min))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOpc {
    /// `<-grad f(x_t), x* - x_t>` per recorded step.
    pub inner: Vec<f64>,
    pub min: f64,
    pub first_positive: Option<usize>,
}

impl TrajectoryOpc {
    /// Minimum over steps `t >= start` (`+inf` if there are none).
    pub fn min_from(&self, start: usize) -> f64 {
        self.inner
            .iter()
            .skip(start)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn trajectory_opc(traj: &Trajectory, obj: &Objective, target: &Point) -> Result<TrajectoryOpc> {
    if traj.is_empty() {
        return Err(invalid("trajectory", "must not be empty"));
    }
    check_dim(obj.dimension(), target.dimension())?;
    let mut g = vec![0.0; obj.dimension()];
    let mut inner = Vec::with_capacity(traj.len());
    for rec in &traj.records {
        obj.gradient_into(&rec.x, &mut g)?;
        let v: f64 = g
            .iter()
            .zip(target.iter().zip(rec.x.iter()))
            .map(|(gi, (t, x))| -gi * (t - x))
            .sum();
        inner.push(v);
    }
    let min = inner.iter().copied().fold(f64::INFINITY, f64::min);
    let first_positive = inner.iter().position(|&v| v > 0.0);
    Ok(TrajectoryOpc {
        inner,
        min,
        first_positive,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborhoodStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub samples: usize,
}

/// Min/mean/max of `<-grad f(w), x* - center>` over `n` points `w` drawn
/// uniformly from the ball of `radius` around `center`.
pub fn neighborhood_opc(
    obj: &Objective,
    center: &Point,
    target: &Point,
    radius: f64,
    n: usize,
    rng: &mut RngStream,
) -> Result<NeighborhoodStats> {
    if n < 1 {
        return Err(invalid("n", "need at least one sample"));
    }
    let d = obj.dimension();
    check_dim(d, center.dimension())?;
    check_dim(d, target.dimension())?;
    let ball = NoiseKernel::uniform_ball(radius, d)?;
    let dir: Vec<f64> = target.iter().zip(center.iter()).map(|(t, c)| t - c).collect();
    let mut offset = vec![0.0; d];
    let mut w = vec![0.0; d];
    let mut g = vec![0.0; d];
    let (mut min, mut max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for _ in 0..n {
        ball.sample_unchecked(rng, &mut offset);
        for i in 0..d {
            w[i] = center[i] + offset[i];
        }
        obj.gradient_unchecked(&w, &mut g);
        let v = -dot(&g, &dir);
        min = min.min(v);
        max = max.max(v);
        sum += v;
    }
    Ok(NeighborhoodStats {
        min,
        mean: sum / n as f64,
        max,
        samples: n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineProbe {
    /// Interpolation parameters `t_j = j / (k - 1)`.
    pub ts: Vec<f64>,
    /// `g(t) = f(t x* + (1 - t) x)`.
    pub values: Vec<f64>,
    /// `g'(t) = <grad f(t x* + (1 - t) x), x* - x>`.
    pub slopes: Vec<f64>,
    /// `g(t) > g(1)` for every sampled `t < 1`.
    pub above_endpoint: bool,
    /// Sampled values strictly decrease toward `t = 1`.
    pub strictly_decreasing: bool,
    pub slope_sign_changes: usize,
    /// `x == x*`: the segment is a single point.
    pub degenerate: bool,
}

/// Evaluates `f` on `k` equally spaced points of the segment from `x` to `x*`.
pub fn line_probe(obj: &Objective, x: &Point, target: &Point, k: usize) -> Result<LineProbe> {
    if k < 2 {
        return Err(invalid("k", "need at least two points"));
    }
    let d = obj.dimension();
    check_dim(d, x.dimension())?;
    check_dim(d, target.dimension())?;
    let dir: Vec<f64> = target.iter().zip(x.iter()).map(|(t, v)| t - v).collect();
    let mut p = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut ts = Vec::with_capacity(k);
    let mut values = Vec::with_capacity(k);
    let mut slopes = Vec::with_capacity(k);
    for j in 0..k {
        let t = j as f64 / (k - 1) as f64;
        for i in 0..d {
            p[i] = t * target[i] + (1.0 - t) * x[i];
        }
        obj.gradient_unchecked(&p, &mut g);
        ts.push(t);
        values.push(obj.value_unchecked(&p));
        slopes.push(dot(&g, &dir));
    }
    let end = values[k - 1];
    let degenerate = dist2(x, target) == 0.0;
    let above_endpoint = !degenerate && values[..k - 1].iter().all(|&v| v > end);
    let strictly_decreasing = !degenerate && values.windows(2).all(|w| w[1] < w[0]);
    let signs: Vec<i8> = slopes
        .iter()
        .filter(|s| **s != 0.0)
        .map(|s| if *s > 0.0 { 1 } else { -1 })
        .collect();
    let slope_sign_changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
    Ok(LineProbe {
        ts,
        values,
        slopes,
        above_endpoint,
        strictly_decreasing,
        slope_sign_changes,
        degenerate,
    })
}
