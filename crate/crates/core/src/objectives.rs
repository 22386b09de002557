//! Differentiable test landscapes.
//!
//! Every [`Objective`] carries its value and gradient oracles together with a
//! declared smoothness constant `L`, a certification box and, when known, a
//! target point `x*`. Objectives are immutable after construction, so the
//! oracles can be shared freely between workers.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::point::{check_dim, dist2, dot, Point};

/// Default half-width of the per-coordinate domain box.
pub const DEFAULT_BOX_HALF_WIDTH: f64 = 5.0;

/// Parameters of `f(x) = (q/2)|x|^2 + A * sum_i sin(B x_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpikyParams {
    /// Quadratic coefficient `q > 0`.
    pub quad: f64,
    /// Spike amplitude `A >= 0`.
    pub amp: f64,
    /// Spike angular frequency `B > 0`.
    pub freq: f64,
    pub dimension: usize,
}

impl SpikyParams {
    /// `q = 1, A = 1, B = 10` in one dimension.
    pub const DEFAULT: SpikyParams = SpikyParams {
        quad: 1.0,
        amp: 1.0,
        freq: 10.0,
        dimension: 1,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.quad.is_finite() && self.quad > 0.0) {
            return Err(invalid("quad", "must be finite and > 0"));
        }
        if !(self.amp.is_finite() && self.amp >= 0.0) {
            return Err(invalid("amp", "must be finite and >= 0"));
        }
        if !(self.freq.is_finite() && self.freq > 0.0) {
            return Err(invalid("freq", "must be finite and > 0"));
        }
        if self.dimension < 1 {
            return Err(invalid("dimension", "must be >= 1"));
        }
        Ok(())
    }

    /// `L = q + A * B^2`.
    pub fn smoothness(&self) -> f64 {
        self.quad + self.amp * self.freq * self.freq
    }

    /// Derivative of the one-dimensional slice, `q x + A B cos(B x)`.
    pub fn derivative_1d(&self, x: f64) -> f64 {
        self.quad * x + self.amp * self.freq * libm::cos(self.freq * x)
    }
}

impl Default for SpikyParams {
    fn default() -> Self {
        SpikyParams::DEFAULT
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Landscape {
    Quadratic { center: Point },
    Spiky(SpikyParams),
}

/// A differentiable loss with known smoothness constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    landscape: Landscape,
    scale: f64,
    dimension: usize,
    smoothness: f64,
    domain_box: Vec<(f64, f64)>,
    target: Option<Point>,
}

/// `f(x) = (q/2)|x|^2 + A * sum_i sin(B x_i)` with `L = q + A B^2`.
///
/// The stored target is the origin, which is only an approximation of the
/// minimizer of the smoothed landscape (offset of order `A * sinc`).
pub fn make_spiky(params: SpikyParams) -> Result<Objective> {
    params.validate()?;
    let d = params.dimension;
    Ok(Objective {
        landscape: Landscape::Spiky(params),
        scale: 1.0,
        dimension: d,
        smoothness: params.smoothness(),
        domain_box: default_box(d),
        target: Some(Point::zeros(d)),
    })
}

/// `f(x) = |x - center|^2 / 2` with `L = 1` and target `center`.
pub fn make_quadratic(dimension: usize, center: Point) -> Result<Objective> {
    if dimension < 1 {
        return Err(invalid("dimension", "must be >= 1"));
    }
    check_dim(dimension, center.dimension())?;
    Ok(Objective {
        landscape: Landscape::Quadratic {
            center: center.clone(),
        },
        scale: 1.0,
        dimension,
        smoothness: 1.0,
        domain_box: default_box(dimension),
        target: Some(center),
    })
}

fn default_box(d: usize) -> Vec<(f64, f64)> {
    vec![(-DEFAULT_BOX_HALF_WIDTH, DEFAULT_BOX_HALF_WIDTH); d]
}

impl Objective {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Declared smoothness constant `L`.
    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn domain_box(&self) -> &[(f64, f64)] {
        &self.domain_box
    }

    pub fn target(&self) -> Option<&Point> {
        self.target.as_ref()
    }

    pub fn spiky_params(&self) -> Option<&SpikyParams> {
        match &self.landscape {
            Landscape::Spiky(p) if self.scale == 1.0 => Some(p),
            _ => None,
        }
    }

    /// Replaces the domain box; every interval must satisfy `lo <= hi`.
    pub fn with_domain_box(mut self, domain_box: Vec<(f64, f64)>) -> Result<Self> {
        check_dim(self.dimension, domain_box.len())?;
        if domain_box
            .iter()
            .any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi))
        {
            return Err(invalid("domain_box", "intervals must be finite with lo <= hi"));
        }
        self.domain_box = domain_box;
        Ok(self)
    }

    pub fn with_target(mut self, target: Option<Point>) -> Result<Self> {
        if let Some(t) = &target {
            check_dim(self.dimension, t.dimension())?;
        }
        self.target = target;
        Ok(self)
    }

    /// Overrides the declared smoothness constant. Used to probe what an
    /// understated `L` does to the descent-lemma check.
    pub fn with_declared_smoothness(mut self, smoothness: f64) -> Result<Self> {
        if !(smoothness.is_finite() && smoothness >= 0.0) {
            return Err(invalid("smoothness", "must be finite and >= 0"));
        }
        self.smoothness = smoothness;
        Ok(self)
    }

    /// The landscape `s * f` (value, gradient and `L` all scaled by `s > 0`).
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(invalid("scale", "must be finite and > 0"));
        }
        let mut out = self.clone();
        out.scale *= s;
        out.smoothness *= s;
        Ok(out)
    }

    pub fn in_box(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.domain_box)
            .all(|(&v, &(lo, hi))| lo <= v && v <= hi)
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dimension, x.len())?;
        Ok(self.value_unchecked(x))
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Point> {
        let mut out = vec![0.0; self.dimension];
        self.gradient_into(x, &mut out)?;
        Ok(Point::from_vec_unchecked(out))
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.dimension, x.len())?;
        check_dim(self.dimension, out.len())?;
        self.gradient_unchecked(x, out);
        Ok(())
    }

    pub(crate) fn value_unchecked(&self, x: &[f64]) -> f64 {
        let raw = match &self.landscape {
            Landscape::Quadratic { center } => 0.5 * dist2(x, center),
            Landscape::Spiky(p) => {
                let quad = 0.5 * p.quad * dot(x, x);
                let spikes: f64 = x.iter().map(|&v| libm::sin(p.freq * v)).sum();
                quad + p.amp * spikes
            }
        };
        self.scale * raw
    }

    pub(crate) fn gradient_unchecked(&self, x: &[f64], out: &mut [f64]) {
        match &self.landscape {
            Landscape::Quadratic { center } => {
                for ((o, &v), &c) in out.iter_mut().zip(x).zip(center.iter()) {
                    *o = self.scale * (v - c);
                }
            }
            Landscape::Spiky(p) => {
                for (o, &v) in out.iter_mut().zip(x) {
                    *o = self.scale * p.derivative_1d(v);
                }
            }
        }
    }
}

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h` per coordinate.
pub fn finite_diff_gradient(obj: &Objective, x: &[f64], h: f64) -> Result<Point> {
    if !(h.is_finite() && h > 0.0) {
        return Err(invalid("h", "must be finite and > 0"));
    }
    check_dim(obj.dimension(), x.len())?;
    let mut probe = x.to_vec();
    let mut out = vec![0.0; x.len()];
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus = obj.value_unchecked(&probe);
        probe[i] = orig - h;
        let minus = obj.value_unchecked(&probe);
        probe[i] = orig;
        let d = (plus - minus) / (2.0 * h);
        if !d.is_finite() {
            return Err(Error::NonFiniteValue { coordinate: i });
        }
        out[i] = d;
    }
    Ok(Point::from_vec_unchecked(out))
}

/// Absolute slack allowed in the descent-lemma check.
pub const SMOOTHNESS_SLACK: f64 = 1e-12;

/// Descent-lemma predicate:
/// `f(y) <= f(x) + <grad f(x), y - x> + (L/2)|y - x|^2` (plus [`SMOOTHNESS_SLACK`]).
///
/// Returns `false` on a dimension mismatch.
pub fn check_smoothness(obj: &Objective, x: &[f64], y: &[f64]) -> bool {
    let d = obj.dimension();
    if x.len() != d || y.len() != d {
        return false;
    }
    let mut grad = vec![0.0; d];
    obj.gradient_unchecked(x, &mut grad);
    let diff: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
    let rhs = obj.value_unchecked(x) + dot(&grad, &diff) + 0.5 * obj.smoothness() * dot(&diff, &diff);
    obj.value_unchecked(y) <= rhs + SMOOTHNESS_SLACK
}
