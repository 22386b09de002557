//! The convolved objective `g(y) = E_w f(y - eta*w)` and its gradient.
//!
//! Monte Carlo estimates carry a two-sided Hoeffding interval. Hoeffding needs
//! a bounded sample range, so the range is taken from the smoothness of `f`
//! on the ball `{y - eta*w : |w| <= r}`:
//!
//! - values: `|f(y - eta*w) - f(y)| <= eta*r*|grad f(y)| + (L/2)(eta*r)^2`;
//! - gradients, per coordinate: `|d_i f(y - eta*w) - d_i f(y)| <= L*eta*r`,
//!   with a Bonferroni split of the miss probability over the `d` coordinates.
//!
//! For the one-dimensional spiky landscape under uniform interval noise the
//! convolution has a closed form: the sine term is attenuated by
//! `sinc(B*eta*r)` and the quadratic picks up `q*eta^2*r^2/6`.

use alloc::vec;

use crate::error::{invalid, Error, Result};
use crate::noise::{NoiseKernel, RngStream};
use crate::objectives::{Objective, SpikyParams};
use crate::point::{check_dim, norm, Point};

pub const DEFAULT_CONFIDENCE: f64 = 0.99;
pub const DEFAULT_SAMPLES: usize = 10_000;

/// A Monte Carlo mean together with its Hoeffding half-width.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedEstimate<T> {
    pub mean: T,
    pub samples: usize,
    /// Width `b - a` of the interval every sample (coordinate) lies in.
    pub range_bound: f64,
    /// Half-width at [`SmoothedEstimate::confidence`]; per coordinate for gradients.
    pub confidence_halfwidth: f64,
    pub confidence: f64,
}

/// One-sided Hoeffding tail `exp(-2 n t^2 / range^2)` for `n` i.i.d. samples
/// bounded in an interval of width `range`.
///
/// Expects `n >= 1`, `range > 0` and `t >= 0`.
pub fn hoeffding_tail(n: usize, range: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    libm::exp(-2.0 * n as f64 * t * t / (range * range))
}

/// Two-sided half-width `range * sqrt(ln(2/alpha) / 2n)`: the sample mean is
/// within it of the true mean with probability at least `1 - alpha`.
pub fn hoeffding_halfwidth(n: usize, range: f64, alpha: f64) -> f64 {
    range * libm::sqrt(libm::log(2.0 / alpha) / (2.0 * n as f64))
}

/// `sin(u) / u` with `sinc(0) = 1`.
pub fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-8 {
        1.0 - u * u / 6.0
    } else {
        libm::sin(u) / u
    }
}

/// Width of the interval that contains every `f(y - eta*w)` sample.
pub fn value_range_bound(obj: &Objective, y: &[f64], eta: f64, radius: f64) -> Result<f64> {
    let grad = obj.gradient(y)?;
    let step = eta * radius;
    Ok(2.0 * (step * grad.norm() + 0.5 * obj.smoothness() * step * step))
}

/// Width of the interval that contains every coordinate of `grad f(y - eta*w)`.
pub fn gradient_range_bound(obj: &Objective, eta: f64, radius: f64) -> f64 {
    2.0 * obj.smoothness() * eta * radius
}

fn check_mc_inputs(
    obj: &Objective,
    kernel: &NoiseKernel,
    eta: f64,
    y: &[f64],
    n: usize,
    confidence: f64,
) -> Result<()> {
    if n < 1 {
        return Err(invalid("n", "need at least one sample"));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(invalid("confidence", "must lie in (0, 1)"));
    }
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(invalid("eta", "must be finite and >= 0"));
    }
    check_dim(obj.dimension(), y.len())?;
    check_dim(obj.dimension(), kernel.dimension)
}

/// Monte Carlo estimate of `g(y) = E f(y - eta*w)`.
pub fn smoothed_value_mc(
    obj: &Objective,
    kernel: &NoiseKernel,
    eta: f64,
    y: &[f64],
    n: usize,
    confidence: f64,
    rng: &mut RngStream,
) -> Result<SmoothedEstimate<f64>> {
    check_mc_inputs(obj, kernel, eta, y, n, confidence)?;
    let d = y.len();
    let mut w = vec![0.0; d];
    let mut z = vec![0.0; d];
    let mut sum = 0.0;
    for _ in 0..n {
        kernel.sample_unchecked(rng, &mut w);
        for i in 0..d {
            z[i] = y[i] - eta * w[i];
        }
        let v = obj.value_unchecked(&z);
        if !v.is_finite() {
            return Err(Error::NonFiniteEvaluation);
        }
        sum += v;
    }
    let range_bound = value_range_bound(obj, y, eta, kernel.norm_bound())?;
    Ok(SmoothedEstimate {
        mean: sum / n as f64,
        samples: n,
        range_bound,
        confidence_halfwidth: hoeffding_halfwidth(n, range_bound, 1.0 - confidence),
        confidence,
    })
}

/// Monte Carlo estimate of `grad g(y) = E grad f(y - eta*w)`; the half-width
/// holds for all coordinates simultaneously.
pub fn smoothed_grad_mc(
    obj: &Objective,
    kernel: &NoiseKernel,
    eta: f64,
    y: &[f64],
    n: usize,
    confidence: f64,
    rng: &mut RngStream,
) -> Result<SmoothedEstimate<Point>> {
    check_mc_inputs(obj, kernel, eta, y, n, confidence)?;
    let d = y.len();
    let mut w = vec![0.0; d];
    let mut z = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut sum = vec![0.0; d];
    for _ in 0..n {
        kernel.sample_unchecked(rng, &mut w);
        for i in 0..d {
            z[i] = y[i] - eta * w[i];
        }
        obj.gradient_unchecked(&z, &mut g);
        for i in 0..d {
            if !g[i].is_finite() {
                return Err(Error::NonFiniteValue { coordinate: i });
            }
            sum[i] += g[i];
        }
    }
    for s in sum.iter_mut() {
        *s /= n as f64;
    }
    let range_bound = gradient_range_bound(obj, eta, kernel.norm_bound());
    let alpha = (1.0 - confidence) / d as f64;
    Ok(SmoothedEstimate {
        mean: Point::new(sum)?,
        samples: n,
        range_bound,
        confidence_halfwidth: hoeffding_halfwidth(n, range_bound, alpha),
        confidence,
    })
}

fn check_closed(params: &SpikyParams, r: f64, eta: f64, y: &[f64]) -> Result<()> {
    params.validate()?;
    if params.dimension != 1 || y.len() != 1 {
        return Err(Error::Unsupported(
            "closed-form smoothing needs the one-dimensional spiky landscape",
        ));
    }
    if !(r.is_finite() && r >= 0.0 && eta.is_finite() && eta >= 0.0) {
        return Err(invalid("eta, r", "must be finite and >= 0"));
    }
    Ok(())
}

/// `(q/2)(y^2 + eta^2 r^2 / 3) + A sin(B y) sinc(B eta r)`: the spiky
/// landscape convolved with uniform noise on `[-r, r]`.
pub fn smoothed_value_closed(params: &SpikyParams, r: f64, eta: f64, y: &[f64]) -> Result<f64> {
    check_closed(params, r, eta, y)?;
    let y = y[0];
    let s = eta * r;
    Ok(0.5 * params.quad * (y * y + s * s / 3.0)
        + params.amp * libm::sin(params.freq * y) * sinc(params.freq * s))
}

/// `q y + A B cos(B y) sinc(B eta r)`, the derivative of [`smoothed_value_closed`].
pub fn smoothed_grad_closed(params: &SpikyParams, r: f64, eta: f64, y: &[f64]) -> Result<f64> {
    check_closed(params, r, eta, y)?;
    let y = y[0];
    Ok(params.quad * y
        + params.amp * params.freq * libm::cos(params.freq * y) * sinc(params.freq * eta * r))
}

/// `|grad f(y)|`, exposed for callers building their own range bounds.
pub fn gradient_norm(obj: &Objective, y: &[f64]) -> Result<f64> {
    let mut g = vec![0.0; obj.dimension()];
    obj.gradient_into(y, &mut g)?;
    Ok(norm(&g))
}
