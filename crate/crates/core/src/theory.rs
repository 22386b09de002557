//! Convergence constants for SGD on a convolved loss, the GD divergence
//! threshold, and empirical checks of the per-step drift and of the
//! hit-then-stay behaviour of the shadow sequence.
//!
//! With one-point convexity constant `c`, smoothness `L`, step `eta` and
//! noise radius `r`:
//!
//! ```text
//! lambda = 2 eta c - eta^2 L^2          (contraction per step)
//! b      = eta^2 r^2 (1 + eta L)^2      (noise floor per step)
//! E|y_{t+1} - x*|^2 <= (1 - lambda) |y_t - x*|^2 + b
//! ```
//!
//! The shadow sequence reaches `|y - x*|^2 <= 20 b / lambda` after
//! `T1_min` steps and then stays within `delta2 = mu^2 b / lambda` for `T2`
//! further steps, where `mu = max(8, 42 sqrt(ln(9 T2 / 4)))`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::noise::{NoiseKernel, RngStream};
use crate::objectives::Objective;
use crate::optimizer::Trajectory;
use crate::point::{check_dim, dist2, norm2, Point};
use crate::smoothing::hoeffding_halfwidth;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TheoremConstants {
    pub c: f64,
    pub eta: f64,
    /// Smoothness constant `L`.
    pub smoothness: f64,
    pub r: f64,
    pub y0_dist2: f64,
    pub t2: usize,
    pub lambda: f64,
    pub b: f64,
    /// `None` when `lambda <= 0` (no contraction) or when `b = 0` and the
    /// start is off target (the radius is never reached in finite time).
    pub t1_min: Option<usize>,
    /// `20 b / lambda`. Negative when `lambda < 0`: no point qualifies.
    pub stay_radius2: f64,
    pub zeta: f64,
    pub mu: f64,
    pub delta2: f64,
    /// `eta < min(1 / (2L), c / L^2, 1 / (2c))`.
    pub eta_valid: bool,
}

fn ratio(num: f64, lambda: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / lambda
    }
}

pub fn constants(c: f64, eta: f64, smoothness: f64, r: f64, y0_dist2: f64, t2: usize) -> Result<TheoremConstants> {
    if !(c.is_finite() && c > 0.0) {
        return Err(invalid("c", "must be finite and > 0"));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(invalid("eta", "must be finite and > 0"));
    }
    if !(smoothness.is_finite() && smoothness >= 0.0) {
        return Err(invalid("smoothness", "must be finite and >= 0"));
    }
    if !(r.is_finite() && r >= 0.0) {
        return Err(invalid("r", "must be finite and >= 0"));
    }
    if !(y0_dist2.is_finite() && y0_dist2 >= 0.0) {
        return Err(invalid("y0_dist2", "must be finite and >= 0"));
    }
    let l = smoothness;
    let lambda = 2.0 * eta * c - eta * eta * l * l;
    let s = 1.0 + eta * l;
    let b = eta * eta * r * r * s * s;

    let t1_min = if lambda <= 0.0 {
        None
    } else if y0_dist2 == 0.0 {
        Some(0)
    } else if b == 0.0 {
        None
    } else {
        let arg = lambda * y0_dist2 / b;
        if arg <= 1.0 {
            Some(0)
        } else {
            // Saturating float-to-int cast.
            Some(libm::ceil(libm::log(arg) / lambda) as usize)
        }
    };

    let zeta = 9.0 * t2 as f64 / 4.0;
    let mu = if zeta > 1.0 {
        (42.0 * libm::sqrt(libm::log(zeta))).max(8.0)
    } else {
        8.0
    };

    let mut limit = f64::INFINITY;
    if l > 0.0 {
        limit = limit.min(1.0 / (2.0 * l)).min(c / (l * l));
    }
    limit = limit.min(1.0 / (2.0 * c));

    Ok(TheoremConstants {
        c,
        eta,
        smoothness,
        r,
        y0_dist2,
        t2,
        lambda,
        b,
        t1_min,
        stay_radius2: ratio(20.0 * b, lambda),
        zeta,
        mu,
        delta2: ratio(mu * mu * b, lambda),
        eta_valid: eta < limit,
    })
}

/// Step size above which a GD step from a point at squared distance `dist2`
/// with squared gradient norm `grad_norm2` cannot move closer to `x*`,
/// given one-point convexity constant `c_prime` there.
pub fn divergence_threshold(c_prime: f64, dist2: f64, grad_norm2: f64) -> Result<f64> {
    if grad_norm2 == 0.0 {
        return Err(Error::ZeroGradient);
    }
    if !(grad_norm2.is_finite() && grad_norm2 > 0.0) {
        return Err(invalid("grad_norm2", "must be finite and > 0"));
    }
    if !(c_prime.is_finite() && dist2.is_finite() && dist2 >= 0.0) {
        return Err(invalid("dist2", "must be finite and >= 0"));
    }
    Ok(2.0 * c_prime * dist2 / grad_norm2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DriftReport {
    /// Monte Carlo estimate of `E|y_next - x*|^2`.
    pub estimate: f64,
    pub ci_halfwidth: f64,
    /// `(1 - lambda) |y - x*|^2 + b`.
    pub bound: f64,
    pub lambda: f64,
    pub b: f64,
    pub samples: usize,
    pub pass: bool,
}

/// One-step drift of the shadow sequence from `y`:
/// `y_next = y - eta w - eta grad f(y - eta w)`, `w ~ kernel`.
#[allow(clippy::too_many_arguments)]
pub fn drift_check(
    obj: &Objective,
    kernel: &NoiseKernel,
    eta: f64,
    c: f64,
    smoothness: f64,
    y: &Point,
    target: &Point,
    n: usize,
    confidence: f64,
    rng: &mut RngStream,
) -> Result<DriftReport> {
    if n < 2 {
        return Err(invalid("n", "need at least two samples"));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(invalid("confidence", "must be in (0, 1)"));
    }
    let d = obj.dimension();
    check_dim(d, y.dimension())?;
    check_dim(d, target.dimension())?;
    check_dim(d, kernel.dimension)?;
    let k = constants(c, eta, smoothness, kernel.norm_bound(), 0.0, 0)?;

    let mut w = vec![0.0; d];
    let mut p = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut sum = 0.0;
    for _ in 0..n {
        kernel.sample_unchecked(rng, &mut w);
        for i in 0..d {
            p[i] = y[i] - eta * w[i];
        }
        obj.gradient_unchecked(&p, &mut g);
        let mut s = 0.0;
        for i in 0..d {
            let v = p[i] - eta * g[i] - target[i];
            s += v * v;
        }
        if !s.is_finite() {
            return Err(Error::NonFiniteEvaluation);
        }
        sum += s;
    }
    let estimate = sum / n as f64;

    // |y_next - (y - eta grad f(y))| <= eta r (1 + eta L) =: rho, so the
    // squared distance lies between max(0, c0 - rho)^2 and (c0 + rho)^2.
    obj.gradient_unchecked(y, &mut g);
    let center: Vec<f64> = (0..d).map(|i| y[i] - eta * g[i] - target[i]).collect();
    let c0 = libm::sqrt(norm2(&center));
    let rho = eta * kernel.norm_bound() * (1.0 + eta * smoothness);
    let lo = (c0 - rho).max(0.0);
    let range = (c0 + rho) * (c0 + rho) - lo * lo;
    let ci_halfwidth = hoeffding_halfwidth(n, range, 1.0 - confidence);

    let bound = (1.0 - k.lambda) * dist2(y, target) + k.b;
    Ok(DriftReport {
        estimate,
        ci_halfwidth,
        bound,
        lambda: k.lambda,
        b: k.b,
        samples: n,
        pass: estimate <= bound + ci_halfwidth,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StayOutcome {
    pub hit: bool,
    pub stay: bool,
    /// `|y_T - x*|^2`.
    pub dist2_at_start: f64,
    /// Largest `|y_t - x*|^2` over the window.
    pub max_dist2: f64,
    /// Largest `|x_t - x*|^2` over the window, for context only.
    pub max_x_dist2: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StayReport {
    pub start: usize,
    pub window: usize,
    pub trials: usize,
    pub hit_fraction: f64,
    pub stay_fraction: f64,
    pub hit_and_stay_fraction: f64,
    pub outcomes: Vec<StayOutcome>,
}

/// Checks every trajectory for `|y_T - x*|^2 <= stay_radius2` (hit) and
/// `|y_t - x*|^2 <= delta2` for all `t` in `[T, T + T2]` (stay), with
/// `T = start`. `start` must not be below `t1_min` when that is known.
pub fn stay_validate(trajs: &[Trajectory], k: &TheoremConstants, target: &Point, start: usize) -> Result<StayReport> {
    if trajs.is_empty() {
        return Err(invalid("trajectories", "must not be empty"));
    }
    if let Some(t1) = k.t1_min {
        if start < t1 {
            return Err(invalid("start", "must be >= t1_min"));
        }
    }
    let needed = start + k.t2 + 1;
    let mut outcomes = Vec::with_capacity(trajs.len());
    for (index, traj) in trajs.iter().enumerate() {
        if traj.len() < needed {
            return Err(Error::TrajectoryTooShort {
                index,
                len: traj.len(),
                needed,
            });
        }
        let window = &traj.records[start..needed];
        let mut max_dist2: f64 = 0.0;
        let mut max_x_dist2: f64 = 0.0;
        for rec in window {
            if (rec.eta - k.eta).abs() > 1e-12 * k.eta {
                return Err(invalid("trajectories", "step size differs from the constants"));
            }
            check_dim(target.dimension(), rec.y.dimension())?;
            max_dist2 = max_dist2.max(dist2(&rec.y, target));
            max_x_dist2 = max_x_dist2.max(dist2(&rec.x, target));
        }
        let dist2_at_start = dist2(&window[0].y, target);
        outcomes.push(StayOutcome {
            hit: dist2_at_start <= k.stay_radius2,
            stay: max_dist2 <= k.delta2,
            dist2_at_start,
            max_dist2,
            max_x_dist2,
        });
    }
    let n = outcomes.len() as f64;
    let frac = |f: &dyn Fn(&StayOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count() as f64 / n;
    Ok(StayReport {
        start,
        window: k.t2,
        trials: outcomes.len(),
        hit_fraction: frac(&|o| o.hit),
        stay_fraction: frac(&|o| o.stay),
        hit_and_stay_fraction: frac(&|o| o.hit && o.stay),
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{make_quadratic, make_spiky, SpikyParams};
    use crate::optimizer::{gd_run, sgd_run, StepSchedule};
    use proptest::prelude::*;

    fn p1(v: f64) -> Point {
        Point::new(vec![v]).unwrap()
    }

    #[test]
    fn hand_evaluated_constants() {
        let k = constants(1.0, 0.1, 1.0, 1.0, 1.0, 100).unwrap();
        assert!((k.lambda - 0.19).abs() < 1e-15);
        assert!((k.b - 0.0121).abs() < 1e-15);
        assert!((k.stay_radius2 - 0.242 / 0.19).abs() < 1e-12);
        // ln(0.19 / 0.0121) / 0.19 = 14.49...
        assert_eq!(k.t1_min, Some(15));
        assert_eq!(k.zeta, 225.0);
        assert!((k.mu - 42.0 * libm::sqrt(libm::log(225.0))).abs() < 1e-12);
        assert!((k.delta2 - k.mu * k.mu * 0.0121 / 0.19).abs() < 1e-9);
        assert!(k.eta_valid);
    }

    #[test]
    fn zero_noise_constants() {
        let k = constants(1.0, 0.1, 1.0, 0.0, 4.0, 10).unwrap();
        assert_eq!(k.b, 0.0);
        assert_eq!(k.stay_radius2, 0.0);
        assert_eq!(k.delta2, 0.0);
        assert_eq!(k.t1_min, None);
        assert_eq!(constants(1.0, 0.1, 1.0, 0.0, 0.0, 10).unwrap().t1_min, Some(0));
    }

    #[test]
    fn start_inside_radius_needs_no_steps() {
        let k = constants(1.0, 0.1, 1.0, 1.0, 0.01, 10).unwrap();
        assert_eq!(k.t1_min, Some(0));
    }

    #[test]
    fn step_size_validity() {
        assert!(!constants(1.0, 0.6, 1.0, 1.0, 1.0, 1).unwrap().eta_valid);
        assert!(constants(1.0, 0.49, 1.0, 1.0, 1.0, 1).unwrap().eta_valid);
        // c / L^2 binds.
        assert!(!constants(0.25, 0.3, 1.0, 1.0, 1.0, 1).unwrap().eta_valid);
        assert!(constants(1.0, 0.4, 0.0, 1.0, 1.0, 1).unwrap().eta_valid);
        assert!(constants(0.0, 0.1, 1.0, 1.0, 1.0, 1).is_err());
        assert!(constants(1.0, -0.1, 1.0, 1.0, 1.0, 1).is_err());
    }

    #[test]
    fn small_windows_use_floor_mu() {
        assert_eq!(constants(1.0, 0.1, 1.0, 1.0, 1.0, 0).unwrap().mu, 8.0);
        assert_eq!(constants(1.0, 0.1, 1.0, 1.0, 1.0, 1).unwrap().mu, 42.0 * libm::sqrt(libm::log(2.25)));
    }

    #[test]
    fn no_contraction_no_t1() {
        let k = constants(1.0, 2.1, 1.0, 1.0, 1.0, 1).unwrap();
        assert!(k.lambda < 0.0);
        assert_eq!(k.t1_min, None);
        assert!(k.stay_radius2 < 0.0);
    }

    #[test]
    fn threshold_on_quadratic() {
        assert_eq!(divergence_threshold(1.0, 1.0, 1.0).unwrap(), 2.0);
        assert_eq!(divergence_threshold(1.0, 1.0, 0.0), Err(Error::ZeroGradient));
        assert!(divergence_threshold(1.0, -1.0, 1.0).is_err());
        let q = make_quadratic(1, Point::zeros(1)).unwrap();
        let up = gd_run(&q, 2.1, 20, &p1(1.0)).unwrap();
        for w in up.records.windows(2) {
            assert!(w[1].x[0].abs() > w[0].x[0].abs());
        }
        let down = gd_run(&q, 1.9, 20, &p1(1.0)).unwrap();
        for w in down.records.windows(2) {
            assert!(w[1].x[0].abs() < w[0].x[0].abs());
        }
    }

    #[test]
    fn noiseless_quadratic_drift_is_equality() {
        let q = make_quadratic(2, Point::zeros(2)).unwrap();
        let y = Point::new(vec![1.5, -0.5]).unwrap();
        let eta = 0.1;
        let rep = drift_check(&q, &NoiseKernel::zero(2), eta, 1.0, 1.0, &y, &Point::zeros(2), 10, 0.99, &mut RngStream::new(0, 0)).unwrap();
        let exact = (1.0 - eta) * (1.0 - eta) * 2.5;
        assert!((rep.estimate - exact).abs() <= 1e-12);
        assert!((rep.bound - exact).abs() <= 1e-12);
        assert!((rep.lambda - (2.0 * eta - eta * eta)).abs() <= 1e-15);
        assert_eq!(rep.ci_halfwidth, 0.0);
        assert!(rep.pass);
    }

    #[test]
    fn drift_at_target_is_noise_only() {
        let q = make_quadratic(1, Point::zeros(1)).unwrap();
        let k = NoiseKernel::uniform_ball(2.0, 1).unwrap();
        let rep = drift_check(&q, &k, 0.1, 1.0, 1.0, &Point::zeros(1), &Point::zeros(1), 5000, 0.99, &mut RngStream::new(4, 0)).unwrap();
        assert!(rep.estimate <= rep.b + rep.ci_halfwidth);
        // Exact value: (eta (1 - eta))^2 E w^2 = 0.0081 * 4 / 3.
        assert!((rep.estimate - 0.0108).abs() <= rep.ci_halfwidth);
    }

    #[test]
    fn drift_rejects_bad_inputs() {
        let q = make_quadratic(1, Point::zeros(1)).unwrap();
        let mut rng = RngStream::new(0, 0);
        let k = NoiseKernel::zero(1);
        assert!(drift_check(&q, &k, 0.1, 1.0, 1.0, &p1(1.0), &p1(0.0), 1, 0.99, &mut rng).is_err());
        assert!(drift_check(&q, &k, 0.1, 1.0, 1.0, &p1(1.0), &p1(0.0), 10, 1.0, &mut rng).is_err());
        assert!(drift_check(&q, &k, 0.1, 1.0, 1.0, &Point::zeros(2), &p1(0.0), 10, 0.9, &mut rng).is_err());
    }

    #[test]
    fn noiseless_quadratic_hits_and_stays() {
        let q = make_quadratic(1, Point::zeros(1)).unwrap();
        let k = constants(1.0, 0.4, 1.0, 0.0, 0.0, 50).unwrap();
        // (0.6)^t underflows to exactly 0 well before t = 2000.
        let trajs: Vec<_> = [-3.0, 0.5, 4.0]
            .iter()
            .map(|&x| gd_run(&q, 0.4, 2100, &p1(x)).unwrap())
            .collect();
        let rep = stay_validate(&trajs, &k, &Point::zeros(1), 2000).unwrap();
        assert_eq!(rep.hit_fraction, 1.0);
        assert_eq!(rep.stay_fraction, 1.0);
        assert_eq!(rep.hit_and_stay_fraction, 1.0);
    }

    #[test]
    fn expanding_step_never_hits() {
        let q = make_quadratic(1, Point::zeros(1)).unwrap();
        let kernel = NoiseKernel::uniform_ball(0.5, 1).unwrap();
        let sched = StepSchedule::single(2.1, 60, kernel).unwrap();
        let k = constants(1.0, 2.1, 1.0, 0.5, 1.0, 10).unwrap();
        let trajs: Vec<_> = (0..20)
            .map(|i| sgd_run(&q, &sched, &p1(1.0), &mut RngStream::new(5, i)).unwrap())
            .collect();
        let rep = stay_validate(&trajs, &k, &Point::zeros(1), 40).unwrap();
        assert_eq!(rep.hit_fraction, 0.0);
    }

    #[test]
    fn stay_validate_errors() {
        let q = make_quadratic(1, Point::zeros(1)).unwrap();
        let traj = gd_run(&q, 0.1, 10, &p1(1.0)).unwrap();
        let k = constants(1.0, 0.1, 1.0, 1.0, 0.0, 20).unwrap();
        assert!(matches!(
            stay_validate(&[traj.clone()], &k, &Point::zeros(1), 0),
            Err(Error::TrajectoryTooShort { index: 0, len: 11, needed: 21 })
        ));
        let k = constants(1.0, 0.1, 1.0, 1.0, 100.0, 2).unwrap();
        assert!(stay_validate(&[traj.clone()], &k, &Point::zeros(1), 0).is_err());
        let k = constants(1.0, 0.2, 1.0, 1.0, 0.0, 2).unwrap();
        assert!(stay_validate(&[traj], &k, &Point::zeros(1), 0).is_err());
        assert!(stay_validate(&[], &k, &Point::zeros(1), 0).is_err());
    }

    #[test]
    fn spiky_drift_holds_at_spike_cancelling_noise() {
        let obj = make_spiky(SpikyParams::DEFAULT).unwrap();
        let eta = 0.01;
        let l = obj.smoothness();
        let kernel = NoiseKernel::uniform_ball(core::f64::consts::PI / (10.0 * eta), 1).unwrap();
        let mut rng = RngStream::new(8, 0);
        for &y in &[-2.5, -1.0, 0.7, 2.2] {
            let rep = drift_check(&obj, &kernel, eta, 0.9, l, &p1(y), &Point::zeros(1), 10_000, 0.99, &mut rng).unwrap();
            assert!(rep.pass, "{y}: {rep:?}");
        }
    }

    proptest! {
        #[test]
        fn stay_radius_monotone(
            c in 0.1f64..2.0,
            eta in 1e-4f64..0.05,
            l in 0.0f64..5.0,
            r in 0.01f64..10.0,
            scale in 1.01f64..2.0,
        ) {
            let base = constants(c, eta, l, r, 1.0, 10).unwrap();
            prop_assume!(base.lambda > 0.0);
            let more_eta = constants(c, eta * scale, l, r, 1.0, 10).unwrap();
            if more_eta.lambda > 0.0 && more_eta.eta_valid && base.eta_valid {
                prop_assert!(more_eta.stay_radius2 > base.stay_radius2);
            }
            let more_r = constants(c, eta, l, r * scale, 1.0, 10).unwrap();
            prop_assert!(more_r.stay_radius2 > base.stay_radius2);
            let more_c = constants(c * scale, eta, l, r, 1.0, 10).unwrap();
            prop_assert!(more_c.stay_radius2 < base.stay_radius2);
        }

        #[test]
        fn staged_radius_shrinks(
            c in 0.1f64..2.0,
            eta in 1e-4f64..0.05,
            l in 0.0f64..5.0,
            r in 0.01f64..10.0,
            dc in 0.0f64..1.0,
            shrink in 0.1f64..0.99,
        ) {
            let first = constants(c, eta, l, r, 1.0, 10).unwrap();
            prop_assume!(first.eta_valid);
            let second = constants(c + dc, eta * shrink, l, r, 1.0, 10).unwrap();
            prop_assert!(second.eta_valid);
            prop_assert!(second.stay_radius2 < first.stay_radius2);
        }

        #[test]
        fn delta_dominates_stay_radius(
            c in 0.1f64..2.0,
            eta in 1e-4f64..0.05,
            r in 0.01f64..10.0,
            t2 in 0usize..100_000,
        ) {
            let k = constants(c, eta, 1.0, r, 1.0, t2).unwrap();
            prop_assume!(k.lambda > 0.0);
            prop_assert!(k.delta2 >= k.stay_radius2);
            prop_assert_eq!(k, constants(c, eta, 1.0, r, 1.0, t2).unwrap());
            if eta < c {
                prop_assert!(k.lambda > eta * c);
            }
        }
    }
}
