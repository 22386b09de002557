//! Zero-mean, norm-bounded gradient noise and the seeded random streams that
//! drive it.
//!
//! # Random streams
//!
//! [`RngStream`] is ChaCha8 from `rand_chacha` 0.9.0 (pinned in the crate
//! manifest). The 256-bit key comes from `SeedableRng::seed_from_u64(seed)`
//! and the 64-bit ChaCha stream id is the caller's `stream` value, so every
//! `(seed, stream)` pair names an independent keystream. The generator is
//! pure Rust and endian-independent, and the samplers below only use `libm`
//! for transcendental functions, which gives the same samples on every
//! platform.

use alloc::vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::point::{check_dim, norm, Point};

/// Name and version of the generator behind [`RngStream`].
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9.0), key from seed_from_u64, stream id via set_stream";

/// A reproducible random stream identified by `(seed, stream)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A child stream for independent work item `index` (a grid point, a
    /// trial, a stage). The child key mixes `(seed, stream)` with SplitMix64
    /// and uses `index` as its stream id, so children never depend on how
    /// far the parent has been consumed.
    pub fn substream(&self, index: u64) -> RngStream {
        let key = splitmix64(self.seed ^ splitmix64(self.stream ^ 0xA076_1D64_78BD_642F));
        RngStream::new(key, index)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum KernelKind {
    Zero,
    /// Uniform on the cube of half-width `r / sqrt(d)`, so `|w| <= r`.
    UniformCube,
    /// Uniform on the Euclidean ball of radius `r`.
    UniformBall,
}

/// Noise distribution `W(x)` with `E[w] = 0` and `|w| <= radius`.
///
/// The built-in kinds do not depend on the evaluation point; [`NoiseKernel::sample`]
/// still receives it so point-dependent kernels fit the same signature.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseKernel {
    pub kind: KernelKind,
    pub radius: f64,
    pub dimension: usize,
}

impl NoiseKernel {
    pub fn new(kind: KernelKind, radius: f64, dimension: usize) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(invalid("radius", "must be finite and >= 0"));
        }
        if dimension < 1 {
            return Err(invalid("dimension", "must be >= 1"));
        }
        Ok(NoiseKernel {
            kind,
            radius,
            dimension,
        })
    }

    pub fn zero(dimension: usize) -> Self {
        NoiseKernel {
            kind: KernelKind::Zero,
            radius: 0.0,
            dimension,
        }
    }

    pub fn uniform_ball(radius: f64, dimension: usize) -> Result<Self> {
        NoiseKernel::new(KernelKind::UniformBall, radius, dimension)
    }

    pub fn uniform_cube(radius: f64, dimension: usize) -> Result<Self> {
        NoiseKernel::new(KernelKind::UniformCube, radius, dimension)
    }

    /// Norm bound actually enforced by the sampler (0 for the zero kernel).
    pub fn norm_bound(&self) -> f64 {
        match self.kind {
            KernelKind::Zero => 0.0,
            _ => self.radius,
        }
    }

    /// Same kernel with a different radius.
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        NoiseKernel::new(self.kind, radius, self.dimension)
    }

    pub fn sample(&self, at: &[f64], rng: &mut RngStream) -> Result<Point> {
        let mut out = vec![0.0; self.dimension];
        self.sample_into(at, rng, &mut out)?;
        Ok(Point::from_vec_unchecked(out))
    }

    pub fn sample_into(&self, at: &[f64], rng: &mut RngStream, out: &mut [f64]) -> Result<()> {
        check_dim(self.dimension, at.len())?;
        check_dim(self.dimension, out.len())?;
        self.sample_unchecked(rng, out);
        Ok(())
    }

    pub(crate) fn sample_unchecked(&self, rng: &mut RngStream, out: &mut [f64]) {
        let r = self.norm_bound();
        if r == 0.0 {
            out.fill(0.0);
            return;
        }
        let d = out.len();
        match self.kind {
            KernelKind::Zero => unreachable!(),
            KernelKind::UniformCube => {
                let half = r / libm::sqrt(d as f64);
                for o in out.iter_mut() {
                    *o = half * (2.0 * rng.uniform() - 1.0);
                }
            }
            KernelKind::UniformBall if d == 1 => {
                out[0] = r * (2.0 * rng.uniform() - 1.0);
            }
            KernelKind::UniformBall => loop {
                for o in out.iter_mut() {
                    *o = rng.standard_normal();
                }
                let len = norm(out);
                if len > 0.0 {
                    let radial = r * libm::pow(rng.uniform(), 1.0 / d as f64);
                    for o in out.iter_mut() {
                        *o *= radial / len;
                    }
                    break;
                }
            },
        }
        // Rounding can push the norm an ulp past r; pull it back.
        while norm(out) > r {
            for o in out.iter_mut() {
                *o *= 1.0 - f64::EPSILON;
            }
        }
    }

    /// `E|w|^2` in closed form.
    pub fn second_moment(&self) -> Result<f64> {
        let r2 = self.radius * self.radius;
        let d = self.dimension as f64;
        Ok(match self.kind {
            KernelKind::Zero => 0.0,
            // d coordinates, each uniform on [-h, h] with h^2 = r^2 / d.
            KernelKind::UniformCube => r2 / 3.0,
            KernelKind::UniformBall => r2 * d / (d + 2.0),
        })
    }
}
