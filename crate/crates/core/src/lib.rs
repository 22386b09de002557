//! Simulation and certification toolkit for SGD viewed as gradient descent
//! on a noise-convolved loss.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! computation: file formats, the command-line harness and parallel
//! ensembles live in the `smoothsgd` crate.
//!
//! Module map:
//!
//! - [`objectives`]: test landscapes with analytic gradients and smoothness constants.
//! - [`noise`]: zero-mean, norm-bounded gradient-noise kernels and the seeded [`RngStream`].
//! - [`smoothing`]: Monte Carlo and closed-form evaluation of `g(y) = E f(y - eta*w)`.
//! - [`optimizer`]: SGD with the shadow sequence `y_t = x_t - eta*grad f(x_t)`.
//! - [`certifier`]: statistical certificates of one-point convexity after convolution.
//! - [`theory`]: convergence constants, divergence threshold, drift and stay checks.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod certifier;
mod error;
pub mod noise;
pub mod objectives;
pub mod optimizer;
mod point;
pub mod smoothing;
pub mod theory;

pub use error::{Error, Result};
pub use noise::{KernelKind, NoiseKernel, RngStream};
pub use objectives::{Objective, SpikyParams};
pub use point::Point;
