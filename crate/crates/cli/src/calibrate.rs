//! Choosing a noise level that certifies one-point convexity of the
//! convolved landscape.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smoothsgd_core::certifier::{scan_point, CertifierSettings, ScanReport};
use smoothsgd_core::{KernelKind, NoiseKernel, Objective, Point, RngStream, SpikyParams};

use crate::error::{Error, Result};

/// [`smoothsgd_core::certifier::region_scan`] with grid points spread over
/// the thread pool. Each point uses `rng.substream(index)`, so the report
/// is identical to the sequential one.
pub fn par_region_scan(
    obj: &Objective,
    kernel: &NoiseKernel,
    settings: &CertifierSettings,
    target: &Point,
    grid: &[Point],
    rng: &RngStream,
) -> Result<ScanReport> {
    if grid.is_empty() {
        return Err(Error::Config("certification grid is empty".into()));
    }
    let certs = (0..grid.len())
        .into_par_iter()
        .map(|i| scan_point(obj, kernel, settings, target, grid, i, rng))
        .collect::<smoothsgd_core::Result<Vec<_>>>()?;
    Ok(ScanReport::from_certificates(certs, settings.c_min))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub radius: f64,
    pub certified_c: Option<f64>,
    pub pass_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub kernel: NoiseKernel,
    pub report: ScanReport,
    /// Every candidate tried, in the order tried.
    pub tried: Vec<CandidateResult>,
}

/// Tries the candidate radii in increasing order and returns the first
/// (smallest) whose scan certifies `c >= settings.c_min`.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_noise(
    obj: &Objective,
    kind: KernelKind,
    candidates: &[f64],
    settings: &CertifierSettings,
    target: &Point,
    grid: &[Point],
    rng: &RngStream,
) -> Result<Calibration> {
    let mut radii = candidates.to_vec();
    radii.sort_by(f64::total_cmp);
    let mut tried = Vec::new();
    for r in radii {
        let kernel = NoiseKernel::new(kind, r, obj.dimension())?;
        let report = par_region_scan(obj, &kernel, settings, target, grid, rng)?;
        tried.push(CandidateResult {
            radius: r,
            certified_c: report.certified_c,
            pass_fraction: report.pass_fraction,
        });
        if report.certifies() {
            return Ok(Calibration { kernel, report, tried });
        }
    }
    Err(Error::NotCertified { c_min: settings.c_min })
}

/// Radii at which the spikes of the spiky landscape are damped by the
/// interval kernel: `freq * eta * r` at multiples of `pi / 4` up to `5 pi / 4`.
/// The spike term of the smoothed gradient carries `sinc(freq * eta * r)`,
/// which vanishes at `pi`.
pub fn spiky_candidate_radii(params: &SpikyParams, eta: f64) -> Vec<f64> {
    (1..=5)
        .map(|k| k as f64 * std::f64::consts::FRAC_PI_4 / (params.freq * eta))
        .collect()
}
