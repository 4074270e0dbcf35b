//! Conditional latent paths given an observation.

use nalgebra::{DMatrix, DVector};

use crate::bridge::{bridges_with_density, BridgeSample, DensityEstimate};
use crate::error::Result;
use crate::prelude::*;
use crate::stochastic::ModelParams;

/// Below this effective sample size the summary carries a warning.
pub const MIN_ESS: f64 = 10.0;

/// Importance-weighted summary of the latent bridge paths to one datum.
#[derive(Debug, Clone)]
pub struct LatentSummary {
    pub times: Vec<f64>,
    /// Weighted mean latent path, one `k`-vector per time.
    pub mean_path: Vec<DVector<f64>>,
    /// Monte Carlo standard error of each mean-path coordinate.
    pub mean_path_stderr: Vec<DVector<f64>>,
    /// Mean latent endpoint: the principal-component coordinates of the datum.
    pub endpoint: DVector<f64>,
    /// Weighted covariance of the latent endpoints.
    pub endpoint_spread: DMatrix<f64>,
    pub ess: f64,
    pub n_samples: usize,
    pub density: DensityEstimate,
    pub warning: Option<String>,
}

/// Self-normalized importance average of the latent paths of guided bridges
/// to `y`.
pub fn principal_paths(
    params: &ModelParams,
    y: &DVector<f64>,
    n: usize,
    n_samples: usize,
    seed: u64,
) -> Result<LatentSummary> {
    let (bridges, density) = bridges_with_density(params, y, n, n_samples, seed)?;
    Ok(summarize_latent(&bridges, density))
}

/// Latent summary of an already simulated set of weighted bridges.
///
/// # Panics
/// If `bridges` is empty.
pub fn summarize_latent(bridges: &[BridgeSample], density: DensityEstimate) -> LatentSummary {
    let n_samples = bridges.len();
    let k = bridges[0].trajectory.latent[0].len();
    let n = bridges[0].trajectory.steps();
    let max = bridges.iter().map(|b| b.log_weight).fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = bridges.iter().map(|b| (b.log_weight - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let ess = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

    let steps = n + 1;
    let mut mean_path = vec![DVector::zeros(k); steps];
    for (b, w) in bridges.iter().zip(&weights) {
        for (acc, z) in mean_path.iter_mut().zip(&b.trajectory.latent) {
            acc.axpy(*w, z, 1.0);
        }
    }
    let mut mean_path_stderr = vec![DVector::zeros(k); steps];
    for (b, w) in bridges.iter().zip(&weights) {
        for ((acc, z), mean) in mean_path_stderr.iter_mut().zip(&b.trajectory.latent).zip(&mean_path) {
            let dz = z - mean;
            acc.axpy(w * w, &dz.component_mul(&dz), 1.0);
        }
    }
    mean_path_stderr.iter_mut().for_each(|v| v.apply(|x| *x = x.sqrt()));

    let endpoint = mean_path[steps - 1].clone();
    let mut spread = DMatrix::zeros(k, k);
    for (b, w) in bridges.iter().zip(&weights) {
        let dz = &b.trajectory.latent[steps - 1] - &endpoint;
        spread += &dz * dz.transpose() * *w;
    }
    let warning = (ess < MIN_ESS).then(|| format!("effective sample size {ess:.1} is below {MIN_ESS}"));
    LatentSummary {
        times: bridges[0].trajectory.times.clone(),
        mean_path,
        mean_path_stderr,
        endpoint,
        endpoint_spread: spread,
        ess,
        n_samples,
        density,
        warning,
    }
}
