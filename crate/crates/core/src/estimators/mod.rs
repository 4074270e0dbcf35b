//! Estimators built on the bridge likelihood and on most probable paths.

mod latent;
mod mle;
mod mpp;

pub use latent::{principal_paths, summarize_latent, LatentSummary, MIN_ESS};
pub use mle::{fit_mle, mc_gradient, unpack, pack, FitOptions, PCAFit, TraceRecord};
pub use mpp::{
    hamiltonian, mpp_estimate, mpp_flow, mpp_shoot, MppEstimate, MppEstimateOptions, MppOptions, MppResult,
    MppState,
};
