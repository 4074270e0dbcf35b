//! Infinitesimal probabilistic PCA for manifold-valued data.
//!
//! The crate models data on a chart-covered manifold as the time-`T` law of a
//! diffusion obtained by stochastic development in the frame bundle: a
//! Euclidean latent Brownian motion drives a rank-`k` frame `W` while an
//! isotropic orthonormal frame `R` carries noise of level `sigma`.
//! Densities of that law are estimated with guided bridges and importance
//! weights, which in turn give Monte Carlo likelihoods, maximum likelihood
//! fits and latent principal-component paths. Closed-form Euclidean PPCA and
//! tangent-space PCA are provided as baselines and oracles.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature; `std` additionally enables rayon-backed parallel Monte Carlo.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod baselines;
pub mod bridge;
pub mod error;
pub mod estimators;
pub mod frame_bundle;
pub mod geometry;
pub mod linalg;
mod par;
pub mod rng;
pub mod stochastic;

pub use error::{Error, Result};
pub use geometry::{ChartRef, Manifold, Surface};

pub(crate) mod prelude {
    pub use alloc::boxed::Box;
    pub use alloc::format;
    pub use alloc::string::{String, ToString};
    pub use alloc::sync::Arc;
    pub use alloc::vec;
    pub use alloc::vec::Vec;
    #[cfg(not(feature = "std"))]
    pub use num_traits::Float;
}
