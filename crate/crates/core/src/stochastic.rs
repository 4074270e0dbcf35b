//! Forward simulation of the anisotropic model.
//!
//! A latent Brownian motion on `ℝ^k` drives the frame `W` and an isotropic
//! Brownian motion on `ℝ^d` drives the g-orthonormal frame `R` scaled by
//! `sigma`. Base increments are `W Δx̂ + σ R Δε`; both frames are parallel
//! transported along them. Integration is Heun (Stratonovich).

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::frame_bundle::{reorthonormalize, Developer};
use crate::geometry::{orthonormal_frame, ChartRef};
use crate::par::map_indexed;
use crate::prelude::*;
use crate::rng::{derive_seed, stream};

/// Default number of steps for stochastic simulation.
pub const DEFAULT_SIM_STEPS: usize = 100;

/// Resampling attempts per sample before giving up.
pub const MAX_RESAMPLE_ATTEMPTS: u64 = 100;

/// Parameters `(m, W, σ, T)` of the model on a given chart.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub m: DVector<f64>,
    pub w: DMatrix<f64>,
    pub sigma: f64,
    pub horizon: f64,
    pub chart: ChartRef,
}

impl ModelParams {
    pub fn new(chart: ChartRef, m: DVector<f64>, w: DMatrix<f64>, sigma: f64, horizon: f64) -> Result<Self> {
        let p = ModelParams { m, w, sigma, horizon, chart };
        p.validate()?;
        Ok(p)
    }

    /// Builds `W` from per-axis variances: column `i` has g-norm
    /// `sqrt(variance_i / T)` and points along the g-orthonormal chart basis at
    /// `m`, rotated by `angle` in its first plane.
    pub fn from_variances(
        chart: ChartRef,
        m: DVector<f64>,
        variances: &[f64],
        angle: f64,
        sigma: f64,
        horizon: f64,
    ) -> Result<Self> {
        let d = chart.dim();
        if variances.len() > d {
            return Err(Error::InvalidParams(format!("{} variances for a {d}-manifold", variances.len())));
        }
        if variances.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidParams("variances must be positive".into()));
        }
        if !(horizon > 0.0) {
            return Err(Error::InvalidParams("horizon must be positive".into()));
        }
        let mut r0 = orthonormal_frame(chart.as_ref(), &m)?;
        if d >= 2 {
            let (c, s) = (angle.cos(), angle.sin());
            let e0 = r0.column(0).into_owned();
            let e1 = r0.column(1).into_owned();
            r0.set_column(0, &(&e0 * c + &e1 * s));
            r0.set_column(1, &(&e1 * c - &e0 * s));
        }
        let mut w = DMatrix::zeros(d, variances.len());
        for (i, v) in variances.iter().enumerate() {
            w.set_column(i, &(r0.column(i) * (v / horizon).sqrt()));
        }
        Self::new(chart, m, w, sigma, horizon)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.chart.dim();
        self.chart.check(self.m.as_slice())?;
        if self.w.nrows() != d {
            return Err(Error::Dimension { expected: d, got: self.w.nrows() });
        }
        let k = self.w.ncols();
        if k > d {
            return Err(Error::InvalidParams(format!("rank {k} exceeds dimension {d}")));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParams("horizon must be positive".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParams("sigma must be non-negative".into()));
        }
        if self.w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("W".into()));
        }
        if k > 0 && self.w.rank(1e-12 * self.w.norm().max(1e-300)) < k {
            return Err(Error::RankDeficient);
        }
        if k < d && self.sigma == 0.0 {
            return Err(Error::InvalidParams(format!("sigma must be positive when rank {k} < dimension {d}")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn rank(&self) -> usize {
        self.w.ncols()
    }

    /// The g-orthonormal frame `R₀` at the mean.
    pub fn isotropic_frame(&self) -> Result<DMatrix<f64>> {
        orthonormal_frame(self.chart.as_ref(), &self.m)
    }

    /// `(U, λ)` with `W = U Λ` up to rotation, `U` g-orthonormal at `m`.
    pub fn eigenframe(&self) -> Result<(DMatrix<f64>, Vec<f64>)> {
        let g = self.chart.metric(&self.m)?;
        crate::linalg::g_eigenframe(&self.w, &g)
    }
}

/// Gaussian increments driving one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivingIncrements {
    pub dt: f64,
    /// `n×k`, row `j` is the latent increment of step `j`.
    pub latent: DMatrix<f64>,
    /// `n×d`, row `j` is the isotropic-noise increment of step `j`.
    pub noise: DMatrix<f64>,
    pub seed: u64,
}

/// Reproducible `N(0, dt)` increments; per step the `k` latent draws precede
/// the `d` noise draws.
pub fn simulate_driving(k: usize, d: usize, n: usize, horizon: f64, seed: u64) -> Result<DrivingIncrements> {
    if n == 0 {
        return Err(Error::InvalidParams("need at least one step".into()));
    }
    let dt = horizon / n as f64;
    let sd = dt.sqrt();
    let mut rng = stream(seed);
    let mut latent = DMatrix::zeros(n, k);
    let mut noise = DMatrix::zeros(n, d);
    for j in 0..n {
        for i in 0..k {
            let z: f64 = StandardNormal.sample(&mut rng);
            latent[(j, i)] = z * sd;
        }
        for i in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            noise[(j, i)] = z * sd;
        }
    }
    Ok(DrivingIncrements { dt, latent, noise, seed })
}

/// A simulated path of the base point, both frames and the latent driver.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub base: Vec<DVector<f64>>,
    pub frame_w: Vec<DMatrix<f64>>,
    pub frame_r: Vec<DMatrix<f64>>,
    pub latent: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn endpoint(&self) -> &DVector<f64> {
        self.base.last().expect("trajectory has at least one point")
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }
}

/// Heun integration of the joint `(x, W, R)` system.
pub fn develop_stochastic(params: &ModelParams, drive: &DrivingIncrements) -> Result<Trajectory> {
    let d = params.dim();
    let k = params.rank();
    if drive.latent.ncols() != k || drive.noise.ncols() != d || drive.latent.nrows() != drive.noise.nrows() {
        return Err(Error::Dimension { expected: k, got: drive.latent.ncols() });
    }
    let n = drive.latent.nrows();
    let chart = params.chart.as_ref();
    let mut x = params.m.as_slice().to_vec();
    let mut w = params.w.as_slice().to_vec();
    let mut r = params.isotropic_frame()?.as_slice().to_vec();
    let mut z = vec![0.0; k];
    let mut dz = vec![0.0; k];
    let mut de = vec![0.0; d];
    let mut dev = Developer::new(d, &[k, d]);
    let (mut g, mut s1, mut s2) = (vec![0.0; d * d], vec![0.0; d * d], vec![0.0; d * d]);
    let mut traj = Trajectory {
        times: Vec::with_capacity(n + 1),
        base: Vec::with_capacity(n + 1),
        frame_w: Vec::with_capacity(n + 1),
        frame_r: Vec::with_capacity(n + 1),
        latent: Vec::with_capacity(n + 1),
    };
    let record = |traj: &mut Trajectory, t: f64, x: &[f64], w: &[f64], r: &[f64], z: &[f64]| {
        traj.times.push(t);
        traj.base.push(DVector::from_column_slice(x));
        traj.frame_w.push(DMatrix::from_column_slice(d, k, w));
        traj.frame_r.push(DMatrix::from_column_slice(d, d, r));
        traj.latent.push(DVector::from_column_slice(z));
    };
    record(&mut traj, 0.0, &x, &w, &r, &z);
    for j in 0..n {
        for i in 0..k {
            dz[i] = drive.latent[(j, i)];
            z[i] += dz[i];
        }
        for i in 0..d {
            de[i] = params.sigma * drive.noise[(j, i)];
        }
        if !dev.step(chart, &mut x, &mut [&mut w, &mut r], &[&dz, &de]) {
            return Err(Error::Rejected { step: j });
        }
        chart.metric_into(&x, &mut g);
        reorthonormalize(d, &g, &mut r, &mut s1, &mut s2);
        let t = if j + 1 == n { params.horizon } else { (j + 1) as f64 * drive.dt };
        record(&mut traj, t, &x, &w, &r, &z);
    }
    Ok(traj)
}

/// Independent forward samples with their endpoints.
#[derive(Debug, Clone)]
pub struct ForwardSamples {
    pub trajectories: Vec<Trajectory>,
    pub endpoints: Vec<DVector<f64>>,
    /// Seeds actually used, per sample.
    pub seeds: Vec<u64>,
    pub rejections: usize,
}

/// Seed of sample `index` at resampling attempt `attempt`.
pub fn sample_seed(seed: u64, index: usize, attempt: u64) -> u64 {
    derive_seed(seed, &[index as u64, attempt])
}

/// Simulates `n_samples` trajectories; samples leaving the chart are
/// resampled with fresh derived seeds and counted.
pub fn forward_samples(params: &ModelParams, n_samples: usize, n_steps: usize, seed: u64) -> Result<ForwardSamples> {
    if n_samples == 0 {
        return Err(Error::InvalidParams("need at least one sample".into()));
    }
    params.validate()?;
    let results = map_indexed(n_samples, |i| -> Result<(Trajectory, u64, usize)> {
        let mut rejected = 0;
        for attempt in 0..MAX_RESAMPLE_ATTEMPTS {
            let s = sample_seed(seed, i, attempt);
            let drive = simulate_driving(params.rank(), params.dim(), n_steps, params.horizon, s)?;
            match develop_stochastic(params, &drive) {
                Ok(t) => return Ok((t, s, rejected)),
                Err(Error::Rejected { .. }) => rejected += 1,
                Err(e) => return Err(e),
            }
        }
        Err(Error::Estimation(format!("sample {i} rejected {MAX_RESAMPLE_ATTEMPTS} times")))
    });
    let mut out = ForwardSamples { trajectories: Vec::new(), endpoints: Vec::new(), seeds: Vec::new(), rejections: 0 };
    for r in results {
        let (t, s, rej) = r?;
        out.endpoints.push(t.endpoint().clone());
        out.trajectories.push(t);
        out.seeds.push(s);
        out.rejections += rej;
    }
    Ok(out)
}
