//! Guided bridges and importance-sampled transition densities.
//!
//! A bridge to `v` runs the Euler chain of the model with the extra drift
//! `(v − x)/(T − t)`. Its log weight is the ratio of the unguided to the
//! guided Gaussian step kernels plus the final kernel that lands on `v`, so
//! the mean of `exp(log_weight)` is exactly the `n`-step chain density at
//! `v` in chart coordinates.

use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::frame_bundle::{heun_transport_along, reorthonormalize};
use crate::geometry::Christoffel;
use crate::linalg::{chol_log_det, cholesky_in_place, solve_lower_in_place, solve_upper_t_in_place};
use crate::par::map_indexed;
use crate::prelude::*;
use crate::rng::{derive_seed, point_key, stream};
use crate::stochastic::{ModelParams, Trajectory, MAX_RESAMPLE_ATTEMPTS};

/// Default number of bridge steps.
pub const DEFAULT_BRIDGE_STEPS: usize = 100;

/// Default number of bridges per density estimate.
pub const DEFAULT_BRIDGES: usize = 1000;

/// One guided bridge with its importance weight.
#[derive(Debug, Clone)]
pub struct BridgeSample {
    pub trajectory: Trajectory,
    pub log_weight: f64,
    pub target: DVector<f64>,
    /// Chart distance from the penultimate base point to the target.
    pub hit_error: f64,
}

/// Monte Carlo estimate of the transition density at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    /// Density with respect to the Riemannian volume.
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
    /// Density with respect to chart Lebesgue measure.
    pub chart_density: f64,
    /// `ln value`, kept finite when `value` underflows.
    pub log_value: f64,
    /// `stderr / value`.
    pub rel_stderr: f64,
    pub rejections: usize,
    /// Effective sample size of the normalized weights.
    pub ess: f64,
}

/// Validates the model for bridge simulation and the target.
fn check_bridge(params: &ModelParams, v: &DVector<f64>, n: usize) -> Result<()> {
    params.validate()?;
    params.chart.check(v.as_slice())?;
    if n == 0 {
        return Err(Error::InvalidParams("need at least one bridge step".into()));
    }
    if params.sigma == 0.0 && params.rank() < params.dim() {
        return Err(Error::InvalidParams("bridges need sigma > 0 or full rank".into()));
    }
    Ok(())
}

/// Reusable buffers for bridge simulation.
pub(crate) struct BridgeWork {
    d: usize,
    k: usize,
    x: Vec<f64>,
    w: Vec<f64>,
    r: Vec<f64>,
    r0: Vec<f64>,
    z: Vec<f64>,
    g: Vec<f64>,
    gamma0: Christoffel,
    gamma1: Christoffel,
    chol: Vec<f64>,
    guide: Vec<f64>,
    db: Vec<f64>,
    cdb: Vec<f64>,
    dx: Vec<f64>,
    y1: Vec<f64>,
    y2: Vec<f64>,
    m: Vec<f64>,
    rate0: Vec<f64>,
    pred: Vec<f64>,
    s1: Vec<f64>,
    s2: Vec<f64>,
}

/// What a bridge run returns besides its optional recorded path.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BridgeOutcome {
    pub log_weight: f64,
    pub hit_error: f64,
}

impl BridgeWork {
    pub(crate) fn new(params: &ModelParams) -> Result<Self> {
        let d = params.dim();
        let k = params.rank();
        let wide = d * k.max(d);
        Ok(BridgeWork {
            d,
            k,
            x: vec![0.0; d],
            w: vec![0.0; d * k],
            r: vec![0.0; d * d],
            r0: params.isotropic_frame()?.as_slice().to_vec(),
            z: vec![0.0; k],
            g: vec![0.0; d * d],
            gamma0: Christoffel::zeros(d),
            gamma1: Christoffel::zeros(d),
            chol: vec![0.0; d * d],
            guide: vec![0.0; d],
            db: vec![0.0; k + d],
            cdb: vec![0.0; d],
            dx: vec![0.0; d],
            y1: vec![0.0; d],
            y2: vec![0.0; d],
            m: vec![0.0; d * d],
            rate0: vec![0.0; wide],
            pred: vec![0.0; wide],
            s1: vec![0.0; d * d],
            s2: vec![0.0; d * d],
        })
    }

    /// Cholesky factor of `Σ = WWᵀ + σ²RRᵀ` at the current frames.
    #[inline(always)]
    fn factor_sigma(&mut self, d: usize, sigma: f64) -> Result<()> {
        let k = self.k;
        let s2 = sigma * sigma;
        for b in 0..d {
            for a in b..d {
                let mut s = 0.0;
                for i in 0..k {
                    s += self.w[a + d * i] * self.w[b + d * i];
                }
                if s2 != 0.0 {
                    let mut t = 0.0;
                    for i in 0..d {
                        t += self.r[a + d * i] * self.r[b + d * i];
                    }
                    s += s2 * t;
                }
                self.chol[a + d * b] = s;
            }
        }
        if cholesky_in_place(&mut self.chol, d) {
            Ok(())
        } else {
            Err(Error::RankDeficient)
        }
    }

    /// `Wᵀ Σ⁻¹ u` accumulated into `z` after scaling by `scale`.
    #[inline(always)]
    fn lift_into_latent(&mut self, d: usize, u: &[f64], scale: f64, noise: Option<&[f64]>) {
        let k = self.k;
        self.y1.copy_from_slice(u);
        solve_lower_in_place(&self.chol, d, &mut self.y1);
        solve_upper_t_in_place(&self.chol, d, &mut self.y1);
        for i in 0..k {
            let mut s = 0.0;
            for a in 0..d {
                s += self.w[a + d * i] * self.y1[a];
            }
            let base = noise.map_or(0.0, |n| n[i]);
            self.z[i] += base + s * scale;
        }
    }

    /// Transports both frames along `dx` to the already advanced `x`.
    #[inline(always)]
    fn transport(&mut self, d: usize, chart: &dyn crate::Manifold) {
        chart.christoffel_into(&self.x, &mut self.gamma1);
        heun_transport_along(
            d,
            &self.gamma0,
            &self.gamma1,
            &self.dx,
            &mut self.w,
            &mut self.m,
            &mut self.rate0,
            &mut self.pred,
        );
        heun_transport_along(
            d,
            &self.gamma0,
            &self.gamma1,
            &self.dx,
            &mut self.r,
            &mut self.m,
            &mut self.rate0,
            &mut self.pred,
        );
        chart.metric_into(&self.x, &mut self.g);
        reorthonormalize(d, &self.g, &mut self.r, &mut self.s1, &mut self.s2);
        core::mem::swap(&mut self.gamma0, &mut self.gamma1);
    }

    fn record(&self, traj: &mut Trajectory, t: f64) {
        let (d, k) = (self.d, self.k);
        traj.times.push(t);
        traj.base.push(DVector::from_column_slice(&self.x));
        traj.frame_w.push(DMatrix::from_column_slice(d, k, &self.w));
        traj.frame_r.push(DMatrix::from_column_slice(d, d, &self.r));
        traj.latent.push(DVector::from_column_slice(&self.z));
    }

    /// Simulates one guided bridge to `v` with `n` steps, drawing from `rng`.
    pub(crate) fn run<R: Rng>(
        &mut self,
        params: &ModelParams,
        v: &[f64],
        n: usize,
        rng: &mut R,
        record: Option<&mut Trajectory>,
    ) -> Result<BridgeOutcome> {
        match self.d {
            2 => self.run_dim::<2, R>(params, v, n, rng, record),
            3 => self.run_dim::<3, R>(params, v, n, rng, record),
            _ => self.run_dim::<0, R>(params, v, n, rng, record),
        }
    }

    /// `run` with the dimension fixed at compile time (`D = 0`: dynamic).
    fn run_dim<const D: usize, R: Rng>(
        &mut self,
        params: &ModelParams,
        v: &[f64],
        n: usize,
        rng: &mut R,
        mut record: Option<&mut Trajectory>,
    ) -> Result<BridgeOutcome> {
        let d = if D == 0 { self.d } else { D };
        let k = self.k;
        let chart = params.chart.as_ref();
        let horizon = params.horizon;
        let dt = horizon / n as f64;
        let sd = dt.sqrt();
        let sigma = params.sigma;
        self.x.copy_from_slice(params.m.as_slice());
        self.w.copy_from_slice(params.w.as_slice());
        self.r.copy_from_slice(&self.r0);
        self.z.iter_mut().for_each(|z| *z = 0.0);
        chart.christoffel_into(&self.x, &mut self.gamma0);
        if let Some(t) = record.as_deref_mut() {
            self.record(t, 0.0);
        }
        let mut log_weight = 0.0;
        for j in 0..n - 1 {
            let rem = horizon - j as f64 * dt;
            for a in 0..d {
                self.guide[a] = (v[a] - self.x[a]) / rem;
            }
            self.factor_sigma(d, sigma)?;
            for b in self.db.iter_mut() {
                let e: f64 = rng.sample(StandardNormal);
                *b = e * sd;
            }
            for a in 0..d {
                let mut s = 0.0;
                for i in 0..k {
                    s += self.w[a + d * i] * self.db[i];
                }
                let mut t = 0.0;
                for i in 0..d {
                    t += self.r[a + d * i] * self.db[k + i];
                }
                self.cdb[a] = s + sigma * t;
                self.dx[a] = self.guide[a] * dt + self.cdb[a];
            }
            self.y1.copy_from_slice(&self.dx);
            self.y2.copy_from_slice(&self.cdb);
            solve_lower_in_place(&self.chol, d, &mut self.y1);
            solve_lower_in_place(&self.chol, d, &mut self.y2);
            let q1: f64 = self.y1.iter().map(|v| v * v).sum();
            let q2: f64 = self.y2.iter().map(|v| v * v).sum();
            log_weight += 0.5 * (q2 - q1) / dt;

            let guide = core::mem::take(&mut self.guide);
            let db = core::mem::take(&mut self.db);
            self.lift_into_latent(d, &guide, dt, Some(&db[..k]));
            self.guide = guide;
            self.db = db;

            for a in 0..d {
                self.x[a] += self.dx[a];
            }
            if !chart.in_domain(&self.x) {
                return Err(Error::Rejected { step: j });
            }
            self.transport(d, chart);
            if let Some(t) = record.as_deref_mut() {
                self.record(t, (j + 1) as f64 * dt);
            }
        }
        // final kernel lands on v
        self.factor_sigma(d, sigma)?;
        let mut hit = 0.0;
        for a in 0..d {
            self.dx[a] = v[a] - self.x[a];
            hit += self.dx[a] * self.dx[a];
        }
        self.y2.copy_from_slice(&self.dx);
        solve_lower_in_place(&self.chol, d, &mut self.y2);
        let q: f64 = self.y2.iter().map(|v| v * v).sum();
        log_weight += -0.5 * q / dt - 0.5 * d as f64 * (2.0 * PI * dt).ln() - 0.5 * chol_log_det(&self.chol, d);
        if let Some(t) = record.as_deref_mut() {
            let dx = core::mem::take(&mut self.dx);
            self.lift_into_latent(d, &dx, 1.0, None);
            self.dx = dx;
            self.x.copy_from_slice(v);
            self.transport(d, chart);
            self.record(t, horizon);
        }
        if !log_weight.is_finite() {
            return Err(Error::NonFinite("bridge log weight".into()));
        }
        Ok(BridgeOutcome { log_weight, hit_error: hit.sqrt() })
    }
}

/// Simulates one guided bridge from `m` to `v` with `n` steps.
pub fn guided_bridge(params: &ModelParams, v: &DVector<f64>, n: usize, seed: u64) -> Result<BridgeSample> {
    check_bridge(params, v, n)?;
    let mut work = BridgeWork::new(params)?;
    let mut traj = Trajectory {
        times: Vec::with_capacity(n + 1),
        base: Vec::with_capacity(n + 1),
        frame_w: Vec::with_capacity(n + 1),
        frame_r: Vec::with_capacity(n + 1),
        latent: Vec::with_capacity(n + 1),
    };
    let mut rng = stream(seed);
    let out = work.run(params, v.as_slice(), n, &mut rng, Some(&mut traj))?;
    Ok(BridgeSample { trajectory: traj, log_weight: out.log_weight, target: v.clone(), hit_error: out.hit_error })
}

/// Seed of bridge `index` towards `v` at resampling attempt `attempt`.
pub fn bridge_seed(seed: u64, v: &[f64], index: usize, attempt: u64) -> u64 {
    derive_seed(seed, &[point_key(v), index as u64, attempt])
}

/// Runs `n_samples` bridges to `v`, resampling chart exits, and returns the
/// log weights in bridge order plus the rejection count. With `keep` the
/// accepted bridges are returned as well.
pub(crate) fn bridge_batch(
    params: &ModelParams,
    v: &DVector<f64>,
    n: usize,
    n_samples: usize,
    seed: u64,
    keep: bool,
) -> Result<(Vec<f64>, usize, Vec<BridgeSample>)> {
    check_bridge(params, v, n)?;
    if n_samples == 0 {
        return Err(Error::InvalidParams("need at least one bridge".into()));
    }
    let chunk = 64;
    let chunks = n_samples.div_ceil(chunk);
    let results = map_indexed(chunks, |c| -> Result<Vec<(f64, usize, Option<BridgeSample>)>> {
        let mut work = BridgeWork::new(params)?;
        let mut out = Vec::with_capacity(chunk);
        for b in (c * chunk)..((c + 1) * chunk).min(n_samples) {
            let mut rejected = 0;
            let mut done = None;
            for attempt in 0..MAX_RESAMPLE_ATTEMPTS {
                let s = bridge_seed(seed, v.as_slice(), b, attempt);
                if keep {
                    match guided_bridge(params, v, n, s) {
                        Ok(sample) => {
                            done = Some((sample.log_weight, Some(sample)));
                            break;
                        }
                        Err(Error::Rejected { .. }) => rejected += 1,
                        Err(e) => return Err(e),
                    }
                } else {
                    let mut rng = stream(s);
                    match work.run(params, v.as_slice(), n, &mut rng, None) {
                        Ok(o) => {
                            done = Some((o.log_weight, None));
                            break;
                        }
                        Err(Error::Rejected { .. }) => rejected += 1,
                        Err(e) => return Err(e),
                    }
                }
            }
            match done {
                Some((lw, sample)) => out.push((lw, rejected, sample)),
                None => return Err(Error::Estimation(format!("bridge {b} rejected {MAX_RESAMPLE_ATTEMPTS} times"))),
            }
        }
        Ok(out)
    });
    let mut weights = Vec::with_capacity(n_samples);
    let mut rejections = 0;
    let mut samples = Vec::new();
    for r in results {
        for (lw, rej, s) in r? {
            weights.push(lw);
            rejections += rej;
            if let Some(s) = s {
                samples.push(s);
            }
        }
    }
    Ok((weights, rejections, samples))
}

/// Summary statistics of importance weights given as logs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSummary {
    /// `ln mean exp(lw)`.
    pub log_mean: f64,
    /// Standard error of the mean divided by the mean.
    pub rel_stderr: f64,
    /// Coefficient of variation of the weights.
    pub cv: f64,
    pub ess: f64,
}

/// Overflow-safe mean, relative standard error and ESS of `exp(log_weights)`.
pub fn summarize_weights(log_weights: &[f64]) -> WeightSummary {
    let n = log_weights.len() as f64;
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return WeightSummary { log_mean: f64::NEG_INFINITY, rel_stderr: f64::INFINITY, cv: f64::INFINITY, ess: 0.0 };
    }
    let (mut s1, mut s2) = (0.0, 0.0);
    for &lw in log_weights {
        let e = (lw - max).exp();
        s1 += e;
        s2 += e * e;
    }
    let mean = s1 / n;
    let var = if n > 1.0 { ((s2 - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    let cv = var.sqrt() / mean;
    WeightSummary { log_mean: max + mean.ln(), rel_stderr: cv / n.sqrt(), cv, ess: s1 * s1 / s2 }
}

fn estimate_from_weights(params: &ModelParams, v: &DVector<f64>, weights: &[f64], rejections: usize) -> Result<DensityEstimate> {
    let summary = summarize_weights(weights);
    let log_vol = 0.5 * params.chart.metric(v)?.determinant().ln();
    let log_value = summary.log_mean - log_vol;
    let value = log_value.exp();
    Ok(DensityEstimate {
        value,
        stderr: value * summary.rel_stderr,
        n_samples: weights.len(),
        chart_density: summary.log_mean.exp(),
        log_value,
        rel_stderr: summary.rel_stderr,
        rejections,
        ess: summary.ess,
    })
}

/// Importance-sampled density of `x_T` at `v`.
pub fn transition_density(
    params: &ModelParams,
    v: &DVector<f64>,
    n: usize,
    n_samples: usize,
    seed: u64,
) -> Result<DensityEstimate> {
    let (weights, rejections, _) = bridge_batch(params, v, n, n_samples, seed, false)?;
    estimate_from_weights(params, v, &weights, rejections)
}

/// Accepted bridges to `v` together with the resulting density estimate.
pub fn bridges_with_density(
    params: &ModelParams,
    v: &DVector<f64>,
    n: usize,
    n_samples: usize,
    seed: u64,
) -> Result<(Vec<BridgeSample>, DensityEstimate)> {
    let (weights, rejections, samples) = bridge_batch(params, v, n, n_samples, seed, true)?;
    let est = estimate_from_weights(params, v, &weights, rejections)?;
    Ok((samples, est))
}

/// Densities on a list of points; failures are reported per point.
pub fn density_grid(
    params: &ModelParams,
    grid: &[DVector<f64>],
    n: usize,
    n_samples: usize,
    seed: u64,
) -> Vec<Result<DensityEstimate>> {
    map_indexed(grid.len(), |i| transition_density(params, &grid[i], n, n_samples, seed))
}

/// Monte Carlo log-likelihood of a data set.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLikelihood {
    pub value: f64,
    pub stderr: f64,
    pub per_datum: Vec<DensityEstimate>,
}

impl LogLikelihood {
    pub fn rejections(&self) -> usize {
        self.per_datum.iter().map(|e| e.rejections).sum()
    }
}

/// Sum of `ln value` over the data with a delta-method standard error.
pub fn log_likelihood(
    params: &ModelParams,
    data: &[DVector<f64>],
    n: usize,
    n_samples: usize,
    seed: u64,
) -> Result<LogLikelihood> {
    if data.is_empty() {
        return Err(Error::InvalidParams("empty data".into()));
    }
    let per = map_indexed(data.len(), |i| transition_density(params, &data[i], n, n_samples, seed));
    let mut out = LogLikelihood { value: 0.0, stderr: 0.0, per_datum: Vec::with_capacity(data.len()) };
    let mut var = 0.0;
    for (index, est) in per.into_iter().enumerate() {
        let est = est?;
        if !est.log_value.is_finite() {
            return Err(Error::ZeroDensity { index });
        }
        out.value += est.log_value;
        var += est.rel_stderr * est.rel_stderr;
        out.per_datum.push(est);
    }
    out.stderr = var.sqrt();
    Ok(out)
}

/// Log density of `N(mean, cov)` at `x`.
pub fn gaussian_log_density(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let d = x.len();
    let mut l = cov.as_slice().to_vec();
    if !cholesky_in_place(&mut l, d) {
        return Err(Error::RankDeficient);
    }
    let mut y: Vec<f64> = (x - mean).iter().copied().collect();
    solve_lower_in_place(&l, d, &mut y);
    let q: f64 = y.iter().map(|v| v * v).sum();
    Ok(-0.5 * q - 0.5 * d as f64 * (2.0 * PI).ln() - 0.5 * chol_log_det(&l, d))
}
