//! Maximum likelihood by frozen-seed Monte Carlo and finite differences.

use nalgebra::{DMatrix, DVector};

use crate::bridge::log_likelihood;
use crate::error::{Error, Result};
use crate::geometry::ChartRef;
use crate::prelude::*;
use crate::rng::derive_seed;
use crate::stochastic::ModelParams;

/// Settings for [`fit_mle`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Bridge steps per density.
    pub n_steps: usize,
    /// Bridges per datum.
    pub n_samples: usize,
    /// Initial line-search scale on the preconditioned step.
    pub step_size: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Relative finite-difference step.
    pub fd_step: f64,
    /// Largest change of any packed parameter in one iteration.
    pub max_step: f64,
    /// Lower bound on the g-singular values of `W`.
    pub lambda_floor: f64,
    /// Steps shorter than this count as a stall.
    pub stall_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            n_steps: 20,
            n_samples: 2000,
            step_size: 1.0,
            max_iter: 50,
            seed: 0,
            fd_step: 1e-3,
            max_step: 0.5,
            lambda_floor: 1e-4,
            stall_tol: 1e-10,
        }
    }
}

/// One optimizer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub neg_log_lik: f64,
    pub stderr: f64,
    /// g-singular values of `W` at `m`, descending.
    pub lambdas: Vec<f64>,
    pub sigma: f64,
}

/// Result of [`fit_mle`].
#[derive(Debug, Clone)]
pub struct PCAFit {
    pub params: ModelParams,
    pub trace: Vec<TraceRecord>,
    pub iterations: usize,
    pub converged: bool,
    /// `(U, λ)` with `U` g-orthonormal at `m` and `W = UΛ` up to rotation.
    pub eigen: (DMatrix<f64>, Vec<f64>),
    pub neg_log_lik: f64,
    pub stderr: f64,
    /// Some λ was clamped to the lower bound.
    pub lambda_floor_hit: bool,
}

impl PCAFit {
    /// Latent variances `λ²T`.
    pub fn variances(&self) -> Vec<f64> {
        self.eigen.1.iter().map(|l| l * l * self.params.horizon).collect()
    }
}

/// `θ = (m, W column-major, ln σ)`.
pub fn pack(params: &ModelParams) -> DVector<f64> {
    let d = params.dim();
    let dk = params.w.len();
    let mut t = DVector::zeros(d + dk + 1);
    t.rows_mut(0, d).copy_from(&params.m);
    t.rows_mut(d, dk).copy_from_slice(params.w.as_slice());
    t[d + dk] = params.sigma.ln();
    t
}

/// Inverse of [`pack`].
pub fn unpack(theta: &DVector<f64>, chart: &ChartRef, k: usize, horizon: f64) -> Result<ModelParams> {
    let d = chart.dim();
    if theta.len() != d + d * k + 1 {
        return Err(Error::Dimension { expected: d + d * k + 1, got: theta.len() });
    }
    let m = theta.rows(0, d).into_owned();
    let w = DMatrix::from_column_slice(d, k, theta.rows(d, d * k).as_slice());
    ModelParams::new(chart.clone(), m, w, theta[d + d * k].exp(), horizon)
}

struct Objective<'a> {
    data: &'a [DVector<f64>],
    chart: &'a ChartRef,
    k: usize,
    horizon: f64,
    n_steps: usize,
    n_samples: usize,
}

impl Objective<'_> {
    /// Negative log-likelihood and its standard error; `+∞` where undefined.
    fn eval(&self, theta: &DVector<f64>, seed: u64) -> (f64, f64) {
        let Ok(p) = unpack(theta, self.chart, self.k, self.horizon) else {
            return (f64::INFINITY, f64::INFINITY);
        };
        match log_likelihood(&p, self.data, self.n_steps, self.n_samples, seed) {
            Ok(ll) if ll.value.is_finite() => (-ll.value, ll.stderr),
            _ => (f64::INFINITY, f64::INFINITY),
        }
    }

    fn fd_step(theta: &DVector<f64>, i: usize, rel: f64) -> f64 {
        rel * theta[i].abs().max(1.0)
    }

    /// Central-difference gradient and diagonal curvature at frozen seeds.
    fn gradient(&self, theta: &DVector<f64>, f0: f64, seed: u64, rel: f64) -> (DVector<f64>, DVector<f64>) {
        let p = theta.len();
        let mut g = DVector::zeros(p);
        let mut c = DVector::zeros(p);
        for i in 0..p {
            let h = Self::fd_step(theta, i, rel);
            let mut tp = theta.clone();
            tp[i] += h;
            let mut tm = theta.clone();
            tm[i] -= h;
            let fp = self.eval(&tp, seed).0;
            let fm = self.eval(&tm, seed).0;
            g[i] = (fp - fm) / (2.0 * h);
            c[i] = (fp - 2.0 * f0 + fm) / (h * h);
        }
        (g, c)
    }
}

/// Frozen-seed negative log-likelihood and its central-difference gradient in
/// packed coordinates (see [`pack`]) with relative step `rel_step`.
pub fn mc_gradient(
    data: &[DVector<f64>],
    params: &ModelParams,
    n_steps: usize,
    n_samples: usize,
    seed: u64,
    rel_step: f64,
) -> Result<(f64, DVector<f64>)> {
    let obj = Objective {
        data,
        chart: &params.chart,
        k: params.rank(),
        horizon: params.horizon,
        n_steps,
        n_samples,
    };
    let theta = pack(params);
    let (f0, _) = obj.eval(&theta, seed);
    if !f0.is_finite() {
        return Err(Error::Estimation("log-likelihood is not finite".into()));
    }
    Ok((f0, obj.gradient(&theta, f0, seed, rel_step).0))
}

fn eigen(params: &ModelParams) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if params.rank() == 0 {
        return Ok((DMatrix::zeros(params.dim(), 0), Vec::new()));
    }
    params.eigenframe()
}

/// Replaces `W` by `U·max(Λ, floor)` when some λ is below `floor`.
fn clamp_lambdas(params: &mut ModelParams, floor: f64) -> Result<bool> {
    let (u, l) = eigen(params)?;
    if l.iter().all(|v| *v >= floor) {
        return Ok(false);
    }
    let mut w = u.clone();
    for (i, li) in l.iter().enumerate() {
        w.column_mut(i).scale_mut(li.max(floor));
    }
    params.w = w;
    Ok(true)
}

/// Fits `(m, W, σ)` by ascending the Monte Carlo log-likelihood.
///
/// Each iteration freezes the bridge seeds, takes central finite differences
/// in `(m, W, ln σ)`, scales each gradient component by its finite-difference
/// curvature where that is positive, and backtracks until the Armijo
/// condition holds. The best parameters seen are returned: each iterate
/// challenges the incumbent at the iteration's frozen seed.
pub fn fit_mle(data: &[DVector<f64>], chart: &ChartRef, k: usize, init: &ModelParams, opts: &FitOptions) -> Result<PCAFit> {
    if data.is_empty() {
        return Err(Error::InvalidParams("empty data".into()));
    }
    let d = chart.dim();
    if k > d || init.rank() != k || init.dim() != d {
        return Err(Error::InvalidParams(format!("rank {k} does not match the initial parameters")));
    }
    if !(init.sigma > 0.0) {
        return Err(Error::InvalidParams("initial sigma must be positive".into()));
    }
    for x in data {
        chart.check(x.as_slice())?;
    }
    let obj = Objective { data, chart, k, horizon: init.horizon, n_steps: opts.n_steps, n_samples: opts.n_samples };
    let mut current = ModelParams { chart: chart.clone(), ..init.clone() };
    let mut floor_hit = clamp_lambdas(&mut current, opts.lambda_floor)?;
    let mut theta = pack(&current);
    let mut trace = Vec::with_capacity(opts.max_iter + 1);
    // incumbent (theta, f, se); challengers are compared at a shared seed
    let mut best: Option<(DVector<f64>, f64, f64)> = None;
    let mut alpha = opts.step_size;
    let mut converged = false;
    let mut iterations = 0;

    let record = |iter: usize, theta: &DVector<f64>, f: f64, se: f64, trace: &mut Vec<TraceRecord>| -> Result<()> {
        let p = unpack(theta, chart, k, init.horizon)?;
        trace.push(TraceRecord { iter, neg_log_lik: f, stderr: se, lambdas: eigen(&p)?.1, sigma: p.sigma });
        Ok(())
    };
    let challenge = |best: &mut Option<(DVector<f64>, f64, f64)>, theta: &DVector<f64>, f: f64, se: f64, seed: u64| {
        let keep = match best.as_ref() {
            Some((b, _, _)) if b != theta => {
                let (fb, seb) = obj.eval(b, seed);
                (fb < f).then_some((fb, seb))
            }
            _ => None,
        };
        match keep {
            Some((fb, seb)) => {
                let b = best.as_mut().expect("incumbent exists");
                b.1 = fb;
                b.2 = seb;
            }
            None => *best = Some((theta.clone(), f, se)),
        }
    };

    for iter in 0..opts.max_iter {
        let seed = derive_seed(opts.seed, &[iter as u64]);
        let (f0, se0) = obj.eval(&theta, seed);
        if !f0.is_finite() {
            if iter == 0 {
                return Err(Error::Estimation("log-likelihood at the initial parameters is not finite".into()));
            }
            return Err(Error::Estimation(format!("log-likelihood became non-finite at iteration {iter}")));
        }
        record(iter, &theta, f0, se0, &mut trace)?;
        challenge(&mut best, &theta, f0, se0, seed);
        iterations = iter + 1;

        let (g, c) = obj.gradient(&theta, f0, seed, opts.fd_step);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("gradient at iteration {iter}")));
        }
        let mut dir = DVector::zeros(theta.len());
        for i in 0..theta.len() {
            let floor = g[i].abs() / opts.max_step;
            dir[i] = -g[i] / c[i].max(floor).max(1e-300);
        }
        let slope = g.dot(&dir);

        let mut accepted = false;
        let mut a = alpha.min(1.0);
        while a * dir.amax() >= opts.stall_tol {
            let trial = &theta + &dir * a;
            let (ft, _) = obj.eval(&trial, seed);
            if ft.is_finite() && ft <= f0 + 1e-4 * a * slope {
                theta = trial;
                accepted = true;
                break;
            }
            a *= 0.5;
        }
        if !accepted {
            converged = true;
            break;
        }
        alpha = (2.0 * a).min(1.0);
        let mut p = unpack(&theta, chart, k, init.horizon)?;
        if clamp_lambdas(&mut p, opts.lambda_floor)? {
            floor_hit = true;
            theta = pack(&p);
        }
    }
    if !converged {
        let seed = derive_seed(opts.seed, &[opts.max_iter as u64]);
        let (f, se) = obj.eval(&theta, seed);
        if f.is_finite() {
            record(opts.max_iter, &theta, f, se, &mut trace)?;
            challenge(&mut best, &theta, f, se, seed);
        }
    }
    let (theta, f, se) = best.expect("at least one evaluation");
    let params = unpack(&theta, chart, k, init.horizon)?;
    let eigen = eigen(&params)?;
    Ok(PCAFit { params, trace, iterations, converged, eigen, neg_log_lik: f, stderr: se, lambda_floor_hit: floor_hit })
}
