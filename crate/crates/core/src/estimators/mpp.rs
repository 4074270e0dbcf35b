//! Most probable paths as normal sub-Riemannian geodesics on the frame bundle.
//!
//! Coordinates are `q = (x, ν)` and `p = (ξ, η)` with `ν`, `η` stored
//! column-major. With `h_i = ⟨p, H_i(q)⟩` the Hamiltonian is `½ Σ h_i²`.
//! Shooting matches the base endpoint and leaves the frame free, which makes
//! the final fiber momentum `η(1)` vanish.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::frame_bundle::{frame_volume, FramePoint};
use crate::geometry::{Christoffel, ChartRef, Manifold};
use crate::par::map_indexed;
use crate::prelude::*;

/// Settings for [`mpp_shoot`].
#[derive(Debug, Clone, PartialEq)]
pub struct MppOptions {
    /// RK4 steps over `[0, 1]`.
    pub steps: usize,
    pub max_iter: usize,
    /// Convergence threshold on the largest residual component.
    pub tol: f64,
    /// Relative step of the finite-difference shooting Jacobian.
    pub jacobian_step: f64,
    /// Step of the central difference in `x` of the Hamiltonian.
    pub gradient_step: f64,
}

impl Default for MppOptions {
    fn default() -> Self {
        MppOptions { steps: 100, max_iter: 50, tol: 1e-10, jacobian_step: 1e-7, gradient_step: 1e-5 }
    }
}

/// One point of a Hamiltonian flow.
#[derive(Debug, Clone, PartialEq)]
pub struct MppState {
    pub frame: FramePoint,
    pub xi: DVector<f64>,
    pub eta: DMatrix<f64>,
}

/// A solved shooting problem.
#[derive(Debug, Clone)]
pub struct MppResult {
    /// `(ξ, η)` at time 0, `η` column-major.
    pub initial_momentum: DVector<f64>,
    pub path: Vec<MppState>,
    pub sq_distance: f64,
    pub endpoint_residual: f64,
    /// Largest relative deviation of the Hamiltonian from its initial value.
    pub hamiltonian_drift: f64,
    pub iterations: usize,
}

struct Work {
    d: usize,
    gamma: Christoffel,
    kmat: Vec<f64>,
    h: Vec<f64>,
    xs: Vec<f64>,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Work {
    fn new(d: usize) -> Self {
        let n = 2 * (d + d * d);
        Work {
            d,
            gamma: Christoffel::zeros(d),
            kmat: vec![0.0; d * d * d],
            h: vec![0.0; d],
            xs: vec![0.0; d],
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    fn len(&self) -> usize {
        2 * (self.d + self.d * self.d)
    }

    /// Fills `kmat[a, i, j] = Γ^a_{bc} ν^b_i ν^c_j` and `h`; returns `H`.
    /// `gamma` must hold the symbols at the base point.
    fn contract(&mut self, z: &[f64]) -> f64 {
        let d = self.d;
        let nu = &z[d..d + d * d];
        let xi = &z[d + d * d..2 * d + d * d];
        let eta = &z[2 * d + d * d..];
        for a in 0..d {
            for i in 0..d {
                for j in 0..d {
                    let mut s = 0.0;
                    for b in 0..d {
                        for c in 0..d {
                            s += self.gamma.get(a, b, c) * nu[b + d * i] * nu[c + d * j];
                        }
                    }
                    self.kmat[(a * d + i) * d + j] = s;
                }
            }
        }
        let mut total = 0.0;
        for i in 0..d {
            let mut hi = 0.0;
            for a in 0..d {
                hi += xi[a] * nu[a + d * i];
                for j in 0..d {
                    hi -= eta[a + d * j] * self.kmat[(a * d + i) * d + j];
                }
            }
            self.h[i] = hi;
            total += hi * hi;
        }
        0.5 * total
    }

    fn hamiltonian_at(&mut self, chart: &dyn Manifold, x: &[f64], z: &[f64]) -> f64 {
        chart.christoffel_into(x, &mut self.gamma);
        self.contract(z)
    }

    /// Hamilton's equations at `z`, written to `out`.
    fn rhs(&mut self, chart: &dyn Manifold, z: &[f64], out: &mut [f64], eps: f64) {
        let d = self.d;
        let (ox, rest) = out.split_at_mut(d);
        let (onu, rest) = rest.split_at_mut(d * d);
        let (oxi, oeta) = rest.split_at_mut(d);

        // ∂H/∂x by central differences
        self.xs.copy_from_slice(&z[..d]);
        for e in 0..d {
            let x0 = self.xs[e];
            self.xs[e] = x0 + eps;
            let xs = core::mem::take(&mut self.xs);
            let hp = self.hamiltonian_at(chart, &xs, z);
            self.xs = xs;
            self.xs[e] = x0 - eps;
            let xs = core::mem::take(&mut self.xs);
            let hm = self.hamiltonian_at(chart, &xs, z);
            self.xs = xs;
            self.xs[e] = x0;
            oxi[e] = -(hp - hm) / (2.0 * eps);
        }

        self.hamiltonian_at(chart, &z[..d], z);
        let nu = &z[d..d + d * d];
        let xi = &z[d + d * d..2 * d + d * d];
        let eta = &z[2 * d + d * d..];
        for a in 0..d {
            ox[a] = (0..d).map(|i| self.h[i] * nu[a + d * i]).sum();
            for j in 0..d {
                onu[a + d * j] = -(0..d).map(|i| self.h[i] * self.kmat[(a * d + i) * d + j]).sum::<f64>();
            }
        }
        for e in 0..d {
            let mut ae = 0.0;
            for a in 0..d {
                for j in 0..d {
                    let mut s = 0.0;
                    for c in 0..d {
                        s += self.gamma.get(a, e, c) * nu[c + d * j];
                    }
                    ae += eta[a + d * j] * s;
                }
            }
            for l in 0..d {
                let mut bsum = 0.0;
                for i in 0..d {
                    let mut bil = 0.0;
                    for a in 0..d {
                        let mut s = 0.0;
                        for b in 0..d {
                            s += self.gamma.get(a, b, e) * nu[b + d * i];
                        }
                        bil += eta[a + d * l] * s;
                    }
                    bsum += self.h[i] * bil;
                }
                oeta[e + d * l] = -(self.h[l] * (xi[e] - ae) - bsum);
            }
        }
    }

    /// One RK4 step of size `dt`; `false` if a stage leaves the chart.
    fn rk4(&mut self, chart: &dyn Manifold, z: &mut [f64], dt: f64, eps: f64) -> bool {
        let n = self.len();
        let d = self.d;
        let mut k1 = core::mem::take(&mut self.k1);
        let mut k2 = core::mem::take(&mut self.k2);
        let mut k3 = core::mem::take(&mut self.k3);
        let mut k4 = core::mem::take(&mut self.k4);
        let mut tmp = core::mem::take(&mut self.tmp);
        let mut ok = true;
        self.rhs(chart, z, &mut k1, eps);
        for i in 0..n {
            tmp[i] = z[i] + 0.5 * dt * k1[i];
        }
        ok &= chart.in_domain(&tmp[..d]);
        if ok {
            self.rhs(chart, &tmp, &mut k2, eps);
            for i in 0..n {
                tmp[i] = z[i] + 0.5 * dt * k2[i];
            }
            ok &= chart.in_domain(&tmp[..d]);
        }
        if ok {
            self.rhs(chart, &tmp, &mut k3, eps);
            for i in 0..n {
                tmp[i] = z[i] + dt * k3[i];
            }
            ok &= chart.in_domain(&tmp[..d]);
        }
        if ok {
            self.rhs(chart, &tmp, &mut k4, eps);
            for i in 0..n {
                z[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            ok &= chart.in_domain(&z[..d]) && z.iter().all(|v| v.is_finite());
        }
        self.k1 = k1;
        self.k2 = k2;
        self.k3 = k3;
        self.k4 = k4;
        self.tmp = tmp;
        ok
    }

    /// Integrates over `[0, 1]`, optionally recording every state.
    fn flow(
        &mut self,
        chart: &dyn Manifold,
        z: &mut [f64],
        opts: &MppOptions,
        mut record: Option<&mut Vec<Vec<f64>>>,
    ) -> bool {
        let dt = 1.0 / opts.steps as f64;
        if let Some(r) = record.as_deref_mut() {
            r.push(z.to_vec());
        }
        for _ in 0..opts.steps {
            if !self.rk4(chart, z, dt, opts.gradient_step) {
                return false;
            }
            if let Some(r) = record.as_deref_mut() {
                r.push(z.to_vec());
            }
        }
        true
    }

    /// Shooting residual `(x(1) − y, η(1))` for initial momentum `p`.
    fn residual(&mut self, chart: &dyn Manifold, q: &[f64], p: &[f64], y: &[f64], opts: &MppOptions) -> Option<Vec<f64>> {
        let d = self.d;
        let mut z = [q, p].concat();
        if !self.flow(chart, &mut z, opts, None) {
            return None;
        }
        let mut r = Vec::with_capacity(d + d * d);
        r.extend((0..d).map(|a| z[a] - y[a]));
        r.extend_from_slice(&z[2 * d + d * d..]);
        Some(r)
    }
}

fn state_vector(u: &FramePoint) -> Vec<f64> {
    [u.x.as_slice(), u.nu.as_slice()].concat()
}

fn check_square(chart: &dyn Manifold, u: &FramePoint) -> Result<usize> {
    let d = chart.dim();
    chart.check(u.x.as_slice())?;
    if u.nu.nrows() != d || u.nu.ncols() != d {
        return Err(Error::InvalidParams("most probable paths need a full frame (k = d)".into()));
    }
    if u.nu.determinant().abs() < 1e-300 {
        return Err(Error::RankDeficient);
    }
    Ok(d)
}

/// `H(q, p)` for `p = (ξ, η)`.
pub fn hamiltonian(chart: &dyn Manifold, u: &FramePoint, momentum: &DVector<f64>) -> Result<f64> {
    let d = check_square(chart, u)?;
    if momentum.len() != d + d * d {
        return Err(Error::Dimension { expected: d + d * d, got: momentum.len() });
    }
    let mut w = Work::new(d);
    let z = [state_vector(u), momentum.as_slice().to_vec()].concat();
    Ok(w.hamiltonian_at(chart, u.x.as_slice(), &z))
}

fn to_state(d: usize, z: &[f64]) -> MppState {
    MppState {
        frame: FramePoint { x: DVector::from_column_slice(&z[..d]), nu: DMatrix::from_column_slice(d, d, &z[d..d + d * d]) },
        xi: DVector::from_column_slice(&z[d + d * d..2 * d + d * d]),
        eta: DMatrix::from_column_slice(d, d, &z[2 * d + d * d..]),
    }
}

/// Integrates Hamilton's equations from `(u, p)` over `[0, 1]`.
pub fn mpp_flow(chart: &dyn Manifold, u: &FramePoint, momentum: &DVector<f64>, opts: &MppOptions) -> Result<Vec<MppState>> {
    let d = check_square(chart, u)?;
    if momentum.len() != d + d * d {
        return Err(Error::Dimension { expected: d + d * d, got: momentum.len() });
    }
    let mut w = Work::new(d);
    let mut z = [state_vector(u), momentum.as_slice().to_vec()].concat();
    let mut rec = Vec::with_capacity(opts.steps + 1);
    if !w.flow(chart, &mut z, opts, Some(&mut rec)) {
        return Err(Error::Rejected { step: rec.len().saturating_sub(1) });
    }
    Ok(rec.iter().map(|z| to_state(d, z)).collect())
}

fn initial_guess(u: &FramePoint, y: &DVector<f64>) -> DVector<f64> {
    let d = u.x.len();
    let cov = &u.nu * u.nu.transpose();
    let xi = cov.lu().solve(&(y - &u.x)).unwrap_or_else(|| DVector::zeros(d));
    let mut p = DVector::zeros(d + d * d);
    p.rows_mut(0, d).copy_from(&xi);
    p
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves for the most probable path from `u` to the fiber over `y`.
pub fn mpp_shoot(chart: &dyn Manifold, u: &FramePoint, y: &DVector<f64>, opts: &MppOptions) -> Result<MppResult> {
    mpp_shoot_from(chart, u, y, None, opts)
}

/// [`mpp_shoot`] started from a given momentum.
pub(crate) fn mpp_shoot_from(
    chart: &dyn Manifold,
    u: &FramePoint,
    y: &DVector<f64>,
    start: Option<&DVector<f64>>,
    opts: &MppOptions,
) -> Result<MppResult> {
    let d = check_square(chart, u)?;
    chart.check(y.as_slice())?;
    if opts.steps == 0 {
        return Err(Error::InvalidParams("need at least one integration step".into()));
    }
    let np = d + d * d;
    let q = state_vector(u);
    let mut w = Work::new(d);
    let mut p: Vec<f64> = start.cloned().unwrap_or_else(|| initial_guess(u, y)).as_slice().to_vec();
    let mut r = match w.residual(chart, &q, &p, y.as_slice(), opts) {
        Some(r) => r,
        None => {
            p = initial_guess(u, y).as_slice().to_vec();
            w.residual(chart, &q, &p, y.as_slice(), opts)
                .ok_or_else(|| Error::Shooting { iterations: 0, residual: f64::INFINITY })?
        }
    };
    let mut iterations = 0;
    while max_abs(&r) > opts.tol {
        if iterations == opts.max_iter {
            return Err(Error::Shooting { iterations, residual: max_abs(&r) });
        }
        iterations += 1;
        let mut jac = DMatrix::zeros(np, np);
        for c in 0..np {
            let h = opts.jacobian_step * p[c].abs().max(1.0);
            let mut pc = p.clone();
            pc[c] += h;
            let rc = w
                .residual(chart, &q, &pc, y.as_slice(), opts)
                .ok_or_else(|| Error::Shooting { iterations, residual: max_abs(&r) })?;
            for i in 0..np {
                jac[(i, c)] = (rc[i] - r[i]) / h;
            }
        }
        let rhs = -DVector::from_column_slice(&r);
        let step = match jac.clone().lu().solve(&rhs) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => jac.svd(true, true).solve(&rhs, 1e-12).map_err(|_| Error::Shooting { iterations, residual: max_abs(&r) })?,
        };
        let norm0: f64 = r.iter().map(|v| v * v).sum();
        let mut a = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(pi, si)| pi + a * si).collect();
            if let Some(rt) = w.residual(chart, &q, &trial, y.as_slice(), opts) {
                let nt: f64 = rt.iter().map(|v| v * v).sum();
                if nt < norm0 {
                    p = trial;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            a *= 0.5;
        }
        if !accepted {
            return Err(Error::Shooting { iterations, residual: max_abs(&r) });
        }
    }
    let p0 = DVector::from_column_slice(&p);
    let path = mpp_flow(chart, u, &p0, opts)?;
    let mut z0 = q.clone();
    z0.extend_from_slice(&p);
    let h0 = w.hamiltonian_at(chart, &q[..d], &z0);
    let mut drift: f64 = 0.0;
    for s in &path {
        let z = [s.frame.x.as_slice(), s.frame.nu.as_slice(), s.xi.as_slice(), s.eta.as_slice()].concat();
        let hs = w.hamiltonian_at(chart, &z[..d], &z);
        drift = drift.max((hs - h0).abs() / h0.abs().max(1e-300));
    }
    let end = &path.last().expect("non-empty path").frame.x;
    Ok(MppResult {
        initial_momentum: p0,
        sq_distance: 2.0 * h0,
        endpoint_residual: (end - y).norm(),
        hamiltonian_drift: drift,
        iterations,
        path,
    })
}

/// Settings for [`mpp_estimate`].
#[derive(Debug, Clone, PartialEq)]
pub struct MppEstimateOptions {
    pub shoot: MppOptions,
    pub max_iter: usize,
    /// Stop when the gradient norm falls below this times `1 + |F|`.
    pub grad_tol: f64,
    /// Lower bound on the g-singular values of the frame.
    pub lambda_floor: f64,
}

impl Default for MppEstimateOptions {
    fn default() -> Self {
        MppEstimateOptions { shoot: MppOptions::default(), max_iter: 100, grad_tol: 1e-8, lambda_floor: 1e-4 }
    }
}

/// Result of [`mpp_estimate`].
#[derive(Debug, Clone)]
pub struct MppEstimate {
    pub frame: FramePoint,
    /// Objective value per iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// The optimizer stopped at the λ lower bound.
    pub lambda_floor_hit: bool,
    pub sq_distances: Vec<f64>,
}

struct MppObjective<'a> {
    chart: &'a ChartRef,
    data: &'a [DVector<f64>],
    opts: &'a MppEstimateOptions,
    d: usize,
}

struct Evaluation {
    value: f64,
    grad: DVector<f64>,
    momenta: Vec<DVector<f64>>,
    sq: Vec<f64>,
}

impl MppObjective<'_> {
    fn frame(&self, theta: &DVector<f64>) -> FramePoint {
        let d = self.d;
        FramePoint {
            x: theta.rows(0, d).into_owned(),
            nu: DMatrix::from_column_slice(d, d, theta.rows(d, d * d).as_slice()),
        }
    }

    fn half_log_det_g(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(0.5 * self.chart.metric(x)?.determinant().ln())
    }

    /// `Σ d²(u, y_i) + 2N ln vol(u)` with its gradient; `Ok(None)` where the
    /// frame is outside the domain of definition.
    fn eval(&self, theta: &DVector<f64>, warm: &[DVector<f64>]) -> Result<Option<Evaluation>> {
        let d = self.d;
        let u = self.frame(theta);
        if !self.chart.in_domain(u.x.as_slice()) || u.nu.determinant().abs() < 1e-300 {
            return Ok(None);
        }
        let shots = map_indexed(self.data.len(), |i| {
            mpp_shoot_from(self.chart.as_ref(), &u, &self.data[i], warm.get(i), &self.opts.shoot)
        });
        let n = self.data.len() as f64;
        let mut value = 0.0;
        let mut grad = DVector::zeros(d + d * d);
        let mut momenta = Vec::with_capacity(self.data.len());
        let mut sq = Vec::with_capacity(self.data.len());
        for (i, s) in shots.into_iter().enumerate() {
            let s = match s {
                Ok(s) => s,
                Err(Error::Shooting { .. }) | Err(Error::Rejected { .. }) if !warm.is_empty() => return Ok(None),
                Err(e) => return Err(Error::Estimation(format!("datum {i}: {e}"))),
            };
            value += s.sq_distance;
            grad -= &s.initial_momentum * 2.0;
            sq.push(s.sq_distance);
            momenta.push(s.initial_momentum);
        }
        let vol = frame_volume(self.chart.as_ref(), &u)?;
        value += 2.0 * n * vol.ln();
        let inv_t = u.nu.clone().try_inverse().ok_or(Error::RankDeficient)?.transpose();
        for (i, v) in inv_t.iter().enumerate() {
            grad[d + i] += 2.0 * n * v;
        }
        let eps = 1e-6;
        for e in 0..d {
            let mut xp = u.x.clone();
            xp[e] += eps;
            let mut xm = u.x.clone();
            xm[e] -= eps;
            grad[e] += 2.0 * n * (self.half_log_det_g(&xp)? - self.half_log_det_g(&xm)?) / (2.0 * eps);
        }
        Ok(Some(Evaluation { value, grad, momenta, sq }))
    }

    fn lambdas(&self, u: &FramePoint) -> Result<Vec<f64>> {
        let g = self.chart.metric(&u.x)?;
        Ok(crate::linalg::g_eigenframe(&u.nu, &g)?.1)
    }

    /// The frame with g-singular values clamped below at `floor`.
    fn clamp(&self, u: &FramePoint, floor: f64) -> Result<FramePoint> {
        let g = self.chart.metric(&u.x)?;
        let l = g.clone().cholesky().ok_or(Error::RankDeficient)?.l();
        let svd = (l.transpose() * &u.nu).svd(true, true);
        let (Some(uu), Some(vt)) = (svd.u, svd.v_t) else {
            return Err(Error::RankDeficient);
        };
        let s = DMatrix::from_diagonal(&svd.singular_values.map(|v| v.max(floor)));
        let linv_t = l.transpose().try_inverse().ok_or(Error::RankDeficient)?;
        Ok(FramePoint { x: u.x.clone(), nu: linv_t * uu * s * vt })
    }
}

/// Minimizes `Σ_i d²(u, y_i) + 2N ln vol(u)` over full frames `u` by BFGS with
/// the exact shooting gradient `∂d²/∂u = −2p(0)`.
pub fn mpp_estimate(
    data: &[DVector<f64>],
    chart: &ChartRef,
    init: &FramePoint,
    opts: &MppEstimateOptions,
) -> Result<MppEstimate> {
    if data.is_empty() {
        return Err(Error::InvalidParams("empty data".into()));
    }
    let d = check_square(chart.as_ref(), init)?;
    for (i, y) in data.iter().enumerate() {
        chart.check(y.as_slice()).map_err(|e| Error::Estimation(format!("datum {i}: {e}")))?;
    }
    let obj = MppObjective { chart, data, opts, d };
    let mut theta = DVector::from_iterator(d + d * d, init.x.iter().chain(init.nu.iter()).copied());
    let mut cur = obj.eval(&theta, &[])?.ok_or_else(|| Error::Estimation("objective undefined at the initial frame".into()))?;
    let np = theta.len();
    let mut hinv = DMatrix::<f64>::identity(np, np);
    let mut trace = vec![cur.value];
    let mut converged = false;
    let mut floor_hit = false;
    let mut iterations = 0;
    let mut scaled = false;
    for _ in 0..opts.max_iter {
        if cur.grad.norm() < opts.grad_tol * (1.0 + cur.value.abs()) {
            converged = true;
            break;
        }
        iterations += 1;
        let mut dir = -(&hinv * &cur.grad);
        if dir.dot(&cur.grad) >= 0.0 {
            hinv = DMatrix::identity(np, np);
            dir = -cur.grad.clone();
        }
        // keep the first trial step moderate relative to the parameters
        let limit = 0.5 * theta.amax().max(1.0);
        if dir.amax() > limit {
            dir *= limit / dir.amax();
        }
        let slope = dir.dot(&cur.grad);
        let mut a = 1.0;
        let mut next = None;
        for _ in 0..40 {
            let mut trial = &theta + &dir * a;
            let u = obj.frame(&trial);
            let mut clamped = false;
            if chart.in_domain(u.x.as_slice()) && u.nu.determinant().abs() > 1e-300 {
                let l = obj.lambdas(&u)?;
                if l.iter().any(|v| *v < opts.lambda_floor) {
                    let c = obj.clamp(&u, opts.lambda_floor)?;
                    trial = DVector::from_iterator(np, c.x.iter().chain(c.nu.iter()).copied());
                    clamped = true;
                }
            }
            if let Some(e) = obj.eval(&trial, &cur.momenta)? {
                if e.value <= cur.value + 1e-4 * a * slope || (clamped && e.value <= cur.value) {
                    next = Some((trial, e, clamped));
                    break;
                }
            }
            a *= 0.5;
        }
        let Some((trial, e, clamped)) = next else {
            converged = true;
            break;
        };
        let s = &trial - &theta;
        let yv = &e.grad - &cur.grad;
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            if !scaled {
                hinv = DMatrix::identity(np, np) * (sy / yv.dot(&yv));
                scaled = true;
            }
            let rho = 1.0 / sy;
            let id = DMatrix::<f64>::identity(np, np);
            let left = &id - &s * yv.transpose() * rho;
            let right = &id - &yv * s.transpose() * rho;
            hinv = &left * &hinv * &right + &s * s.transpose() * rho;
        }
        theta = trial;
        cur = e;
        trace.push(cur.value);
        if clamped {
            floor_hit = true;
            break;
        }
    }
    Ok(MppEstimate {
        frame: obj.frame(&theta),
        trace,
        iterations,
        converged,
        lambda_floor_hit: floor_hit,
        sq_distances: cur.sq,
    })
}

#[cfg(test)]
mod tests;
