//! Numeric geodesics: RK4 exponential and Gauss–Newton shooting logarithm.

use nalgebra::{DMatrix, DVector};

use super::{Christoffel, Manifold};
use crate::error::{Error, Result};
use crate::prelude::*;

pub(crate) const DEFAULT_GEODESIC_STEPS: usize = 200;
const LOG_MAX_ITER: usize = 50;
const LOG_TOL: f64 = 1e-11;

fn acceleration<M: Manifold + ?Sized>(chart: &M, x: &[f64], v: &[f64], gamma: &mut Christoffel, out: &mut [f64]) {
    let d = v.len();
    chart.christoffel_into(x, gamma);
    for a in 0..d {
        let mut s = 0.0;
        for b in 0..d {
            for c in 0..d {
                s += gamma.get(a, b, c) * v[b] * v[c];
            }
        }
        out[a] = -s;
    }
}

/// Endpoint at unit time of the geodesic with initial velocity `v`.
pub fn geodesic_exp<M: Manifold + ?Sized>(
    chart: &M,
    x: &DVector<f64>,
    v: &DVector<f64>,
    steps: usize,
) -> Result<DVector<f64>> {
    chart.check(x.as_slice())?;
    let d = chart.dim();
    let h = 1.0 / steps as f64;
    let mut gamma = Christoffel::zeros(d);
    let mut pos = x.as_slice().to_vec();
    let mut vel = v.as_slice().to_vec();
    let mut k = [vec![0.0; 2 * d], vec![0.0; 2 * d], vec![0.0; 2 * d], vec![0.0; 2 * d]];
    let mut tp = vec![0.0; d];
    let mut tv = vec![0.0; d];
    let mut acc = vec![0.0; d];
    for _ in 0..steps {
        for stage in 0..4 {
            let coef = match stage {
                0 => 0.0,
                3 => h,
                _ => 0.5 * h,
            };
            for i in 0..d {
                let (dp, dv) = if stage == 0 { (0.0, 0.0) } else { (k[stage - 1][i], k[stage - 1][d + i]) };
                tp[i] = pos[i] + coef * dp;
                tv[i] = vel[i] + coef * dv;
            }
            if !chart.in_domain(&tp) {
                return Err(Error::Domain { chart: chart.name(), point: tp.clone() });
            }
            acceleration(chart, &tp, &tv, &mut gamma, &mut acc);
            k[stage][..d].copy_from_slice(&tv);
            k[stage][d..].copy_from_slice(&acc);
        }
        for i in 0..d {
            pos[i] += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
            vel[i] += h / 6.0 * (k[0][d + i] + 2.0 * k[1][d + i] + 2.0 * k[2][d + i] + k[3][d + i]);
        }
    }
    chart.check(&pos)?;
    Ok(DVector::from_vec(pos))
}

/// Initial velocity of the geodesic from `x` reaching `y` at unit time,
/// by Newton iteration on the exponential with a finite-difference Jacobian.
pub fn geodesic_log<M: Manifold + ?Sized>(chart: &M, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    chart.check(x.as_slice())?;
    chart.check(y.as_slice())?;
    let d = chart.dim();
    let steps = DEFAULT_GEODESIC_STEPS;
    let mut v = y - x;
    let mut residual = geodesic_exp(chart, x, &v, steps)? - y;
    for _ in 0..LOG_MAX_ITER {
        let rn = residual.norm();
        if rn < LOG_TOL {
            return Ok(v);
        }
        let mut jac = DMatrix::zeros(d, d);
        for c in 0..d {
            let eps = 1e-6 * v[c].abs().max(1.0);
            let mut vp = v.clone();
            vp[c] += eps;
            let mut vm = v.clone();
            vm[c] -= eps;
            let col = (geodesic_exp(chart, x, &vp, steps)? - geodesic_exp(chart, x, &vm, steps)?) / (2.0 * eps);
            jac.set_column(c, &col);
        }
        let delta = jac
            .lu()
            .solve(&residual)
            .ok_or_else(|| Error::CutLocus(format!("singular exponential at {:?}", v.as_slice())))?;
        let mut alpha = 1.0;
        loop {
            let cand = &v - &delta * alpha;
            if let Ok(end) = geodesic_exp(chart, x, &cand, steps) {
                let r = end - y;
                if r.norm() < rn {
                    v = cand;
                    residual = r;
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < 1e-6 {
                return Err(Error::CutLocus(format!("logarithm shooting stalled at residual {rn:e}")));
            }
        }
    }
    if residual.norm() < 1e-8 {
        Ok(v)
    } else {
        Err(Error::CutLocus(format!("logarithm shooting did not converge (residual {:e})", residual.norm())))
    }
}
