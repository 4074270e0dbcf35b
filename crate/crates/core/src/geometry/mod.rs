//! Chart-based Riemannian manifolds.
//!
//! A manifold is represented by a single chart covering it up to a set of
//! measure zero. Points are chart coordinates; tangent vectors are chart
//! components. Metrics and Christoffel symbols are evaluated in that chart.

use core::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::prelude::*;

mod custom;
mod geodesic;
pub mod sphere;
mod surface;

pub use custom::MetricChart;
pub use geodesic::{geodesic_exp, geodesic_log};
pub use surface::{Surface, DEFAULT_CHART_RADIUS};

/// Shared, immutable handle to a manifold chart.
pub type ChartRef = Arc<dyn Manifold>;

/// Finite-difference step for generic Christoffel symbols.
pub const CHRISTOFFEL_FD_STEP: f64 = 1e-5;

/// Christoffel symbols `Γ^a_{bc}` at a point, stored densely.
#[derive(Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Christoffel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Christoffel").field("dim", &self.dim).field("data", &self.data).finish()
    }
}

impl Christoffel {
    pub fn zeros(dim: usize) -> Self {
        Christoffel { dim, data: vec![0.0; dim * dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[(a * self.dim + b) * self.dim + c]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, v: f64) {
        let d = self.dim;
        self.data[(a * d + b) * d + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Writes `M^a_c = Σ_b Γ^a_{bc} dx^b` column-major into `out` (d×d).
    #[inline]
    pub fn contract_into(&self, dx: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for a in 0..d {
            for c in 0..d {
                let mut s = 0.0;
                for b in 0..d {
                    s += self.data[(a * d + b) * d + c] * dx[b];
                }
                out[a + d * c] = s;
            }
        }
    }
}

/// A `d`-dimensional Riemannian manifold given by one chart.
pub trait Manifold: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn name(&self) -> String;

    fn in_domain(&self, x: &[f64]) -> bool;

    /// Metric at `x`, column-major into `out`; no domain check.
    fn metric_into(&self, x: &[f64], out: &mut [f64]);

    /// Christoffel symbols at `x`; no domain check. Defaults to central
    /// differences of the metric.
    fn christoffel_into(&self, x: &[f64], out: &mut Christoffel) {
        christoffel_finite_difference(self, x, CHRISTOFFEL_FD_STEP, out);
    }

    /// Embedding into 3-space, for surfaces.
    fn embed(&self, _x: &[f64]) -> Option<[f64; 3]> {
        None
    }

    /// Riemannian exponential in chart coordinates.
    fn exp(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        geodesic_exp(self, x, v, geodesic::DEFAULT_GEODESIC_STEPS)
    }

    /// Riemannian logarithm in chart coordinates.
    fn log(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        geodesic_log(self, x, y)
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: x.len() });
        }
        if self.in_domain(x) {
            Ok(())
        } else {
            Err(Error::Domain { chart: self.name(), point: x.to_vec() })
        }
    }

    fn metric(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check(x.as_slice())?;
        let d = self.dim();
        let mut out = DMatrix::zeros(d, d);
        self.metric_into(x.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    fn christoffel(&self, x: &DVector<f64>) -> Result<Christoffel> {
        self.check(x.as_slice())?;
        let mut out = Christoffel::zeros(self.dim());
        self.christoffel_into(x.as_slice(), &mut out);
        Ok(out)
    }

    /// Density of the Riemannian volume with respect to chart Lebesgue measure.
    fn volume_density(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.metric(x)?.determinant().sqrt())
    }
}

/// Levi-Civita symbols from central differences of the metric.
pub fn christoffel_finite_difference<M: Manifold + ?Sized>(
    chart: &M,
    x: &[f64],
    step: f64,
    out: &mut Christoffel,
) {
    let d = chart.dim();
    // dg[c] = ∂_c G, column-major d×d
    let mut dg = vec![0.0; d * d * d];
    let mut xp = x.to_vec();
    let mut gp = vec![0.0; d * d];
    let mut gm = vec![0.0; d * d];
    for c in 0..d {
        xp[c] = x[c] + step;
        chart.metric_into(&xp, &mut gp);
        xp[c] = x[c] - step;
        chart.metric_into(&xp, &mut gm);
        xp[c] = x[c];
        for i in 0..d {
            for j in 0..d {
                let v = 0.5 * ((gp[i + d * j] - gm[i + d * j]) + (gp[j + d * i] - gm[j + d * i])) / (2.0 * step);
                dg[c * d * d + i + d * j] = v;
            }
        }
    }
    let mut g = DMatrix::zeros(d, d);
    chart.metric_into(x, g.as_mut_slice());
    let ginv = g.try_inverse().unwrap_or_else(|| DMatrix::from_element(d, d, f64::NAN));
    let dgc = |c: usize, i: usize, j: usize| dg[c * d * d + i + d * j];
    for a in 0..d {
        for b in 0..d {
            for c in b..d {
                let mut s = 0.0;
                for e in 0..d {
                    s += ginv[(a, e)] * (dgc(b, e, c) + dgc(c, e, b) - dgc(e, b, c));
                }
                out.set(a, b, c, 0.5 * s);
                out.set(a, c, b, 0.5 * s);
            }
        }
    }
}

/// g-orthonormal frame obtained from the chart basis at `x`.
pub fn orthonormal_frame(chart: &dyn Manifold, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    let g = chart.metric(x)?;
    crate::linalg::gram_schmidt(&g, &DMatrix::identity(chart.dim(), chart.dim()))
}

/// Numeric Jacobian of the embedding (3×d), central differences.
pub fn embedding_jacobian(chart: &dyn Manifold, x: &[f64], step: f64) -> Option<DMatrix<f64>> {
    let d = chart.dim();
    let mut jac = DMatrix::zeros(3, d);
    let mut xp = x.to_vec();
    for c in 0..d {
        xp[c] = x[c] + step;
        let fp = chart.embed(&xp)?;
        xp[c] = x[c] - step;
        let fm = chart.embed(&xp)?;
        xp[c] = x[c];
        for r in 0..3 {
            jac[(r, c)] = (fp[r] - fm[r]) / (2.0 * step);
        }
    }
    Some(jac)
}

#[cfg(test)]
mod tests;
