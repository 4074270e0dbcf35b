use nalgebra::{DVector, Vector3};

use super::sphere::{ambient_to_tangent, sphere_exp, sphere_log, stereo_chart, stereo_embed, stereo_hessian, stereo_jacobian, tangent_to_ambient};
use super::{Christoffel, Manifold};
use crate::error::{Error, Result};
use crate::prelude::*;

/// Chart radius beyond which stereographic points are out of domain.
pub const DEFAULT_CHART_RADIUS: f64 = 1e3;

/// Built-in manifolds with analytic metrics and Christoffel symbols.
#[derive(Debug, Clone, PartialEq)]
pub enum Surface {
    /// Euclidean space of the given dimension, identity chart.
    Flat(usize),
    /// Unit sphere in the stereographic chart from the south pole.
    Sphere,
    /// Ellipsoid `diag(a, b, c)·S²`, sharing the sphere's chart.
    Ellipsoid { a: f64, b: f64, c: f64 },
}

impl Surface {
    pub fn flat(dim: usize) -> Self {
        Surface::Flat(dim)
    }

    pub fn ellipsoid(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && c > 0.0) || !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(Error::InvalidParams(format!("ellipsoid axes must be positive, got ({a}, {b}, {c})")));
        }
        Ok(Surface::Ellipsoid { a, b, c })
    }

    pub fn into_ref(self) -> super::ChartRef {
        Arc::new(self)
    }

    fn axes(&self) -> [f64; 3] {
        match *self {
            Surface::Ellipsoid { a, b, c } => [a, b, c],
            _ => [1.0, 1.0, 1.0],
        }
    }

    /// Jacobian of the embedding, 3×2.
    fn surface_jacobian(&self, q: &[f64]) -> [[f64; 2]; 3] {
        let axes = self.axes();
        let mut j = stereo_jacobian(q);
        for (r, row) in j.iter_mut().enumerate() {
            row[0] *= axes[r];
            row[1] *= axes[r];
        }
        j
    }
}

impl Manifold for Surface {
    fn dim(&self) -> usize {
        match self {
            Surface::Flat(d) => *d,
            _ => 2,
        }
    }

    fn name(&self) -> String {
        match self {
            Surface::Flat(d) => format!("flat{d}"),
            Surface::Sphere => "sphere".to_string(),
            Surface::Ellipsoid { a, b, c } => format!("ellipsoid({a},{b},{c})"),
        }
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() || !x.iter().all(|v| v.is_finite()) {
            return false;
        }
        match self {
            Surface::Flat(_) => true,
            _ => x[0] * x[0] + x[1] * x[1] < DEFAULT_CHART_RADIUS * DEFAULT_CHART_RADIUS,
        }
    }

    fn metric_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Surface::Flat(d) => {
                out.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..*d {
                    out[i + d * i] = 1.0;
                }
            }
            Surface::Sphere => {
                let s = 1.0 + x[0] * x[0] + x[1] * x[1];
                let lam = 4.0 / (s * s);
                out[0] = lam;
                out[1] = 0.0;
                out[2] = 0.0;
                out[3] = lam;
            }
            Surface::Ellipsoid { .. } => {
                let j = self.surface_jacobian(x);
                for b in 0..2 {
                    for c in 0..2 {
                        out[b + 2 * c] = (0..3).map(|r| j[r][b] * j[r][c]).sum();
                    }
                }
            }
        }
    }

    fn christoffel_into(&self, x: &[f64], out: &mut Christoffel) {
        match self {
            Surface::Flat(_) => out.fill(0.0),
            Surface::Sphere => {
                // conformal metric e^{2φ}I with φ = ln 2 − ln(1+‖q‖²)
                let s = 1.0 + x[0] * x[0] + x[1] * x[1];
                let dphi = [-2.0 * x[0] / s, -2.0 * x[1] / s];
                for a in 0..2 {
                    for b in 0..2 {
                        for c in 0..2 {
                            let mut v = 0.0;
                            if a == b {
                                v += dphi[c];
                            }
                            if a == c {
                                v += dphi[b];
                            }
                            if b == c {
                                v -= dphi[a];
                            }
                            out.set(a, b, c, v);
                        }
                    }
                }
            }
            Surface::Ellipsoid { .. } => {
                // Γ^a_{bc} = G^{ad} ⟨∂_d E, ∂_b∂_c E⟩
                let axes = self.axes();
                let j = self.surface_jacobian(x);
                let h = stereo_hessian(x);
                let mut g = [0.0; 4];
                self.metric_into(x, &mut g);
                let det = g[0] * g[3] - g[1] * g[2];
                let ginv = [g[3] / det, -g[1] / det, -g[2] / det, g[0] / det];
                for b in 0..2 {
                    for c in b..2 {
                        let mut proj = [0.0; 2];
                        for (dd, p) in proj.iter_mut().enumerate() {
                            *p = (0..3).map(|r| j[r][dd] * axes[r] * h[r][b][c]).sum();
                        }
                        for a in 0..2 {
                            let v = ginv[a] * proj[0] + ginv[a + 2] * proj[1];
                            out.set(a, b, c, v);
                            out.set(a, c, b, v);
                        }
                    }
                }
            }
        }
    }

    fn embed(&self, x: &[f64]) -> Option<[f64; 3]> {
        match self {
            Surface::Flat(_) => None,
            _ => {
                let axes = self.axes();
                let f = stereo_embed(x);
                Some([axes[0] * f[0], axes[1] * f[1], axes[2] * f[2]])
            }
        }
    }

    fn exp(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            Surface::Flat(_) => {
                self.check(x.as_slice())?;
                let y = x + v;
                self.check(y.as_slice())?;
                Ok(y)
            }
            Surface::Sphere => {
                self.check(x.as_slice())?;
                let p = Vector3::from(stereo_embed(x.as_slice()));
                let w = tangent_to_ambient(x.as_slice(), v.as_slice());
                let q = sphere_exp(&p, &w);
                let y = stereo_chart(&q).ok_or_else(|| Error::Domain { chart: self.name(), point: q.as_slice().to_vec() })?;
                self.check(&y)?;
                Ok(DVector::from_row_slice(&y))
            }
            Surface::Ellipsoid { .. } => super::geodesic_exp(self, x, v, super::geodesic::DEFAULT_GEODESIC_STEPS),
        }
    }

    fn log(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            Surface::Flat(_) => {
                self.check(x.as_slice())?;
                self.check(y.as_slice())?;
                Ok(y - x)
            }
            Surface::Sphere => {
                self.check(x.as_slice())?;
                self.check(y.as_slice())?;
                let p = Vector3::from(stereo_embed(x.as_slice()));
                let q = Vector3::from(stereo_embed(y.as_slice()));
                let w = sphere_log(&p, &q)?;
                Ok(ambient_to_tangent(x.as_slice(), &w))
            }
            Surface::Ellipsoid { .. } => super::geodesic_log(self, x, y),
        }
    }
}

