//! Analytic maps for the unit sphere and its stereographic chart.
//!
//! The chart projects from the south pole: `F(q) = (2q₁, 2q₂, 1−‖q‖²)/(1+‖q‖²)`,
//! so the chart origin is the north pole `(0, 0, 1)`.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::prelude::*;

/// Great-circle exponential at a unit vector `p`.
pub fn sphere_exp(p: &Vector3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
    let theta = v.norm();
    if theta == 0.0 {
        return *p;
    }
    let q = p * theta.cos() + v * (theta.sin() / theta);
    q / q.norm()
}

/// Inverse of [`sphere_exp`]; fails at the antipode.
pub fn sphere_log(p: &Vector3<f64>, q: &Vector3<f64>) -> Result<Vector3<f64>> {
    let c = p.dot(q);
    let w = q - p * c;
    let s = w.norm();
    if s < 1e-12 {
        if c > 0.0 {
            return Ok(Vector3::zeros());
        }
        return Err(Error::CutLocus(format!("antipodal points {:?} and {:?}", p.as_slice(), q.as_slice())));
    }
    let theta = s.atan2(c);
    Ok(w * (theta / s))
}

/// Geodesic distance between unit vectors.
pub fn sphere_distance(p: &Vector3<f64>, q: &Vector3<f64>) -> f64 {
    p.cross(q).norm().atan2(p.dot(q))
}

#[inline]
pub fn stereo_embed(q: &[f64]) -> [f64; 3] {
    let r2 = q[0] * q[0] + q[1] * q[1];
    let s = 1.0 + r2;
    [2.0 * q[0] / s, 2.0 * q[1] / s, (1.0 - r2) / s]
}

/// Inverse stereographic map; `None` at the south pole.
pub fn stereo_chart(p: &Vector3<f64>) -> Option<[f64; 2]> {
    let den = 1.0 + p[2];
    if den <= 1e-300 {
        return None;
    }
    Some([p[0] / den, p[1] / den])
}

/// Analytic Jacobian `∂F_r/∂q_b`, indexed `[r][b]`.
pub fn stereo_jacobian(q: &[f64]) -> [[f64; 2]; 3] {
    let s = 1.0 + q[0] * q[0] + q[1] * q[1];
    let s2 = s * s;
    let mut j = [[0.0; 2]; 3];
    for b in 0..2 {
        for i in 0..2 {
            let delta = if i == b { 1.0 } else { 0.0 };
            j[i][b] = 2.0 * delta / s - 4.0 * q[i] * q[b] / s2;
        }
        j[2][b] = -4.0 * q[b] / s2;
    }
    j
}

/// Analytic second derivatives `∂²F_r/∂q_b∂q_c`, indexed `[r][b][c]`.
pub fn stereo_hessian(q: &[f64]) -> [[[f64; 2]; 2]; 3] {
    let s = 1.0 + q[0] * q[0] + q[1] * q[1];
    let s2 = s * s;
    let s3 = s2 * s;
    let dl = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    let mut h = [[[0.0; 2]; 2]; 3];
    for b in 0..2 {
        for c in 0..2 {
            for i in 0..2 {
                h[i][b][c] = -4.0 * dl(i, b) * q[c] / s2 - 4.0 * (dl(i, c) * q[b] + q[i] * dl(b, c)) / s2
                    + 16.0 * q[i] * q[b] * q[c] / s3;
            }
            h[2][b][c] = -4.0 * dl(b, c) / s2 + 16.0 * q[b] * q[c] / s3;
        }
    }
    h
}

/// Pushes chart components through the stereographic Jacobian.
pub fn tangent_to_ambient(q: &[f64], v: &[f64]) -> Vector3<f64> {
    let j = stereo_jacobian(q);
    Vector3::new(
        j[0][0] * v[0] + j[0][1] * v[1],
        j[1][0] * v[0] + j[1][1] * v[1],
        j[2][0] * v[0] + j[2][1] * v[1],
    )
}

/// Chart components of an ambient tangent vector: `G⁻¹Jᵀw`.
pub fn ambient_to_tangent(q: &[f64], w: &Vector3<f64>) -> nalgebra::DVector<f64> {
    let j = stereo_jacobian(q);
    let s = 1.0 + q[0] * q[0] + q[1] * q[1];
    let lam = 4.0 / (s * s);
    let mut out = nalgebra::DVector::zeros(2);
    for b in 0..2 {
        out[b] = (0..3).map(|r| j[r][b] * w[r]).sum::<f64>() / lam;
    }
    out
}
