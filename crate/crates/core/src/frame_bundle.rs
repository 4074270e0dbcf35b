//! Frame-bundle coordinates, horizontal fields and development.
//!
//! A frame point `u = (x, ν)` is a chart point with a `d×k` matrix whose
//! columns are tangent vectors at `x`. The chart induces the trivialization,
//! so horizontal motion reads `ẋ = ν e_i`, `ν̇^a_j = −Γ^a_{bc} ẋ^b ν^c_j`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{orthonormal_frame, Christoffel, Manifold};
use crate::linalg;
use crate::prelude::*;

/// Default number of Heun steps for deterministic transport and development.
pub const DEFAULT_TRANSPORT_STEPS: usize = 1000;

/// A point of the (rank-`k`) frame bundle in chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePoint {
    pub x: DVector<f64>,
    pub nu: DMatrix<f64>,
}

/// A tangent vector to the frame bundle: base and frame components.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTangent {
    pub dx: DVector<f64>,
    pub dnu: DMatrix<f64>,
}

impl FrameTangent {
    pub fn norm(&self) -> f64 {
        (self.dx.norm_squared() + self.dnu.norm_squared()).sqrt()
    }
}

impl FramePoint {
    /// Validates dimensions, domain and full column rank.
    pub fn new(chart: &dyn Manifold, x: DVector<f64>, nu: DMatrix<f64>) -> Result<Self> {
        chart.check(x.as_slice())?;
        if nu.nrows() != chart.dim() {
            return Err(Error::Dimension { expected: chart.dim(), got: nu.nrows() });
        }
        if nu.ncols() > chart.dim() {
            return Err(Error::InvalidParams(format!("frame rank {} exceeds dimension {}", nu.ncols(), chart.dim())));
        }
        if nu.ncols() > 0 {
            let gram = nu.transpose() * &nu;
            if gram.determinant().abs() < 1e-300 || nu.rank(1e-12 * nu.norm().max(1.0)) < nu.ncols() {
                return Err(Error::RankDeficient);
            }
        }
        Ok(FramePoint { x, nu })
    }

    /// The g-orthonormal frame obtained by Gram–Schmidt on the chart basis.
    pub fn orthonormal(chart: &dyn Manifold, x: DVector<f64>) -> Result<Self> {
        let nu = orthonormal_frame(chart, &x)?;
        Ok(FramePoint { x, nu })
    }

    pub fn rank(&self) -> usize {
        self.nu.ncols()
    }

    /// Gram matrix `νᵀ G(x) ν`.
    pub fn gram(&self, chart: &dyn Manifold) -> Result<DMatrix<f64>> {
        let g = chart.metric(&self.x)?;
        Ok(self.nu.transpose() * g * &self.nu)
    }
}

/// `M^a_c = Σ_b Γ^a_{bc} dx^b`, column-major `d×d`.
#[inline(always)]
pub(crate) fn contract(d: usize, gamma: &[f64], dx: &[f64], out: &mut [f64]) {
    let gamma = &gamma[..d * d * d];
    let dx = &dx[..d];
    let out = &mut out[..d * d];
    for a in 0..d {
        for c in 0..d {
            let mut s = 0.0;
            for b in 0..d {
                s += gamma[(a * d + b) * d + c] * dx[b];
            }
            out[a + d * c] = s;
        }
    }
}

/// `out = −M F` for a `d×cols` frame.
#[inline(always)]
fn apply_neg(d: usize, cols: usize, m: &[f64], frame: &[f64], out: &mut [f64]) {
    let m = &m[..d * d];
    let frame = &frame[..d * cols];
    let out = &mut out[..d * cols];
    for j in 0..cols {
        for a in 0..d {
            let mut s = 0.0;
            for c in 0..d {
                s += m[a + d * c] * frame[c + d * j];
            }
            out[a + d * j] = -s;
        }
    }
}

/// Rate of change of a frame when the base moves by `dx`: `−Γ(dx, ·)F`.
/// `m` receives the contraction `Γ·dx` (d×d), `out` the rate (d×cols).
#[inline(always)]
pub(crate) fn transport_rate(d: usize, gamma: &Christoffel, dx: &[f64], frame: &[f64], m: &mut [f64], out: &mut [f64]) {
    contract(d, gamma.as_slice(), dx, m);
    let cols = if d == 0 { 0 } else { frame.len() / d };
    apply_neg(d, cols, m, frame, out);
}

/// Scratch buffers for Heun development of a base point carrying several frames.
///
/// Each frame `F_f` is driven by its own increment vector `drive_f`; the base
/// increment is `Σ_f F_f drive_f` and every frame is parallel transported.
#[derive(Debug, Clone)]
pub(crate) struct Developer {
    d: usize,
    gamma: Christoffel,
    m: Vec<f64>,
    dx0: Vec<f64>,
    dx1: Vec<f64>,
    xs: Vec<f64>,
    pred: Vec<Vec<f64>>,
    rate0: Vec<Vec<f64>>,
    rate1: Vec<f64>,
}

impl Developer {
    pub(crate) fn new(d: usize, frame_cols: &[usize]) -> Self {
        Developer {
            d,
            gamma: Christoffel::zeros(d),
            m: vec![0.0; d * d],
            dx0: vec![0.0; d],
            dx1: vec![0.0; d],
            xs: vec![0.0; d],
            pred: frame_cols.iter().map(|c| vec![0.0; d * c]).collect(),
            rate0: frame_cols.iter().map(|c| vec![0.0; d * c]).collect(),
            rate1: vec![0.0; d * frame_cols.iter().copied().max().unwrap_or(0)],
        }
    }

    fn push(d: usize, frame: &[f64], drive: &[f64], out: &mut [f64]) {
        for (j, &z) in drive.iter().enumerate() {
            if z != 0.0 {
                for a in 0..d {
                    out[a] += frame[a + d * j] * z;
                }
            }
        }
    }

    /// One Heun step. Returns `false` if an intermediate or final base point
    /// leaves the chart domain (state is then unspecified).
    pub(crate) fn step(
        &mut self,
        chart: &dyn Manifold,
        x: &mut [f64],
        frames: &mut [&mut [f64]],
        drives: &[&[f64]],
    ) -> bool {
        let d = self.d;
        self.dx0.iter_mut().for_each(|v| *v = 0.0);
        for (f, drive) in frames.iter().zip(drives) {
            Self::push(d, f, drive, &mut self.dx0);
        }
        chart.christoffel_into(x, &mut self.gamma);
        for (fi, f) in frames.iter().enumerate() {
            let n = f.len();
            transport_rate(d, &self.gamma, &self.dx0, f, &mut self.m, &mut self.rate0[fi][..n]);
            for i in 0..n {
                self.pred[fi][i] = f[i] + self.rate0[fi][i];
            }
        }
        for a in 0..d {
            self.xs[a] = x[a] + self.dx0[a];
        }
        if !chart.in_domain(&self.xs) {
            return false;
        }
        self.dx1.iter_mut().for_each(|v| *v = 0.0);
        for (fi, drive) in drives.iter().enumerate() {
            let n = frames[fi].len();
            Self::push(d, &self.pred[fi][..n], drive, &mut self.dx1);
        }
        chart.christoffel_into(&self.xs, &mut self.gamma);
        for (fi, f) in frames.iter_mut().enumerate() {
            let n = f.len();
            transport_rate(d, &self.gamma, &self.dx1, &self.pred[fi][..n], &mut self.m, &mut self.rate1[..n]);
            for i in 0..n {
                f[i] += 0.5 * (self.rate0[fi][i] + self.rate1[i]);
            }
        }
        for a in 0..d {
            x[a] += 0.5 * (self.dx0[a] + self.dx1[a]);
        }
        chart.in_domain(x)
    }
}

/// Two Newton–Schulz steps pulling a nearly g-orthonormal `d×d` frame back
/// onto `FᵀGF = I`: `F ← F (3I − FᵀGF)/2`. `g` is the metric at the base
/// point; `s` and `tmp` are `d×d` scratch.
#[inline(always)]
pub(crate) fn reorthonormalize(d: usize, g: &[f64], frame: &mut [f64], s: &mut [f64], tmp: &mut [f64]) {
    for _ in 0..2 {
        newton_schulz(d, g, frame, s, tmp);
    }
}

#[inline(always)]
fn newton_schulz(d: usize, g: &[f64], frame: &mut [f64], s: &mut [f64], tmp: &mut [f64]) {
    let g = &g[..d * d];
    let frame = &mut frame[..d * d];
    let s = &mut s[..d * d];
    let tmp = &mut tmp[..d * d];
    // tmp = G F
    for j in 0..d {
        for a in 0..d {
            let mut acc = 0.0;
            for b in 0..d {
                acc += g[a + d * b] * frame[b + d * j];
            }
            tmp[a + d * j] = acc;
        }
    }
    for i in 0..d {
        for j in 0..d {
            let mut acc = 0.0;
            for a in 0..d {
                acc += frame[a + d * i] * tmp[a + d * j];
            }
            s[i + d * j] = if i == j { 1.5 - 0.5 * acc } else { -0.5 * acc };
        }
    }
    for j in 0..d {
        for a in 0..d {
            let mut acc = 0.0;
            for i in 0..d {
                acc += frame[a + d * i] * s[i + d * j];
            }
            tmp[a + d * j] = acc;
        }
    }
    frame.copy_from_slice(tmp);
}

/// Heun transport of a frame along a prescribed base increment `x0 → x0+dx`.
/// `gamma0`/`gamma1` are the symbols at the two endpoints.
#[allow(clippy::too_many_arguments)]
#[inline(always)]
pub(crate) fn heun_transport_along(
    d: usize,
    gamma0: &Christoffel,
    gamma1: &Christoffel,
    dx: &[f64],
    frame: &mut [f64],
    m: &mut [f64],
    rate0: &mut [f64],
    pred: &mut [f64],
) {
    let cols = if d == 0 { 0 } else { frame.len() / d };
    let n = d * cols;
    let frame = &mut frame[..n];
    let rate0 = &mut rate0[..n];
    let pred = &mut pred[..n];
    contract(d, gamma0.as_slice(), dx, m);
    apply_neg(d, cols, m, frame, rate0);
    for i in 0..n {
        pred[i] = frame[i] + rate0[i];
    }
    contract(d, gamma1.as_slice(), dx, m);
    let m = &m[..d * d];
    for j in 0..cols {
        for a in 0..d {
            let mut s = 0.0;
            for c in 0..d {
                s += m[a + d * c] * pred[c + d * j];
            }
            frame[a + d * j] += 0.5 * (rate0[a + d * j] - s);
        }
    }
}

/// The horizontal vector fields `H_1..H_k` at `u`.
pub fn horizontal_basis(chart: &dyn Manifold, u: &FramePoint) -> Result<Vec<FrameTangent>> {
    let gamma = chart.christoffel(&u.x)?;
    Ok((0..u.rank()).map(|i| horizontal_field(&gamma, u, i)).collect())
}

fn horizontal_field(gamma: &Christoffel, u: &FramePoint, i: usize) -> FrameTangent {
    let d = u.x.len();
    let dx = u.nu.column(i).into_owned();
    let mut dnu = DMatrix::zeros(d, u.rank());
    let mut m = vec![0.0; d * d];
    transport_rate(gamma.dim(), gamma, dx.as_slice(), u.nu.as_slice(), &mut m, dnu.as_mut_slice());
    FrameTangent { dx, dnu }
}

/// Parallel transport of `nu0` along a discretized base path (Heun per segment).
pub fn parallel_transport(chart: &dyn Manifold, base_path: &[DVector<f64>], nu0: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = chart.dim();
    if nu0.nrows() != d {
        return Err(Error::Dimension { expected: d, got: nu0.nrows() });
    }
    let Some(first) = base_path.first() else {
        return Ok(nu0.clone());
    };
    chart.check(first.as_slice())?;
    let mut frame = nu0.as_slice().to_vec();
    let n = frame.len();
    let (mut g0, mut g1) = (Christoffel::zeros(d), Christoffel::zeros(d));
    chart.christoffel_into(first.as_slice(), &mut g0);
    let mut m = vec![0.0; d * d];
    let mut rate0 = vec![0.0; n];
    let mut pred = vec![0.0; n];
    let mut dx = vec![0.0; d];
    for w in base_path.windows(2) {
        chart.check(w[1].as_slice())?;
        chart.christoffel_into(w[1].as_slice(), &mut g1);
        for a in 0..d {
            dx[a] = w[1][a] - w[0][a];
        }
        heun_transport_along(d, &g0, &g1, &dx, &mut frame, &mut m, &mut rate0, &mut pred);
        core::mem::swap(&mut g0, &mut g1);
    }
    Ok(DMatrix::from_vec(d, nu0.ncols(), frame))
}

/// Deterministic development of a latent path starting at 0.
pub fn develop(chart: &dyn Manifold, u0: &FramePoint, latent_path: &[DVector<f64>]) -> Result<Vec<FramePoint>> {
    let k = u0.rank();
    if let Some(z0) = latent_path.first() {
        if z0.len() != k {
            return Err(Error::Dimension { expected: k, got: z0.len() });
        }
        if z0.iter().any(|v| *v != 0.0) {
            return Err(Error::InvalidParams("latent path must start at 0".into()));
        }
    }
    chart.check(u0.x.as_slice())?;
    let d = chart.dim();
    let mut dev = Developer::new(d, &[k]);
    let mut x = u0.x.as_slice().to_vec();
    let mut nu = u0.nu.as_slice().to_vec();
    let mut out = Vec::with_capacity(latent_path.len());
    out.push(u0.clone());
    let mut dz = vec![0.0; k];
    for (step, w) in latent_path.windows(2).enumerate() {
        for i in 0..k {
            dz[i] = w[1][i] - w[0][i];
        }
        if !dev.step(chart, &mut x, &mut [&mut nu], &[&dz]) {
            let _ = step;
            return Err(Error::Domain { chart: chart.name(), point: x.clone() });
        }
        out.push(FramePoint { x: DVector::from_column_slice(&x), nu: DMatrix::from_column_slice(d, k, &nu) });
    }
    Ok(out)
}

/// Inverse of [`develop`]: recovers the latent path driving a base path.
///
/// Each step solves for the latent increment whose Heun step lands on the
/// next base point, attributing base increments with the metric
/// pseudo-inverse of the effective frame (exact when `k = d`).
pub fn anti_develop(chart: &dyn Manifold, u0: &FramePoint, base_path: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let d = chart.dim();
    let k = u0.rank();
    let mut out = vec![DVector::zeros(k)];
    let mut u = u0.clone();
    let mut dev = Developer::new(d, &[k]);
    let mut m = vec![0.0; d * d];
    let mut rate = vec![0.0; d * k];
    for w in base_path.windows(2) {
        let g = chart.metric(&u.x)?;
        let gamma = chart.christoffel(&u.x)?;
        let dx = &w[1] - &w[0];
        let mut dz = linalg::metric_pinv(&u.nu, &g)? * &dx;
        for _ in 0..100 {
            // Heun base increment is (ν − ½Γ(νΔz)ν)Δz
            let push = &u.nu * &dz;
            transport_rate(gamma.dim(), &gamma, push.as_slice(), u.nu.as_slice(), &mut m, &mut rate);
            let eff = &u.nu + DMatrix::from_column_slice(d, k, &rate) * 0.5;
            let next = linalg::metric_pinv(&eff, &g)? * &dx;
            let change = (&next - &dz).norm();
            dz = next;
            if change <= 1e-16 * (1.0 + dz.norm()) {
                break;
            }
        }
        let mut x = u.x.as_slice().to_vec();
        let mut nu = u.nu.as_slice().to_vec();
        if !dev.step(chart, &mut x, &mut [&mut nu], &[dz.as_slice()]) {
            return Err(Error::Domain { chart: chart.name(), point: x });
        }
        let last = out.last().expect("non-empty");
        out.push(last + &dz);
        u = FramePoint { x: w[1].clone(), nu: DMatrix::from_column_slice(d, k, &nu) };
    }
    Ok(out)
}

/// Sub-Riemannian inner product `(u⁻¹v)ᵀ(u⁻¹w)` on `T_xM`.
pub fn sub_inner(u: &FramePoint, v: &DVector<f64>, w: &DVector<f64>) -> Result<f64> {
    if u.nu.nrows() != u.nu.ncols() {
        return Err(Error::RankDeficient);
    }
    let lu = u.nu.clone().lu();
    if lu.determinant() == 0.0 {
        return Err(Error::RankDeficient);
    }
    let a = lu.solve(v).ok_or(Error::RankDeficient)?;
    let b = lu.solve(w).ok_or(Error::RankDeficient)?;
    Ok(a.dot(&b))
}

/// g-volume `sqrt(det(νᵀGν))` of a full frame.
pub fn frame_volume(chart: &dyn Manifold, u: &FramePoint) -> Result<f64> {
    if u.rank() != chart.dim() {
        return Err(Error::InvalidParams(format!("frame volume needs a full frame, rank {} < {}", u.rank(), chart.dim())));
    }
    Ok(u.gram(chart)?.determinant().max(0.0).sqrt())
}

/// Finite-difference step for [`horizontal_bracket`].
pub const BRACKET_STEP: f64 = 1e-5;

/// Lie bracket `[H_i, H_j]` at `u`, from central differences of the fields.
pub fn horizontal_bracket(chart: &dyn Manifold, u: &FramePoint, i: usize, j: usize) -> Result<FrameTangent> {
    let k = u.rank();
    if i >= k || j >= k {
        return Err(Error::InvalidParams(format!("field index out of range for rank {k}")));
    }
    chart.check(u.x.as_slice())?;
    let field = |p: &FramePoint, idx: usize| -> Result<FrameTangent> {
        chart.check(p.x.as_slice())?;
        let gamma = chart.christoffel(&p.x)?;
        Ok(horizontal_field(&gamma, p, idx))
    };
    let shifted = |t: &FrameTangent, eps: f64| FramePoint { x: &u.x + &t.dx * eps, nu: &u.nu + &t.dnu * eps };
    let directional = |along: &FrameTangent, of: usize| -> Result<FrameTangent> {
        let h = BRACKET_STEP;
        let p = field(&shifted(along, h), of)?;
        let m = field(&shifted(along, -h), of)?;
        Ok(FrameTangent { dx: (p.dx - m.dx) / (2.0 * h), dnu: (p.dnu - m.dnu) / (2.0 * h) })
    };
    let hi = field(u, i)?;
    let hj = field(u, j)?;
    let dj_hi = directional(&hi, j)?;
    let di_hj = directional(&hj, i)?;
    Ok(FrameTangent { dx: dj_hi.dx - di_hj.dx, dnu: dj_hi.dnu - di_hj.dnu })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sphere::{sphere_exp, stereo_chart};
    use crate::geometry::Surface;
    use approx::assert_relative_eq;
    use core::f64::consts::{FRAC_PI_3, FRAC_PI_6, FRAC_PI_2, PI};
    use nalgebra::Vector3;

    fn latitude_circle(colatitude: f64, steps: usize) -> Vec<DVector<f64>> {
        let r = (colatitude / 2.0).tan();
        (0..=steps)
            .map(|s| {
                let t = 2.0 * PI * s as f64 / steps as f64;
                DVector::from_row_slice(&[r * t.cos(), r * t.sin()])
            })
            .collect()
    }

    /// Holonomy angle of an orthonormal frame after transport around a closed loop.
    pub(crate) fn holonomy_angle(colatitude: f64, steps: usize) -> f64 {
        let s = Surface::Sphere;
        let path = latitude_circle(colatitude, steps);
        let u = FramePoint::orthonormal(&s, path[0].clone()).unwrap();
        let end = parallel_transport(&s, &path, &u.nu).unwrap();
        let g = s.metric(&path[0]).unwrap();
        let e1 = u.nu.column(0);
        let e2 = u.nu.column(1);
        let t = end.column(0);
        let c = (e1.transpose() * &g * t)[0];
        let sn = (e2.transpose() * &g * t)[0];
        sn.atan2(c)
    }

    fn angle_diff(a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(2.0 * PI);
        d.min(2.0 * PI - d)
    }

    #[test]
    fn flat_horizontal_basis_is_frame() {
        let s = Surface::flat(2);
        let u = FramePoint::new(&s, DVector::from_row_slice(&[0.3, 1.0]), DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.5, -1.0])).unwrap();
        let h = horizontal_basis(&s, &u).unwrap();
        for (i, hi) in h.iter().enumerate() {
            assert_eq!(hi.dx, u.nu.column(i).into_owned());
            assert_eq!(hi.dnu.norm(), 0.0);
        }
    }

    #[test]
    fn sphere_origin_horizontal_basis_has_no_frame_component() {
        let s = Surface::Sphere;
        let u = FramePoint::orthonormal(&s, DVector::zeros(2)).unwrap();
        for (i, hi) in horizontal_basis(&s, &u).unwrap().iter().enumerate() {
            assert_eq!(hi.dnu.norm(), 0.0);
            assert_eq!(hi.dx, u.nu.column(i).into_owned());
        }
    }

    #[test]
    fn base_projection_of_horizontal_field_is_bitwise_column() {
        let s = Surface::ellipsoid(1.0, 0.7, 1.3).unwrap();
        let u = FramePoint::new(&s, DVector::from_row_slice(&[0.4, -0.2]), DMatrix::from_row_slice(2, 2, &[0.3, 0.1, -0.2, 0.5])).unwrap();
        for (i, hi) in horizontal_basis(&s, &u).unwrap().iter().enumerate() {
            for a in 0..2 {
                assert_eq!(hi.dx[a].to_bits(), u.nu[(a, i)].to_bits());
            }
        }
    }

    #[test]
    fn horizontal_flow_agrees_with_transport_to_second_order() {
        let s = Surface::Sphere;
        let u = FramePoint::orthonormal(&s, DVector::from_row_slice(&[0.5, -0.3])).unwrap();
        let errs: Vec<f64> = [1e-2, 5e-3]
            .iter()
            .map(|&h| {
                let h1 = &horizontal_basis(&s, &u).unwrap()[0];
                let euler = &u.nu + &h1.dnu * h;
                let path = vec![u.x.clone(), &u.x + &h1.dx * h];
                let transported = parallel_transport(&s, &path, &u.nu).unwrap();
                (euler - transported).norm()
            })
            .collect();
        assert!(errs[0] < 1e-3);
        // O(h²): halving h divides the error by about four
        assert!(errs[1] < errs[0] / 3.0, "{errs:?}");
    }

    #[test]
    fn flat_transport_is_identity() {
        let s = Surface::flat(3);
        let path: Vec<_> = (0..20).map(|i| DVector::from_row_slice(&[i as f64, (i as f64).sin(), 0.1])).collect();
        let nu0 = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.2, 1.0, 0.0, 3.0]);
        assert_eq!(parallel_transport(&s, &path, &nu0).unwrap(), nu0);
    }

    #[test]
    fn holonomy_of_spherical_caps() {
        for theta in [FRAC_PI_6, FRAC_PI_3, FRAC_PI_2] {
            let expected = 2.0 * PI * (1.0 - theta.cos());
            let got = holonomy_angle(theta, 10_000);
            let err = angle_diff(got, expected).min(angle_diff(got, -expected));
            assert!(err < 1e-3, "theta {theta}: got {got}, expected ±{expected}");
        }
    }

    #[test]
    fn transport_preserves_gram_matrix() {
        let s = Surface::Sphere;
        let path: Vec<_> = (0..=1000)
            .map(|i| {
                let t = i as f64 / 1000.0;
                DVector::from_row_slice(&[0.8 * t - 0.2, (3.0 * t).sin() * 0.7])
            })
            .collect();
        let nu0 = DMatrix::from_row_slice(2, 2, &[0.4, 0.1, -0.2, 0.3]);
        let g0 = s.metric(&path[0]).unwrap();
        let g1 = s.metric(path.last().unwrap()).unwrap();
        let end = parallel_transport(&s, &path, &nu0).unwrap();
        let before = nu0.transpose() * g0 * &nu0;
        let after = end.transpose() * g1 * &end;
        assert!((before - after).norm() < 1e-6);
    }

    #[test]
    fn transport_out_of_domain_errors() {
        let s = Surface::Sphere;
        let path = vec![DVector::zeros(2), DVector::from_row_slice(&[5e3, 0.0])];
        assert!(matches!(parallel_transport(&s, &path, &DMatrix::identity(2, 2)), Err(Error::Domain { .. })));
    }

    #[test]
    fn flat_development_is_identity() {
        let s = Surface::flat(2);
        let u0 = FramePoint::new(&s, DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let path: Vec<_> = (0..50).map(|i| DVector::from_row_slice(&[0.1 * i as f64, (i as f64 * 0.3).cos() - 1.0])).collect();
        let dev = develop(&s, &u0, &path).unwrap();
        for (p, u) in path.iter().zip(&dev) {
            assert_eq!(&u.x, p);
        }
    }

    #[test]
    fn constant_latent_path_stays_put() {
        let s = Surface::Sphere;
        let u0 = FramePoint::orthonormal(&s, DVector::from_row_slice(&[0.2, 0.1])).unwrap();
        let dev = develop(&s, &u0, &vec![DVector::zeros(2); 10]).unwrap();
        assert!(dev.iter().all(|u| *u == u0));
    }

    #[test]
    fn sphere_straight_line_develops_to_exponential() {
        let s = Surface::Sphere;
        let u0 = FramePoint::orthonormal(&s, DVector::zeros(2)).unwrap();
        let dir = [0.6, 0.8];
        let len = 2.5;
        let steps = 10_000;
        let path: Vec<_> = (0..=steps)
            .map(|i| DVector::from_row_slice(&[dir[0] * len * i as f64 / steps as f64, dir[1] * len * i as f64 / steps as f64]))
            .collect();
        let end = develop(&s, &u0, &path).unwrap().pop().unwrap();
        // tangent vector ν·z at the north pole, in ambient coordinates
        let v_chart = &u0.nu * DVector::from_row_slice(&[dir[0] * len, dir[1] * len]);
        let v = crate::geometry::sphere::tangent_to_ambient(&[0.0, 0.0], v_chart.as_slice());
        let target = sphere_exp(&Vector3::new(0.0, 0.0, 1.0), &v);
        let q = stereo_chart(&target).unwrap();
        let dist = ((end.x[0] - q[0]).powi(2) + (end.x[1] - q[1]).powi(2)).sqrt();
        assert!(dist < 1e-4, "distance {dist}");
    }

    #[test]
    fn anti_development_inverts_development() {
        for (s, k) in [(Surface::Sphere, 2usize), (Surface::ellipsoid(1.0, 0.6, 1.5).unwrap(), 2), (Surface::flat(3), 2)] {
            let d = s.dim();
            let x0 = DVector::from_element(d, 0.1);
            let nu = DMatrix::from_fn(d, k, |a, j| if a == j { 0.5 } else { 0.1 * (a + j) as f64 });
            let u0 = FramePoint::new(&s, x0, nu).unwrap();
            let steps = 1000;
            let path: Vec<_> = (0..=steps)
                .map(|i| {
                    let t = i as f64 / steps as f64;
                    DVector::from_fn(k, |j, _| (1.0 + j as f64) * ((3.0 * t + j as f64).sin() - (j as f64).sin()))
                })
                .collect();
            let dev = develop(&s, &u0, &path).unwrap();
            let base: Vec<_> = dev.iter().map(|u| u.x.clone()).collect();
            let back = anti_develop(&s, &u0, &base).unwrap();
            let err = back.iter().zip(&path).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err < 1e-8, "{}: {err}", s.name());
        }
    }

    #[test]
    fn sub_inner_examples() {
        let s = Surface::flat(2);
        let e1 = DVector::from_row_slice(&[1.0, 0.0]);
        let id = FramePoint::new(&s, DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        assert_eq!(sub_inner(&id, &e1, &e1).unwrap(), 1.0);
        let scaled = FramePoint::new(&s, DVector::zeros(2), DMatrix::from_diagonal(&DVector::from_row_slice(&[2.0, 1.0]))).unwrap();
        assert_eq!(sub_inner(&scaled, &e1, &e1).unwrap(), 0.25);
    }

    #[test]
    fn sub_inner_rejects_singular_frame() {
        let u = FramePoint { x: DVector::zeros(2), nu: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]) };
        assert!(sub_inner(&u, &DVector::zeros(2), &DVector::zeros(2)).is_err());
        let thin = FramePoint { x: DVector::zeros(2), nu: DMatrix::from_row_slice(2, 1, &[1.0, 0.0]) };
        assert!(matches!(sub_inner(&thin, &DVector::zeros(2), &DVector::zeros(2)), Err(Error::RankDeficient)));
    }

    #[test]
    fn frame_volume_examples() {
        let flat = Surface::flat(2);
        let u = FramePoint::new(&flat, DVector::zeros(2), DMatrix::from_diagonal(&DVector::from_row_slice(&[2.0, 3.0]))).unwrap();
        assert_relative_eq!(frame_volume(&flat, &u).unwrap(), 6.0, epsilon = 1e-14);
        let s = Surface::Sphere;
        let r = FramePoint::orthonormal(&s, DVector::from_row_slice(&[0.7, -0.4])).unwrap();
        assert_relative_eq!(frame_volume(&s, &r).unwrap(), 1.0, epsilon = 1e-12);
        let scaled = FramePoint { x: r.x.clone(), nu: &r.nu * 1.7 };
        assert_relative_eq!(frame_volume(&s, &scaled).unwrap(), 1.7f64.powi(2), epsilon = 1e-12);
        let thin = FramePoint { x: r.x.clone(), nu: r.nu.columns(0, 1).into_owned() };
        assert!(frame_volume(&s, &thin).is_err());
    }

    #[test]
    fn bracket_vanishes_on_flat_space() {
        let s = Surface::flat(2);
        let u = FramePoint::new(&s, DVector::from_row_slice(&[0.2, 0.4]), DMatrix::from_row_slice(2, 2, &[1.0, 0.3, -0.2, 0.8])).unwrap();
        assert!(horizontal_bracket(&s, &u, 0, 1).unwrap().norm() < 1e-6);
    }

    #[test]
    fn sphere_bracket_is_vertical_and_antisymmetric() {
        let s = Surface::Sphere;
        let u = FramePoint::orthonormal(&s, DVector::from_row_slice(&[0.3, -0.1])).unwrap();
        let b = horizontal_bracket(&s, &u, 0, 1).unwrap();
        assert!(b.dx.norm() < 1e-8, "base component {}", b.dx.norm());
        assert!(b.dnu.norm() > 0.1, "vertical component {}", b.dnu.norm());
        let r = horizontal_bracket(&s, &u, 1, 0).unwrap();
        assert!((b.dx.clone() + r.dx).norm() < 1e-8);
        assert!((b.dnu.clone() + r.dnu).norm() < 1e-8);
    }

    #[test]
    fn frame_point_validation() {
        let s = Surface::Sphere;
        assert!(matches!(
            FramePoint::new(&s, DVector::zeros(2), DMatrix::zeros(2, 1)),
            Err(Error::RankDeficient)
        ));
        assert!(FramePoint::new(&s, DVector::zeros(2), DMatrix::zeros(3, 1)).is_err());
    }
}
