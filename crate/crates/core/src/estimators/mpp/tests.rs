use super::*;
use crate::geometry::sphere::{sphere_distance, stereo_embed};
use crate::geometry::{orthonormal_frame, Surface};
use nalgebra::Vector3;

fn embed(x: &DVector<f64>) -> Vector3<f64> {
    Vector3::from(stereo_embed(x.as_slice()))
}

/// Angular distance of `p` from the great circle through `a` and `b`.
fn off_circle(a: &Vector3<f64>, b: &Vector3<f64>, p: &Vector3<f64>) -> f64 {
    let n = a.cross(b).normalize();
    n.dot(p).abs().min(1.0).asin()
}

#[test]
fn flat_path_is_straight_with_mahalanobis_distance() {
    let chart = Surface::flat(2);
    let u = FramePoint::new(&chart, DVector::from_row_slice(&[0.3, -0.2]), DMatrix::from_row_slice(2, 2, &[1.2, 0.3, -0.1, 0.7])).unwrap();
    let y = DVector::from_row_slice(&[1.0, 0.5]);
    let r = mpp_shoot(&chart, &u, &y, &MppOptions::default()).unwrap();
    let expect = (u.nu.clone().try_inverse().unwrap() * (&y - &u.x)).norm_squared();
    assert!((r.sq_distance - expect).abs() < 1e-10, "{} vs {expect}", r.sq_distance);
    let n = r.path.len() - 1;
    for (i, s) in r.path.iter().enumerate() {
        let line = &u.x + (&y - &u.x) * (i as f64 / n as f64);
        assert!((&s.frame.x - line).norm() < 1e-10);
    }
    assert!(r.endpoint_residual < 1e-10);
}

#[test]
fn sphere_orthonormal_mpp_is_a_geodesic() {
    let chart = Surface::Sphere;
    for (x0, y) in [([0.0, 0.0], [0.5, 0.2]), ([0.1, -0.2], [-0.3, 0.4])] {
        let x0 = DVector::from_row_slice(&x0);
        let y = DVector::from_row_slice(&y);
        let u = FramePoint::orthonormal(&chart, x0.clone()).unwrap();
        let r = mpp_shoot(&chart, &u, &y, &MppOptions::default()).unwrap();
        let dist = sphere_distance(&embed(&x0), &embed(&y));
        assert!((r.sq_distance - dist * dist).abs() < 1e-4, "{} vs {}", r.sq_distance, dist * dist);
        for s in &r.path {
            assert!(off_circle(&embed(&x0), &embed(&y), &embed(&s.frame.x)) < 1e-4);
        }
    }
}

#[test]
fn anisotropic_mpp_leaves_the_geodesic() {
    let chart = Surface::Sphere;
    let x0 = DVector::from_row_slice(&[0.1, -0.1]);
    let nu = orthonormal_frame(&chart, &x0).unwrap() * DMatrix::from_diagonal(&DVector::from_row_slice(&[2.0, 1.0]));
    let u = FramePoint::new(&chart, x0.clone(), nu).unwrap();
    let y = DVector::from_row_slice(&[0.5, 0.4]);
    let r = mpp_shoot(&chart, &u, &y, &MppOptions::default()).unwrap();
    assert!(r.endpoint_residual < 1e-8);
    let dev = r.path.iter().map(|s| off_circle(&embed(&x0), &embed(&y), &embed(&s.frame.x))).fold(0.0, f64::max);
    assert!(dev > 1e-2, "{dev}");
}

#[test]
fn hamiltonian_is_conserved() {
    let chart = Surface::ellipsoid(1.0, 0.7, 1.3).unwrap();
    let x0 = DVector::from_row_slice(&[0.2, 0.1]);
    let u = FramePoint::new(&chart, x0, DMatrix::from_row_slice(2, 2, &[0.6, 0.1, 0.0, 0.3])).unwrap();
    let p = DVector::from_row_slice(&[0.8, -0.5, 0.1, 0.2, -0.3, 0.05]);
    let opts = MppOptions { steps: 1000, ..MppOptions::default() };
    let path = mpp_flow(&chart, &u, &p, &opts).unwrap();
    let h0 = hamiltonian(&chart, &u, &p).unwrap();
    for s in &path {
        let q = DVector::from_iterator(6, s.xi.iter().chain(s.eta.iter()).copied());
        let h = hamiltonian(&chart, &s.frame, &q).unwrap();
        assert!(((h - h0) / h0).abs() < 1e-6);
    }
}

#[test]
fn hamilton_equations_match_finite_differences() {
    let chart = Surface::Sphere;
    let d = 2;
    let z: Vec<f64> = vec![0.2, -0.1, 0.6, 0.1, -0.2, 0.4, 0.7, -0.3, 0.2, 0.1, -0.4, 0.3];
    let mut w = Work::new(d);
    let mut rhs = vec![0.0; z.len()];
    w.rhs(&chart, &z, &mut rhs, 1e-5);
    let h = 1e-6;
    let np = d + d * d;
    for i in 0..z.len() {
        let mut zp = z.clone();
        zp[i] += h;
        let mut zm = z.clone();
        zm[i] -= h;
        let hp = w.hamiltonian_at(&chart, &zp[..d], &zp);
        let hm = w.hamiltonian_at(&chart, &zm[..d], &zm);
        let dh = (hp - hm) / (2.0 * h);
        // q̇ = ∂H/∂p, ṗ = −∂H/∂q
        let expect = if i < np { -dh } else { dh };
        let j = if i < np { i + np } else { i - np };
        assert!((rhs[j] - expect).abs() < 1e-6, "component {j}: {} vs {expect}", rhs[j]);
    }
}

#[test]
fn distance_gradient_is_minus_twice_initial_momentum() {
    let chart = Surface::Sphere;
    let x0 = DVector::from_row_slice(&[0.1, -0.1]);
    let nu = DMatrix::from_row_slice(2, 2, &[0.8, 0.1, -0.2, 0.4]);
    let y = DVector::from_row_slice(&[0.4, 0.3]);
    let u = FramePoint::new(&chart, x0.clone(), nu.clone()).unwrap();
    let r = mpp_shoot(&chart, &u, &y, &MppOptions::default()).unwrap();
    let q: Vec<f64> = x0.iter().chain(nu.iter()).copied().collect();
    let h = 1e-5;
    for i in 0..q.len() {
        let sq = |delta: f64| {
            let mut qq = q.clone();
            qq[i] += delta;
            let u = FramePoint::new(&chart, DVector::from_row_slice(&qq[..2]), DMatrix::from_column_slice(2, 2, &qq[2..])).unwrap();
            mpp_shoot(&chart, &u, &y, &MppOptions::default()).unwrap().sq_distance
        };
        let fd = (sq(h) - sq(-h)) / (2.0 * h);
        let adj = -2.0 * r.initial_momentum[i];
        assert!((fd - adj).abs() < 1e-5 * (1.0 + adj.abs()), "component {i}: {fd} vs {adj}");
    }
}

#[test]
fn shooting_rejects_thin_frames() {
    let chart = Surface::Sphere;
    let u = FramePoint { x: DVector::zeros(2), nu: DMatrix::from_row_slice(2, 1, &[1.0, 0.0]) };
    assert!(mpp_shoot(&chart, &u, &DVector::zeros(2), &MppOptions::default()).is_err());
}

fn gaussian_cloud(n: usize) -> Vec<DVector<f64>> {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = crate::rng::stream(3);
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.6, 0.4]);
    (0..n)
        .map(|_| {
            let e = DVector::from_fn(2, |_, _| StandardNormal.sample(&mut rng));
            DVector::from_row_slice(&[0.5, -1.0]) + &a * e
        })
        .collect()
}

#[test]
fn flat_estimate_is_the_gaussian_mle() {
    let chart = Surface::flat(2).into_ref();
    let data = gaussian_cloud(500);
    let (mean, cov) = crate::linalg::mean_cov(&data);
    let init = FramePoint::new(chart.as_ref(), DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
    let opts = MppEstimateOptions { shoot: MppOptions { steps: 4, ..MppOptions::default() }, ..MppEstimateOptions::default() };
    let est = mpp_estimate(&data, &chart, &init, &opts).unwrap();
    let nnt = &est.frame.nu * est.frame.nu.transpose();
    assert!((&est.frame.x - &mean).norm() < 0.01 * cov.trace().sqrt());
    assert!((&nnt - &cov).norm() < 0.01 * cov.norm(), "{nnt} vs {cov}");
    assert!(est.trace.windows(2).all(|w| w[1] <= w[0]));
    assert!(!est.lambda_floor_hit);
}

#[test]
fn single_datum_hits_the_lambda_floor() {
    let chart = Surface::flat(2).into_ref();
    let init = FramePoint::new(chart.as_ref(), DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
    let opts = MppEstimateOptions { shoot: MppOptions { steps: 4, ..MppOptions::default() }, ..MppEstimateOptions::default() };
    let est = mpp_estimate(&[DVector::from_row_slice(&[0.3, 0.1])], &chart, &init, &opts).unwrap();
    assert!(est.lambda_floor_hit);
    let l = crate::linalg::g_eigenframe(&est.frame.nu, &DMatrix::identity(2, 2)).unwrap().1;
    assert!(l.iter().cloned().fold(f64::INFINITY, f64::min) <= 1e-4 * (1.0 + 1e-9));
}
