use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::rng::stream;

fn random_points(n: usize, radius: f64, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = stream(seed);
    (0..n).map(|_| [rng.random_range(-radius..radius), rng.random_range(-radius..radius)]).collect()
}

fn sphere_metric_chart() -> MetricChart {
    MetricChart::new(
        "sphere-generic",
        2,
        |x, out| {
            let s = 1.0 + x[0] * x[0] + x[1] * x[1];
            let lam = 4.0 / (s * s);
            out.copy_from_slice(&[lam, 0.0, 0.0, lam]);
        },
        |_| true,
    )
}

#[test]
fn flat_metric_is_identity() {
    let g = Surface::flat(2).metric(&DVector::from_row_slice(&[0.3, -1.0])).unwrap();
    assert_eq!(g, DMatrix::identity(2, 2));
}

#[test]
fn sphere_metric_at_origin_matches_embedding_jacobian() {
    let s = Surface::Sphere;
    let x = DVector::zeros(2);
    let g = s.metric(&x).unwrap();
    assert_relative_eq!(g, DMatrix::identity(2, 2) * 4.0, epsilon = 1e-15);
    let j = embedding_jacobian(&s, x.as_slice(), 1e-6).unwrap();
    assert_relative_eq!(j.transpose() * j, g, epsilon = 1e-8);
}

#[test]
fn unit_ellipsoid_equals_sphere() {
    let e = Surface::ellipsoid(1.0, 1.0, 1.0).unwrap();
    for p in random_points(50, 3.0, 1) {
        let x = DVector::from_row_slice(&p);
        assert_relative_eq!(e.metric(&x).unwrap(), Surface::Sphere.metric(&x).unwrap(), epsilon = 1e-14);
        let ge = e.christoffel(&x).unwrap();
        let gs = Surface::Sphere.christoffel(&x).unwrap();
        for (a, b) in ge.as_slice().iter().zip(gs.as_slice()) {
            assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        }
        assert_eq!(e.embed(&p), Surface::Sphere.embed(&p));
    }
}

#[test]
fn invalid_ellipsoid_rejected() {
    assert!(Surface::ellipsoid(1.0, 0.0, 1.0).is_err());
}

#[test]
fn flat_christoffel_vanishes() {
    let c = Surface::flat(3).christoffel(&DVector::from_row_slice(&[1.0, 2.0, -3.0])).unwrap();
    assert_eq!(c.max_abs(), 0.0);
}

#[test]
fn sphere_christoffel_vanishes_at_origin() {
    let c = Surface::Sphere.christoffel(&DVector::zeros(2)).unwrap();
    assert_eq!(c.max_abs(), 0.0);
}

#[test]
fn finite_difference_christoffel_matches_conformal_formula() {
    let generic = sphere_metric_chart();
    for p in random_points(100, 2.0, 2) {
        let x = DVector::from_row_slice(&p);
        let fd = generic.christoffel(&x).unwrap();
        let an = Surface::Sphere.christoffel(&x).unwrap();
        for (a, b) in fd.as_slice().iter().zip(an.as_slice()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b} at {p:?}");
        }
    }
}

#[test]
fn ellipsoid_christoffel_matches_finite_difference() {
    let e = Surface::ellipsoid(1.0, 0.6, 1.4).unwrap();
    for p in random_points(50, 2.0, 3) {
        let mut fd = Christoffel::zeros(2);
        christoffel_finite_difference(&e, &p, CHRISTOFFEL_FD_STEP, &mut fd);
        let an = e.christoffel(&DVector::from_row_slice(&p)).unwrap();
        for (a, b) in fd.as_slice().iter().zip(an.as_slice()) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }
}

#[test]
fn metric_embedding_consistency() {
    for s in [Surface::Sphere, Surface::ellipsoid(1.0, 0.6, 1.4).unwrap()] {
        for p in random_points(100, 2.5, 4) {
            let g = s.metric(&DVector::from_row_slice(&p)).unwrap();
            let j = embedding_jacobian(&s, &p, 1e-6).unwrap();
            assert!((g - j.transpose() * &j).norm() < 1e-6);
        }
    }
}

#[test]
fn christoffel_metric_compatibility() {
    let h = 1e-5;
    for s in [Surface::Sphere, Surface::ellipsoid(1.0, 0.6, 1.4).unwrap()] {
        for p in random_points(30, 2.0, 5) {
            let x = DVector::from_row_slice(&p);
            let g = s.metric(&x).unwrap();
            let gam = s.christoffel(&x).unwrap();
            for c in 0..2 {
                let mut xp = x.clone();
                xp[c] += h;
                let mut xm = x.clone();
                xm[c] -= h;
                let dg = (s.metric(&xp).unwrap() - s.metric(&xm).unwrap()) / (2.0 * h);
                for a in 0..2 {
                    for b in 0..2 {
                        let mut r = dg[(a, b)];
                        for e in 0..2 {
                            r -= gam.get(e, c, a) * g[(e, b)] + gam.get(e, c, b) * g[(a, e)];
                        }
                        assert!(r.abs() < 1e-5, "residual {r}");
                    }
                }
            }
        }
    }
}

#[test]
fn out_of_domain_is_an_error() {
    let far = DVector::from_row_slice(&[2e3, 0.0]);
    assert!(matches!(Surface::Sphere.metric(&far), Err(Error::Domain { .. })));
    assert!(matches!(Surface::Sphere.christoffel(&far), Err(Error::Domain { .. })));
    let nan = DVector::from_row_slice(&[f64::NAN, 0.0]);
    assert!(Surface::flat(2).metric(&nan).is_err());
    assert!(matches!(
        Surface::flat(2).metric(&DVector::zeros(3)),
        Err(Error::Dimension { expected: 2, got: 3 })
    ));
}

#[test]
fn numeric_exponential_matches_sphere_analytic() {
    let x = DVector::from_row_slice(&[0.2, -0.4]);
    let v = DVector::from_row_slice(&[0.3, 0.5]);
    let analytic = Surface::Sphere.exp(&x, &v).unwrap();
    let numeric = geodesic_exp(&Surface::Sphere, &x, &v, 400).unwrap();
    assert!((analytic - numeric).norm() < 1e-8);
}

#[test]
fn numeric_log_inverts_exponential_on_ellipsoid() {
    let e = Surface::ellipsoid(1.2, 0.8, 1.0).unwrap();
    let x = DVector::from_row_slice(&[0.1, 0.2]);
    let v = DVector::from_row_slice(&[0.4, -0.3]);
    let y = e.exp(&x, &v).unwrap();
    let back = e.log(&x, &y).unwrap();
    assert!((back - v).norm() < 1e-8);
}

#[test]
fn sphere_chart_log_exp_round_trip() {
    let x = DVector::from_row_slice(&[0.3, 0.1]);
    let y = DVector::from_row_slice(&[-0.5, 0.9]);
    let v = Surface::Sphere.log(&x, &y).unwrap();
    let back = Surface::Sphere.exp(&x, &v).unwrap();
    assert!((back - y).norm() < 1e-12);
}

proptest! {
    #[test]
    fn metric_is_positive_definite(x in -50.0f64..50.0, y in -50.0f64..50.0, a in 0.2f64..3.0, b in 0.2f64..3.0, c in 0.2f64..3.0) {
        for s in [Surface::Sphere, Surface::ellipsoid(a, b, c).unwrap()] {
            let g = s.metric(&DVector::from_row_slice(&[x, y])).unwrap();
            prop_assert_eq!(g[(0, 1)], g[(1, 0)]);
            let eig = g.symmetric_eigen();
            prop_assert!(eig.eigenvalues.min() > 0.0);
        }
    }

    #[test]
    fn christoffel_lower_indices_symmetric(x in -5.0f64..5.0, y in -5.0f64..5.0) {
        let generic = sphere_metric_chart();
        let e = Surface::ellipsoid(1.0, 0.5, 2.0).unwrap();
        let p = DVector::from_row_slice(&[x, y]);
        for gam in [Surface::Sphere.christoffel(&p).unwrap(), e.christoffel(&p).unwrap(), generic.christoffel(&p).unwrap()] {
            for a in 0..2 {
                prop_assert_eq!(gam.get(a, 0, 1).to_bits(), gam.get(a, 1, 0).to_bits());
            }
        }
    }
}
