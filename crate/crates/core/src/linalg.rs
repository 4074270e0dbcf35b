//! Small dense linear-algebra helpers.
//!
//! Hot Monte Carlo loops work on flat column-major slices through the
//! allocation-free routines here; everything else uses nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::prelude::*;

/// In-place lower Cholesky factor of a symmetric `d×d` matrix stored
/// column-major in `a`. Returns `false` if the matrix is not positive definite.
/// On success the lower triangle of `a` holds `L` (upper triangle untouched).
#[inline(always)]
pub fn cholesky_in_place(a: &mut [f64], d: usize) -> bool {
    for j in 0..d {
        let mut diag = a[j + d * j];
        for p in 0..j {
            diag -= a[j + d * p] * a[j + d * p];
        }
        if !(diag > 0.0) {
            return false;
        }
        let ljj = diag.sqrt();
        a[j + d * j] = ljj;
        for i in (j + 1)..d {
            let mut s = a[i + d * j];
            for p in 0..j {
                s -= a[i + d * p] * a[j + d * p];
            }
            a[i + d * j] = s / ljj;
        }
    }
    true
}

/// Solves `L y = b` in place for a column-major lower factor.
#[inline(always)]
pub fn solve_lower_in_place(l: &[f64], d: usize, b: &mut [f64]) {
    for i in 0..d {
        let mut s = b[i];
        for p in 0..i {
            s -= l[i + d * p] * b[p];
        }
        b[i] = s / l[i + d * i];
    }
}

/// Solves `Lᵀ y = b` in place for a column-major lower factor.
#[inline(always)]
pub fn solve_upper_t_in_place(l: &[f64], d: usize, b: &mut [f64]) {
    for i in (0..d).rev() {
        let mut s = b[i];
        for p in (i + 1)..d {
            s -= l[p + d * i] * b[p];
        }
        b[i] = s / l[i + d * i];
    }
}

/// `log det` of the matrix whose Cholesky factor is `l`.
pub fn chol_log_det(l: &[f64], d: usize) -> f64 {
    (0..d).map(|i| l[i + d * i].ln()).sum::<f64>() * 2.0
}

/// Gram–Schmidt orthonormalization of the columns of `basis` with respect to
/// the inner product `g`.
pub fn gram_schmidt(g: &DMatrix<f64>, basis: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = basis.clone();
    for j in 0..basis.ncols() {
        let mut v = basis.column(j).into_owned();
        for i in 0..j {
            let e = out.column(i).into_owned();
            let proj = e.dot(&(g * &v));
            v -= e * proj;
        }
        let norm2 = v.dot(&(g * &v));
        if !(norm2 > 1e-300) {
            return Err(Error::RankDeficient);
        }
        out.set_column(j, &(v / norm2.sqrt()));
    }
    Ok(out)
}

/// Metric pseudo-inverse `(νᵀGν)⁻¹νᵀG` of a `d×k` frame.
pub fn metric_pinv(nu: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let ntg = nu.transpose() * g;
    let gram = &ntg * nu;
    let inv = gram.try_inverse().ok_or(Error::RankDeficient)?;
    Ok(inv * ntg)
}

/// Factorizes a frame as `W = U Λ Vᵀ` with `U` g-orthonormal and returns
/// `(U, λ)` with `λ` sorted decreasingly.
pub fn g_eigenframe(w: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let d = g.nrows();
    let k = w.ncols();
    if k == 0 {
        return Ok((DMatrix::zeros(d, 0), Vec::new()));
    }
    let chol = nalgebra::Cholesky::new(g.clone()).ok_or(Error::InvalidParams("metric not positive definite".into()))?;
    let l = chol.l();
    let lt_w = l.transpose() * w;
    let svd = lt_w.svd(true, false);
    let u_tilde = svd.u.ok_or(Error::RankDeficient)?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let lt_inv = l.transpose().try_inverse().ok_or(Error::RankDeficient)?;
    let mut u = DMatrix::zeros(d, k);
    let mut lambdas = Vec::with_capacity(k);
    for (col, &idx) in order.iter().take(k).enumerate() {
        let mut c = &lt_inv * u_tilde.column(idx);
        // sign convention: largest-magnitude entry positive
        let imax = c.iamax();
        if c[imax] < 0.0 {
            c = -c;
        }
        u.set_column(col, &c);
        lambdas.push(svd.singular_values[idx]);
    }
    Ok((u, lambdas))
}

/// Sample mean and maximum-likelihood (1/N) covariance.
pub fn mean_cov(data: &[DVector<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let d = data[0].len();
    let n = data.len() as f64;
    let mean = data.iter().fold(DVector::zeros(d), |acc, y| acc + y) / n;
    let mut cov = DMatrix::zeros(d, d);
    for y in data {
        let r = y - &mean;
        cov += &r * r.transpose();
    }
    (mean, cov / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cholesky_matches_nalgebra() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let mut buf = a.as_slice().to_vec();
        assert!(cholesky_in_place(&mut buf, 3));
        let l = nalgebra::Cholesky::new(a.clone()).unwrap().l();
        for i in 0..3 {
            for j in 0..=i {
                assert_relative_eq!(buf[i + 3 * j], l[(i, j)], epsilon = 1e-14);
            }
        }
        let mut b = [1.0, -2.0, 0.5];
        solve_lower_in_place(&buf, 3, &mut b);
        solve_upper_t_in_place(&buf, 3, &mut b);
        let x = a.try_inverse().unwrap() * DVector::from_row_slice(&[1.0, -2.0, 0.5]);
        for i in 0..3 {
            assert_relative_eq!(b[i], x[i], epsilon = 1e-13);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = [1.0, 2.0, 2.0, 1.0];
        assert!(!cholesky_in_place(&mut a, 2));
    }

    #[test]
    fn gram_schmidt_is_g_orthonormal() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let r = gram_schmidt(&g, &DMatrix::identity(2, 2)).unwrap();
        let gram = r.transpose() * &g * &r;
        assert_relative_eq!(gram, DMatrix::identity(2, 2), epsilon = 1e-14);
    }

    #[test]
    fn eigenframe_recovers_scales() {
        let g = DMatrix::from_diagonal_element(2, 2, 4.0);
        let w = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 0.25]);
        let (u, l) = g_eigenframe(&w, &g).unwrap();
        assert_relative_eq!(l[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(l[1], 0.5, epsilon = 1e-12);
        assert_relative_eq!(u.transpose() * &g * &u, DMatrix::identity(2, 2), epsilon = 1e-12);
    }
}
