//! Closed-form Euclidean PPCA and tangent-space PCA.

use nalgebra::{DMatrix, DVector};

use crate::bridge::gaussian_log_density;
use crate::error::{Error, Result};
use crate::geometry::{orthonormal_frame, Manifold};
use crate::linalg::mean_cov;
use crate::prelude::*;

/// Maximum likelihood PPCA in a Euclidean space.
#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanPPCAFit {
    pub m: DVector<f64>,
    /// `U_k (Λ_k − σ²I)^{1/2}`, each column signed so its largest entry is positive.
    pub w: DMatrix<f64>,
    pub sigma2: f64,
    /// Sample covariance spectrum, descending.
    pub eigvals: Vec<f64>,
    /// Matching eigenvectors as columns.
    pub eigvecs: DMatrix<f64>,
}

impl EuclideanPPCAFit {
    pub fn covariance(&self) -> DMatrix<f64> {
        let d = self.m.len();
        &self.w * self.w.transpose() + DMatrix::identity(d, d) * self.sigma2
    }
}

/// Closed-form maximum likelihood PPCA of rank `k`.
pub fn ppca_fit(data: &[DVector<f64>], k: usize) -> Result<EuclideanPPCAFit> {
    let n = data.len();
    if n <= k {
        return Err(Error::InvalidParams(format!("need more than {k} data, got {n}")));
    }
    let d = data[0].len();
    if k > d {
        return Err(Error::InvalidParams(format!("rank {k} exceeds dimension {d}")));
    }
    if let Some(x) = data.iter().find(|x| x.len() != d) {
        return Err(Error::Dimension { expected: d, got: x.len() });
    }
    let (m, cov) = mean_cov(data);
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigvals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let mut eigvecs = DMatrix::zeros(d, d);
    for (j, &i) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(i).into_owned();
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col.neg_mut();
        }
        eigvecs.set_column(j, &col);
    }
    let sigma2 = if k < d { eigvals[k..].iter().sum::<f64>() / (d - k) as f64 } else { 0.0 };
    if k > 0 && eigvals[k - 1] < sigma2 {
        return Err(Error::Estimation("rank-k model infeasible: λ_k is below the noise variance".into()));
    }
    let mut w = DMatrix::zeros(d, k);
    for j in 0..k {
        w.set_column(j, &(eigvecs.column(j) * (eigvals[j] - sigma2).max(0.0).sqrt()));
    }
    Ok(EuclideanPPCAFit { m, w, sigma2, eigvals, eigvecs })
}

/// `(WᵀW + σ²I)⁻¹ Wᵀ (y − m)`.
pub fn ppca_posterior_mean(fit: &EuclideanPPCAFit, y: &DVector<f64>) -> Result<DVector<f64>> {
    let k = fit.w.ncols();
    let mmat = fit.w.transpose() * &fit.w + DMatrix::identity(k, k) * fit.sigma2;
    mmat.lu().solve(&(fit.w.transpose() * (y - &fit.m))).ok_or(Error::RankDeficient)
}

/// Gaussian log-likelihood of the data under `N(m, WWᵀ + σ²I)`.
pub fn ppca_log_likelihood(data: &[DVector<f64>], m: &DVector<f64>, w: &DMatrix<f64>, sigma2: f64) -> Result<f64> {
    let d = m.len();
    let cov = w * w.transpose() + DMatrix::identity(d, d) * sigma2;
    data.iter().map(|y| gaussian_log_density(y, m, &cov)).sum()
}

/// Base point of tangent PCA.
#[derive(Debug, Clone, PartialEq)]
pub enum TangentBase {
    Point(DVector<f64>),
    /// Fréchet mean by gradient descent.
    Frechet,
}

/// Fréchet-mean descent step.
pub const FRECHET_STEP: f64 = 0.5;
/// Fréchet-mean descent iterations.
pub const FRECHET_ITERATIONS: usize = 100;

/// Tangent PCA result.
#[derive(Debug, Clone)]
pub struct TangentPCA {
    pub base: DVector<f64>,
    /// g-orthonormal frame at the base in which coordinates are expressed.
    pub frame: DMatrix<f64>,
    /// `Log_base(y_i)` in frame coordinates.
    pub coords: Vec<DVector<f64>>,
    pub fit: EuclideanPPCAFit,
}

fn log_all(chart: &dyn Manifold, base: &DVector<f64>, data: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    data.iter()
        .enumerate()
        .map(|(i, y)| {
            chart.log(base, y).map_err(|e| match e {
                Error::CutLocus(msg) => Error::CutLocus(format!("datum {i}: {msg}")),
                other => Error::Estimation(format!("datum {i}: {other}")),
            })
        })
        .collect()
}

/// Fréchet mean by `x ← Exp_x(step · mean Log_x(y_i))`, started from the
/// chart-coordinate mean.
pub fn frechet_mean(chart: &dyn Manifold, data: &[DVector<f64>], step: f64, iterations: usize) -> Result<DVector<f64>> {
    if data.is_empty() {
        return Err(Error::InvalidParams("empty data".into()));
    }
    let (mut x, _) = mean_cov(data);
    if !chart.in_domain(x.as_slice()) {
        x = data[0].clone();
    }
    for _ in 0..iterations {
        let logs = log_all(chart, &x, data)?;
        let mut v = DVector::zeros(x.len());
        for l in &logs {
            v += l;
        }
        v /= data.len() as f64;
        x = chart.exp(&x, &(v * step))?;
    }
    Ok(x)
}

/// Linearizes the data by the Riemannian logarithm at the base and fits PPCA
/// of rank `k` in g-orthonormal tangent coordinates.
pub fn tangent_pca(chart: &dyn Manifold, data: &[DVector<f64>], base: &TangentBase, k: usize) -> Result<TangentPCA> {
    for y in data {
        chart.check(y.as_slice())?;
    }
    let base = match base {
        TangentBase::Point(b) => {
            chart.check(b.as_slice())?;
            b.clone()
        }
        TangentBase::Frechet => frechet_mean(chart, data, FRECHET_STEP, FRECHET_ITERATIONS)?,
    };
    let frame = orthonormal_frame(chart, &base)?;
    let g = chart.metric(&base)?;
    let to_coords = frame.transpose() * g;
    let coords: Vec<DVector<f64>> = log_all(chart, &base, data)?.iter().map(|v| &to_coords * v).collect();
    let fit = ppca_fit(&coords, k)?;
    Ok(TangentPCA { base, frame, coords, fit })
}
