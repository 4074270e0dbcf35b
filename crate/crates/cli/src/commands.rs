//! Execution of resolved run configurations.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use geomppca_core::baselines::{ppca_fit, tangent_pca, TangentBase};
use geomppca_core::bridge::{bridges_with_density, density_grid, DensityEstimate};
use geomppca_core::estimators::{
    fit_mle, mpp_estimate, mpp_shoot, principal_paths, summarize_latent, FitOptions, MppEstimateOptions, MppOptions,
};
use geomppca_core::frame_bundle::FramePoint;
use geomppca_core::rng::derive_seed;
use geomppca_core::stochastic::{forward_samples, ModelParams};
use geomppca_core::ChartRef;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::json;

use crate::config::{matrix_rows, BaselineMethod, CommandConfig, DataSpec, GridAxis, ModelSpec, RunConfig};
use crate::io::{coord_header, emb_header, num, point_fields, read_points, Outputs};

/// Rejection and effective-sample-size summary written with every run.
#[derive(Debug, Default, Serialize)]
struct Diagnostics {
    rejections: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_ess: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_ess: Option<f64>,
    warnings: Vec<String>,
}

impl Diagnostics {
    fn add_ess(&mut self, values: &[f64]) {
        if values.is_empty() {
            return;
        }
        self.min_ess = Some(values.iter().copied().fold(f64::INFINITY, f64::min));
        self.mean_ess = Some(values.iter().sum::<f64>() / values.len() as f64);
    }
}

/// Runs `cfg`, writing into `out`; returns the files written.
pub fn execute(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let chart = cfg.manifold.chart()?;
    let mut outputs = Outputs::new(out)?;
    let mut diag = Diagnostics::default();
    let seed = cfg.seed;
    match &cfg.command {
        CommandConfig::Sample { model, n_samples, n_steps } => {
            sample(&chart, model, *n_samples, *n_steps, seed, &mut outputs, &mut diag)?
        }
        CommandConfig::Density { model, grid, n_steps, n_bridges } => {
            density(&chart, model, grid, *n_steps, *n_bridges, seed, &mut outputs, &mut diag)?
        }
        CommandConfig::Bridge { model, target, n_steps, n_bridges } => {
            bridge(&chart, model, target, *n_steps, *n_bridges, seed, &mut outputs, &mut diag)?
        }
        CommandConfig::Fit { .. } => fit(cfg, &chart, &mut outputs, &mut diag)?,
        CommandConfig::Components { model, data, n_steps, n_bridges } => {
            let data = load_data(&chart, data, seed, &mut outputs, &mut diag)?;
            components(&chart, model, &data, *n_steps, *n_bridges, seed, &mut outputs, &mut diag)?
        }
        CommandConfig::Mpp { frame, target, data, steps } => {
            let data = data.as_ref().map(|d| load_data(&chart, d, seed, &mut outputs, &mut diag)).transpose()?;
            mpp(&chart, frame, target.as_deref(), data.as_deref(), *steps, &mut outputs)?
        }
        CommandConfig::Baseline { method, k, data, base } => {
            let data = load_data(&chart, data, seed, &mut outputs, &mut diag)?;
            baseline(&chart, *method, *k, &data, base.as_deref(), &mut outputs)?
        }
    }
    outputs.json("diagnostics.json", &diag)?;
    outputs.json("config.json", cfg)?;
    Ok(outputs.commit())
}

/// Loads or synthesizes data; synthesized data are also written to `data.csv`.
fn load_data(
    chart: &ChartRef,
    spec: &DataSpec,
    seed: u64,
    out: &mut Outputs,
    diag: &mut Diagnostics,
) -> Result<Vec<DVector<f64>>> {
    let data = match spec {
        DataSpec::File { path } => read_points(path, chart.dim())?,
        DataSpec::Synthetic { model, n_samples, n_steps } => {
            let params = model.params(chart)?;
            let s = forward_samples(&params, *n_samples, *n_steps, seed)?;
            diag.rejections += s.rejections;
            write_points(chart, out, "data.csv", &s.endpoints)?;
            s.endpoints
        }
    };
    for (i, x) in data.iter().enumerate() {
        chart.check(x.as_slice()).with_context(|| format!("datum {i}"))?;
    }
    Ok(data)
}

fn write_points(chart: &ChartRef, out: &mut Outputs, name: &str, points: &[DVector<f64>]) -> Result<()> {
    let d = chart.dim();
    let header: Vec<String> = ["sample_id".to_string()].into_iter().chain(coord_header("x", d)).chain(emb_header()).collect();
    let rows = points.iter().enumerate().map(|(i, x)| {
        let mut row = vec![i.to_string()];
        row.extend(point_fields(chart.as_ref(), x));
        row
    });
    out.csv(name, &header, rows)
}

fn sample(
    chart: &ChartRef,
    model: &ModelSpec,
    n_samples: usize,
    n_steps: usize,
    seed: u64,
    out: &mut Outputs,
    diag: &mut Diagnostics,
) -> Result<()> {
    let params = model.params(chart)?;
    let s = forward_samples(&params, n_samples, n_steps, seed)?;
    diag.rejections = s.rejections;
    let d = chart.dim();
    let header: Vec<String> = ["sample_id", "step", "t"]
        .iter()
        .map(|s| s.to_string())
        .chain(coord_header("x", d))
        .chain(emb_header())
        .collect();
    let rows = s.trajectories.iter().enumerate().flat_map(|(i, tr)| {
        tr.base.iter().zip(&tr.times).enumerate().map(move |(j, (x, t))| {
            let mut row = vec![i.to_string(), j.to_string(), num(*t)];
            row.extend(point_fields(chart.as_ref(), x));
            row
        })
    });
    out.csv("trajectories.csv", &header, rows)?;
    write_points(chart, out, "endpoints.csv", &s.endpoints)
}

fn grid_points(axes: &[GridAxis]) -> Vec<DVector<f64>> {
    let values: Vec<Vec<f64>> = axes.iter().map(GridAxis::values).collect();
    let total: usize = values.iter().map(Vec::len).product();
    (0..total)
        .map(|mut idx| {
            // last coordinate varies fastest
            let mut x = vec![0.0; values.len()];
            for (a, vals) in values.iter().enumerate().rev() {
                x[a] = vals[idx % vals.len()];
                idx /= vals.len();
            }
            DVector::from_vec(x)
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn density(
    chart: &ChartRef,
    model: &ModelSpec,
    grid: &[GridAxis],
    n_steps: usize,
    n_bridges: usize,
    seed: u64,
    out: &mut Outputs,
    diag: &mut Diagnostics,
) -> Result<()> {
    let params = model.params(chart)?;
    let points = grid_points(grid);
    let estimates = density_grid(&params, &points, n_steps, n_bridges, seed);
    let d = chart.dim();
    let header: Vec<String> = coord_header("x", d)
        .into_iter()
        .chain(emb_header())
        .chain(["density_volg", "density_chart", "stderr", "n_bridges"].iter().map(|s| s.to_string()))
        .collect();
    let mut ess = Vec::new();
    let mut rows = Vec::with_capacity(points.len());
    for (x, est) in points.iter().zip(&estimates) {
        let mut row = point_fields(chart.as_ref(), x);
        match est {
            Ok(e) => {
                diag.rejections += e.rejections;
                ess.push(e.ess);
                row.extend([num(e.value), num(e.chart_density), num(e.stderr), e.n_samples.to_string()]);
            }
            Err(err) => {
                diag.warnings.push(format!("grid point {:?}: {err}", x.as_slice()));
                row.extend([num(f64::NAN), num(f64::NAN), num(f64::NAN), "0".to_string()]);
            }
        }
        rows.push(row);
    }
    diag.add_ess(&ess);
    out.csv("density.csv", &header, rows)
}

#[allow(clippy::too_many_arguments)]
fn bridge(
    chart: &ChartRef,
    model: &ModelSpec,
    target: &[f64],
    n_steps: usize,
    n_bridges: usize,
    seed: u64,
    out: &mut Outputs,
    diag: &mut Diagnostics,
) -> Result<()> {
    let params = model.params(chart)?;
    let y = DVector::from_row_slice(target);
    let (bridges, est) = bridges_with_density(&params, &y, n_steps, n_bridges, seed)?;
    diag.rejections = est.rejections;
    let summary = summarize_latent(&bridges, est.clone());
    diag.add_ess(&[summary.ess]);
    diag.warnings.extend(summary.warning.clone());
    let d = chart.dim();
    let k = params.rank();
    let lead = || ["bridge_id", "step", "t"].iter().map(|s| s.to_string());
    let header: Vec<String> = lead().chain(coord_header("x", d)).chain(emb_header()).chain(["log_weight".to_string()]).collect();
    let rows = bridges.iter().enumerate().flat_map(|(i, b)| {
        b.trajectory.base.iter().zip(&b.trajectory.times).enumerate().map(move |(j, (x, t))| {
            let mut row = vec![i.to_string(), j.to_string(), num(*t)];
            row.extend(point_fields(chart.as_ref(), x));
            row.push(num(b.log_weight));
            row
        })
    });
    out.csv("bridges.csv", &header, rows)?;
    let header: Vec<String> = lead().chain(coord_header("xhat", k)).chain(["log_weight".to_string()]).collect();
    let rows = bridges.iter().enumerate().flat_map(|(i, b)| {
        b.trajectory.latent.iter().zip(&b.trajectory.times).enumerate().map(move |(j, (z, t))| {
            let mut row = vec![i.to_string(), j.to_string(), num(*t)];
            row.extend(z.iter().map(|v| num(*v)));
            row.push(num(b.log_weight));
            row
        })
    });
    out.csv("latent.csv", &header, rows)?;
    let header: Vec<String> = ["step".to_string(), "t".to_string()]
        .into_iter()
        .chain(coord_header("xhat", k))
        .chain(coord_header("stderr", k))
        .collect();
    let rows = summary.times.iter().enumerate().map(|(j, t)| {
        let mut row = vec![j.to_string(), num(*t)];
        row.extend(summary.mean_path[j].iter().chain(summary.mean_path_stderr[j].iter()).map(|v| num(*v)));
        row
    });
    out.csv("latent_mean.csv", &header, rows)?;
    out.json(
        "latent_summary.json",
        &json!({
            "target": target,
            "endpoint": summary.endpoint.as_slice(),
            "endpoint_spread": matrix_rows(&summary.endpoint_spread),
            "ess": summary.ess,
            "n_samples": summary.n_samples,
            "density": density_json(&est),
            "warning": summary.warning,
        }),
    )
}

fn density_json(e: &DensityEstimate) -> serde_json::Value {
    json!({
        "density_volg": e.value,
        "density_chart": e.chart_density,
        "log_density_volg": e.log_value,
        "stderr": e.stderr,
        "n_bridges": e.n_samples,
        "rejections": e.rejections,
        "ess": e.ess,
    })
}

/// Initial parameters from tangent PCA at the Fréchet mean.
fn tangent_pca_init(chart: &ChartRef, data: &[DVector<f64>], k: usize, horizon: f64) -> Result<ModelParams> {
    let t = tangent_pca(chart.as_ref(), data, &TangentBase::Frechet, k)
        .context("initialization by tangent PCA failed; give initial parameters with --lambda or --W")?;
    let d = chart.dim();
    let w = &t.frame * &t.fit.w / horizon.sqrt();
    let mean_var = t.fit.eigvals.iter().sum::<f64>() / d as f64;
    let s2 = if t.fit.sigma2 > 0.0 { t.fit.sigma2 } else { 0.01 * mean_var.max(1e-12) };
    Ok(ModelParams::new(chart.clone(), t.base, w, (s2 / horizon).sqrt(), horizon)?)
}

fn fit(cfg: &RunConfig, chart: &ChartRef, out: &mut Outputs, diag: &mut Diagnostics) -> Result<()> {
    let CommandConfig::Fit { k, data, init, horizon, n_steps, n_bridges, max_iter, step_size } = &cfg.command else {
        unreachable!()
    };
    let points = load_data(chart, data, cfg.seed, out, diag)?;
    let init = match init {
        Some(spec) => spec.params(chart)?,
        None => tangent_pca_init(chart, &points, *k, *horizon)?,
    };
    if init.rank() != *k {
        bail!("initial W has {} columns, k = {k}", init.rank());
    }
    let opts = FitOptions {
        n_steps: *n_steps,
        n_samples: *n_bridges,
        step_size: *step_size,
        max_iter: *max_iter,
        seed: derive_seed(cfg.seed, &[1]),
        ..FitOptions::default()
    };
    let fit = fit_mle(&points, chart, *k, &init, &opts)?;
    let lead = ["iter", "neg_log_lik", "stderr"].iter().map(|s| s.to_string());
    let header: Vec<String> = lead.chain(coord_header("lambda", *k)).chain(["sigma".to_string()]).collect();
    let rows = fit.trace.iter().map(|r| {
        let mut row = vec![r.iter.to_string(), num(r.neg_log_lik), num(r.stderr)];
        row.extend(r.lambdas.iter().map(|l| num(*l)));
        row.push(num(r.sigma));
        row
    });
    out.csv("trace.csv", &header, rows)?;
    if fit.lambda_floor_hit {
        diag.warnings.push("a principal scale was clamped to its lower bound".into());
    }
    let truth = match data {
        DataSpec::Synthetic { model, .. } => Some(model),
        DataSpec::File { .. } => None,
    };
    out.json(
        "fit.json",
        &json!({
            "config": cfg,
            "params": ModelSpec::from_params(&fit.params),
            "init": ModelSpec::from_params(&init),
            "truth": truth,
            "eigen": {
                "frame": matrix_rows(&fit.eigen.0),
                "lambdas": fit.eigen.1,
                "variances": fit.variances(),
            },
            "neg_log_lik": fit.neg_log_lik,
            "stderr": fit.stderr,
            "iterations": fit.iterations,
            "converged": fit.converged,
            "lambda_floor_hit": fit.lambda_floor_hit,
        }),
    )
}

#[allow(clippy::too_many_arguments)]
fn components(
    chart: &ChartRef,
    model: &ModelSpec,
    data: &[DVector<f64>],
    n_steps: usize,
    n_bridges: usize,
    seed: u64,
    out: &mut Outputs,
    diag: &mut Diagnostics,
) -> Result<()> {
    let params = model.params(chart)?;
    let d = chart.dim();
    let k = params.rank();
    let header: Vec<String> = ["datum_id".to_string()]
        .into_iter()
        .chain(coord_header("x", d))
        .chain(coord_header("z", k))
        .chain(coord_header("z_sd", k))
        .chain(["ess", "density_volg", "stderr", "low_ess"].iter().map(|s| s.to_string()))
        .collect();
    let mut rows = Vec::with_capacity(data.len());
    let mut ess = Vec::with_capacity(data.len());
    for (i, y) in data.iter().enumerate() {
        let s = principal_paths(&params, y, n_steps, n_bridges, seed).with_context(|| format!("datum {i}"))?;
        diag.rejections += s.density.rejections;
        ess.push(s.ess);
        if let Some(w) = &s.warning {
            diag.warnings.push(format!("datum {i}: {w}"));
        }
        let mut row = vec![i.to_string()];
        row.extend(y.iter().chain(s.endpoint.iter()).map(|v| num(*v)));
        row.extend((0..k).map(|a| num(s.endpoint_spread[(a, a)].max(0.0).sqrt())));
        row.extend([num(s.ess), num(s.density.value), num(s.density.stderr)]);
        row.push(u8::from(s.warning.is_some()).to_string());
        rows.push(row);
    }
    diag.add_ess(&ess);
    out.csv("components.csv", &header, rows)
}

fn mpp(
    chart: &ChartRef,
    frame: &ModelSpec,
    target: Option<&[f64]>,
    data: Option<&[DVector<f64>]>,
    steps: usize,
    out: &mut Outputs,
) -> Result<()> {
    let d = chart.dim();
    let nu = crate::config::matrix_from_rows(&frame.w, d)?;
    if nu.ncols() != d {
        bail!("most probable paths need a full frame: W must be {d}x{d}");
    }
    let u = FramePoint::new(chart.as_ref(), DVector::from_vec(frame.m.clone()), nu)?;
    let shoot = MppOptions { steps, ..MppOptions::default() };
    let nu_header = || (1..=d).flat_map(|j| (1..=d).map(move |a| format!("nu{a}_{j}")));
    match (target, data) {
        (Some(y), None) => {
            let y = DVector::from_row_slice(y);
            let r = mpp_shoot(chart.as_ref(), &u, &y, &shoot)?;
            let header: Vec<String> = ["step".to_string(), "t".to_string()]
                .into_iter()
                .chain(coord_header("x", d))
                .chain(emb_header())
                .chain(nu_header())
                .collect();
            let n = r.path.len() - 1;
            let rows = r.path.iter().enumerate().map(|(j, s)| {
                let mut row = vec![j.to_string(), num(j as f64 / n as f64)];
                row.extend(point_fields(chart.as_ref(), &s.frame.x));
                row.extend(s.frame.nu.iter().map(|v| num(*v)));
                row
            });
            out.csv("mpp.csv", &header, rows)?;
            out.json(
                "mpp.json",
                &json!({
                    "target": y.as_slice(),
                    "sq_distance": r.sq_distance,
                    "endpoint_residual": r.endpoint_residual,
                    "hamiltonian_drift": r.hamiltonian_drift,
                    "iterations": r.iterations,
                    "initial_momentum": r.initial_momentum.as_slice(),
                }),
            )
        }
        (None, Some(data)) => {
            let opts = MppEstimateOptions { shoot, ..MppEstimateOptions::default() };
            let est = mpp_estimate(data, chart, &u, &opts)?;
            let rows = est.trace.iter().enumerate().map(|(i, f)| vec![i.to_string(), num(*f)]);
            out.csv("mpp.csv", &["iter".to_string(), "objective".to_string()], rows)?;
            let cov: DMatrix<f64> = &est.frame.nu * est.frame.nu.transpose();
            out.json(
                "mpp.json",
                &json!({
                    "m": est.frame.x.as_slice(),
                    "nu": matrix_rows(&est.frame.nu),
                    "nu_nu_t": matrix_rows(&cov),
                    "sq_distances": est.sq_distances,
                    "iterations": est.iterations,
                    "converged": est.converged,
                    "lambda_floor_hit": est.lambda_floor_hit,
                }),
            )
        }
        _ => bail!("mpp needs exactly one of a target or data"),
    }
}

fn baseline(
    chart: &ChartRef,
    method: BaselineMethod,
    k: usize,
    data: &[DVector<f64>],
    base: Option<&[f64]>,
    out: &mut Outputs,
) -> Result<()> {
    let pts = |v: &[DVector<f64>]| v.iter().map(|x| x.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>();
    let value = match method {
        BaselineMethod::Ppca => {
            let f = ppca_fit(data, k)?;
            json!({
                "method": "ppca",
                "k": k,
                "m": f.m.as_slice(),
                "W": matrix_rows(&f.w),
                "sigma2": f.sigma2,
                "eigvals": f.eigvals,
                "data": pts(data),
            })
        }
        BaselineMethod::Tpca => {
            let base = base.map_or(TangentBase::Frechet, |b| TangentBase::Point(DVector::from_row_slice(b)));
            let t = tangent_pca(chart.as_ref(), data, &base, k)?;
            json!({
                "method": "tpca",
                "k": k,
                "base": t.base.as_slice(),
                "frame": matrix_rows(&t.frame),
                "m": t.fit.m.as_slice(),
                "W": matrix_rows(&t.fit.w),
                "sigma2": t.fit.sigma2,
                "eigvals": t.fit.eigvals,
                "coords": pts(&t.coords),
                "data": pts(data),
            })
        }
    };
    out.json("baseline.json", &value)
}
