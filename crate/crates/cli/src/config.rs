//! Serializable run configuration.
//!
//! A [`RunConfig`] fully determines a run: every command line is resolved
//! into one before anything is computed, and it is written back as
//! `config.json` so the run can be replayed with `geomppca run`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use geomppca_core::stochastic::ModelParams;
use geomppca_core::{ChartRef, Surface};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ManifoldSpec {
    Flat { dim: usize },
    Sphere,
    Ellipsoid { a: f64, b: f64, c: f64 },
}

impl ManifoldSpec {
    /// Parses `flat<d>`, `sphere` or `ellipsoid` (with `axes`).
    pub fn parse(name: &str, axes: Option<&[f64]>) -> Result<Self> {
        let spec = match name {
            "sphere" => ManifoldSpec::Sphere,
            "ellipsoid" => match axes {
                Some(&[a, b, c]) => ManifoldSpec::Ellipsoid { a, b, c },
                _ => bail!("ellipsoid needs --axes a,b,c"),
            },
            _ => match name.strip_prefix("flat").map(str::parse::<usize>) {
                Some(Ok(dim)) if dim > 0 => ManifoldSpec::Flat { dim },
                _ => bail!("unknown manifold '{name}' (expected flat<d>, sphere or ellipsoid)"),
            },
        };
        if axes.is_some() && !matches!(spec, ManifoldSpec::Ellipsoid { .. }) {
            bail!("--axes only applies to the ellipsoid");
        }
        Ok(spec)
    }

    pub fn chart(&self) -> Result<ChartRef> {
        Ok(match *self {
            ManifoldSpec::Flat { dim } => Surface::flat(dim).into_ref(),
            ManifoldSpec::Sphere => Surface::Sphere.into_ref(),
            ManifoldSpec::Ellipsoid { a, b, c } => Surface::ellipsoid(a, b, c)?.into_ref(),
        })
    }
}

/// Model parameters with `w` stored row by row (`d` rows of `k` entries).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub m: Vec<f64>,
    pub w: Vec<Vec<f64>>,
    pub sigma: f64,
    pub horizon: f64,
}

impl ModelSpec {
    pub fn from_params(p: &ModelParams) -> Self {
        ModelSpec {
            m: p.m.iter().copied().collect(),
            w: matrix_rows(&p.w),
            sigma: p.sigma,
            horizon: p.horizon,
        }
    }

    pub fn params(&self, chart: &ChartRef) -> Result<ModelParams> {
        let d = chart.dim();
        let w = matrix_from_rows(&self.w, d).context("W")?;
        Ok(ModelParams::new(chart.clone(), DVector::from_vec(self.m.clone()), w, self.sigma, self.horizon)?)
    }
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Builds a `d`-row matrix from rows; an empty list gives `d×0`.
pub fn matrix_from_rows(rows: &[Vec<f64>], d: usize) -> Result<DMatrix<f64>> {
    if rows.len() != d {
        bail!("expected {d} rows, got {}", rows.len());
    }
    let k = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != k) {
        bail!("rows have different lengths");
    }
    Ok(DMatrix::from_fn(d, k, |i, j| rows[i][j]))
}

/// Closed interval sampled at `count` evenly spaced points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl GridAxis {
    /// Parses `start:stop:count`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts.as_slice() else {
            bail!("grid axis '{s}' is not start:stop:count");
        };
        let axis = GridAxis {
            start: a.trim().parse().with_context(|| format!("grid start '{a}'"))?,
            stop: b.trim().parse().with_context(|| format!("grid stop '{b}'"))?,
            count: n.trim().parse().with_context(|| format!("grid count '{n}'"))?,
        };
        if axis.count == 0 {
            bail!("grid count must be positive");
        }
        Ok(axis)
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let h = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.start + h * i as f64).collect()
    }
}

/// Where the data of a run come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSpec {
    /// CSV with columns `x1..xd` (other columns are ignored), or only numeric columns.
    File { path: PathBuf },
    /// Forward samples of a model, seeded by the run seed.
    Synthetic { model: ModelSpec, n_samples: usize, n_steps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    Ppca,
    Tpca,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum CommandConfig {
    Sample {
        model: ModelSpec,
        n_samples: usize,
        n_steps: usize,
    },
    Density {
        model: ModelSpec,
        grid: Vec<GridAxis>,
        n_steps: usize,
        n_bridges: usize,
    },
    Bridge {
        model: ModelSpec,
        target: Vec<f64>,
        n_steps: usize,
        n_bridges: usize,
    },
    Fit {
        k: usize,
        data: DataSpec,
        /// Initial parameters; tangent PCA at the Fréchet mean when absent.
        init: Option<ModelSpec>,
        horizon: f64,
        n_steps: usize,
        n_bridges: usize,
        max_iter: usize,
        step_size: f64,
    },
    Components {
        model: ModelSpec,
        data: DataSpec,
        n_steps: usize,
        n_bridges: usize,
    },
    Mpp {
        /// Frame point: base `m` and full frame `w`.
        frame: ModelSpec,
        target: Option<Vec<f64>>,
        /// Estimate the frame from data instead of shooting to a target.
        data: Option<DataSpec>,
        steps: usize,
    },
    Baseline {
        method: BaselineMethod,
        k: usize,
        data: DataSpec,
        /// Tangent PCA base point; the Fréchet mean when absent.
        base: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub manifold: ManifoldSpec,
    pub seed: u64,
    #[serde(flatten)]
    pub command: CommandConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn command_name(&self) -> &'static str {
        match self.command {
            CommandConfig::Sample { .. } => "sample",
            CommandConfig::Density { .. } => "density",
            CommandConfig::Bridge { .. } => "bridge",
            CommandConfig::Fit { .. } => "fit",
            CommandConfig::Components { .. } => "components",
            CommandConfig::Mpp { .. } => "mpp",
            CommandConfig::Baseline { .. } => "baseline",
        }
    }
}
