//! Command-line flags and their resolution into a [`RunConfig`].

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use geomppca_core::stochastic::ModelParams;
use geomppca_core::ChartRef;
use nalgebra::DVector;

use crate::config::{BaselineMethod, CommandConfig, DataSpec, GridAxis, ManifoldSpec, ModelSpec, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "geomppca", version, about = "Infinitesimal probabilistic PCA on manifolds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Forward trajectories and endpoints of the model.
    Sample {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        /// Number of samples.
        #[arg(long = "N", default_value_t = 64)]
        n_samples: usize,
        /// Time steps per trajectory.
        #[arg(long = "n", default_value_t = geomppca_core::stochastic::DEFAULT_SIM_STEPS)]
        n_steps: usize,
    },
    /// Transition densities on a grid.
    Density {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        /// `start:stop:count`, once for all axes or once per axis.
        #[arg(long, required = true, allow_hyphen_values = true)]
        grid: Vec<String>,
        #[arg(long = "n", default_value_t = geomppca_core::bridge::DEFAULT_BRIDGE_STEPS)]
        n_steps: usize,
        #[arg(long, default_value_t = geomppca_core::bridge::DEFAULT_BRIDGES)]
        bridges: usize,
    },
    /// Guided bridges and latent paths to a target.
    Bridge {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, required = true, value_delimiter = ',', allow_hyphen_values = true)]
        target: Vec<f64>,
        #[arg(long = "n", default_value_t = geomppca_core::bridge::DEFAULT_BRIDGE_STEPS)]
        n_steps: usize,
        #[arg(long, default_value_t = geomppca_core::bridge::DEFAULT_BRIDGES)]
        bridges: usize,
    },
    /// Maximum likelihood fit; model flags, if given, set the initial parameters.
    Fit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        init: ModelArgs,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Bridge steps per density.
        #[arg(long = "n", default_value_t = 20)]
        n_steps: usize,
        #[arg(long, default_value_t = 2000)]
        bridges: usize,
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
        #[arg(long, default_value_t = 1.0)]
        step_size: f64,
    },
    /// Per-datum latent summaries under a model.
    Components {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long = "n", default_value_t = geomppca_core::bridge::DEFAULT_BRIDGE_STEPS)]
        n_steps: usize,
        #[arg(long, default_value_t = geomppca_core::bridge::DEFAULT_BRIDGES)]
        bridges: usize,
    },
    /// Most probable path from the frame (m, W) to a target, or a frame
    /// estimate from data.
    Mpp {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        target: Option<Vec<f64>>,
        #[command(flatten)]
        data: DataArgs,
        /// Integration steps of the Hamiltonian flow.
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
    /// Closed-form PPCA in the chart or tangent PCA.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        method: BaselineMethod,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[command(flatten)]
        data: DataArgs,
        /// Tangent PCA base point (default: Fréchet mean).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        base: Option<Vec<f64>>,
    },
    /// Replays a `config.json` written by an earlier run.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// flat<d>, sphere or ellipsoid.
    #[arg(long, default_value = "sphere")]
    pub manifold: String,
    /// Ellipsoid semi-axes a,b,c.
    #[arg(long, value_delimiter = ',')]
    pub axes: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Base point in chart coordinates (default: origin).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub m: Option<Vec<f64>>,
    /// Latent variances along the principal axes.
    #[arg(long, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    /// Rotation of the principal axes in the first chart plane.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub angle: f64,
    /// Full matrix W: rows separated by ';', entries by ','.
    #[arg(long = "W", allow_hyphen_values = true, conflicts_with = "lambda")]
    pub w: Option<String>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Time horizon T.
    #[arg(long = "T", default_value_t = 1.0)]
    pub horizon: f64,
    /// Take (m, W, sigma, T) from a fit.json.
    #[arg(long, conflicts_with_all = ["lambda", "w", "m", "sigma"])]
    pub params: Option<PathBuf>,
}

/// Data from a file or synthesized from a true model.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV with columns x1..xd (e.g. an endpoints.csv).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long = "true-m", value_delimiter = ',', allow_hyphen_values = true)]
    pub true_m: Option<Vec<f64>>,
    #[arg(long = "true-lambda", value_delimiter = ',', conflicts_with = "data")]
    pub true_lambda: Option<Vec<f64>>,
    #[arg(long = "true-angle", default_value_t = 0.0, allow_hyphen_values = true)]
    pub true_angle: f64,
    #[arg(long = "true-W", allow_hyphen_values = true, conflicts_with_all = ["data", "true_lambda"])]
    pub true_w: Option<String>,
    #[arg(long = "true-sigma")]
    pub true_sigma: Option<f64>,
    /// Number of synthesized data.
    #[arg(long = "N", default_value_t = 64)]
    pub n_samples: usize,
    /// Time steps used to synthesize data.
    #[arg(long, default_value_t = geomppca_core::stochastic::DEFAULT_SIM_STEPS)]
    pub sim_steps: usize,
}

/// Parses `a,b;c,d` into rows.
pub fn parse_matrix(s: &str) -> Result<Vec<Vec<f64>>> {
    s.split(';')
        .map(|row| {
            row.split(',')
                .map(|v| v.trim().parse::<f64>().with_context(|| format!("matrix entry '{v}'")))
                .collect()
        })
        .collect()
}

struct ModelFlags<'a> {
    m: Option<&'a [f64]>,
    lambda: Option<&'a [f64]>,
    angle: f64,
    w: Option<&'a str>,
    sigma: Option<f64>,
    horizon: f64,
}

impl ModelFlags<'_> {
    fn resolve(&self, chart: &ChartRef, what: &str) -> Result<Option<ModelSpec>> {
        if self.lambda.is_none() && self.w.is_none() {
            if self.sigma.is_some() || self.m.is_some() {
                bail!("{what}: --sigma/--m need --lambda or --W");
            }
            return Ok(None);
        }
        let d = chart.dim();
        let m = DVector::from_vec(self.m.map_or_else(|| vec![0.0; d], <[f64]>::to_vec));
        if m.len() != d {
            bail!("{what}: m has {} entries, the manifold has dimension {d}", m.len());
        }
        let sigma = self.sigma.with_context(|| format!("{what}: sigma is required"))?;
        let params = match (self.lambda, self.w) {
            (Some(l), _) => ModelParams::from_variances(chart.clone(), m, l, self.angle, sigma, self.horizon)?,
            (None, Some(w)) => {
                let spec = ModelSpec { m: m.iter().copied().collect(), w: parse_matrix(w)?, sigma, horizon: self.horizon };
                spec.params(chart)?
            }
            (None, None) => unreachable!(),
        };
        Ok(Some(ModelSpec::from_params(&params)))
    }
}

impl ModelArgs {
    fn resolve(&self, chart: &ChartRef) -> Result<Option<ModelSpec>> {
        if let Some(path) = &self.params {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let v: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let spec: ModelSpec = serde_json::from_value(v.get("params").cloned().context("fit.json has no params")?)?;
            spec.params(chart)?;
            return Ok(Some(spec));
        }
        ModelFlags {
            m: self.m.as_deref(),
            lambda: self.lambda.as_deref(),
            angle: self.angle,
            w: self.w.as_deref(),
            sigma: self.sigma,
            horizon: self.horizon,
        }
        .resolve(chart, "model")
    }

    fn required(&self, chart: &ChartRef) -> Result<ModelSpec> {
        self.resolve(chart)?.context("model needs --lambda, --W or --params")
    }
}

impl DataArgs {
    fn resolve(&self, chart: &ChartRef, horizon: f64) -> Result<Option<DataSpec>> {
        if let Some(path) = &self.data {
            return Ok(Some(DataSpec::File { path: path.clone() }));
        }
        let model = ModelFlags {
            m: self.true_m.as_deref(),
            lambda: self.true_lambda.as_deref(),
            angle: self.true_angle,
            w: self.true_w.as_deref(),
            sigma: self.true_sigma,
            horizon,
        }
        .resolve(chart, "true model")?;
        Ok(model.map(|model| DataSpec::Synthetic { model, n_samples: self.n_samples, n_steps: self.sim_steps }))
    }

    fn required(&self, chart: &ChartRef, horizon: f64) -> Result<DataSpec> {
        self.resolve(chart, horizon)?.context("data needs --data or a true model (--true-lambda or --true-W with --true-sigma)")
    }
}

fn manifold(common: &Common) -> Result<(ManifoldSpec, ChartRef)> {
    let spec = ManifoldSpec::parse(&common.manifold, common.axes.as_deref())?;
    let chart = spec.chart()?;
    Ok((spec, chart))
}

fn check_point(chart: &ChartRef, x: &[f64], what: &str) -> Result<()> {
    chart.check(x).with_context(|| format!("{what} is not a valid point"))
}

/// Resolves a command line into a configuration and output directory.
pub fn resolve(cmd: Cmd) -> Result<(RunConfig, PathBuf)> {
    let (common, command) = match cmd {
        Cmd::Run { config, out } => return Ok((RunConfig::load(&config)?, out)),
        Cmd::Sample { common, model, n_samples, n_steps } => {
            let (_, chart) = manifold(&common)?;
            let model = model.required(&chart)?;
            (common, CommandConfig::Sample { model, n_samples, n_steps })
        }
        Cmd::Density { common, model, grid, n_steps, bridges } => {
            let (_, chart) = manifold(&common)?;
            let model = model.required(&chart)?;
            let d = chart.dim();
            let axes = grid.iter().map(|g| GridAxis::parse(g)).collect::<Result<Vec<_>>>()?;
            let grid = match axes.len() {
                1 => vec![axes[0]; d],
                n if n == d => axes,
                n => bail!("{n} grid axes for a {d}-dimensional manifold"),
            };
            (common, CommandConfig::Density { model, grid, n_steps, n_bridges: bridges })
        }
        Cmd::Bridge { common, model, target, n_steps, bridges } => {
            let (_, chart) = manifold(&common)?;
            let model = model.required(&chart)?;
            check_point(&chart, &target, "target")?;
            (common, CommandConfig::Bridge { model, target, n_steps, n_bridges: bridges })
        }
        Cmd::Fit { common, init, data, k, n_steps, bridges, max_iter, step_size } => {
            let (_, chart) = manifold(&common)?;
            let horizon = init.horizon;
            let init = init.resolve(&chart)?;
            let data = data.required(&chart, horizon)?;
            (common, CommandConfig::Fit { k, data, init, horizon, n_steps, n_bridges: bridges, max_iter, step_size })
        }
        Cmd::Components { common, model, data, n_steps, bridges } => {
            let (_, chart) = manifold(&common)?;
            let horizon = model.horizon;
            let model = model.required(&chart)?;
            let data = data.required(&chart, horizon)?;
            (common, CommandConfig::Components { model, data, n_steps, n_bridges: bridges })
        }
        Cmd::Mpp { common, model, target, data, steps } => {
            let (_, chart) = manifold(&common)?;
            let horizon = model.horizon;
            let frame = model.required(&chart)?;
            let data = data.resolve(&chart, horizon)?;
            match (&target, &data) {
                (Some(t), None) => check_point(&chart, t, "target")?,
                (None, Some(_)) => {}
                _ => bail!("mpp needs exactly one of --target or data"),
            }
            (common, CommandConfig::Mpp { frame, target, data, steps })
        }
        Cmd::Baseline { common, method, k, data, base } => {
            let (_, chart) = manifold(&common)?;
            let data = data.required(&chart, 1.0)?;
            if let Some(b) = &base {
                check_point(&chart, b, "base")?;
            }
            (common, CommandConfig::Baseline { method, k, data, base })
        }
    };
    let (manifold, _) = manifold(&common)?;
    Ok((RunConfig { manifold, seed: common.seed, command }, common.out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<(RunConfig, PathBuf)> {
        let cli = Cli::try_parse_from(std::iter::once("geomppca").chain(args.iter().copied()))?;
        resolve(cli.command)
    }

    #[test]
    fn matrix_flag() {
        assert_eq!(parse_matrix("1,0;0,0.5").unwrap(), vec![vec![1.0, 0.0], vec![0.0, 0.5]]);
        assert!(parse_matrix("1,x").is_err());
    }

    #[test]
    fn lambda_is_a_variance() {
        let (cfg, _) = parse(&["sample", "--manifold", "flat2", "--lambda", "4", "--sigma", "0.1"]).unwrap();
        let CommandConfig::Sample { model, .. } = cfg.command else { panic!() };
        assert_eq!(model.w, vec![vec![2.0], vec![0.0]]);
    }

    #[test]
    fn negative_values_parse() {
        let (cfg, _) = parse(&["bridge", "--lambda", "0.4", "--sigma", "0.1", "--target", "-0.3,0.2", "--m", "-0.1,0"]).unwrap();
        let CommandConfig::Bridge { target, model, .. } = cfg.command else { panic!() };
        assert_eq!(target, vec![-0.3, 0.2]);
        assert_eq!(model.m, vec![-0.1, 0.0]);
    }

    #[test]
    fn missing_model_is_an_error() {
        assert!(parse(&["sample", "--manifold", "sphere"]).is_err());
        assert!(parse(&["sample", "--lambda", "1"]).is_err());
        assert!(parse(&["sample", "--manifold", "torus", "--lambda", "1", "--sigma", "0.1"]).is_err());
    }

    #[test]
    fn synthetic_fit_data() {
        let (cfg, _) = parse(&["fit", "--true-lambda", "0.4", "--true-sigma", "0.075", "--N", "8"]).unwrap();
        let CommandConfig::Fit { data: DataSpec::Synthetic { n_samples, .. }, init: None, .. } = cfg.command else {
            panic!("{cfg:?}")
        };
        assert_eq!(n_samples, 8);
    }
}
