//! Experiment configuration.
//!
//! Values are resolved in layers: built-in defaults for the experiment, then
//! the config file, then `MASGRAD_SEED`, then command-line flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use masgrad::chain::{Method, NoiseMode, VSource};
use masgrad::moments::Ridge;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Linear,
    Logistic,
    Mixture,
    ShallowNn,
    Lasso,
    BenchLinalg,
    BoundCheck,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Linear => "linear",
            Experiment::Logistic => "logistic",
            Experiment::Mixture => "mixture",
            Experiment::ShallowNn => "shallow-nn",
            Experiment::Lasso => "lasso",
            Experiment::BenchLinalg => "bench-linalg",
            Experiment::BoundCheck => "bound-check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum NoiseArg {
    Stochastic,
    Gaussian,
    Deterministic,
}

impl From<NoiseArg> for NoiseMode {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Stochastic => NoiseMode::Stochastic,
            NoiseArg::Gaussian => NoiseMode::Gaussian,
            NoiseArg::Deterministic => NoiseMode::Deterministic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum VSourceArg {
    Pool,
    Minibatch,
}

impl From<VSourceArg> for VSource {
    fn from(v: VSourceArg) -> Self {
        match v {
            VSourceArg::Pool => VSource::Pool,
            VSourceArg::Minibatch => VSource::Minibatch,
        }
    }
}

/// Ridge added to covariances before inverting: `auto` is `1e-8 * trace / p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RidgeArg {
    Off,
    Auto,
}

impl From<RidgeArg> for Ridge {
    fn from(r: RidgeArg) -> Self {
        match r {
            RidgeArg::Off => Ridge::Off,
            RidgeArg::Auto => Ridge::Auto,
        }
    }
}

/// Fully resolved configuration, echoed into `manifest.json`.
///
/// Fields that an experiment does not use are carried along unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub chains: usize,
    pub steps: usize,
    pub batch: usize,
    /// Step size; `None` derives it from the smoothness constant.
    pub eta: Option<f64>,
    pub seed: u64,
    pub pool: usize,
    pub dim: usize,
    /// Condition number of the linear design's Gram matrix.
    pub cond: f64,
    /// Response noise of the linear and lasso pools.
    pub sigma: f64,
    pub snr: f64,
    pub means: Vec<f64>,
    pub hidden: usize,
    pub net_noise: f64,
    pub lambda: f64,
    pub methods: Vec<String>,
    pub noise_mode: NoiseArg,
    pub v_source: VSourceArg,
    pub ridge: RidgeArg,
    pub cache_interval: usize,
    pub init_scale: f64,
    pub distance_steps: Vec<usize>,
    /// Inclusive step window for log-error slopes; defaults to the whole run.
    pub slope_window: Option<(usize, usize)>,
    pub repetitions: usize,
    pub dims: Vec<usize>,
    pub counts: Vec<usize>,
    pub refine: usize,
    /// Inverse temperature for the coupled-chain check.
    pub beta: f64,
    pub out: PathBuf,
    pub plots: bool,
}

/// Partial configuration from a file or the command line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, clap::Args)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverlay {
    #[arg(skip)]
    pub experiment: Option<Experiment>,
    /// Number of chains per method.
    #[arg(long)]
    pub chains: Option<usize>,
    /// Iterations per chain.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Minibatch size n.
    #[arg(long)]
    pub batch: Option<usize>,
    /// Step size (default: experiment-specific).
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Data pool size N.
    #[arg(long)]
    pub pool: Option<usize>,
    /// Parameter (or input) dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub cond: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub snr: Option<f64>,
    /// Mixture component means, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub means: Option<Vec<f64>>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub net_noise: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Methods to run, comma separated (SGD, MasGrad, diff_SGD, diff_MasGrad, GD, MasGD, MadProx).
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    #[arg(long, value_enum)]
    pub noise_mode: Option<NoiseArg>,
    #[arg(long, value_enum)]
    pub v_source: Option<VSourceArg>,
    /// Covariance ridge (default: auto for mixture and shallow-nn, off otherwise).
    #[arg(long, value_enum)]
    pub ridge: Option<RidgeArg>,
    #[arg(long)]
    pub cache_interval: Option<usize>,
    #[arg(long)]
    pub init_scale: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub distance_steps: Option<Vec<usize>>,
    /// Slope window as `start,end`.
    #[arg(long, value_parser = parse_window)]
    pub slope_window: Option<(usize, usize)>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub counts: Option<Vec<usize>>,
    #[arg(long)]
    pub refine: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub plots: Option<bool>,
}

fn parse_window(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected `start,end`")?;
    let a = a.trim().parse().map_err(|e| format!("window start: {e}"))?;
    let b = b.trim().parse().map_err(|e| format!("window end: {e}"))?;
    Ok((a, b))
}

const DIFFUSION_PANEL: [&str; 4] = ["SGD", "MasGrad", "diff_SGD", "diff_MasGrad"];

impl ExperimentConfig {
    /// Built-in defaults, following the published experiment settings where
    /// they exist.
    pub fn defaults(experiment: Experiment) -> Self {
        let mut c = ExperimentConfig {
            experiment,
            chains: 100,
            steps: 100,
            batch: 50,
            eta: None,
            seed: 1,
            pool: 500,
            dim: 4,
            cond: 30.98,
            sigma: 1.0,
            snr: 3.3,
            means: vec![1.0, 2.0, 3.0],
            hidden: 3,
            net_noise: 0.01,
            lambda: 0.1,
            methods: DIFFUSION_PANEL.iter().map(|s| s.to_string()).collect(),
            noise_mode: NoiseArg::Stochastic,
            v_source: VSourceArg::Pool,
            ridge: RidgeArg::Off,
            cache_interval: 1,
            init_scale: 1.0,
            distance_steps: vec![10, 50, 100],
            slope_window: None,
            repetitions: 50,
            dims: vec![1, 2, 4, 8, 16, 32],
            counts: vec![100, 1000, 10_000],
            refine: 100,
            beta: 1.0,
            out: PathBuf::from("out").join(experiment.name()),
            plots: false,
        };
        match experiment {
            Experiment::Linear => {}
            Experiment::Logistic => {
                c.batch = 25;
                c.eta = Some(0.2);
            }
            Experiment::Mixture => {
                c.batch = 20;
                c.eta = Some(0.05);
                c.pool = 1000;
                c.ridge = RidgeArg::Auto;
            }
            Experiment::ShallowNn => {
                c.batch = 30;
                c.pool = 300;
                c.eta = Some(0.1);
                c.ridge = RidgeArg::Auto;
                c.methods = vec!["diff_MasGrad".into(), "SGD".into()];
            }
            Experiment::Lasso => {
                c.dim = 5;
                c.pool = 200;
                c.chains = 1;
                c.steps = 200;
                c.sigma = 0.1;
                c.methods = vec!["MadProx".into()];
            }
            Experiment::BenchLinalg => {}
            Experiment::BoundCheck => {
                c.eta = Some(0.01);
                c.chains = 1000;
            }
        }
        c
    }

    pub fn apply(&mut self, o: &ConfigOverlay) {
        macro_rules! take {
            ($($f:ident),*) => {$(
                if let Some(v) = &o.$f {
                    self.$f = v.clone();
                }
            )*};
        }
        take!(
            chains, steps, batch, seed, pool, dim, cond, sigma, snr, means, hidden, net_noise, lambda, methods,
            noise_mode, v_source, ridge, cache_interval, init_scale, distance_steps, repetitions, dims, counts, refine,
            beta, out, plots
        );
        if o.eta.is_some() {
            self.eta = o.eta;
        }
        if o.slope_window.is_some() {
            self.slope_window = o.slope_window;
        }
    }

    pub fn parsed_methods(&self) -> anyhow::Result<Vec<Method>> {
        self.methods
            .iter()
            .map(|m| Method::from_str(m).map_err(|e| anyhow::anyhow!("methods: {e}")))
            .collect()
    }

    /// `2n / eta` when a fixed step size is configured.
    pub fn beta_for_batch(&self) -> Option<f64> {
        self.eta.map(|eta| 2.0 * self.batch as f64 / eta)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let positive = [
            ("chains", self.chains),
            ("batch", self.batch),
            ("pool", self.pool),
            ("dim", self.dim),
            ("cache_interval", self.cache_interval),
        ];
        for (name, v) in positive {
            if v == 0 {
                bail!("{name} must be positive");
            }
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                bail!("eta must be positive, got {eta}");
            }
        }
        for (name, v) in [("sigma", self.sigma), ("snr", self.snr), ("cond", self.cond), ("beta", self.beta)] {
            if !(v > 0.0 && v.is_finite()) {
                bail!("{name} must be positive, got {v}");
            }
        }
        if self.cond < 1.0 {
            bail!("cond must be at least 1, got {}", self.cond);
        }
        if self.lambda.is_nan() || self.lambda < 0.0 {
            bail!("lambda must be non-negative, got {}", self.lambda);
        }
        if self.methods.is_empty() {
            bail!("methods must not be empty");
        }
        self.parsed_methods()?;
        match self.experiment {
            Experiment::Mixture if self.means.is_empty() => bail!("means must not be empty"),
            Experiment::ShallowNn if self.repetitions == 0 || self.hidden == 0 => {
                bail!("repetitions and hidden must be positive")
            }
            Experiment::BenchLinalg => {
                if let Some(d) = self.dims.iter().find(|&&d| d == 0 || d > 64) {
                    bail!("dims must lie in 1..=64, got {d}");
                }
                if self.counts.contains(&0) {
                    bail!("counts must be positive");
                }
            }
            Experiment::BoundCheck if self.refine == 0 => bail!("refine must be positive"),
            _ => {}
        }
        if let Some((a, b)) = self.slope_window {
            if a >= b || b > self.steps {
                bail!("slope_window ({a}, {b}) must satisfy start < end <= steps");
            }
        }
        Ok(())
    }
}

/// Reads an overlay from a JSON file. A `manifest.json` written by a previous
/// run is accepted too; its `config` object is used.
pub fn load_overlay(path: &Path) -> anyhow::Result<ConfigOverlay> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    if let Some(inner) = value.get_mut("config") {
        value = inner.take();
    }
    serde_json::from_value(value).with_context(|| format!("invalid config {}", path.display()))
}

/// Applies defaults, the file, `env_seed` and the flags, in that order.
pub fn resolve(
    experiment: Option<Experiment>,
    file: Option<&ConfigOverlay>,
    env_seed: Option<&str>,
    flags: &ConfigOverlay,
) -> anyhow::Result<ExperimentConfig> {
    let experiment = experiment
        .or(file.and_then(|f| f.experiment))
        .context("no experiment given on the command line or in the config file")?;
    let mut cfg = ExperimentConfig::defaults(experiment);
    if let Some(f) = file {
        cfg.apply(f);
    }
    if let Some(s) = env_seed {
        cfg.seed = s
            .trim()
            .parse()
            .with_context(|| format!("MASGRAD_SEED must be an unsigned integer, got {s:?}"))?;
    }
    cfg.apply(flags);
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_is_flags_env_file_defaults() {
        let file = ConfigOverlay {
            seed: Some(5),
            chains: Some(7),
            batch: Some(9),
            ..Default::default()
        };
        let flags = ConfigOverlay {
            chains: Some(3),
            ..Default::default()
        };
        let cfg = resolve(Some(Experiment::Linear), Some(&file), Some("11"), &flags).unwrap();
        assert_eq!((cfg.chains, cfg.batch, cfg.seed), (3, 9, 11));
        let flags = ConfigOverlay {
            seed: Some(2),
            ..Default::default()
        };
        assert_eq!(resolve(Some(Experiment::Linear), Some(&file), Some("11"), &flags).unwrap().seed, 2);
        assert_eq!(resolve(Some(Experiment::Linear), Some(&file), None, &ConfigOverlay::default()).unwrap().seed, 5);
    }

    #[test]
    fn published_defaults() {
        let c = ExperimentConfig::defaults(Experiment::Logistic);
        assert_eq!(c.beta_for_batch(), Some(250.0));
        let c = ExperimentConfig::defaults(Experiment::ShallowNn);
        assert_eq!((c.batch, c.pool), (30, 300));
        assert_eq!(c.beta_for_batch(), Some(600.0));
    }

    #[test]
    fn invalid_fields_are_named() {
        let flags = ConfigOverlay {
            methods: Some(vec!["Adam".into()]),
            ..Default::default()
        };
        let err = resolve(Some(Experiment::Linear), None, None, &flags).unwrap_err();
        assert!(format!("{err:#}").contains("methods"));
        let flags = ConfigOverlay {
            eta: Some(-1.0),
            ..Default::default()
        };
        let err = resolve(Some(Experiment::Linear), None, None, &flags).unwrap_err();
        assert!(format!("{err:#}").contains("eta"));
        assert!(resolve(Some(Experiment::Linear), None, Some("x"), &ConfigOverlay::default()).is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let c = ExperimentConfig::defaults(Experiment::Mixture);
        let text = serde_json::to_string(&c).unwrap();
        let overlay: ConfigOverlay = serde_json::from_str(&text).unwrap();
        let back = resolve(None, Some(&overlay), None, &ConfigOverlay::default()).unwrap();
        assert_eq!(back, c);
    }
}
