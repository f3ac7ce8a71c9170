//! Update rules and chain runners.
//!
//! Every stochastic step draws from per-chain generators (see
//! [`chain_rngs`]), so a trajectory is a pure function of the seed, the
//! configuration, the starting point, the method and the chain index.

mod prox;
mod rng;

pub use prox::{madprox_step, soft_threshold, Penalty, ProxProblem, SmoothPart, INNER_MAX_ITER, INNER_TOL};
pub use rng::chain_rngs;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::LossModel;
use crate::moments::{batch_moments_with, GradientBatch, MomentOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Sgd,
    MasGrad,
    DiffSgd,
    DiffMasGrad,
    Gd,
    MasGd,
    MadProx,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Sgd,
        Method::MasGrad,
        Method::DiffSgd,
        Method::DiffMasGrad,
        Method::Gd,
        Method::MasGd,
        Method::MadProx,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::Sgd => "SGD",
            Method::MasGrad => "MasGrad",
            Method::DiffSgd => "diff_SGD",
            Method::DiffMasGrad => "diff_MasGrad",
            Method::Gd => "GD",
            Method::MasGd => "MasGD",
            Method::MadProx => "MadProx",
        }
    }

    /// Whether the method uses the moment-adjusted direction.
    pub fn is_adjusted(self) -> bool {
        matches!(self, Method::MasGrad | Method::DiffMasGrad | Method::MasGd | Method::MadProx)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.label().to_ascii_lowercase() == key)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method {s:?}")))
    }
}

/// Where the noise in a step comes from.
///
/// Minibatch methods (SGD, MasGrad) follow this mode directly: `Gaussian`
/// turns them into their diffusion surrogates and `Deterministic` into the
/// full-gradient versions. Diffusion steps are noisy unless the mode is
/// `Deterministic`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMode {
    #[default]
    Stochastic,
    Gaussian,
    Deterministic,
}

/// Source of `V^{-1}` for MasGrad steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VSource {
    /// Exact moments over the whole pool.
    #[default]
    Pool,
    /// Plug-in moments of the current minibatch.
    Minibatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub eta: f64,
    /// Minibatch size `n`.
    pub batch: usize,
    pub horizon: usize,
    pub seed: u64,
    pub noise_mode: NoiseMode,
    pub v_source: VSource,
    /// Recompute pool-based `V^{-1}` every this many steps.
    pub cache_interval: usize,
    pub moments: MomentOptions,
}

impl ChainConfig {
    pub fn new(eta: f64, batch: usize, horizon: usize, seed: u64) -> Result<Self> {
        let cfg = ChainConfig {
            eta,
            batch,
            horizon,
            seed,
            noise_mode: NoiseMode::default(),
            v_source: VSource::default(),
            cache_interval: 1,
            moments: MomentOptions::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidParameter(format!("eta must be positive, got {}", self.eta)));
        }
        if self.batch == 0 {
            return Err(Error::InvalidParameter("batch size must be positive".into()));
        }
        if self.cache_interval == 0 {
            return Err(Error::InvalidParameter("cache interval must be positive".into()));
        }
        Ok(())
    }

    /// Inverse temperature `2n / eta`.
    pub fn beta(&self) -> f64 {
        2.0 * self.batch as f64 / self.eta
    }

    /// Standard deviation `sqrt(2 eta / beta)` of the injected noise.
    pub fn noise_scale(&self) -> f64 {
        (2.0 * self.eta / self.beta()).sqrt()
    }

    fn with_noise(&self, mode: NoiseMode) -> ChainConfig {
        ChainConfig {
            noise_mode: mode,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChainState {
    pub theta: DVector<f64>,
    pub t: usize,
    batch_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    cached_inv_root: Option<(usize, DMatrix<f64>)>,
}

impl ChainState {
    pub fn new(theta: DVector<f64>, seed: u64, chain: u64) -> Self {
        let (batch_rng, noise_rng) = chain_rngs(seed, chain);
        ChainState {
            theta,
            t: 0,
            batch_rng,
            noise_rng,
            cached_inv_root: None,
        }
    }

    fn gaussian(&mut self, p: usize) -> DVector<f64> {
        DVector::from_fn(p, |_, _| StandardNormal.sample(&mut self.noise_rng))
    }

    fn minibatch(&mut self, model: &dyn LossModel, n: usize) -> Result<GradientBatch> {
        let pool = model.pool_size();
        let p = model.dim();
        let mut grads = DMatrix::zeros(n, p);
        for r in 0..n {
            let i = self.batch_rng.random_range(0..pool);
            grads.set_row(r, &model.sample_gradient(&self.theta, i).transpose());
        }
        GradientBatch::new(grads)
    }

    fn advance(mut self, next: DVector<f64>) -> Result<ChainState> {
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::Diverged {
                step: self.t + 1,
                last_finite: self.theta,
            });
        }
        self.theta = next;
        self.t += 1;
        Ok(self)
    }
}

/// Drift `h` of a discretized diffusion, with an optional matrix applied to
/// the Gaussian increment.
pub trait Drift: Send + Sync {
    fn dim(&self) -> usize;
    fn drift(&self, x: &DVector<f64>) -> Result<DVector<f64>>;
    /// Matrix multiplying the standard Gaussian; `None` means isotropic.
    fn noise_root(&self, _x: &DVector<f64>) -> Result<Option<DMatrix<f64>>> {
        Ok(None)
    }
}

/// `h = V^{-1} b` with isotropic noise.
pub struct MasGradDrift<'a> {
    pub model: &'a dyn LossModel,
    pub opts: MomentOptions,
}

impl Drift for MasGradDrift<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn drift(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        match flat_or(self.model, x, self.model.moments(x, self.opts))? {
            Some(m) => Ok(m.inv_root * m.mean_grad),
            None => Ok(DVector::zeros(x.len())),
        }
    }
}

/// Passes `moments` through, except that a singular covariance at a point
/// where every pool gradient is zero gives `None`: the landscape is flat
/// there and the adjusted drift is taken to be zero.
fn flat_or<T>(model: &dyn LossModel, x: &DVector<f64>, moments: Result<T>) -> Result<Option<T>> {
    match moments {
        Ok(m) => Ok(Some(m)),
        Err(Error::SingularCovariance { .. }) if model.pool_gradients(x).iter().all(|&g| g == 0.0) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `h = b` with noise shaped by `V`.
pub struct SgdDrift<'a> {
    pub model: &'a dyn LossModel,
    pub opts: MomentOptions,
}

impl Drift for SgdDrift<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn drift(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.model.population_gradient(x))
    }

    fn noise_root(&self, x: &DVector<f64>) -> Result<Option<DMatrix<f64>>> {
        match flat_or(self.model, x, self.model.moments(x, self.opts))? {
            Some(m) => Ok(Some(m.root()?)),
            None => Ok(Some(DMatrix::zeros(x.len(), x.len()))),
        }
    }
}

/// A drift given by a closure, with isotropic noise.
pub struct FnDrift<F> {
    pub dim: usize,
    pub f: F,
}

impl<F> Drift for FnDrift<F>
where
    F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn drift(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok((self.f)(x))
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `theta - eta * mean(minibatch gradients)`; `Gaussian` and `Deterministic`
/// modes give the surrogate and the full-gradient step.
pub fn sgd_step(mut state: ChainState, model: &dyn LossModel, cfg: &ChainConfig) -> Result<ChainState> {
    check_dim(model.dim(), state.theta.len())?;
    match cfg.noise_mode {
        NoiseMode::Stochastic => {
            let batch = state.minibatch(model, cfg.batch)?;
            let next = &state.theta - batch.mean() * cfg.eta;
            state.advance(next)
        }
        NoiseMode::Gaussian => diffusion_step(
            state,
            &SgdDrift {
                model,
                opts: cfg.moments,
            },
            cfg,
        ),
        NoiseMode::Deterministic => {
            let b = model.population_gradient(&state.theta);
            if b.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("population gradient"));
            }
            let next = &state.theta - b * cfg.eta;
            state.advance(next)
        }
    }
}

fn pool_inv_root(state: &mut ChainState, model: &dyn LossModel, cfg: &ChainConfig) -> Result<DMatrix<f64>> {
    if let Some((t0, m)) = &state.cached_inv_root {
        if state.t - t0 < cfg.cache_interval {
            return Ok(m.clone());
        }
    }
    let p = state.theta.len();
    let m = flat_or(model, &state.theta, model.moments(&state.theta, cfg.moments))?
        .map_or_else(|| DMatrix::zeros(p, p), |m| m.inv_root);
    state.cached_inv_root = Some((state.t, m.clone()));
    Ok(m)
}

/// `theta - eta V^{-1} mean(minibatch gradients)` with `V` from the pool or
/// from the minibatch itself.
pub fn masgrad_step(mut state: ChainState, model: &dyn LossModel, cfg: &ChainConfig) -> Result<ChainState> {
    check_dim(model.dim(), state.theta.len())?;
    match cfg.noise_mode {
        NoiseMode::Stochastic => {
            let batch = state.minibatch(model, cfg.batch)?;
            let direction = match cfg.v_source {
                VSource::Pool => pool_inv_root(&mut state, model, cfg)? * batch.mean(),
                VSource::Minibatch => batch_moments_with(&batch, cfg.moments)?.direction(),
            };
            let next = &state.theta - direction * cfg.eta;
            state.advance(next)
        }
        NoiseMode::Gaussian => diffusion_step(
            state,
            &MasGradDrift {
                model,
                opts: cfg.moments,
            },
            cfg,
        ),
        NoiseMode::Deterministic => {
            let inv_root = pool_inv_root(&mut state, model, cfg)?;
            let b = model.population_gradient(&state.theta);
            if b.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("population gradient"));
            }
            let next = &state.theta - inv_root * b * cfg.eta;
            state.advance(next)
        }
    }
}

/// `xi - eta h(xi) + sqrt(2 eta / beta) R g`, with `R` the drift's noise root
/// (identity when absent) and `beta = 2n / eta`.
pub fn diffusion_step(mut state: ChainState, drift: &dyn Drift, cfg: &ChainConfig) -> Result<ChainState> {
    check_dim(drift.dim(), state.theta.len())?;
    let h = drift.drift(&state.theta)?;
    let mut next = &state.theta - h * cfg.eta;
    if cfg.noise_mode != NoiseMode::Deterministic && next.iter().all(|x| x.is_finite()) {
        let g = state.gaussian(state.theta.len());
        let g = match drift.noise_root(&state.theta)? {
            Some(r) => r * g,
            None => g,
        };
        next += g * cfg.noise_scale();
    }
    state.advance(next)
}

/// What a chain runs on.
#[derive(Clone, Copy)]
pub enum Target<'a> {
    Model(&'a dyn LossModel),
    Drift(&'a dyn Drift),
    Prox(&'a ProxProblem),
}

impl Target<'_> {
    fn dim(&self) -> usize {
        match self {
            Target::Model(m) => m.dim(),
            Target::Drift(d) => d.dim(),
            Target::Prox(p) => p.dim(),
        }
    }
}

fn apply(state: ChainState, target: Target<'_>, cfg: &ChainConfig, method: Method) -> Result<ChainState> {
    match (target, method) {
        (Target::Model(m), Method::Sgd) => sgd_step(state, m, cfg),
        (Target::Model(m), Method::MasGrad) => masgrad_step(state, m, cfg),
        (Target::Model(m), Method::Gd) => sgd_step(state, m, &cfg.with_noise(NoiseMode::Deterministic)),
        (Target::Model(m), Method::MasGd) => masgrad_step(state, m, &cfg.with_noise(NoiseMode::Deterministic)),
        (Target::Model(m), Method::DiffSgd) => diffusion_step(
            state,
            &SgdDrift {
                model: m,
                opts: cfg.moments,
            },
            cfg,
        ),
        (Target::Model(m), Method::DiffMasGrad) => diffusion_step(
            state,
            &MasGradDrift {
                model: m,
                opts: cfg.moments,
            },
            cfg,
        ),
        (Target::Drift(d), Method::DiffSgd | Method::DiffMasGrad) => diffusion_step(state, d, cfg),
        (Target::Drift(d), Method::Gd | Method::MasGd) => {
            diffusion_step(state, d, &cfg.with_noise(NoiseMode::Deterministic))
        }
        (Target::Prox(p), Method::MadProx) => {
            let next = madprox_step(&state.theta, p, cfg.eta)?;
            state.advance(next)
        }
        (_, m) => Err(Error::InvalidParameter(format!("method {m} is not available for this target"))),
    }
}

/// Runs chain `chain` of an ensemble and returns the `(T+1) x p` trajectory.
pub fn run_chain_indexed(
    target: Target<'_>,
    cfg: &ChainConfig,
    init: &DVector<f64>,
    method: Method,
    chain: u64,
) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    check_dim(target.dim(), init.len())?;
    if init.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("initial point"));
    }
    let p = init.len();
    let mut traj = DMatrix::zeros(cfg.horizon + 1, p);
    traj.set_row(0, &init.transpose());
    let mut state = ChainState::new(init.clone(), cfg.seed, chain);
    for t in 0..cfg.horizon {
        state = apply(state, target, cfg, method).map_err(|e| e.at_step(t))?;
        traj.set_row(t + 1, &state.theta.transpose());
    }
    Ok(traj)
}

/// A single chain; identical to chain 0 of [`run_ensemble`].
pub fn run_chain(target: Target<'_>, cfg: &ChainConfig, init: &DVector<f64>, method: Method) -> Result<DMatrix<f64>> {
    run_chain_indexed(target, cfg, init, method, 0)
}

/// `C` chains from a shared start, run in parallel.
pub fn run_ensemble(
    target: Target<'_>,
    cfg: &ChainConfig,
    init: &DVector<f64>,
    method: Method,
    chains: usize,
) -> Result<TrajectoryEnsemble> {
    if chains == 0 {
        return Err(Error::InvalidParameter("need at least one chain".into()));
    }
    let runs: Vec<Result<DMatrix<f64>>> = (0..chains as u64)
        .into_par_iter()
        .map(|c| run_chain_indexed(target, cfg, init, method, c))
        .collect();
    let steps = cfg.horizon + 1;
    let p = init.len();
    let mut values = Vec::with_capacity(chains * steps * p);
    for run in runs {
        let traj = run?;
        for t in 0..steps {
            values.extend(traj.row(t).iter().copied());
        }
    }
    Ok(TrajectoryEnsemble {
        method: method.label().to_string(),
        chains,
        steps,
        dim: p,
        values,
    })
}

/// `chains x steps x dim` iterates, chain-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub method: String,
    chains: usize,
    steps: usize,
    dim: usize,
    values: Vec<f64>,
}

impl TrajectoryEnsemble {
    pub fn from_values(method: impl Into<String>, chains: usize, steps: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != chains * steps * dim {
            return Err(Error::DimensionMismatch {
                expected: chains * steps * dim,
                got: values.len(),
            });
        }
        Ok(TrajectoryEnsemble {
            method: method.into(),
            chains,
            steps,
            dim,
            values,
        })
    }

    pub fn chains(&self) -> usize {
        self.chains
    }

    /// Number of recorded iterates per chain, `T + 1`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, chain: usize, step: usize, coord: usize) -> f64 {
        self.values[(chain * self.steps + step) * self.dim + coord]
    }

    pub fn state(&self, chain: usize, step: usize) -> DVector<f64> {
        let start = (chain * self.steps + step) * self.dim;
        DVector::from_column_slice(&self.values[start..start + self.dim])
    }

    /// Values of one coordinate across chains at a step.
    pub fn marginal(&self, step: usize, coord: usize) -> Vec<f64> {
        (0..self.chains).map(|c| self.get(c, step, coord)).collect()
    }

    pub fn chain(&self, chain: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.steps, self.dim, |t, j| self.get(chain, t, j))
    }
}
