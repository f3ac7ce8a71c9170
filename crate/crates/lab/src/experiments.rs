//! The experiments behind each subcommand.

use std::path::PathBuf;

use anyhow::{bail, Context};
use log::{info, warn};
use masgrad::chain::{madprox_step, run_ensemble, ChainConfig, Method, Penalty, ProxProblem, Target, TrajectoryEnsemble};
use masgrad::diagnostics::{
    condition_numbers, condition_numbers_fixed_v, empirical_distance, ensemble_summary, envelope_grid,
    log_error_series, ou_coupled_check, ConditionReport, DistanceReport, LogErrorSeries,
};
use masgrad::linalg::SymMatrix;
use masgrad::models::{
    logistic_experiment, make_prox_problem_lasso, random_design_linear, LossModel, Mixture, MixtureSpec, ShallowNet,
    ShallowNetSpec,
};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

use crate::bench::bench_linalg;
use crate::config::{Experiment, ExperimentConfig};
use crate::output::{self, real, OutputDir};
use crate::plot;

/// Salt separating the starting-point stream from the model's data stream.
const INIT_SALT: u64 = 0x1417_c0de_0000_0001;
/// Grid size for the (alpha, gamma) search.
pub const GRID_POINTS: usize = 50;
const GRID_PAD: f64 = 0.25;

/// What a finished command produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub out: PathBuf,
    pub files: Vec<String>,
    pub errors: Vec<String>,
    pub derived: serde_json::Value,
}

fn gaussian_vector(rng: &mut ChaCha8Rng, p: usize) -> DVector<f64> {
    DVector::from_fn(p, |_, _| StandardNormal.sample(rng))
}

/// Standard normal starting point of dimension `p`, scaled by `init_scale`;
/// `stream` separates repetitions.
pub fn random_init(cfg: &ExperimentConfig, p: usize, stream: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ INIT_SALT);
    rng.set_stream(stream);
    gaussian_vector(&mut rng, p) * cfg.init_scale
}

/// A model with a shared starting point and reference optimum.
pub struct Landscape {
    pub model: Box<dyn LossModel>,
    pub init: DVector<f64>,
    pub reference: Option<DVector<f64>>,
    /// Condition numbers over a grid around the run (convex models only).
    pub condition: Option<ConditionReport>,
}

pub fn build_landscape(cfg: &ExperimentConfig) -> anyhow::Result<Landscape> {
    let (model, convex): (Box<dyn LossModel>, bool) = match cfg.experiment {
        Experiment::Linear => (
            Box::new(random_design_linear(cfg.pool, cfg.dim, cfg.cond, cfg.sigma, cfg.seed)?),
            true,
        ),
        Experiment::Logistic => (Box::new(logistic_experiment(cfg.pool, cfg.dim, cfg.seed)?), true),
        Experiment::Mixture => {
            let spec = MixtureSpec::from_snr(DVector::from_vec(cfg.means.clone()), cfg.snr)?;
            (Box::new(Mixture::new(spec, cfg.pool, cfg.seed)?), false)
        }
        Experiment::ShallowNn => {
            let spec = ShallowNetSpec {
                input_dim: cfg.dim,
                hidden: cfg.hidden,
                noise: cfg.net_noise,
                weights: None,
            };
            (Box::new(ShallowNet::new(spec, cfg.pool, cfg.seed)?), false)
        }
        other => bail!("{} is not a chain-ensemble experiment", other.name()),
    };
    let p = model.dim();
    let mut init = random_init(cfg, p, 0);
    if cfg.experiment == Experiment::Mixture {
        let centre = cfg.means.iter().sum::<f64>() / cfg.means.len() as f64;
        init.add_scalar_mut(centre);
    }
    let reference = model.minimizer().cloned();
    let condition = match (&reference, convex) {
        (Some(r), true) => Some(condition_around(model.as_ref(), &init, r, cfg.seed)?),
        _ => None,
    };
    Ok(Landscape {
        model,
        init,
        reference,
        condition,
    })
}

/// Condition numbers over `GRID_POINTS` points in the widened box spanned by
/// `init` and `reference`, plus those two points.
pub fn condition_around(
    model: &dyn LossModel,
    init: &DVector<f64>,
    reference: &DVector<f64>,
    seed: u64,
) -> anyhow::Result<ConditionReport> {
    let corners = DMatrix::from_rows(&[init.transpose(), reference.transpose()]);
    let mut grid = envelope_grid(&[corners], GRID_POINTS, GRID_PAD, seed ^ INIT_SALT)?;
    grid.push(init.clone());
    grid.push(reference.clone());
    Ok(condition_numbers(model, &grid)?)
}

/// The configured step size, or `1/gamma` (adjusted methods) and
/// `1/lambda_max(H)` (plain methods) from the condition report.
pub fn step_size(cfg: &ExperimentConfig, method: Method, condition: Option<&ConditionReport>) -> anyhow::Result<f64> {
    if let Some(eta) = cfg.eta {
        return Ok(eta);
    }
    let c = condition.context("no eta configured and no smoothness constant available for this experiment")?;
    Ok(if method.is_adjusted() {
        1.0 / c.gamma
    } else {
        1.0 / c.hessian_max
    })
}

pub fn chain_config(cfg: &ExperimentConfig, eta: f64, seed: u64) -> anyhow::Result<ChainConfig> {
    let mut c = ChainConfig::new(eta, cfg.batch, cfg.steps, seed)?;
    c.noise_mode = cfg.noise_mode.into();
    c.v_source = cfg.v_source.into();
    c.cache_interval = cfg.cache_interval;
    c.moments.ridge = cfg.ridge.into();
    Ok(c)
}

/// Ensembles of every configured method from the shared start.
#[derive(Debug)]
pub struct Panel {
    pub ensembles: Vec<TrajectoryEnsemble>,
    /// `(method, eta, beta)` for every method that was attempted.
    pub steps: Vec<(Method, f64, f64)>,
    pub errors: Vec<String>,
}

pub fn run_panel(cfg: &ExperimentConfig, land: &Landscape) -> anyhow::Result<Panel> {
    let mut panel = Panel {
        ensembles: Vec::new(),
        steps: Vec::new(),
        errors: Vec::new(),
    };
    for method in cfg.parsed_methods()? {
        let eta = step_size(cfg, method, land.condition.as_ref())?;
        let cc = chain_config(cfg, eta, cfg.seed)?;
        panel.steps.push((method, eta, cc.beta()));
        info!("{}: {} chains x {} steps, eta = {eta}", method, cfg.chains, cfg.steps);
        match run_ensemble(Target::Model(land.model.as_ref()), &cc, &land.init, method, cfg.chains) {
            Ok(e) => panel.ensembles.push(e),
            Err(e) => {
                warn!("{method} failed: {e}");
                panel.errors.push(format!("{method}: {e}"));
            }
        }
    }
    Ok(panel)
}

/// Distances for every pair of ensembles at each recorded step in `steps`.
pub fn pairwise_distances(ensembles: &[TrajectoryEnsemble], steps: &[usize]) -> anyhow::Result<Vec<(String, DistanceReport)>> {
    let mut out = Vec::new();
    for (i, a) in ensembles.iter().enumerate() {
        for b in &ensembles[i + 1..] {
            for &t in steps.iter().filter(|&&t| t < a.steps().min(b.steps())) {
                out.push((format!("{}|{}", a.method, b.method), empirical_distance(a, b, t)?));
            }
        }
    }
    Ok(out)
}

pub fn log_errors(
    ensembles: &[TrajectoryEnsemble],
    reference: &DVector<f64>,
    window: (usize, usize),
) -> anyhow::Result<Vec<(String, LogErrorSeries)>> {
    ensembles
        .iter()
        .map(|e| Ok((e.method.clone(), log_error_series(e, reference, window)?)))
        .collect()
}

pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<RunOutcome> {
    cfg.validate()?;
    let mut out = OutputDir::create(&cfg.out)?;
    let (derived, errors) = match cfg.experiment {
        Experiment::Linear | Experiment::Logistic | Experiment::Mixture => ensemble_experiment(cfg, &mut out)?,
        Experiment::ShallowNn => shallow_experiment(cfg, &mut out)?,
        Experiment::Lasso => lasso_experiment(cfg, &mut out)?,
        Experiment::BenchLinalg => bench_experiment(cfg, &mut out)?,
        Experiment::BoundCheck => bound_experiment(cfg, &mut out)?,
    };
    output::write_manifest(&mut out, cfg, derived.clone(), &errors)?;
    Ok(RunOutcome {
        out: out.root().to_path_buf(),
        files: out.files().to_vec(),
        errors,
        derived,
    })
}

fn condition_json(c: &ConditionReport) -> serde_json::Value {
    json!({
        "alpha": c.alpha,
        "gamma": c.gamma,
        "kappa_gd": c.kappa_gd,
        "kappa_masgrad": c.kappa_masgrad,
        "hessian_min": c.hessian_min,
        "hessian_max": c.hessian_max,
        "grid_size": c.grid_size,
    })
}

fn vector_json(v: &DVector<f64>) -> serde_json::Value {
    json!(v.iter().copied().collect::<Vec<f64>>())
}

fn ensemble_experiment(cfg: &ExperimentConfig, out: &mut OutputDir) -> anyhow::Result<(serde_json::Value, Vec<String>)> {
    let land = build_landscape(cfg)?;
    let panel = run_panel(cfg, &land)?;
    let mut errors = panel.errors.clone();
    output::write_trajectories(out, &panel.ensembles)?;

    let mut notes = Vec::new();
    let summaries = if cfg.chains >= 2 {
        let s = panel
            .ensembles
            .iter()
            .map(|e| Ok((e.method.clone(), ensemble_summary(e)?)))
            .collect::<anyhow::Result<Vec<_>>>()?;
        output::write_summary(out, &s)?;
        output::write_distances(out, &pairwise_distances(&panel.ensembles, &cfg.distance_steps)?)?;
        s
    } else {
        notes.push("summary and distances need at least two chains; skipped");
        Vec::new()
    };

    let mut slopes = serde_json::Map::new();
    let mut logerr = Vec::new();
    match (&land.reference, cfg.steps) {
        (Some(r), s) if s >= 1 => {
            let window = cfg.slope_window.unwrap_or((0, cfg.steps));
            logerr = log_errors(&panel.ensembles, r, window)?;
            output::write_logerr(out, &logerr)?;
            for (m, s) in &logerr {
                slopes.insert(m.clone(), json!(s.slope));
            }
        }
        _ => notes.push("log-error series need a reference point and at least one step; skipped"),
    }

    if cfg.plots {
        if let Err(e) = plot::summary_plots(out, &summaries).and_then(|_| plot::logerr_plot(out, &logerr)) {
            errors.push(format!("plots: {e:#}"));
        }
    }

    let steps: Vec<_> = panel
        .steps
        .iter()
        .map(|(m, eta, beta)| json!({"method": m.label(), "eta": eta, "beta": beta}))
        .collect();
    let derived = json!({
        "model": land.model.name(),
        "dim": land.model.dim(),
        "init": vector_json(&land.init),
        "reference": land.reference.as_ref().map(vector_json),
        "condition": land.condition.as_ref().map(condition_json),
        "step_sizes": steps,
        "log_error_slopes": slopes,
        "notes": notes,
    });
    Ok((derived, errors))
}

/// Final population losses of a repeated two-method comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub methods: Vec<Method>,
    /// `losses[r][m]`: mean over chains of the population loss at the last step.
    pub losses: Vec<Vec<f64>>,
    /// Repetitions where the first method's loss is strictly lower than the second's.
    pub wins: usize,
    pub beta: f64,
    pub errors: Vec<String>,
}

impl SweepResult {
    pub fn win_fraction(&self) -> f64 {
        self.wins as f64 / self.losses.len() as f64
    }
}

/// Seed of repetition `r`, decorrelated from its neighbours.
pub fn repetition_seed(seed: u64, r: usize) -> u64 {
    seed ^ (r as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

pub fn shallow_sweep(cfg: &ExperimentConfig) -> anyhow::Result<SweepResult> {
    let methods = cfg.parsed_methods()?;
    if methods.len() != 2 {
        bail!("methods: the sweep compares exactly two methods, got {}", methods.len());
    }
    let spec = ShallowNetSpec {
        input_dim: cfg.dim,
        hidden: cfg.hidden,
        noise: cfg.net_noise,
        weights: None,
    };
    let net = ShallowNet::new(spec, cfg.pool, cfg.seed)?;
    let eta = cfg.eta.context("eta: the sweep needs a fixed step size")?;
    let mut losses = Vec::with_capacity(cfg.repetitions);
    let mut errors = Vec::new();
    let mut beta = f64::NAN;
    for r in 0..cfg.repetitions {
        let init = random_init(cfg, net.dim(), r as u64);
        let cc = chain_config(cfg, eta, repetition_seed(cfg.seed, r))?;
        beta = cc.beta();
        let mut row = Vec::with_capacity(2);
        for &m in &methods {
            let loss = match run_ensemble(Target::Model(&net), &cc, &init, m, cfg.chains) {
                Ok(e) => {
                    let last = e.steps() - 1;
                    (0..e.chains()).map(|c| net.population_loss(&e.state(c, last))).sum::<f64>() / e.chains() as f64
                }
                Err(e) => {
                    errors.push(format!("repetition {r}, {m}: {e}"));
                    f64::INFINITY
                }
            };
            row.push(loss);
        }
        losses.push(row);
    }
    let wins = losses.iter().filter(|l| l[0] < l[1]).count();
    Ok(SweepResult {
        methods,
        losses,
        wins,
        beta,
        errors,
    })
}

fn shallow_experiment(cfg: &ExperimentConfig, out: &mut OutputDir) -> anyhow::Result<(serde_json::Value, Vec<String>)> {
    let sweep = shallow_sweep(cfg)?;
    let mut w = out.csv("sweep.csv", &["repetition", "method", "final_loss"])?;
    for (r, row) in sweep.losses.iter().enumerate() {
        for (m, loss) in sweep.methods.iter().zip(row) {
            w.write_record([r.to_string(), m.label().to_string(), real(*loss)])?;
        }
    }
    w.flush()?;
    let derived = json!({
        "beta": sweep.beta,
        "compared": [sweep.methods[0].label(), sweep.methods[1].label()],
        "wins": sweep.wins,
        "repetitions": sweep.losses.len(),
        "win_fraction": sweep.win_fraction(),
        "published_win_fraction": 0.9,
    });
    Ok((derived, sweep.errors))
}

/// A sparse regression instance for MadProx.
pub struct LassoSetup {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub problem: ProxProblem,
    /// Strong convexity and smoothness of the smooth part in the `V` norm.
    pub alpha: f64,
    pub gamma: f64,
    pub eta: f64,
    pub init: DVector<f64>,
}

/// Gaussian design, alternating sparse truth, `V = diag(X^T X / N)`.
pub fn lasso_setup(cfg: &ExperimentConfig) -> anyhow::Result<LassoSetup> {
    let (n, p) = (cfg.pool, cfg.dim);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
    let truth = DVector::from_fn(p, |j, _| if j % 2 == 0 { 1.0 / (1 + j / 2) as f64 } else { 0.0 });
    let noise = gaussian_vector(&mut rng, n);
    let y = &x * &truth + noise * cfg.sigma;
    let h = SymMatrix::symmetrize(x.transpose() * &x / n as f64);
    let v = SymMatrix::from_diagonal(&h.as_matrix().diagonal());
    let c = condition_numbers_fixed_v(&v, std::slice::from_ref(&h))?;
    let eta = cfg.eta.unwrap_or(1.0 / c.gamma);
    let problem = make_prox_problem_lasso(x.clone(), y.clone(), cfg.lambda, v)?;
    Ok(LassoSetup {
        x,
        y,
        problem,
        alpha: c.alpha,
        gamma: c.gamma,
        eta,
        init: random_init(cfg, p, 0),
    })
}

/// Iterates MadProx until the update stalls at round-off level.
pub fn madprox_limit(problem: &ProxProblem, eta: f64, init: &DVector<f64>, max_iter: usize) -> anyhow::Result<DVector<f64>> {
    let mut w = init.clone();
    for _ in 0..max_iter {
        let next = madprox_step(&w, problem, eta)?;
        let done = (&next - &w).amax() <= 1e-15 * next.amax().max(1.0);
        w = next;
        if done {
            return Ok(w);
        }
    }
    Ok(w)
}

fn lasso_experiment(cfg: &ExperimentConfig, out: &mut OutputDir) -> anyhow::Result<(serde_json::Value, Vec<String>)> {
    let setup = lasso_setup(cfg)?;
    let mut errors = Vec::new();
    let methods = cfg.parsed_methods()?;
    if methods != [Method::MadProx] {
        bail!("methods: the lasso experiment runs MadProx only");
    }
    let cc = chain_config(cfg, setup.eta, cfg.seed)?;
    let ensembles = match run_ensemble(Target::Prox(&setup.problem), &cc, &setup.init, Method::MadProx, cfg.chains) {
        Ok(e) => vec![e],
        Err(e) => {
            errors.push(format!("MadProx: {e}"));
            Vec::new()
        }
    };
    output::write_trajectories(out, &ensembles)?;
    let limit = madprox_limit(&setup.problem, setup.eta, &setup.init, 100_000)?;
    let best = setup.problem.objective(&limit);
    if let Some(e) = ensembles.first() {
        let mut w = out.csv("objective.csv", &["step", "objective", "excess"])?;
        for t in 0..e.steps() {
            let f = setup.problem.objective(&e.state(0, t));
            w.write_record([t.to_string(), real(f), real(f - best)])?;
        }
        w.flush()?;
    }
    let penalty = match setup.problem.penalty() {
        Penalty::L1(l) => l,
        Penalty::Zero => 0.0,
    };
    let derived = json!({
        "alpha": setup.alpha,
        "gamma": setup.gamma,
        "eta": setup.eta,
        "lambda": penalty,
        "init": vector_json(&setup.init),
        "limit": vector_json(&limit),
        "limit_objective": best,
    });
    Ok((derived, errors))
}

fn bench_experiment(cfg: &ExperimentConfig, out: &mut OutputDir) -> anyhow::Result<(serde_json::Value, Vec<String>)> {
    let rows = bench_linalg(&cfg.dims, &cfg.counts, cfg.seed)?;
    let mut w = out.csv("bench.csv", &["d", "n", "stream_seconds", "dense_seconds", "max_rel_error"])?;
    for r in &rows {
        w.write_record([
            r.d.to_string(),
            r.n.to_string(),
            real(r.stream_seconds),
            real(r.dense_seconds),
            real(r.max_rel_error),
        ])?;
    }
    w.flush()?;
    let worst = rows.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    Ok((json!({ "max_rel_error": worst }), Vec::new()))
}

fn bound_experiment(cfg: &ExperimentConfig, out: &mut OutputDir) -> anyhow::Result<(serde_json::Value, Vec<String>)> {
    let eta = cfg.eta.context("eta: the bound check needs a fixed step size")?;
    let r = ou_coupled_check(cfg.init_scale, eta, cfg.beta, cfg.steps, cfg.refine, cfg.chains, cfg.seed)?;
    let mut w = out.csv(
        "bound.csv",
        &["eta", "steps", "horizon", "refine", "chains", "drift_bound", "empirical_w2", "bound"],
    )?;
    w.write_record([
        real(eta),
        cfg.steps.to_string(),
        real(eta * cfg.steps as f64),
        cfg.refine.to_string(),
        cfg.chains.to_string(),
        real(r.params.drift_bound),
        real(r.empirical_w2),
        real(r.bound),
    ])?;
    w.flush()?;
    let errors = if r.empirical_w2 < r.bound {
        Vec::new()
    } else {
        vec![format!("empirical W2 {} exceeds the bound {}", r.empirical_w2, r.bound)]
    };
    Ok((json!({ "empirical_w2": r.empirical_w2, "bound": r.bound }), errors))
}
