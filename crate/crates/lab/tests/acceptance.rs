//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines are always printed. The
//! process fails if any criterion fails that is not listed in `KNOWN_FAILURES`.

use std::path::Path;
use std::time::Instant;

use masgrad::chain::{run_ensemble, ChainConfig, Method, NoiseMode, Target};
use masgrad::diagnostics::{condition_numbers, empirical_distance, ks_critical_value};
use masgrad::linalg::{rel_frobenius, InverseRootState, SymMatrix};
use masgrad::models::{
    central_difference, gram_with_condition, logistic_experiment, make_prox_problem_lasso, random_design_linear,
    FixedDesignLinear, LossModel, Mixture, MixtureSpec, ShallowNet, ShallowNetSpec,
};
use masgrad::moments::{ls_gradient_covariance, self_normalized, OnlineLsCovState};
use masgrad_lab::config::{Experiment, ExperimentConfig, NoiseArg};
use masgrad_lab::experiments::{build_landscape, chain_config, lasso_setup, madprox_limit, run_experiment};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Criteria that cannot be met by a faithful implementation, with the reason.
const KNOWN_FAILURES: &[(usize, &str)] = &[(
    7,
    "with kappa_GD = 30.98 the contraction factors are 1 - 1/sqrt(kappa) and 1 - 1/kappa, \
     whose log ratio is about 6, above the [1.8, 3.0] band",
)];

type Check = Box<dyn Fn() -> Outcome>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn c1_inverse_root() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let d = rng.random_range(1..=20);
        let n = rng.random_range(1..=200);
        let v = gaussian_matrix(&mut rng, n, d);
        let mut state = InverseRootState::new(d);
        let mut gram = DMatrix::<f64>::identity(d, d);
        for i in 0..n {
            let vi = v.row(i).transpose();
            state.absorb(&vi).unwrap();
            gram.ger(1.0, &vi, &vi, 1.0);
        }
        worst = worst.max(rel_frobenius(&state.gram_inverse().unwrap(), &gram));
    }
    outcome(worst <= 1e-8, format!("max relative error {worst:.3e} over 200 instances"))
}

fn c2_self_normalized() -> Outcome {
    let hand = self_normalized(&DMatrix::from_column_slice(2, 1, &[0.0, 2.0]), &DVector::zeros(1)).unwrap();
    let hand_ok = (hand.lhs[0] - 1.0).abs() <= 1e-12 && hand.residual() <= 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let d = rng.random_range(1..=6);
        let n = rng.random_range(d + 2..=100);
        let x = gaussian_matrix(&mut rng, n, d).add_scalar(0.3);
        let mu = DVector::from_fn(d, |_, _| rng.random_range(-0.5..0.5));
        let r = self_normalized(&x, &mu).unwrap();
        worst = worst.max(r.residual() / r.lhs.amax().max(1.0));
    }
    outcome(
        hand_ok && worst <= 1e-10,
        format!("hand case lhs {:.15}, max residual {worst:.3e} over 500 instances", hand.lhs[0]),
    )
}

fn c3_online_ls() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let p = rng.random_range(1..=6);
        let t = rng.random_range(2..=200);
        let x = gaussian_matrix(&mut rng, t, p);
        let y = DVector::from_fn(t, |_, _| StandardNormal.sample(&mut rng));
        let mut state = OnlineLsCovState::new(p).unwrap();
        for i in 0..t {
            state.absorb(&x.row(i).transpose(), y[i]).unwrap();
        }
        for _ in 0..5 {
            let theta = gaussian_matrix(&mut rng, p, 1).column(0).into_owned();
            let got = state.query(&theta).unwrap();
            let want = ls_gradient_covariance(&x, &y, &theta).unwrap();
            worst = worst.max(rel_frobenius(got.as_matrix(), want.as_matrix()));
        }
    }
    outcome(worst <= 1e-10, format!("max relative error {worst:.3e} over 250 queries"))
}

fn c4_condition_acceleration() -> Outcome {
    let x = gram_with_condition(500, 4, 30.98, 104).unwrap();
    let model = FixedDesignLinear::new(x, 1.0, DVector::from_element(4, 1.0), 104).unwrap();
    let grid = vec![DVector::zeros(4), DVector::from_element(4, 1.0)];
    let r = condition_numbers(&model, &grid).unwrap();
    let want = 30.98f64.sqrt();
    let rel = (r.kappa_masgrad - want).abs() / want;
    outcome(
        rel <= 1e-6,
        format!("kappa_GD {:.6}, kappa_MasGrad {:.9} (sqrt 30.98 = {want:.9}, rel {rel:.2e})", r.kappa_gd, r.kappa_masgrad),
    )
}

fn c5_noiseless_contraction() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for experiment in [Experiment::Linear, Experiment::Logistic] {
        let cfg = ExperimentConfig::defaults(experiment);
        let land = build_landscape(&cfg).unwrap();
        let c = land.condition.as_ref().unwrap();
        let wstar = land.reference.as_ref().unwrap();
        let mut cc = ChainConfig::new(1.0 / c.gamma, cfg.batch, 200, cfg.seed).unwrap();
        cc.noise_mode = NoiseMode::Deterministic;
        let e = run_ensemble(Target::Model(land.model.as_ref()), &cc, &land.init, Method::MasGd, 1).unwrap();
        let h_max = land.model.hessian(wstar).unwrap().min_max_eigenvalues().1;
        let tau = h_max * (64.0 * f64::EPSILON * wstar.amax().max(1.0)).powi(2);
        let rate = 1.0 - c.alpha / c.gamma;
        let gaps: Vec<f64> = (0..e.steps()).map(|t| land.model.excess_loss(&e.state(0, t)).unwrap()).collect();
        let violations = gaps.windows(2).filter(|w| w[1] > rate * w[0] + tau).count();
        pass &= violations == 0;
        details.push(format!(
            "{}: rate {rate:.4}, gap {:.2e} -> {:.2e}, {violations} violations",
            experiment.name(),
            gaps[0],
            gaps[gaps.len() - 1]
        ));
    }
    outcome(pass, details.join("; "))
}

fn c6_madprox_bound() -> Outcome {
    let cfg = ExperimentConfig::defaults(Experiment::Lasso);
    let s = lasso_setup(&cfg).unwrap();
    let wstar = madprox_limit(&s.problem, s.eta, &s.init, 100_000).unwrap();

    let p = s.x.ncols();
    let gram = SymMatrix::symmetrize(s.x.transpose() * &s.x / s.x.nrows() as f64);
    let ista = make_prox_problem_lasso(s.x.clone(), s.y.clone(), cfg.lambda, SymMatrix::identity(p)).unwrap();
    let ista_limit = madprox_limit(&ista, 1.0 / gram.min_max_eigenvalues().1, &s.init, 1_000_000).unwrap();
    let oracle_gap = (&wstar - &ista_limit).amax();

    let best = s.problem.objective(&wstar);
    let eps = 1e-6;
    let d0 = s.problem.v_norm_sq(&(&s.init - &wstar));
    let budget = ((s.gamma / s.alpha) * (s.alpha * d0 / (2.0 * eps) + 1.0).ln()).ceil() as usize;
    let mut w = s.init.clone();
    let mut prev = s.problem.objective(&w);
    let mut reached = None;
    let mut monotone = true;
    for k in 1..=budget.max(1) {
        w = masgrad::chain::madprox_step(&w, &s.problem, s.eta).unwrap();
        let f = s.problem.objective(&w);
        monotone &= f <= prev + 4.0 * f64::EPSILON * prev.abs();
        prev = f;
        if reached.is_none() && f - best <= eps {
            reached = Some(k);
        }
    }
    outcome(
        reached.is_some() && monotone && oracle_gap <= 1e-6,
        format!(
            "reached eps at iteration {reached:?} of budget {budget}, monotone {monotone}, |w* - ISTA| {oracle_gap:.1e}"
        ),
    )
}

fn linear_cfg(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(Experiment::Linear);
    cfg.out = out.to_path_buf();
    cfg
}

fn c7_cfg(out: &Path) -> ExperimentConfig {
    let mut cfg = linear_cfg(out);
    cfg.noise_mode = NoiseArg::Deterministic;
    cfg.methods = vec!["GD".into(), "MasGD".into()];
    cfg.slope_window = Some((0, cfg.steps));
    cfg
}

fn c7_slope(out: &Path) -> Outcome {
    let r = run_experiment(&c7_cfg(out)).unwrap();
    let gd = r.derived["log_error_slopes"]["GD"].as_f64().unwrap();
    let mas = r.derived["log_error_slopes"]["MasGD"].as_f64().unwrap();
    let ratio = mas / gd;
    outcome(
        (1.8..=3.0).contains(&ratio),
        format!("slopes GD {gd:.5}, MasGD {mas:.5}, ratio {ratio:.3} (band [1.8, 3.0])"),
    )
}

fn c8_cfg(out: &Path) -> ExperimentConfig {
    let mut cfg = linear_cfg(out);
    cfg.methods = vec!["MasGrad".into(), "diff_MasGrad".into(), "diff_SGD".into()];
    cfg
}

fn c8_surrogate(out: &Path) -> Outcome {
    let cfg = c8_cfg(out);
    let land = build_landscape(&cfg).unwrap();
    let c = land.condition.as_ref().unwrap();
    run_experiment(&cfg).unwrap();
    // Rebuild the ensembles from the same configuration for the cell counts.
    let run = |m: Method, eta: f64| {
        let cc = chain_config(&cfg, eta, cfg.seed).unwrap();
        run_ensemble(Target::Model(land.model.as_ref()), &cc, &land.init, m, cfg.chains).unwrap()
    };
    let mas = run(Method::MasGrad, 1.0 / c.gamma);
    let diff_mas = run(Method::DiffMasGrad, 1.0 / c.gamma);
    let diff_sgd = run(Method::DiffSgd, 1.0 / c.hessian_max);
    let crit = ks_critical_value(0.05, cfg.chains, cfg.chains);
    let count = |b: &masgrad::chain::TrajectoryEnsemble, below: bool| {
        cfg.distance_steps
            .iter()
            .flat_map(|&t| empirical_distance(&mas, b, t).unwrap().ks)
            .filter(|&k| (k < crit) == below)
            .count()
    };
    let close = count(&diff_mas, true);
    let apart = count(&diff_sgd, false);
    outcome(
        close >= 10 && apart >= 6,
        format!("critical {crit:.4}; MasGrad|diff_MasGrad below in {close}/12, MasGrad|diff_SGD above in {apart}/12"),
    )
}

fn c9_one_step() -> Outcome {
    let model = logistic_experiment(500, 4, 1).unwrap();
    let theta = model.minimizer().unwrap() + DVector::from_element(4, 0.5);
    let cc = ChainConfig::new(0.2, 25, 1, 109).unwrap();
    let draws = 100_000;
    let sample = |m: Method| {
        let e = run_ensemble(Target::Model(&model), &cc, &theta, m, draws).unwrap();
        DMatrix::from_fn(draws, 4, |c, j| e.get(c, 1, j))
    };
    let a = sample(Method::MasGrad);
    let b = sample(Method::DiffMasGrad);
    let stats = |x: &DMatrix<f64>| {
        let n = x.nrows() as f64;
        let mean = x.row_mean().transpose();
        let centred = DMatrix::from_fn(x.nrows(), 4, |i, j| x[(i, j)] - mean[j]);
        let mut out = Vec::new();
        for j in 0..4 {
            let col = centred.column(j);
            out.push((mean[j], (col.norm_squared() / (n - 1.0) / n).sqrt()));
        }
        for i in 0..4 {
            for j in i..4 {
                let prod: Vec<f64> = (0..x.nrows()).map(|r| centred[(r, i)] * centred[(r, j)]).collect();
                let m = prod.iter().sum::<f64>() / n;
                let var = prod.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
                out.push((m, (var / n).sqrt()));
            }
        }
        out
    };
    let (sa, sb) = (stats(&a), stats(&b));
    let worst = sa
        .iter()
        .zip(&sb)
        .map(|((ma, sea), (mb, seb))| (ma - mb).abs() / (sea * sea + seb * seb).sqrt())
        .fold(0.0, f64::max);
    outcome(
        worst <= 4.0,
        format!("largest standardized difference {worst:.2} over 4 means and 10 covariances"),
    )
}

fn c10_gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let mixture = Mixture::new(MixtureSpec::from_snr(DVector::from_vec(vec![1.0, 2.0, 3.0]), 3.3).unwrap(), 200, 1).unwrap();
    let net = ShallowNet::new(ShallowNetSpec::default(), 100, 1).unwrap();
    let models: Vec<(&str, Box<dyn LossModel>)> = vec![
        ("linear", Box::new(random_design_linear(200, 4, 30.98, 1.0, 1).unwrap())),
        ("logistic", Box::new(logistic_experiment(200, 4, 1).unwrap())),
        ("mixture", Box::new(mixture)),
        ("shallow-nn", Box::new(net.clone())),
    ];
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (name, m) in &models {
        let mut points = 0;
        while points < 20 {
            let theta = DVector::from_fn(m.dim(), |_, _| StandardNormal.sample(&mut rng)) + DVector::from_element(m.dim(), 1.0);
            let i = rng.random_range(0..m.pool_size());
            if *name == "shallow-nn" && net.kink_margin(&theta, i) < 1e-3 {
                continue;
            }
            let g = m.sample_gradient(&theta, i);
            let fd = central_difference(|t| m.sample_loss(t, i), &theta, 1e-5);
            worst = worst.max((&g - fd).amax() / g.amax().max(1.0));
            points += 1;
            checked += 1;
        }
    }
    outcome(worst <= 1e-5, format!("max relative error {worst:.2e} over {checked} points"))
}

fn c11_bound() -> Outcome {
    let cfg = ExperimentConfig::defaults(Experiment::BoundCheck);
    let eta = cfg.eta.unwrap();
    let steps = (1.0 / eta).round() as usize;
    let r = masgrad::diagnostics::ou_coupled_check(cfg.init_scale, eta, cfg.beta, steps, cfg.refine, cfg.chains, cfg.seed)
        .unwrap();
    outcome(
        r.empirical_w2 < r.bound,
        format!("empirical W2 {:.3e} < bound {:.3e} (k = {steps}, eta = {eta})", r.empirical_w2, r.bound),
    )
}

fn c12_cfg(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(Experiment::ShallowNn);
    cfg.out = out.to_path_buf();
    cfg
}

fn c12_sweep(out: &Path) -> Outcome {
    let r = run_experiment(&c12_cfg(out)).unwrap();
    let wins = r.derived["wins"].as_u64().unwrap();
    let reps = r.derived["repetitions"].as_u64().unwrap();
    let frac = wins as f64 / reps as f64;
    outcome(
        r.errors.is_empty() && frac >= 0.7,
        format!("diff_MasGrad beat SGD in {wins}/{reps} repetitions ({:.0}%), {} run errors", frac * 100.0, r.errors.len()),
    )
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn c13_determinism(first: &Path, second: &Path) -> Outcome {
    run_experiment(&c7_cfg(&second.join("c7"))).unwrap();
    run_experiment(&c8_cfg(&second.join("c8"))).unwrap();
    run_experiment(&c12_cfg(&second.join("c12"))).unwrap();
    let mut compared = 0;
    let mut differing = Vec::new();
    for sub in ["c7", "c8", "c12"] {
        let a = csv_bytes(&first.join(sub));
        let b = csv_bytes(&second.join(sub));
        if a.len() != b.len() || a.is_empty() {
            differing.push(format!("{sub}: file sets differ"));
        }
        for ((na, ba), (_, bb)) in a.iter().zip(&b) {
            compared += 1;
            if ba != bb {
                differing.push(format!("{sub}/{na}"));
            }
        }
    }
    outcome(
        differing.is_empty(),
        format!("{compared} CSV files compared, differing: {differing:?}"),
    )
}

fn main() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let (a, b) = (first.path().to_path_buf(), second.path().to_path_buf());
    let criteria: Vec<(usize, &str, Check)> = vec![
        (1, "streaming inverse root matches dense Gram", Box::new(c1_inverse_root)),
        (2, "self-normalized identity", Box::new(c2_self_normalized)),
        (3, "online least-squares covariance", Box::new(c3_online_ls)),
        (4, "condition-number acceleration", Box::new(c4_condition_acceleration)),
        (5, "noiseless contraction", Box::new(c5_noiseless_contraction)),
        (6, "MadProx iteration bound", Box::new(c6_madprox_bound)),
        (7, "acceleration slope ratio", Box::new({
            let a = a.clone();
            move || c7_slope(&a.join("c7"))
        })),
        (8, "surrogate distribution closeness", Box::new({
            let a = a.clone();
            move || c8_surrogate(&a.join("c8"))
        })),
        (9, "one-step conditional moments", Box::new(c9_one_step)),
        (10, "gradient finite differences", Box::new(c10_gradients)),
        (11, "coupled-chain W2 bound", Box::new(c11_bound)),
        (12, "shallow-net sweep", Box::new({
            let a = a.clone();
            move || c12_sweep(&a.join("c12"))
        })),
        (13, "byte-identical reruns", Box::new(move || c13_determinism(&a, &b))),
    ];

    let mut unexpected = Vec::new();
    println!("\nacceptance criteria");
    for (id, name, check) in &criteria {
        let start = Instant::now();
        let o = check();
        let secs = start.elapsed().as_secs_f64();
        let known = KNOWN_FAILURES.iter().find(|(k, _)| k == id);
        let tag = match (o.pass, known) {
            (true, _) => "PASS",
            (false, Some(_)) => "FAIL (known)",
            (false, None) => "FAIL",
        };
        println!("criterion {id:>2} {tag:<12} {name}: {} [{secs:.1}s]", o.detail);
        if let (false, Some((_, why))) = (o.pass, known) {
            println!("              reason: {why}");
        }
        if !o.pass && known.is_none() {
            unexpected.push(*id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
