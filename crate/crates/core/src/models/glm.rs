use std::sync::atomic::{AtomicBool, Ordering};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use super::linear::gram_with_condition;
use super::{LossModel, Pool};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// Linear predictors beyond this magnitude are clamped for the Poisson
/// cumulant.
pub const POISSON_CLAMP: f64 = 30.0;

/// Cumulant function `c` of a canonical exponential family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cumulant {
    /// `log(1 + e^t)`
    Logistic,
    /// `e^t`
    Poisson,
    /// `t^2 / 2`
    Gaussian,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

impl Cumulant {
    pub fn value(self, t: f64) -> f64 {
        match self {
            Cumulant::Logistic => softplus(t),
            Cumulant::Poisson => t.clamp(-POISSON_CLAMP, POISSON_CLAMP).exp(),
            Cumulant::Gaussian => 0.5 * t * t,
        }
    }

    pub fn d1(self, t: f64) -> f64 {
        match self {
            Cumulant::Logistic => sigmoid(t),
            Cumulant::Poisson => t.clamp(-POISSON_CLAMP, POISSON_CLAMP).exp(),
            Cumulant::Gaussian => t,
        }
    }

    pub fn d2(self, t: f64) -> f64 {
        match self {
            Cumulant::Logistic => {
                let s = sigmoid(t);
                s * (1.0 - s)
            }
            Cumulant::Poisson => t.clamp(-POISSON_CLAMP, POISSON_CLAMP).exp(),
            Cumulant::Gaussian => 1.0,
        }
    }

    /// Negative log-likelihood of `y` at linear predictor `t`, up to a
    /// term in `y` alone. The Gaussian case keeps that term so the loss is
    /// the usual `(y - t)^2 / 2`.
    pub fn loss(self, t: f64, y: f64) -> f64 {
        match self {
            Cumulant::Gaussian => 0.5 * (y - t) * (y - t),
            c => c.value(t) - y * t,
        }
    }

    /// Bregman divergence `c(t0 + d) - c(t0) - c'(t0) d`, accurate for small `d`.
    pub fn bregman(self, t0: f64, d: f64) -> f64 {
        match self {
            Cumulant::Gaussian => 0.5 * d * d,
            Cumulant::Poisson => {
                let scale = t0.clamp(-POISSON_CLAMP, POISSON_CLAMP).exp();
                if d.abs() < 1e-2 {
                    // sum_{k>=2} d^k / k!
                    let mut term = d * d / 2.0;
                    let mut acc = term;
                    for k in 3..=8 {
                        term *= d / k as f64;
                        acc += term;
                    }
                    scale * acc
                } else {
                    scale * (d.exp_m1() - d)
                }
            }
            Cumulant::Logistic => {
                let a = sigmoid(t0);
                if d.abs() < 1e-2 {
                    // Bernoulli cumulants k_2..k_6.
                    let v = a * (1.0 - a);
                    let skew = 1.0 - 2.0 * a;
                    let k = [
                        v,
                        v * skew,
                        v * (1.0 - 6.0 * v),
                        v * skew * (1.0 - 12.0 * v),
                        v * (1.0 - 30.0 * v + 120.0 * v * v),
                    ];
                    let mut pow = d * d;
                    let mut fact = 2.0;
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate() {
                        acc += kj * pow / fact;
                        pow *= d;
                        fact *= (j + 3) as f64;
                    }
                    acc
                } else {
                    (a * d.exp_m1()).ln_1p() - a * d
                }
            }
        }
    }
}

/// Generalized linear model with canonical link over a data pool.
///
/// The minimizer is the pool empirical risk minimizer, fitted by damped
/// Newton iterations to a gradient tolerance of `1e-10`.
#[derive(Debug)]
pub struct Glm {
    name: String,
    cumulant: Cumulant,
    pool: Pool,
    truth: Option<DVector<f64>>,
    erm: DVector<f64>,
    erm_gradient: DVector<f64>,
    clamp_warned: AtomicBool,
}

impl Glm {
    pub fn new(cumulant: Cumulant, pool: Pool, truth: Option<DVector<f64>>) -> Result<Self> {
        let p = pool.dim();
        if p == 0 {
            return Err(Error::InvalidParameter("pool has no features".into()));
        }
        if let Some(t) = &truth {
            if t.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: t.len(),
                });
            }
        }
        let name = match cumulant {
            Cumulant::Logistic => "logistic",
            Cumulant::Poisson => "poisson",
            Cumulant::Gaussian => "linear",
        }
        .to_string();
        let mut glm = Glm {
            name,
            cumulant,
            pool,
            truth,
            erm: DVector::zeros(p),
            erm_gradient: DVector::zeros(p),
            clamp_warned: AtomicBool::new(false),
        };
        glm.erm = glm.fit_erm(1e-10, 200)?;
        glm.erm_gradient = glm.population_gradient(&glm.erm);
        Ok(glm)
    }

    pub fn cumulant(&self) -> Cumulant {
        self.cumulant
    }

    pub fn pool(&self) -> &Pool {
        &self.pool
    }

    /// Generating weights, when the pool was simulated.
    pub fn truth(&self) -> Option<&DVector<f64>> {
        self.truth.as_ref()
    }

    fn predictor(&self, w: &DVector<f64>, i: usize) -> f64 {
        let t = self.pool.x.row(i).transpose().dot(w);
        if self.cumulant == Cumulant::Poisson && t.abs() > POISSON_CLAMP && !self.clamp_warned.swap(true, Ordering::Relaxed) {
            log::warn!("poisson linear predictor {t:.3} clamped to +-{POISSON_CLAMP}");
        }
        t
    }

    fn fit_erm(&self, tol: f64, max_iter: usize) -> Result<DVector<f64>> {
        let p = self.pool.dim();
        let mut w = DVector::zeros(p);
        let mut loss = self.population_loss(&w);
        for _ in 0..max_iter {
            let g = self.population_gradient(&w);
            if g.amax() <= tol {
                return Ok(w);
            }
            let h = self.hessian(&w)?;
            let step = h
                .as_matrix()
                .clone()
                .cholesky()
                .ok_or(Error::HessianNotPositive {
                    index: 0,
                    min_eig: h.min_max_eigenvalues().0,
                })?
                .solve(&g);
            let mut scale = 1.0;
            loop {
                let cand = &w - &step * scale;
                let cand_loss = self.population_loss(&cand);
                if cand_loss <= loss + 1e-12 * loss.abs().max(1.0) || scale < 1e-8 {
                    w = cand;
                    loss = cand_loss;
                    break;
                }
                scale *= 0.5;
            }
        }
        let g = self.population_gradient(&w);
        if g.amax() <= tol {
            Ok(w)
        } else {
            Err(Error::InvalidParameter(format!(
                "pool risk minimizer did not converge (|b| = {:e})",
                g.amax()
            )))
        }
    }
}

impl LossModel for Glm {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.pool.dim()
    }

    fn pool_size(&self) -> usize {
        self.pool.len()
    }

    fn sample_loss(&self, theta: &DVector<f64>, i: usize) -> f64 {
        self.cumulant.loss(self.predictor(theta, i), self.pool.y[i])
    }

    fn sample_gradient(&self, theta: &DVector<f64>, i: usize) -> DVector<f64> {
        let t = self.predictor(theta, i);
        let r = self.cumulant.d1(t) - self.pool.y[i];
        self.pool.x.row(i).transpose() * r
    }

    fn hessian(&self, theta: &DVector<f64>) -> Result<SymMatrix> {
        let (n, p) = (self.pool.len(), self.pool.dim());
        let mut h = DMatrix::zeros(p, p);
        for i in 0..n {
            let xi = self.pool.x.row(i).transpose();
            let w = self.cumulant.d2(self.predictor(theta, i));
            h.ger(w, &xi, &xi, 1.0);
        }
        Ok(SymMatrix::symmetrize(h / n as f64))
    }

    fn minimizer(&self) -> Option<&DVector<f64>> {
        Some(&self.erm)
    }

    /// Mean Bregman divergence of the cumulant plus the (tiny) residual
    /// gradient term at the fitted minimizer.
    fn excess_loss(&self, theta: &DVector<f64>) -> Option<f64> {
        let n = self.pool.len();
        let mut acc = 0.0;
        for i in 0..n {
            let xi = self.pool.x.row(i);
            let t0 = xi.transpose().dot(&self.erm);
            let d = xi.transpose().dot(&(theta - &self.erm));
            acc += self.cumulant.bregman(t0, d);
        }
        Some(acc / n as f64 + self.erm_gradient.dot(&(theta - &self.erm)))
    }
}

/// Random-design least squares: Gaussian rows whose Gram matrix has
/// condition number `cond` exactly, standard-normal weights, and responses
/// with noise scale `sigma`.
pub fn random_design_linear(n_pool: usize, p: usize, cond: f64, sigma: f64, seed: u64) -> Result<Glm> {
    let x = gram_with_condition(n_pool, p, cond, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0001);
    let w = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
    let noise = DVector::from_fn(n_pool, |_, _| StandardNormal.sample(&mut rng));
    let y = &x * &w + noise * sigma;
    Glm::new(Cumulant::Gaussian, Pool::new(x, y)?, Some(w))
}

/// Logistic regression with identity-covariance Gaussian features and
/// weights drawn uniformly from `[1, 2]`.
pub fn logistic_experiment(n_pool: usize, p: usize, seed: u64) -> Result<Glm> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n_pool, p, |_, _| StandardNormal.sample(&mut rng));
    let unif = Uniform::new(1.0, 2.0).expect("valid range");
    let w = DVector::from_fn(p, |_, _| unif.sample(&mut rng));
    let y = DVector::from_fn(n_pool, |i, _| {
        let prob = sigmoid(x.row(i).transpose().dot(&w));
        if rng.random::<f64>() < prob {
            1.0
        } else {
            0.0
        }
    });
    Glm::new(Cumulant::Logistic, Pool::new(x, y)?, Some(w))
}
