//! Loss landscapes backed by a finite data pool.
//!
//! Every model treats its pool of `N` samples as the population: `b`, `Sigma`
//! and `H` are exact pool averages, and minibatches are bootstrapped from it.

mod glm;
mod lasso;
mod linear;
mod mixture;
mod pool;
mod shallow;

pub use glm::{logistic_experiment, random_design_linear, Cumulant, Glm};
pub use lasso::make_prox_problem_lasso;
pub use linear::{FixedDesignLinear, gram_with_condition};
pub use mixture::{Mixture, MixtureSpec};
pub use pool::{load_pool_csv, Pool};
pub use shallow::{ShallowNet, ShallowNetSpec};

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::linalg::SymMatrix;
use crate::moments::{pool_moments_from_batch, GradientBatch, MomentEstimate, MomentOptions};

/// A per-sample loss `l(theta, z_i)` over a fixed pool.
pub trait LossModel: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn pool_size(&self) -> usize;

    fn sample_loss(&self, theta: &DVector<f64>, i: usize) -> f64;

    fn sample_gradient(&self, theta: &DVector<f64>, i: usize) -> DVector<f64>;

    /// Hessian of the population loss.
    fn hessian(&self, theta: &DVector<f64>) -> Result<SymMatrix>;

    /// Known minimizer (or reference point) used for error curves.
    fn minimizer(&self) -> Option<&DVector<f64>> {
        None
    }

    /// `L(theta) - L(theta_*)` relative to [`minimizer`](Self::minimizer).
    ///
    /// Models override this with a cancellation-free form where one exists.
    fn excess_loss(&self, theta: &DVector<f64>) -> Option<f64> {
        self.minimizer()
            .map(|m| self.population_loss(theta) - self.population_loss(m))
    }

    fn population_loss(&self, theta: &DVector<f64>) -> f64 {
        let n = self.pool_size();
        (0..n).map(|i| self.sample_loss(theta, i)).sum::<f64>() / n as f64
    }

    /// `b(theta)`, the pool mean of the per-sample gradients.
    fn population_gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        let n = self.pool_size();
        let mut acc = DVector::zeros(self.dim());
        for i in 0..n {
            acc += self.sample_gradient(theta, i);
        }
        acc / n as f64
    }

    /// Per-sample gradients of the whole pool as rows.
    fn pool_gradients(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let (n, p) = (self.pool_size(), self.dim());
        let mut m = DMatrix::zeros(n, p);
        for i in 0..n {
            m.set_row(i, &self.sample_gradient(theta, i).transpose());
        }
        m
    }

    /// Exact pool moments `b`, `Sigma` (1/N) and `V^{-1}` at `theta`.
    fn moments(&self, theta: &DVector<f64>, opts: MomentOptions) -> Result<MomentEstimate> {
        pool_moments_from_batch(&GradientBatch::new(self.pool_gradients(theta))?, opts)
    }
}

/// Pool moments of `model` at `theta` with the default (faithful) options.
pub fn pool_population_moments(model: &dyn LossModel, theta: &DVector<f64>) -> Result<MomentEstimate> {
    model.moments(theta, MomentOptions::default())
}

impl<M: LossModel + ?Sized> LossModel for Box<M> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn pool_size(&self) -> usize {
        (**self).pool_size()
    }
    fn sample_loss(&self, theta: &DVector<f64>, i: usize) -> f64 {
        (**self).sample_loss(theta, i)
    }
    fn sample_gradient(&self, theta: &DVector<f64>, i: usize) -> DVector<f64> {
        (**self).sample_gradient(theta, i)
    }
    fn hessian(&self, theta: &DVector<f64>) -> Result<SymMatrix> {
        (**self).hessian(theta)
    }
    fn minimizer(&self) -> Option<&DVector<f64>> {
        (**self).minimizer()
    }
    fn excess_loss(&self, theta: &DVector<f64>) -> Option<f64> {
        (**self).excess_loss(theta)
    }
    fn population_loss(&self, theta: &DVector<f64>) -> f64 {
        (**self).population_loss(theta)
    }
    fn population_gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        (**self).population_gradient(theta)
    }
    fn pool_gradients(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        (**self).pool_gradients(theta)
    }
    fn moments(&self, theta: &DVector<f64>, opts: MomentOptions) -> Result<MomentEstimate> {
        (**self).moments(theta, opts)
    }
}

/// Central-difference gradient of `f` with step `h`.
pub fn central_difference(f: impl Fn(&DVector<f64>) -> f64, theta: &DVector<f64>, h: f64) -> DVector<f64> {
    let mut g = DVector::zeros(theta.len());
    let mut x = theta.clone();
    for j in 0..theta.len() {
        let orig = x[j];
        x[j] = orig + h;
        let fp = f(&x);
        x[j] = orig - h;
        let fm = f(&x);
        x[j] = orig;
        g[j] = (fp - fm) / (2.0 * h);
    }
    g
}
