use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Constants of a drift `h` and the discretization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    /// Lipschitz constant `l` of `h`.
    pub lipschitz: f64,
    /// Bound `M` on `|h|`.
    pub drift_bound: f64,
    /// Expansiveness `delta` of `x -> x - eta h(x)`.
    pub expansiveness: f64,
    pub eta: f64,
    pub beta: f64,
    pub dim: usize,
    pub steps: usize,
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lipschitz >= 0.0) || !(self.drift_bound >= 0.0) {
            return Err(Error::InvalidParameter("lipschitz and drift bound must be non-negative".into()));
        }
        if !(self.expansiveness > 0.0) {
            return Err(Error::InvalidParameter("expansiveness must be positive".into()));
        }
        if !(self.eta > 0.0) || !(self.beta > 0.0) {
            return Err(Error::InvalidParameter("eta and beta must be positive".into()));
        }
        Ok(())
    }
}

/// `1 - eta alpha l / (alpha + l)`, the expansiveness of a gradient step on
/// an `alpha`-strongly convex, `l`-smooth potential.
pub fn strongly_convex_expansiveness(eta: f64, alpha: f64, lipschitz: f64) -> f64 {
    1.0 - eta * alpha * lipschitz / (alpha + lipschitz)
}

/// `sum_{i<k} delta^i`.
pub fn geometric_sum(delta: f64, k: usize) -> f64 {
    if delta == 1.0 {
        k as f64
    } else {
        (1.0 - delta.powi(k as i32)) / (1.0 - delta)
    }
}

/// Wasserstein-2 distance bound between the discretized chain and the
/// continuous diffusion at time `k eta`.
pub fn w2_discretization_bound(b: &BoundParams) -> Result<f64> {
    b.validate()?;
    let l2 = b.lipschitz * b.lipschitz;
    let pre = 2.0 * l2 * b.drift_bound * b.drift_bound * b.eta.powi(4) / 3.0
        + 2.0 * l2 * b.dim as f64 * b.eta.powi(3) / b.beta;
    Ok(pre.sqrt() * geometric_sum(b.expansiveness, b.steps))
}

/// Relative entropy bound between the continuous and discretized path laws
/// over `[0, k eta]`.
pub fn kl_discretization_bound(b: &BoundParams) -> Result<f64> {
    b.validate()?;
    let l2 = b.lipschitz * b.lipschitz;
    let per_step = l2 * b.drift_bound * b.drift_bound * b.beta * b.eta.powi(3) / 6.0
        + l2 * b.dim as f64 * b.eta * b.eta / 2.0;
    Ok(per_step * b.steps as f64)
}

/// Result of [`ou_coupled_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledCheck {
    /// Root-mean-square gap between coupled coarse and fine chains at the
    /// horizon; an upper bound on their Wasserstein-2 distance.
    pub empirical_w2: f64,
    pub bound: f64,
    pub params: BoundParams,
}

/// Couples the `eta`-discretized 1-D Ornstein-Uhlenbeck chain (`h(x) = x`)
/// with an `eta / refine` reference driven by the same Brownian increments,
/// and evaluates the Wasserstein bound with `l = 1`, `M` the largest drift
/// seen along the coarse chains and the strongly convex expansiveness.
pub fn ou_coupled_check(
    x0: f64,
    eta: f64,
    beta: f64,
    steps: usize,
    refine: usize,
    chains: usize,
    seed: u64,
) -> Result<CoupledCheck> {
    if refine == 0 || chains == 0 {
        return Err(Error::InvalidParameter("refine and chains must be positive".into()));
    }
    let fine_eta = eta / refine as f64;
    let fine_scale = (2.0 * fine_eta / beta).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sq = 0.0;
    let mut max_drift = x0.abs();
    for _ in 0..chains {
        let mut coarse = x0;
        let mut fine = x0;
        for _ in 0..steps {
            let mut increment = 0.0;
            for _ in 0..refine {
                let g: f64 = StandardNormal.sample(&mut rng);
                let dw = fine_scale * g;
                fine += -fine_eta * fine + dw;
                increment += dw;
            }
            coarse += -eta * coarse + increment;
            max_drift = max_drift.max(coarse.abs());
        }
        sq += (coarse - fine) * (coarse - fine);
    }
    let params = BoundParams {
        lipschitz: 1.0,
        drift_bound: max_drift,
        expansiveness: strongly_convex_expansiveness(eta, 1.0, 1.0),
        eta,
        beta,
        dim: 1,
        steps,
    };
    Ok(CoupledCheck {
        empirical_w2: (sq / chains as f64).sqrt(),
        bound: w2_discretization_bound(&params)?,
        params,
    })
}

/// Largest drift norm along a set of visited points.
pub fn max_drift_norm(points: &[DVector<f64>], h: impl Fn(&DVector<f64>) -> DVector<f64>) -> f64 {
    points.iter().map(|x| h(x).norm()).fold(0.0, f64::max)
}
