use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::LossModel;
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// Equal-weight 1-D Gaussian mixture with a shared, known variance.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub means: DVector<f64>,
    pub sigma: f64,
}

impl MixtureSpec {
    /// Picks `sigma` so that `min_{i != j} |theta_i - theta_j| / sigma = snr`.
    pub fn from_snr(means: DVector<f64>, snr: f64) -> Result<Self> {
        if !(snr > 0.0) {
            return Err(Error::InvalidParameter(format!("SNR must be positive, got {snr}")));
        }
        let gap = min_gap(&means);
        if !(gap > 0.0) {
            return Err(Error::InvalidParameter("mixture means must be distinct".into()));
        }
        Ok(MixtureSpec {
            means,
            sigma: gap / snr,
        })
    }

    pub fn snr(&self) -> f64 {
        min_gap(&self.means) / self.sigma
    }
}

fn min_gap(means: &DVector<f64>) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..means.len() {
        for j in i + 1..means.len() {
            gap = gap.min((means[i] - means[j]).abs());
        }
    }
    gap
}

/// Location model: the parameter is the vector of component means, the pool
/// holds `N` scalar draws from the true mixture.
#[derive(Debug, Clone)]
pub struct Mixture {
    spec: MixtureSpec,
    z: DVector<f64>,
    log_norm: f64,
}

impl Mixture {
    pub fn new(spec: MixtureSpec, n_pool: usize, seed: u64) -> Result<Self> {
        let p = spec.means.len();
        if p < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 components, got {p}")));
        }
        if !(spec.sigma > 0.0) || !spec.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {}", spec.sigma)));
        }
        if n_pool < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: n_pool });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = DVector::from_fn(n_pool, |_, _| {
            let c = rng.random_range(0..p);
            let e: f64 = StandardNormal.sample(&mut rng);
            spec.means[c] + spec.sigma * e
        });
        Ok(Mixture::with_pool(spec, z))
    }

    /// Uses the given draws as the pool.
    pub fn with_pool(spec: MixtureSpec, z: DVector<f64>) -> Self {
        let p = spec.means.len() as f64;
        let log_norm = 0.5 * (2.0 * std::f64::consts::PI * spec.sigma * spec.sigma).ln() + p.ln();
        Mixture { spec, z, log_norm }
    }

    pub fn spec(&self) -> &MixtureSpec {
        &self.spec
    }

    pub fn draws(&self) -> &DVector<f64> {
        &self.z
    }

    /// Log-sum-exp of the component log-densities (without normalization),
    /// the responsibilities, and the scores `u_j = (z - theta_j) / sigma^2`.
    fn responsibilities(&self, theta: &DVector<f64>, z: f64) -> (f64, DVector<f64>, DVector<f64>) {
        let s2 = self.spec.sigma * self.spec.sigma;
        let a = theta.map(|t| -(z - t) * (z - t) / (2.0 * s2));
        let amax = a.max();
        let w = a.map(|v| (v - amax).exp());
        let total: f64 = w.sum();
        let lse = amax + total.ln();
        let r = w / total;
        let u = theta.map(|t| (z - t) / s2);
        (lse, r, u)
    }

    pub fn loss_at(&self, theta: &DVector<f64>, z: f64) -> f64 {
        let (lse, _, _) = self.responsibilities(theta, z);
        self.log_norm - lse
    }
}

impl LossModel for Mixture {
    fn name(&self) -> &str {
        "mixture"
    }

    fn dim(&self) -> usize {
        self.spec.means.len()
    }

    fn pool_size(&self) -> usize {
        self.z.len()
    }

    fn sample_loss(&self, theta: &DVector<f64>, i: usize) -> f64 {
        self.loss_at(theta, self.z[i])
    }

    fn sample_gradient(&self, theta: &DVector<f64>, i: usize) -> DVector<f64> {
        let (_, r, u) = self.responsibilities(theta, self.z[i]);
        -r.component_mul(&u)
    }

    fn hessian(&self, theta: &DVector<f64>) -> Result<SymMatrix> {
        let p = self.dim();
        let s2 = self.spec.sigma * self.spec.sigma;
        let mut h = DMatrix::zeros(p, p);
        for &z in self.z.iter() {
            let (_, r, u) = self.responsibilities(theta, z);
            let ru = r.component_mul(&u);
            h.ger(1.0, &ru, &ru, 1.0);
            for j in 0..p {
                h[(j, j)] += r[j] * (1.0 / s2 - u[j] * u[j]);
            }
        }
        Ok(SymMatrix::symmetrize(h / self.z.len() as f64))
    }

    /// The generating means.
    fn minimizer(&self) -> Option<&DVector<f64>> {
        Some(&self.spec.means)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::central_difference;
    use approx::assert_relative_eq;

    fn spec(snr: f64) -> MixtureSpec {
        MixtureSpec::from_snr(DVector::from_vec(vec![1.0, 2.0, 3.0]), snr).unwrap()
    }

    #[test]
    fn snr_sets_sigma() {
        assert_relative_eq!(spec(3.3).sigma, 1.0 / 3.3);
        assert_relative_eq!(spec(1.0).sigma, 1.0);
        assert_relative_eq!(spec(3.3).snr(), 3.3, max_relative = 1e-15);
    }

    #[test]
    fn coincident_components_share_gradient() {
        let m = Mixture::with_pool(
            MixtureSpec {
                means: DVector::from_vec(vec![0.0, 1.0]),
                sigma: 0.5,
            },
            DVector::from_vec(vec![-0.3, 0.8, 2.5]),
        );
        let theta = DVector::zeros(2);
        for i in 0..3 {
            let g = m.sample_gradient(&theta, i);
            assert_relative_eq!(g[0], g[1], epsilon = 1e-15);
        }
    }

    #[test]
    fn far_points_do_not_underflow() {
        let m = Mixture::with_pool(spec(3.3), DVector::from_vec(vec![-6.0, 12.0]));
        let theta = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        for i in 0..2 {
            assert!(m.sample_loss(&theta, i).is_finite());
            assert!(m.sample_gradient(&theta, i).iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = Mixture::new(spec(3.3), 50, 4).unwrap();
        let theta = DVector::from_vec(vec![0.8, 2.3, 2.9]);
        for i in 0..10 {
            let fd = central_difference(|t| m.sample_loss(t, i), &theta, 1e-5);
            let g = m.sample_gradient(&theta, i);
            assert!((fd - &g).amax() <= 1e-5 * g.amax().max(1.0));
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let m = Mixture::new(spec(1.0), 40, 5).unwrap();
        let theta = DVector::from_vec(vec![1.2, 1.9, 3.4]);
        let h = m.hessian(&theta).unwrap().into_inner();
        for j in 0..3 {
            let col = central_difference(|t| m.population_gradient(t)[j], &theta, 1e-5);
            assert!((col - h.column(j)).amax() < 1e-6);
        }
    }
}
