use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::LossModel;
use crate::error::{Error, Result};
use crate::linalg::{SymMatrix, PD_RATIO_THRESHOLD};
use crate::moments::{inverse_root_of_cov, MomentEstimate, MomentOptions};

/// An `n x p` design whose Gram matrix `X^T X / n` has eigenvalues spaced
/// geometrically from 1 to `cond`, in a random orthonormal basis.
///
/// A Gaussian draw is whitened to an exact identity Gram and then coloured,
/// so the condition number holds to rounding.
pub fn gram_with_condition(n: usize, p: usize, cond: f64, seed: u64) -> Result<DMatrix<f64>> {
    if p == 0 || n < p {
        return Err(Error::InvalidParameter(format!("need n >= p >= 1, got n={n}, p={p}")));
    }
    if !(cond >= 1.0) {
        return Err(Error::InvalidParameter(format!("condition number {cond} < 1")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
    let zg = SymMatrix::symmetrize(z.transpose() * &z / n as f64);
    let whiten = zg.pd_power(-0.5).map_err(|_| Error::RankDeficient)?;
    let white = z * whiten.as_matrix();

    let g = DMatrix::from_fn(p, p, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
    let q = g.qr().q();
    let spectrum = DVector::from_fn(p, |i, _| {
        if p == 1 {
            1.0
        } else {
            cond.powf(i as f64 / (p - 1) as f64)
        }
    });
    let sqrt_sigma = &q * DMatrix::from_diagonal(&spectrum.map(f64::sqrt)) * q.transpose();
    Ok(white * SymMatrix::symmetrize(sqrt_sigma).as_matrix())
}

/// Least squares with a fixed design and Gaussian noise.
///
/// `b(theta) = G (theta - theta_hat)` with `G = X^T X / N`, and the moment
/// matrix is the analytic `V = sigma G^{1/2}`, which does not depend on
/// `theta`. The minimizer is the pool least-squares fit `theta_hat`; the
/// generating weights are kept separately.
#[derive(Debug, Clone)]
pub struct FixedDesignLinear {
    x: DMatrix<f64>,
    y: DVector<f64>,
    sigma: f64,
    theta_star: DVector<f64>,
    theta_hat: DVector<f64>,
    gram: SymMatrix,
    cov: SymMatrix,
    v: DMatrix<f64>,
    inv_root: DMatrix<f64>,
}

impl FixedDesignLinear {
    pub fn new(x: DMatrix<f64>, sigma: f64, theta_star: DVector<f64>, seed: u64) -> Result<Self> {
        let (n, p) = x.shape();
        if theta_star.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: theta_star.len(),
            });
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("noise scale must be positive, got {sigma}")));
        }
        if n < p || n == 0 {
            return Err(Error::RankDeficient);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let y = &x * &theta_star + noise * sigma;

        let gram = SymMatrix::symmetrize(x.transpose() * &x / n as f64);
        gram.check_positive_definite(PD_RATIO_THRESHOLD)
            .map_err(|_| Error::RankDeficient)?;
        let rhs = x.transpose() * &y / n as f64;
        let theta_hat = gram
            .as_matrix()
            .clone()
            .cholesky()
            .ok_or(Error::RankDeficient)?
            .solve(&rhs);
        let root = gram.pd_power(0.5)?;
        let inv_half = gram.pd_power(-0.5)?;
        let v = root.as_matrix() * sigma;
        let inv_root = inv_half.as_matrix() / sigma;
        let cov = SymMatrix::symmetrize(gram.as_matrix() * (sigma * sigma));
        Ok(FixedDesignLinear {
            x,
            y,
            sigma,
            theta_star,
            theta_hat,
            gram,
            cov,
            v,
            inv_root,
        })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn theta_star(&self) -> &DVector<f64> {
        &self.theta_star
    }

    pub fn gram(&self) -> &SymMatrix {
        &self.gram
    }

    /// The analytic moment matrix `sigma G^{1/2}`.
    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }
}

impl LossModel for FixedDesignLinear {
    fn name(&self) -> &str {
        "linear-fixed"
    }

    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn pool_size(&self) -> usize {
        self.x.nrows()
    }

    fn sample_loss(&self, theta: &DVector<f64>, i: usize) -> f64 {
        let r = self.y[i] - self.x.row(i).transpose().dot(theta);
        0.5 * r * r
    }

    fn sample_gradient(&self, theta: &DVector<f64>, i: usize) -> DVector<f64> {
        let xi = self.x.row(i).transpose();
        let r = xi.dot(theta) - self.y[i];
        xi * r
    }

    fn hessian(&self, _theta: &DVector<f64>) -> Result<SymMatrix> {
        Ok(self.gram.clone())
    }

    fn minimizer(&self) -> Option<&DVector<f64>> {
        Some(&self.theta_hat)
    }

    fn excess_loss(&self, theta: &DVector<f64>) -> Option<f64> {
        let d = theta - &self.theta_hat;
        Some(0.5 * d.dot(&(self.gram.as_matrix() * &d)))
    }

    fn population_gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        self.gram.as_matrix() * (theta - &self.theta_hat)
    }

    fn moments(&self, theta: &DVector<f64>, opts: MomentOptions) -> Result<MomentEstimate> {
        let inv_root = if opts == MomentOptions::default() {
            self.inv_root.clone()
        } else {
            inverse_root_of_cov(&self.cov, opts)?
        };
        Ok(MomentEstimate {
            mean_grad: self.population_gradient(theta),
            cov: self.cov.clone(),
            inv_root,
        })
    }
}
