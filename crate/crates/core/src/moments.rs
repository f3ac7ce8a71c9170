//! Moment estimation for the adjusted direction `V^{-1} b`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{rank_one_root_multiplier, SymMatrix};

/// Covariances with `lambda_min / lambda_max` at or below this are rejected.
pub const SINGULAR_COV_RATIO: f64 = 1e-10;

/// Largest `p` accepted by [`OnlineLsCovState`]; the Kronecker accumulator
/// is `p^2 x p^2`.
pub const ONLINE_LS_MAX_DIM: usize = 16;

/// Optional ridge added to a covariance before inversion.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Ridge {
    #[default]
    Off,
    /// `1e-8 * trace / p`.
    Auto,
    Fixed(f64),
}

impl Ridge {
    pub fn epsilon(&self, cov: &DMatrix<f64>) -> f64 {
        match *self {
            Ridge::Off => 0.0,
            Ridge::Auto => 1e-8 * cov.trace() / cov.nrows() as f64,
            Ridge::Fixed(e) => e,
        }
    }
}

/// How a covariance is turned into an inverse root.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MomentOptions {
    pub ridge: Ridge,
    /// Use `diag(Sigma)^{-1/2}` instead of the full inverse root.
    pub diagonal: bool,
}

/// `n` per-sample gradients stored as the rows of an `n x p` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBatch {
    grads: DMatrix<f64>,
}

impl GradientBatch {
    pub fn new(grads: DMatrix<f64>) -> Result<Self> {
        if grads.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("gradient batch"));
        }
        Ok(GradientBatch { grads })
    }

    pub fn from_rows(rows: &[DVector<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, |r| r.len());
        let mut m = DMatrix::zeros(rows.len(), p);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: r.len(),
                });
            }
            m.set_row(i, &r.transpose());
        }
        GradientBatch::new(m)
    }

    pub fn n(&self) -> usize {
        self.grads.nrows()
    }

    pub fn dim(&self) -> usize {
        self.grads.ncols()
    }

    pub fn grads(&self) -> &DMatrix<f64> {
        &self.grads
    }

    pub fn mean(&self) -> DVector<f64> {
        let (n, p) = self.grads.shape();
        let mut mean = DVector::zeros(p);
        for j in 0..p {
            let mut acc = 0.0;
            for i in 0..n {
                acc += self.grads[(i, j)];
            }
            mean[j] = acc / n as f64;
        }
        mean
    }

    /// Centred second moment divided by `denom`.
    fn scatter(&self, mean: &DVector<f64>, denom: f64) -> DMatrix<f64> {
        let (n, p) = self.grads.shape();
        let mut cov = DMatrix::zeros(p, p);
        for i in 0..n {
            for a in 0..p {
                let da = self.grads[(i, a)] - mean[a];
                for b in a..p {
                    cov[(a, b)] += da * (self.grads[(i, b)] - mean[b]);
                }
            }
        }
        for a in 0..p {
            for b in a..p {
                let v = cov[(a, b)] / denom;
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        cov
    }
}

/// Mean gradient, its covariance, and an inverse root of that covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub mean_grad: DVector<f64>,
    pub cov: SymMatrix,
    pub inv_root: DMatrix<f64>,
}

impl MomentEstimate {
    /// `V = inv_root^{-1}`.
    pub fn root(&self) -> Result<DMatrix<f64>> {
        self.inv_root.clone().try_inverse().ok_or(Error::SingularCovariance {
            ratio: 0.0,
            threshold: SINGULAR_COV_RATIO,
        })
    }

    pub fn direction(&self) -> DVector<f64> {
        &self.inv_root * &self.mean_grad
    }
}

/// Symmetric inverse root of `cov` (plus ridge), or `diag(cov)^{-1/2}` in
/// diagonal mode.
pub fn inverse_root_of_cov(cov: &SymMatrix, opts: MomentOptions) -> Result<DMatrix<f64>> {
    let p = cov.dim();
    let eps = opts.ridge.epsilon(cov.as_matrix());
    let mut m = cov.as_matrix().clone();
    for i in 0..p {
        m[(i, i)] += eps;
    }
    if opts.diagonal {
        let diag = m.diagonal();
        let hi = diag.max();
        let lo = diag.min();
        if hi <= 0.0 || lo <= SINGULAR_COV_RATIO * hi {
            return Err(Error::SingularCovariance {
                ratio: if hi > 0.0 { lo / hi } else { 0.0 },
                threshold: SINGULAR_COV_RATIO,
            });
        }
        return Ok(DMatrix::from_diagonal(&diag.map(|d| 1.0 / d.sqrt())));
    }
    let sym = SymMatrix::symmetrize(m);
    let (lo, hi) = sym.min_max_eigenvalues();
    if hi <= 0.0 || lo <= SINGULAR_COV_RATIO * hi {
        return Err(Error::SingularCovariance {
            ratio: if hi > 0.0 { lo / hi } else { 0.0 },
            threshold: SINGULAR_COV_RATIO,
        });
    }
    Ok(sym.map_spectrum(|l| 1.0 / l.sqrt()).into_inner())
}

/// Plug-in moments from a batch: row mean, unbiased covariance and its
/// symmetric inverse root.
pub fn batch_moments(batch: &GradientBatch) -> Result<MomentEstimate> {
    batch_moments_with(batch, MomentOptions::default())
}

pub fn batch_moments_with(batch: &GradientBatch, opts: MomentOptions) -> Result<MomentEstimate> {
    if batch.n() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: batch.n(),
        });
    }
    if batch.dim() == 0 {
        return Err(Error::InvalidParameter("gradient dimension must be positive".into()));
    }
    let mean = batch.mean();
    let cov = SymMatrix::symmetrize(batch.scatter(&mean, (batch.n() - 1) as f64));
    let inv_root = inverse_root_of_cov(&cov, opts)?;
    Ok(MomentEstimate {
        mean_grad: mean,
        cov,
        inv_root,
    })
}

/// Population-style moments where the batch is the whole pool: covariance
/// uses the `1/N` denominator.
pub fn pool_moments_from_batch(batch: &GradientBatch, opts: MomentOptions) -> Result<MomentEstimate> {
    if batch.n() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: batch.n(),
        });
    }
    let mean = batch.mean();
    let cov = SymMatrix::symmetrize(batch.scatter(&mean, batch.n() as f64));
    let inv_root = inverse_root_of_cov(&cov, opts)?;
    Ok(MomentEstimate {
        mean_grad: mean,
        cov,
        inv_root,
    })
}

/// Estimated moment-adjusted direction `V^{-1} b`.
pub fn adjusted_direction(batch: &GradientBatch) -> Result<DVector<f64>> {
    Ok(batch_moments(batch)?.direction())
}

/// Output of [`self_normalized`].
#[derive(Debug, Clone, PartialEq)]
pub struct SelfNormalizedResult {
    /// `V_n^{-1} S_n` with the symmetric root of `V_n^2`.
    pub m_n: DVector<f64>,
    /// `sqrt((n - 1) / (n - |M_n|^2))`.
    pub correction: f64,
    /// `sqrt(n) V_hat^{-1} (x_bar - mu)`, evaluated through the constructed root.
    pub lhs: DVector<f64>,
    /// The constructed `V_hat^{-1}`; `V_hat V_hat^T` is the sample covariance.
    pub inv_root: DMatrix<f64>,
}

impl SelfNormalizedResult {
    /// `max |lhs - M_n * correction|`.
    pub fn residual(&self) -> f64 {
        (&self.lhs - &self.m_n * self.correction).amax()
    }
}

/// Studentized mean through the self-normalized sum.
///
/// Writes the sample covariance as `V_n (I - M M^T / n) V_n / (n - 1)` and
/// takes `V_hat = V_n R / sqrt(n - 1)` with `R` the rank-one root of the
/// middle factor, so `V_hat^{-1} = sqrt(n - 1) S V_n^{-1}` where
/// `S^2 = I + M M^T / (n - |M|^2)`.
pub fn self_normalized(samples: &DMatrix<f64>, mu: &DVector<f64>) -> Result<SelfNormalizedResult> {
    let (n, d) = samples.shape();
    if mu.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: mu.len(),
        });
    }
    if n <= d {
        return Err(Error::TooFewSamples {
            needed: d + 1,
            got: n,
        });
    }
    if samples.iter().chain(mu.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("self-normalized input"));
    }

    let mut s_n = DVector::zeros(d);
    let mut v_sq = DMatrix::zeros(d, d);
    for i in 0..n {
        let c = samples.row(i).transpose() - mu;
        s_n += &c;
        v_sq.ger(1.0, &c, &c, 1.0);
    }
    let v_sq = SymMatrix::symmetrize(v_sq);
    let (lo, hi) = v_sq.min_max_eigenvalues();
    if hi <= 0.0 || lo <= SINGULAR_COV_RATIO * hi {
        return Err(Error::SingularCovariance {
            ratio: if hi > 0.0 { lo / hi } else { 0.0 },
            threshold: SINGULAR_COV_RATIO,
        });
    }
    let v_inv = v_sq.map_spectrum(|l| 1.0 / l.sqrt()).into_inner();
    let m_n = &v_inv * &s_n;

    let nf = n as f64;
    let norm_sq = m_n.norm_squared();
    if norm_sq >= nf {
        return Err(Error::DegenerateCorrection { norm_sq, n });
    }
    let q = norm_sq / nf;
    let s = rank_one_root_multiplier(1.0 / (1.0 - q), &(&m_n / nf.sqrt()))?;
    let inv_root = s.as_matrix() * &v_inv * (nf - 1.0).sqrt();

    let x_bar_minus_mu = &s_n / nf;
    let lhs = &inv_root * x_bar_minus_mu * nf.sqrt();
    let correction = ((nf - 1.0) / (nf - norm_sq)).sqrt();
    Ok(SelfNormalizedResult {
        m_n,
        correction,
        lhs,
        inv_root,
    })
}

/// Streaming sufficient statistics for the covariance of least-squares
/// gradients `(x^T theta - y) x` at an arbitrary `theta`.
///
/// With `a = x x^T theta` and `c = y x` the gradient is `a - c`, and
/// `E[a a^T]` unstacks from `(1/t) sum (x x^T) kron (x x^T) vec(theta theta^T)`.
/// The covariance uses the `1/t` denominator.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineLsCovState {
    p: usize,
    t: usize,
    sum_xx: DMatrix<f64>,
    sum_kron: DMatrix<f64>,
    sum_yx: DVector<f64>,
    sum_yyxx: DMatrix<f64>,
    /// `sum y x_i x_j x_k` at row `i`, column `j + p k`.
    sum_yxxx: DMatrix<f64>,
}

impl OnlineLsCovState {
    pub fn new(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if p > ONLINE_LS_MAX_DIM {
            return Err(Error::DimensionTooLarge {
                max: ONLINE_LS_MAX_DIM,
                got: p,
            });
        }
        Ok(OnlineLsCovState {
            p,
            t: 0,
            sum_xx: DMatrix::zeros(p, p),
            sum_kron: DMatrix::zeros(p * p, p * p),
            sum_yx: DVector::zeros(p),
            sum_yyxx: DMatrix::zeros(p, p),
            sum_yxxx: DMatrix::zeros(p, p * p),
        })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn count(&self) -> usize {
        self.t
    }

    pub fn update(&self, x: &DVector<f64>, y: f64) -> Result<Self> {
        let mut next = self.clone();
        next.absorb(x, y)?;
        Ok(next)
    }

    pub fn absorb(&mut self, x: &DVector<f64>, y: f64) -> Result<()> {
        let p = self.p;
        if x.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: x.len(),
            });
        }
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("streamed observation"));
        }
        let xx = x * x.transpose();
        self.sum_xx += &xx;
        // (A kron A)[(i + p k), (j + p l)] = A_ij A_kl in column-stacked vec.
        for k in 0..p {
            for i in 0..p {
                let r = i + p * k;
                for l in 0..p {
                    for j in 0..p {
                        self.sum_kron[(r, j + p * l)] += xx[(i, j)] * xx[(k, l)];
                    }
                }
            }
        }
        self.sum_yx.axpy(y, x, 1.0);
        self.sum_yyxx += &xx * (y * y);
        for k in 0..p {
            for j in 0..p {
                let c = y * x[j] * x[k];
                for i in 0..p {
                    self.sum_yxxx[(i, j + p * k)] += c * x[i];
                }
            }
        }
        self.t += 1;
        Ok(())
    }

    /// Empirical covariance of `(y - x^T theta) x` over the streamed points.
    pub fn query(&self, theta: &DVector<f64>) -> Result<SymMatrix> {
        let p = self.p;
        if self.t == 0 {
            return Err(Error::EmptyState);
        }
        if theta.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: theta.len(),
            });
        }
        let t = self.t as f64;
        // vec(theta theta^T) = theta kron theta
        let mut vec_tt = DVector::zeros(p * p);
        for k in 0..p {
            for i in 0..p {
                vec_tt[i + p * k] = theta[i] * theta[k];
            }
        }
        let vec_eaa = &self.sum_kron * vec_tt / t;
        let e_aa = DMatrix::from_column_slice(p, p, vec_eaa.as_slice());
        let e_a = &self.sum_xx * theta / t;
        let e_c = &self.sum_yx / t;
        let e_cc = &self.sum_yyxx / t;
        let mut e_ac = DMatrix::zeros(p, p);
        for k in 0..p {
            for j in 0..p {
                for i in 0..p {
                    e_ac[(i, j)] += self.sum_yxxx[(i, j + p * k)] * theta[k];
                }
            }
        }
        e_ac /= t;

        let cov_aa = e_aa - &e_a * e_a.transpose();
        let cov_cc = e_cc - &e_c * e_c.transpose();
        let cov_ac = e_ac - &e_a * e_c.transpose();
        let cov = cov_aa + cov_cc - &cov_ac - cov_ac.transpose();
        Ok(SymMatrix::symmetrize(cov))
    }
}

/// Batch oracle for [`OnlineLsCovState::query`].
pub fn ls_gradient_covariance(x: &DMatrix<f64>, y: &DVector<f64>, theta: &DVector<f64>) -> Result<SymMatrix> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::EmptyState);
    }
    let rows: Vec<DVector<f64>> = (0..n)
        .map(|i| {
            let xi = x.row(i).transpose();
            let r = xi.dot(theta) - y[i];
            xi * r
        })
        .collect();
    let batch = GradientBatch::from_rows(&rows)?;
    let mean = batch.mean();
    Ok(SymMatrix::symmetrize(batch.scatter(&mean, n as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rel_frobenius;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
    }

    #[test]
    fn identical_rows_are_singular() {
        let rows = vec![DVector::from_vec(vec![1.0, 2.0]); 5];
        let batch = GradientBatch::from_rows(&rows).unwrap();
        assert!(matches!(batch_moments(&batch), Err(Error::SingularCovariance { .. })));
    }

    #[test]
    fn two_point_scalar_case() {
        let batch = GradientBatch::new(DMatrix::from_column_slice(2, 1, &[0.0, 2.0])).unwrap();
        let m = batch_moments(&batch).unwrap();
        assert_relative_eq!(m.mean_grad[0], 1.0);
        assert_relative_eq!(m.cov.as_matrix()[(0, 0)], 2.0);
        assert_relative_eq!(m.inv_root[(0, 0)], 1.0 / 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn inverse_root_whitens_random_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = GradientBatch::new(gaussian(&mut rng, 200, 4)).unwrap();
        let m = batch_moments(&batch).unwrap();
        let w = &m.inv_root * m.cov.as_matrix() * m.inv_root.transpose();
        assert!((w - DMatrix::identity(4, 4)).amax() < 1e-8);
        let v = m.root().unwrap();
        assert!(rel_frobenius(&(&v * v.transpose()), m.cov.as_matrix()) < 1e-8);
    }

    #[test]
    fn direction_is_identity_for_isotropic_batch() {
        // Rows +-e_i scaled so the unbiased covariance is exactly I, plus an offset.
        let s = (3.0f64 / 2.0).sqrt();
        let offset = DVector::from_vec(vec![0.5, -0.25]);
        let mut rows = Vec::new();
        for i in 0..2 {
            for sign in [1.0, -1.0] {
                let mut r = offset.clone();
                r[i] += sign * s;
                rows.push(r);
            }
        }
        let batch = GradientBatch::from_rows(&rows).unwrap();
        let m = batch_moments(&batch).unwrap();
        assert!((m.cov.as_matrix() - DMatrix::identity(2, 2)).amax() < 1e-14);
        let dir = adjusted_direction(&batch).unwrap();
        assert!((dir - offset).amax() < 1e-14);
    }

    #[test]
    fn direction_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = gaussian(&mut rng, 10, 3);
        let d1 = adjusted_direction(&GradientBatch::new(g.clone()).unwrap()).unwrap();
        let d2 = adjusted_direction(&GradientBatch::new(g * 7.5).unwrap()).unwrap();
        assert!((d1 - d2).amax() < 1e-10);
    }

    #[test]
    fn direction_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = gaussian(&mut rng, 10, 3);
        let batch = GradientBatch::new(g).unwrap();
        let m = batch_moments(&batch).unwrap();
        // Solve V x = b with V the symmetric square root of Sigma.
        let v = m.cov.psd_sqrt().into_inner();
        let x = v.lu().solve(&m.mean_grad).unwrap();
        assert!((adjusted_direction(&batch).unwrap() - x).amax() < 1e-10);
    }

    #[test]
    fn ridge_unblocks_singular_batch() {
        let rows = vec![
            DVector::from_vec(vec![1.0, 1.0]),
            DVector::from_vec(vec![2.0, 2.0]),
            DVector::from_vec(vec![3.0, 3.0]),
        ];
        let batch = GradientBatch::from_rows(&rows).unwrap();
        assert!(batch_moments(&batch).is_err());
        let opts = MomentOptions {
            ridge: Ridge::Fixed(1e-3),
            diagonal: false,
        };
        assert!(batch_moments_with(&batch, opts).is_ok());
    }

    #[test]
    fn diagonal_mode_uses_marginal_scales() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let batch = GradientBatch::new(gaussian(&mut rng, 30, 3)).unwrap();
        let opts = MomentOptions {
            ridge: Ridge::Off,
            diagonal: true,
        };
        let m = batch_moments_with(&batch, opts).unwrap();
        for i in 0..3 {
            assert_relative_eq!(
                m.inv_root[(i, i)],
                1.0 / m.cov.as_matrix()[(i, i)].sqrt(),
                epsilon = 1e-15
            );
        }
        assert_eq!(m.inv_root[(0, 1)], 0.0);
    }

    #[test]
    fn self_normalized_hand_case() {
        let x = DMatrix::from_column_slice(2, 1, &[0.0, 2.0]);
        let r = self_normalized(&x, &DVector::zeros(1)).unwrap();
        assert_relative_eq!(r.m_n[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(r.correction, 1.0, epsilon = 1e-15);
        assert_relative_eq!(r.lhs[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn self_normalized_degenerate_inputs() {
        let x = DMatrix::from_element(4, 2, 1.5);
        let mu = DVector::from_element(2, 1.5);
        assert!(matches!(
            self_normalized(&x, &mu),
            Err(Error::SingularCovariance { .. })
        ));
        // All samples equal but away from mu: V_n is rank one, also singular.
        assert!(self_normalized(&x, &DVector::zeros(2)).is_err());
    }

    #[test]
    fn self_normalized_random_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let x = gaussian(&mut rng, 40, 3);
        let mu = DVector::from_vec(vec![0.1, -0.2, 0.05]);
        let r = self_normalized(&x, &mu).unwrap();
        assert!(r.residual() < 1e-10);

        // Independent check of the constructed root against the sample covariance.
        let batch = GradientBatch::new(x.clone()).unwrap();
        let m = batch_moments(&batch).unwrap();
        let v_hat = r.inv_root.clone().try_inverse().unwrap();
        assert!(rel_frobenius(&(&v_hat * v_hat.transpose()), m.cov.as_matrix()) < 1e-10);

        // Direct evaluation of sqrt(n) V_hat^{-1} (x_bar - mu).
        let lhs = &r.inv_root * (m.mean_grad - mu) * 40f64.sqrt();
        assert!((lhs - &r.lhs).amax() < 1e-10);
    }

    #[test]
    fn online_single_point_is_zero() {
        let s = OnlineLsCovState::new(3)
            .unwrap()
            .update(&DVector::from_vec(vec![1.0, -2.0, 0.5]), 3.0)
            .unwrap();
        let q = s.query(&DVector::from_vec(vec![0.3, 0.1, -1.0])).unwrap();
        assert!(q.as_matrix().amax() < 1e-12);
    }

    #[test]
    fn online_requires_update_and_small_dim() {
        let s = OnlineLsCovState::new(2).unwrap();
        assert!(matches!(s.query(&DVector::zeros(2)), Err(Error::EmptyState)));
        assert!(matches!(
            OnlineLsCovState::new(17),
            Err(Error::DimensionTooLarge { .. })
        ));
        assert!(s.update(&DVector::zeros(3), 1.0).is_err());
    }

    #[test]
    fn online_matches_batch_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (t, p) = (100, 4);
        let x = gaussian(&mut rng, t, p);
        let y = DVector::from_fn(t, |_, _| StandardNormal.sample(&mut rng));
        let mut s = OnlineLsCovState::new(p).unwrap();
        for i in 0..t {
            s.absorb(&x.row(i).transpose(), y[i]).unwrap();
        }
        // At theta = 0 the gradient is -y x.
        let zero = DVector::zeros(p);
        let mut cyx = DMatrix::zeros(p, p);
        let mean_yx = (0..t).fold(DVector::zeros(p), |acc, i| acc + x.row(i).transpose() * y[i]) / t as f64;
        for i in 0..t {
            let c = x.row(i).transpose() * y[i] - &mean_yx;
            cyx += &c * c.transpose();
        }
        cyx /= t as f64;
        assert!(rel_frobenius(s.query(&zero).unwrap().as_matrix(), &cyx) < 1e-10);

        for _ in 0..5 {
            let theta = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
            let got = s.query(&theta).unwrap();
            let want = ls_gradient_covariance(&x, &y, &theta).unwrap();
            assert!(rel_frobenius(got.as_matrix(), want.as_matrix()) < 1e-10);
        }
    }
}
