//! Dense small-matrix primitives.
//!
//! Everything here works on dense `nalgebra` matrices of modest size (the
//! moment matrices of a `p`-parameter model, `p` rarely above a few dozen).
//! The centrepiece is [`InverseRootState`], which maintains a (non-symmetric)
//! inverse square root of `I + sum v v^T` under streaming rank-one updates in
//! `O(d^2)` per vector.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Smallest admissible `lambda_min / lambda_max` for a matrix to count as
/// positive definite.
pub const PD_RATIO_THRESHOLD: f64 = 1e-12;

/// Vectors with squared norm below this are treated as zero by the rank-one
/// routines.
pub const DEGENERATE_NORM_SQ: f64 = 1e-14;

const SYMMETRY_TOL: f64 = 1e-12;

/// A dense symmetric matrix with finite entries.
///
/// Construction checks symmetry to `1e-12` relative to the largest entry and
/// then stores the exactly symmetrized matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("symmetric matrix"));
        }
        let scale = m.amax().max(1.0);
        let asym = (&m - m.transpose()).amax() / scale;
        if asym > SYMMETRY_TOL {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(SymMatrix::symmetrize(m))
    }

    /// Symmetrizes `m` as `(m + m^T) / 2` without checking.
    pub fn symmetrize(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        SymMatrix((m + t) * 0.5)
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &DVector<f64>) -> Self {
        SymMatrix(DMatrix::from_diagonal(diag))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Eigenvalues (ascending) and matching eigenvector columns.
    pub fn eigen(&self) -> (DVector<f64>, DMatrix<f64>) {
        let eig = SymmetricEigen::new(self.0.clone());
        let d = self.dim();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_iterator(d, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut vectors = DMatrix::zeros(d, d);
        for (k, &i) in order.iter().enumerate() {
            vectors.set_column(k, &eig.eigenvectors.column(i));
        }
        (values, vectors)
    }

    pub fn min_max_eigenvalues(&self) -> (f64, f64) {
        let (values, _) = self.eigen();
        (values[0], values[values.len() - 1])
    }

    /// Applies `f` to the spectrum: `U diag(f(lambda)) U^T`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let (values, vectors) = self.eigen();
        let mapped = values.map(f);
        let m = &vectors * DMatrix::from_diagonal(&mapped) * vectors.transpose();
        SymMatrix::symmetrize(m)
    }

    /// Fails unless `lambda_min / lambda_max > threshold` and `lambda_max > 0`.
    pub fn check_positive_definite(&self, threshold: f64) -> Result<()> {
        let (lo, hi) = self.min_max_eigenvalues();
        if hi <= 0.0 || lo <= threshold * hi {
            return Err(Error::NotPositiveDefinite {
                min_eig: lo,
                max_eig: hi,
            });
        }
        Ok(())
    }

    /// `m^exponent` for a positive-definite matrix.
    pub fn pd_power(&self, exponent: f64) -> Result<SymMatrix> {
        self.check_positive_definite(PD_RATIO_THRESHOLD)?;
        Ok(self.map_spectrum(|l| l.powf(exponent)))
    }

    /// Symmetric PSD square root; small negative eigenvalues from roundoff
    /// are clamped to zero.
    pub fn psd_sqrt(&self) -> SymMatrix {
        self.map_spectrum(|l| l.max(0.0).sqrt())
    }
}

impl AsRef<DMatrix<f64>> for SymMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// The unique symmetric PSD root `R` of `m^{-1}`, so that `R R^T = m^{-1}`.
pub fn dense_inverse_root(m: &SymMatrix) -> Result<SymMatrix> {
    m.pd_power(-0.5)
}

/// Returns `S = I + ((sqrt(1 + c|v|^2) - 1) / |v|^2) v v^T`, which satisfies
/// `S^2 = I + c v v^T`.
pub fn rank_one_root_multiplier(c: f64, v: &DVector<f64>) -> Result<SymMatrix> {
    if !c.is_finite() || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("root multiplier input"));
    }
    let d = v.len();
    let norm_sq = v.norm_squared();
    let inner = 1.0 + c * norm_sq;
    if inner <= 0.0 {
        return Err(Error::InvalidRootMultiplier(inner));
    }
    if norm_sq < DEGENERATE_NORM_SQ {
        return Ok(SymMatrix::identity(d));
    }
    // (sqrt(1 + c s) - 1) / s rewritten as c / (sqrt(1 + c s) + 1).
    let coef = c / (inner.sqrt() + 1.0);
    let mut s = DMatrix::identity(d, d);
    s.ger(coef, v, v, 1.0);
    Ok(SymMatrix::symmetrize(s))
}

/// `(A + U C V)^{-1}` from `A^{-1}` and `C^{-1}` via
/// `A^{-1} - A^{-1} U (C^{-1} + V A^{-1} U)^{-1} V A^{-1}`.
pub fn woodbury_inverse(
    a_inv: &DMatrix<f64>,
    u: &DMatrix<f64>,
    c_inv: &DMatrix<f64>,
    v: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let d = a_inv.nrows();
    let k = c_inv.nrows();
    if !a_inv.is_square() {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: a_inv.ncols(),
        });
    }
    if !c_inv.is_square() {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: c_inv.ncols(),
        });
    }
    if u.shape() != (d, k) {
        return Err(Error::DimensionMismatch {
            expected: d * k,
            got: u.nrows() * u.ncols(),
        });
    }
    if v.shape() != (k, d) {
        return Err(Error::DimensionMismatch {
            expected: k * d,
            got: v.nrows() * v.ncols(),
        });
    }
    let a_inv_u = a_inv * u;
    let v_a_inv = v * a_inv;
    let inner = c_inv + v * &a_inv_u;
    let inner_inv = inner.try_inverse().ok_or(Error::SingularInner)?;
    if inner_inv.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularInner);
    }
    Ok(a_inv - a_inv_u * inner_inv * v_a_inv)
}

/// Streaming inverse root of `I_d + sum_s v_s v_s^T`.
///
/// `H` starts at the identity; after absorbing `v_1..v_i` it satisfies
/// `(H^T H)^{-1} = I + sum v v^T`. `H` itself is not symmetric, so compare
/// Gram products, not roots.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseRootState {
    h: DMatrix<f64>,
    count: usize,
    multiplications: u64,
}

impl InverseRootState {
    pub fn new(dim: usize) -> Self {
        InverseRootState {
            h: DMatrix::identity(dim, dim),
            count: 0,
            multiplications: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    /// Number of vectors absorbed so far.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    /// Scalar multiplications (and divisions) performed by all updates.
    pub fn multiplications(&self) -> u64 {
        self.multiplications
    }

    /// Returns the state after absorbing `v`.
    pub fn update(&self, v: &DVector<f64>) -> Result<Self> {
        let mut next = self.clone();
        next.absorb(v)?;
        Ok(next)
    }

    /// In-place variant of [`update`](Self::update).
    ///
    /// `H <- H - (1/alpha) (H v)(H^T H v)^T` with
    /// `alpha = (1 + r) r`, `r = sqrt(1 + |H v|^2)`, evaluated as two
    /// matrix-vector products and one outer-product subtraction.
    pub fn absorb(&mut self, v: &DVector<f64>) -> Result<()> {
        let d = self.dim();
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("rank-one update vector"));
        }
        self.count += 1;
        if v.norm_squared() < DEGENERATE_NORM_SQ {
            return Ok(());
        }
        let h = &mut self.h;
        let mut muls: u64 = 0;

        // u = H v
        let mut u = vec![0.0; d];
        for (i, ui) in u.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..d {
                acc += h[(i, j)] * v[j];
            }
            *ui = acc;
        }
        muls += (d * d) as u64;

        // w = H^T u
        let mut w = vec![0.0; d];
        for (j, wj) in w.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..d {
                acc += h[(i, j)] * u[i];
            }
            *wj = acc;
        }
        muls += (d * d) as u64;

        let s: f64 = u.iter().map(|x| x * x).sum();
        muls += d as u64;
        let r = (1.0 + s).sqrt();
        let alpha = (1.0 + r) * r;
        muls += 1;

        for ui in u.iter_mut() {
            *ui /= alpha;
        }
        muls += d as u64;

        for j in 0..d {
            let wj = w[j];
            for i in 0..d {
                h[(i, j)] -= u[i] * wj;
            }
        }
        muls += (d * d) as u64;

        if h.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("inverse root state"));
        }
        self.multiplications += muls;
        Ok(())
    }

    /// `(H^T H)^{-1}`, which equals `I + sum v v^T`.
    pub fn gram_inverse(&self) -> Result<DMatrix<f64>> {
        (self.h.transpose() * &self.h)
            .try_inverse()
            .ok_or(Error::NotPositiveDefinite {
                min_eig: 0.0,
                max_eig: f64::NAN,
            })
    }

    /// `sqrt(n - 1) H`, the streaming approximation of `V^{-1}` when the
    /// absorbed vectors are centred per-sample gradients.
    pub fn inverse_root_estimate(&self) -> Result<DMatrix<f64>> {
        self.require_two()?;
        Ok(&self.h * ((self.count - 1) as f64).sqrt())
    }

    /// Covariance implied by the state.
    ///
    /// Unshifted: `((n-1) H^T H)^{-1} = I/(n-1) + Sigma_hat`.
    /// Shifted: the same minus `I/(n-1)`, which recovers `Sigma_hat` exactly.
    pub fn covariance_estimate(&self, shifted: bool) -> Result<DMatrix<f64>> {
        self.require_two()?;
        let scale = (self.count - 1) as f64;
        let mut cov = self.gram_inverse()? / scale;
        if shifted {
            for i in 0..self.dim() {
                cov[(i, i)] -= 1.0 / scale;
            }
        }
        Ok(cov)
    }

    fn require_two(&self) -> Result<()> {
        if self.count < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: self.count,
            });
        }
        Ok(())
    }
}

/// Relative Frobenius distance `|a - b|_F / |b|_F`.
pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}
