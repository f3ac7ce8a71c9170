//! Moment-adjusted proximal gradient.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{SymMatrix, PD_RATIO_THRESHOLD};

/// Inner FISTA tolerance on the gradient mapping, relative to `L max(1, |z|_inf)`.
pub const INNER_TOL: f64 = 1e-13;
pub const INNER_MAX_ITER: usize = 10_000;

/// The smooth part `g` of a composite objective.
pub trait SmoothPart: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, w: &DVector<f64>) -> f64;
    fn gradient(&self, w: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, w: &DVector<f64>) -> SymMatrix;
}

/// The non-smooth part `h`, with its Euclidean prox.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    Zero,
    L1(f64),
}

impl Penalty {
    pub fn value(&self, w: &DVector<f64>) -> f64 {
        match *self {
            Penalty::Zero => 0.0,
            Penalty::L1(lambda) => lambda * w.iter().map(|x| x.abs()).sum::<f64>(),
        }
    }

    /// `argmin_u |u - z|^2 / 2 + t_i h_i(u_i)` with per-coordinate weights `t`.
    pub fn prox_weighted(&self, z: &DVector<f64>, t: &DVector<f64>) -> DVector<f64> {
        match *self {
            Penalty::Zero => z.clone(),
            Penalty::L1(lambda) => DVector::from_fn(z.len(), |i, _| soft_threshold(z[i], lambda * t[i])),
        }
    }
}

pub fn soft_threshold(x: f64, thr: f64) -> f64 {
    if x > thr {
        x - thr
    } else if x < -thr {
        x + thr
    } else {
        0.0
    }
}

/// Composite objective `g + h` with a fixed adjusting matrix `V`.
pub struct ProxProblem {
    smooth: Box<dyn SmoothPart>,
    penalty: Penalty,
    v: SymMatrix,
    v_inv: DMatrix<f64>,
    is_diagonal: bool,
}

impl std::fmt::Debug for ProxProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProxProblem")
            .field("dim", &self.smooth.dim())
            .field("penalty", &self.penalty)
            .field("v", &self.v)
            .finish()
    }
}

impl ProxProblem {
    /// With `diagonal_only`, `V` is replaced by `diag(V)`.
    pub fn new(smooth: Box<dyn SmoothPart>, penalty: Penalty, v: SymMatrix, diagonal_only: bool) -> Result<Self> {
        if v.dim() != smooth.dim() {
            return Err(Error::DimensionMismatch {
                expected: smooth.dim(),
                got: v.dim(),
            });
        }
        if let Penalty::L1(lambda) = penalty {
            if !(lambda >= 0.0) {
                return Err(Error::InvalidParameter(format!("lambda must be non-negative, got {lambda}")));
            }
        }
        let v = if diagonal_only {
            SymMatrix::from_diagonal(&v.as_matrix().diagonal())
        } else {
            v
        };
        v.check_positive_definite(PD_RATIO_THRESHOLD)?;
        let d = v.dim();
        let is_diagonal = (0..d).all(|i| (0..d).all(|j| i == j || v.as_matrix()[(i, j)] == 0.0));
        let v_inv = if is_diagonal {
            DMatrix::from_diagonal(&v.as_matrix().diagonal().map(|x| 1.0 / x))
        } else {
            v.as_matrix().clone().cholesky().ok_or(Error::NotPositiveDefinite {
                min_eig: v.min_max_eigenvalues().0,
                max_eig: v.min_max_eigenvalues().1,
            })?
            .inverse()
        };
        Ok(ProxProblem {
            smooth,
            penalty,
            v,
            v_inv,
            is_diagonal,
        })
    }

    pub fn dim(&self) -> usize {
        self.v.dim()
    }

    pub fn v(&self) -> &SymMatrix {
        &self.v
    }

    pub fn penalty(&self) -> Penalty {
        self.penalty
    }

    pub fn smooth(&self) -> &dyn SmoothPart {
        self.smooth.as_ref()
    }

    pub fn objective(&self, w: &DVector<f64>) -> f64 {
        self.smooth.value(w) + self.penalty.value(w)
    }

    /// `|x|_V^2 = x^T V x`.
    pub fn v_norm_sq(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(self.v.as_matrix() * x))
    }

    /// `argmin_u |u - z|_V^2 / (2 eta) + h(u)`.
    pub fn prox(&self, z: &DVector<f64>, eta: f64) -> Result<DVector<f64>> {
        if self.is_diagonal || self.penalty == Penalty::Zero {
            if self.penalty == Penalty::Zero {
                return Ok(z.clone());
            }
            let t = self.v.as_matrix().diagonal().map(|vi| eta / vi);
            return Ok(self.penalty.prox_weighted(z, &t));
        }
        self.prox_fista(z, eta)
    }

    fn prox_fista(&self, z: &DVector<f64>, eta: f64) -> Result<DVector<f64>> {
        let v = self.v.as_matrix();
        let (lo, hi) = self.v.min_max_eigenvalues();
        let lip = hi / eta;
        let q = (lo / hi).sqrt();
        let momentum = (1.0 - q) / (1.0 + q);
        let step = DVector::from_element(z.len(), 1.0 / lip);
        let scale = lip * z.amax().max(1.0);
        let mut u = z.clone();
        let mut y = z.clone();
        for _ in 0..INNER_MAX_ITER {
            let grad = v * (&y - z) / eta;
            let u_next = self.penalty.prox_weighted(&(&y - &grad / lip), &step);
            // Gradient mapping at y; its norm over mu bounds the distance to the minimizer.
            let gmap = (&y - &u_next) * lip;
            y = &u_next + (&u_next - &u) * momentum;
            u = u_next;
            if gmap.amax() <= INNER_TOL * scale {
                return Ok(u);
            }
        }
        Err(Error::InnerSolverFailed(INNER_MAX_ITER))
    }
}

/// One MadProx update `prox_{eta,V}(w - eta V^{-1} grad g(w))`.
pub fn madprox_step(w: &DVector<f64>, prob: &ProxProblem, eta: f64) -> Result<DVector<f64>> {
    if w.len() != prob.dim() {
        return Err(Error::DimensionMismatch {
            expected: prob.dim(),
            got: w.len(),
        });
    }
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter(format!("step size must be positive, got {eta}")));
    }
    let g = prob.smooth.gradient(w);
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("smooth gradient"));
    }
    let z = w - &prob.v_inv * g * eta;
    prob.prox(&z, eta)
}
