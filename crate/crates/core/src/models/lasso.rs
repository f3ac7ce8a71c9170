use nalgebra::{DMatrix, DVector};

use crate::chain::{Penalty, ProxProblem, SmoothPart};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// `g(w) = |X w - y|^2 / (2 N)`.
#[derive(Debug, Clone)]
struct LeastSquares {
    x: DMatrix<f64>,
    y: DVector<f64>,
    gram: SymMatrix,
}

impl SmoothPart for LeastSquares {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn value(&self, w: &DVector<f64>) -> f64 {
        let r = &self.x * w - &self.y;
        0.5 * r.norm_squared() / self.x.nrows() as f64
    }

    fn gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        self.x.transpose() * (&self.x * w - &self.y) / self.x.nrows() as f64
    }

    fn hessian(&self, _w: &DVector<f64>) -> SymMatrix {
        self.gram.clone()
    }
}

/// Lasso `|X w - y|^2 / (2N) + lambda |w|_1` with a fixed adjusting matrix.
pub fn make_prox_problem_lasso(x: DMatrix<f64>, y: DVector<f64>, lambda: f64, v: SymMatrix) -> Result<ProxProblem> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if x.nrows() == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be non-negative, got {lambda}")));
    }
    let gram = SymMatrix::symmetrize(x.transpose() * &x / x.nrows() as f64);
    let smooth = LeastSquares { x, y, gram };
    let penalty = if lambda == 0.0 {
        Penalty::Zero
    } else {
        Penalty::L1(lambda)
    };
    ProxProblem::new(Box::new(smooth), penalty, v, false)
}
