use nalgebra::DVector;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite: smallest eigenvalue {min_eig:e}, largest {max_eig:e}")]
    NotPositiveDefinite { min_eig: f64, max_eig: f64 },

    #[error("singular covariance: eigenvalue ratio {ratio:e} below threshold {threshold:e}")]
    SingularCovariance { ratio: f64, threshold: f64 },

    #[error("singular inner system in Woodbury inverse")]
    SingularInner,

    #[error("root multiplier undefined: 1 + c|v|^2 = {0:e} is not positive")]
    InvalidRootMultiplier(f64),

    #[error("self-normalized correction undefined: |M_n|^2 = {norm_sq} >= n = {n}")]
    DegenerateCorrection { norm_sq: f64, n: usize },

    #[error("not enough samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("online covariance queried before any update")]
    EmptyState,

    #[error("dimension {got} exceeds the supported maximum {max} for this operation")]
    DimensionTooLarge { max: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("inner proximal solver did not reach tolerance after {0} iterations")]
    InnerSolverFailed(usize),

    #[error("hessian is not positive definite at grid point {index} (smallest eigenvalue {min_eig:e})")]
    HessianNotPositive { index: usize, min_eig: f64 },

    #[error("rank-deficient design matrix")]
    RankDeficient,

    #[error("chain diverged at step {step}")]
    Diverged { step: usize, last_finite: DVector<f64> },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("csv: {0}")]
    Csv(String),
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Error {
        match self {
            e @ Error::Diverged { .. } | e @ Error::AtStep { .. } => e,
            e => Error::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }
}
