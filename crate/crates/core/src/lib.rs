//! Moment-adjusted stochastic gradient descent (MasGrad), its diffusion
//! surrogates, moment-adjusted proximal steps, streaming moment estimators
//! and diagnostics for comparing the resulting chain ensembles.
//!
//! A run starts from a [`models::LossModel`], picks a [`chain::Method`] and a
//! [`chain::ChainConfig`], and produces a [`chain::TrajectoryEnsemble`]:
//!
//! ```
//! use masgrad::chain::{run_ensemble, ChainConfig, Method, Target};
//! use masgrad::models::{gram_with_condition, FixedDesignLinear};
//! use nalgebra::DVector;
//!
//! let x = gram_with_condition(200, 3, 10.0, 1).unwrap();
//! let model = FixedDesignLinear::new(x, 1.0, DVector::from_element(3, 1.0), 2).unwrap();
//! let cfg = ChainConfig::new(0.05, 20, 50, 7).unwrap();
//! let init = DVector::zeros(3);
//! let runs = run_ensemble(Target::Model(&model), &cfg, &init, Method::MasGrad, 8).unwrap();
//! assert_eq!(runs.chains(), 8);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.

pub mod chain;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod models;
pub mod moments;

pub use error::{Error, Result};
