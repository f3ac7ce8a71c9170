use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::models::LossModel;
use crate::moments::MomentOptions;

/// Extremes of the adjusted Hessian spectrum over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    /// `min lambda_min(V(w)^{-1/2} H(v) V(w)^{-1/2})` over grid pairs.
    pub alpha: f64,
    /// `max lambda_max(V(w)^{-1/2} H(v) V(w)^{-1/2})` over grid pairs.
    pub gamma: f64,
    /// `max lambda_max(H) / min lambda_min(H)`.
    pub kappa_gd: f64,
    /// `gamma / alpha`.
    pub kappa_masgrad: f64,
    pub hessian_min: f64,
    pub hessian_max: f64,
    pub grid_size: usize,
}

/// Condition numbers of a model over `grid`, with `V(w)^{-1/2} = Sigma(w)^{-1/4}`.
pub fn condition_numbers(model: &dyn LossModel, grid: &[DVector<f64>]) -> Result<ConditionReport> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("condition grid is empty".into()));
    }
    let mut hessians = Vec::with_capacity(grid.len());
    let mut v_inv_halves = Vec::with_capacity(grid.len());
    for w in grid {
        if w.len() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: w.len(),
            });
        }
        hessians.push(model.hessian(w)?);
        let cov = model.moments(w, MomentOptions::default())?.cov;
        v_inv_halves.push(cov.pd_power(-0.25)?.into_inner());
    }
    adjusted_condition(&hessians, &v_inv_halves)
}

/// Same as [`condition_numbers`] for a fixed adjusting matrix `V`.
pub fn condition_numbers_fixed_v(v: &SymMatrix, hessians: &[SymMatrix]) -> Result<ConditionReport> {
    if hessians.is_empty() {
        return Err(Error::InvalidParameter("condition grid is empty".into()));
    }
    let half = v.pd_power(-0.5)?.into_inner();
    adjusted_condition(hessians, &[half])
}

fn adjusted_condition(hessians: &[SymMatrix], v_inv_halves: &[DMatrix<f64>]) -> Result<ConditionReport> {
    let mut h_min = f64::INFINITY;
    let mut h_max = f64::NEG_INFINITY;
    for (index, h) in hessians.iter().enumerate() {
        let (lo, hi) = h.min_max_eigenvalues();
        if !(lo > 0.0) {
            return Err(Error::HessianNotPositive { index, min_eig: lo });
        }
        h_min = h_min.min(lo);
        h_max = h_max.max(hi);
    }
    let mut alpha = f64::INFINITY;
    let mut gamma = f64::NEG_INFINITY;
    for s in v_inv_halves {
        for h in hessians {
            let a = SymMatrix::symmetrize(s * h.as_matrix() * s);
            let (lo, hi) = a.min_max_eigenvalues();
            alpha = alpha.min(lo);
            gamma = gamma.max(hi);
        }
    }
    Ok(ConditionReport {
        alpha,
        gamma,
        kappa_gd: h_max / h_min,
        kappa_masgrad: gamma / alpha,
        hessian_min: h_min,
        hessian_max: h_max,
        grid_size: hessians.len(),
    })
}

/// `count` points drawn uniformly from the coordinate-wise bounding box of
/// the given iterates (rows of each trajectory), with the box itself
/// widened by `pad` times its width on each side.
pub fn envelope_grid(trajectories: &[DMatrix<f64>], count: usize, pad: f64, seed: u64) -> Result<Vec<DVector<f64>>> {
    let p = trajectories
        .first()
        .map(|t| t.ncols())
        .ok_or_else(|| Error::InvalidParameter("no trajectories for the envelope".into()))?;
    let mut lo = DVector::from_element(p, f64::INFINITY);
    let mut hi = DVector::from_element(p, f64::NEG_INFINITY);
    for t in trajectories {
        if t.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: t.ncols(),
            });
        }
        for r in 0..t.nrows() {
            for j in 0..p {
                lo[j] = lo[j].min(t[(r, j)]);
                hi[j] = hi[j].max(t[(r, j)]);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            DVector::from_fn(p, |j, _| {
                let w = hi[j] - lo[j];
                let (a, b) = (lo[j] - pad * w, hi[j] + pad * w);
                if b > a {
                    rng.random_range(a..=b)
                } else {
                    a
                }
            })
        })
        .collect())
}
