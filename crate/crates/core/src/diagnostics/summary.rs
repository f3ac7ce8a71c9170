use nalgebra::DVector;

use crate::chain::TrajectoryEnsemble;
use crate::error::{Error, Result};

/// Floor applied to errors before taking logs.
pub const LOG_FLOOR: f64 = 1e-300;

/// Sample quantile with linear interpolation between order statistics
/// (`h = (n - 1) q`). `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

/// Mean and central 95% band of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn of(values: &[f64]) -> Band {
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        Band {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            lo: quantile_sorted(&s, 0.025),
            hi: quantile_sorted(&s, 0.975),
        }
    }
}

/// Per-step, per-coordinate bands across chains; indexed `[step][coord]`.
pub fn ensemble_summary(e: &TrajectoryEnsemble) -> Result<Vec<Vec<Band>>> {
    if e.chains() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: e.chains(),
        });
    }
    Ok((0..e.steps())
        .map(|t| (0..e.dim()).map(|j| Band::of(&e.marginal(t, j))).collect())
        .collect())
}

/// Log l2-errors against a known optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct LogErrorSeries {
    /// `log max(|theta_t - theta*|, LOG_FLOOR)`, indexed `[chain][step]`.
    pub per_chain: Vec<Vec<f64>>,
    /// Band across chains at each step.
    pub bands: Vec<Band>,
    /// Least-squares slope of the mean log error against `t` over the window.
    pub slope: f64,
    pub window: (usize, usize),
}

/// Log-error series with a slope fitted over steps `window.0..=window.1`.
pub fn log_error_series(e: &TrajectoryEnsemble, theta_star: &DVector<f64>, window: (usize, usize)) -> Result<LogErrorSeries> {
    if theta_star.len() != e.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.dim(),
            got: theta_star.len(),
        });
    }
    let (a, b) = window;
    if a >= b || b >= e.steps() {
        return Err(Error::InvalidParameter(format!(
            "slope window {a}..={b} must lie inside 0..{} with at least two steps",
            e.steps()
        )));
    }
    let per_chain: Vec<Vec<f64>> = (0..e.chains())
        .map(|c| {
            (0..e.steps())
                .map(|t| (e.state(c, t) - theta_star).norm().max(LOG_FLOOR).ln())
                .collect()
        })
        .collect();
    let bands: Vec<Band> = (0..e.steps())
        .map(|t| Band::of(&per_chain.iter().map(|r| r[t]).collect::<Vec<_>>()))
        .collect();
    let xs: Vec<f64> = (a..=b).map(|t| t as f64).collect();
    let ys: Vec<f64> = (a..=b).map(|t| bands[t].mean).collect();
    Ok(LogErrorSeries {
        per_chain,
        bands,
        slope: fit_slope(&xs, &ys),
        window,
    })
}

/// Ordinary least-squares slope of `ys` on `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn quantile_interpolates() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(quantile_sorted(&s, 1.0), 4.0);
        assert_relative_eq!(quantile_sorted(&s, 0.5), 2.5);
        assert_relative_eq!(quantile_sorted(&s, 0.25), 1.75);
    }

    #[test]
    fn identical_chains_give_zero_width() {
        let vals: Vec<f64> = (0..5).flat_map(|_| [1.0, 2.0, 3.0]).collect();
        let e = TrajectoryEnsemble::from_values("x", 5, 3, 1, vals).unwrap();
        for (t, row) in ensemble_summary(&e).unwrap().iter().enumerate() {
            assert_eq!(row[0].lo, row[0].hi);
            assert_eq!(row[0].mean, (t + 1) as f64);
        }
    }

    #[test]
    fn gaussian_band_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v: Vec<f64> = (0..100).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b = Band::of(&v);
        assert!(b.lo < 0.0 && b.hi > 0.0);
        assert!((b.hi - b.lo - 3.92).abs() < 1.2);
    }

    #[test]
    fn monotone_transform_commutes() {
        // At levels landing on an order statistic, quantiles commute with exp.
        let mut v = vec![0.3, -1.2, 2.0, 0.7, 0.0];
        let mut t: Vec<f64> = v.iter().map(|x: &f64| x.exp()).collect();
        v.sort_by(f64::total_cmp);
        t.sort_by(f64::total_cmp);
        for q in [0.0, 0.25, 0.5, 0.75, 1.0] {
            assert_relative_eq!(quantile_sorted(&t, q), quantile_sorted(&v, q).exp(), max_relative = 1e-15);
        }
    }

    #[test]
    fn geometric_decay_has_log_rho_slope() {
        let rho: f64 = 0.8;
        let vals: Vec<f64> = (0..20).map(|t| 1.0 + 3.0 * rho.powi(t)).collect();
        let mut both = vals.clone();
        both.extend(vals.iter().map(|v| 2.0 - v));
        let e = TrajectoryEnsemble::from_values("x", 2, 20, 1, both).unwrap();
        let s = log_error_series(&e, &DVector::from_element(1, 1.0), (0, 19)).unwrap();
        assert_relative_eq!(s.slope, rho.ln(), max_relative = 1e-12);
    }

    #[test]
    fn stationary_offset_has_zero_slope_and_hits_floor() {
        let e = TrajectoryEnsemble::from_values("x", 2, 4, 1, vec![1.5; 8]).unwrap();
        let s = log_error_series(&e, &DVector::from_element(1, 1.0), (0, 3)).unwrap();
        assert_eq!(s.slope, 0.0);
        let exact = log_error_series(&e, &DVector::from_element(1, 1.5), (0, 3)).unwrap();
        assert_eq!(exact.per_chain[0][0], LOG_FLOOR.ln());
    }
}
