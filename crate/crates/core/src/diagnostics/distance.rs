use crate::chain::TrajectoryEnsemble;
use crate::error::{Error, Result};

/// Per-coordinate distances between two ensembles' marginals at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceReport {
    pub step: usize,
    pub ks: Vec<f64>,
    pub w2: Vec<f64>,
    pub sizes: (usize, usize),
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.len() == b.len() { 0.0 } else { 1.0 };
    }
    let (a, b) = (sorted(a), sorted(b));
    let (m, n) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        // Step past every copy of the smallest remaining value in both samples.
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / m - j as f64 / n).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at level `alpha`.
pub fn ks_critical_value(alpha: f64, m: usize, n: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((m + n) as f64 / (m * n) as f64).sqrt()
}

/// Exact 1-D Wasserstein-2 distance between two empirical measures, from
/// the monotone (quantile) coupling. Handles unequal sample sizes.
pub fn w2_1d(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::NAN;
    }
    let (a, b) = (sorted(a), sorted(b));
    let (m, n) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut pos = 0.0;
    let mut acc = 0.0;
    while i < a.len() && j < b.len() {
        let next_a = (i + 1) as f64 / m;
        let next_b = (j + 1) as f64 / n;
        let next = next_a.min(next_b);
        let diff = a[i] - b[j];
        acc += (next - pos) * diff * diff;
        pos = next;
        if next_a <= next {
            i += 1;
        }
        if next_b <= next {
            j += 1;
        }
    }
    acc.max(0.0).sqrt()
}

/// KS and W2 between the chain marginals of `a` and `b` at `step`.
pub fn empirical_distance(a: &TrajectoryEnsemble, b: &TrajectoryEnsemble, step: usize) -> Result<DistanceReport> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    if a.chains() < 2 || b.chains() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: a.chains().min(b.chains()),
        });
    }
    if step >= a.steps() || step >= b.steps() {
        return Err(Error::InvalidParameter(format!(
            "step {step} not recorded (ensembles hold {} and {} iterates)",
            a.steps(),
            b.steps()
        )));
    }
    let (mut ks, mut w2) = (Vec::new(), Vec::new());
    for j in 0..a.dim() {
        let (x, y) = (a.marginal(step, j), b.marginal(step, j));
        ks.push(ks_two_sample(&x, &y));
        w2.push(w2_1d(&x, &y));
    }
    Ok(DistanceReport {
        step,
        ks,
        w2,
        sizes: (a.chains(), b.chains()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Brute-force KS over all sample points.
    fn ks_oracle(a: &[f64], b: &[f64]) -> f64 {
        let cdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
        a.iter().chain(b).map(|&x| (cdf(a, x) - cdf(b, x)).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn identical_samples_are_at_distance_zero() {
        let a = [3.0, 1.0, 2.0, 2.0];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        assert_eq!(w2_1d(&a, &a), 0.0);
    }

    #[test]
    fn ks_matches_brute_force_with_ties() {
        let a = [1.0, 2.0, 2.0, 3.0, 5.0];
        let b = [2.0, 2.0, 4.0];
        assert_relative_eq!(ks_two_sample(&a, &b), ks_oracle(&a, &b));
        assert_relative_eq!(ks_two_sample(&b, &a), ks_oracle(&a, &b));
    }

    #[test]
    fn w2_of_a_shift_is_the_shift() {
        let a = [0.0, 1.0, 4.0];
        let b = [2.5, 3.5, 6.5];
        assert_relative_eq!(w2_1d(&a, &b), 2.5, epsilon = 1e-14);
    }

    #[test]
    fn w2_with_unequal_sizes() {
        // Masses 1/2 on {0, 2} against 1 on {1}: every unit of mass moves 1.
        assert_relative_eq!(w2_1d(&[0.0, 2.0], &[1.0]), 1.0);
        // {0} against {0, 0, 3}: a third of the mass moves 3.
        assert_relative_eq!(w2_1d(&[0.0], &[0.0, 0.0, 3.0]), 3.0f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn critical_value_for_hundred_chains() {
        assert_relative_eq!(ks_critical_value(0.05, 100, 100), 0.192, epsilon = 1e-3);
    }

    #[test]
    fn gaussian_null_rarely_rejects() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let crit = ks_critical_value(0.05, 100, 100);
        let trials = 200;
        let mut accepted = 0;
        for _ in 0..trials {
            let a: Vec<f64> = (0..100).map(|_| StandardNormal.sample(&mut rng)).collect();
            let b: Vec<f64> = (0..100).map(|_| StandardNormal.sample(&mut rng)).collect();
            if ks_two_sample(&a, &b) < crit {
                accepted += 1;
            }
        }
        assert!(accepted as f64 >= 0.9 * trials as f64, "accepted {accepted}/{trials}");
    }

    #[test]
    fn ensemble_distance_shapes() {
        let e = TrajectoryEnsemble::from_values("x", 3, 2, 2, (0..12).map(f64::from).collect()).unwrap();
        let r = empirical_distance(&e, &e, 1).unwrap();
        assert_eq!(r.ks, vec![0.0, 0.0]);
        assert!(empirical_distance(&e, &e, 2).is_err());
    }
}
