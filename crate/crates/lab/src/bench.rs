//! Streaming inverse-root updates against per-step dense recomputation.

use std::time::Instant;

use masgrad::linalg::{dense_inverse_root, rel_frobenius, InverseRootState, SymMatrix};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub d: usize,
    pub n: usize,
    pub stream_seconds: f64,
    pub dense_seconds: f64,
    /// Largest `|(H^T H)^{-1} - (I + sum v v^T)|_F / |I + sum v v^T|_F` over checkpoints.
    pub max_rel_error: f64,
}

const CHECKPOINTS: usize = 100;

pub fn bench_linalg(dims: &[usize], counts: &[usize], seed: u64) -> anyhow::Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &d in dims {
        for &n in counts {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((d as u64) << 32 | n as u64));
            let vs: Vec<DVector<f64>> = (0..n)
                .map(|_| DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng)))
                .collect();

            let start = Instant::now();
            let mut state = InverseRootState::new(d);
            for v in &vs {
                state.absorb(v)?;
            }
            let stream_seconds = start.elapsed().as_secs_f64();

            let start = Instant::now();
            let mut gram = DMatrix::<f64>::identity(d, d);
            for v in &vs {
                gram.ger(1.0, v, v, 1.0);
                std::hint::black_box(dense_inverse_root(&SymMatrix::symmetrize(gram.clone()))?);
            }
            let dense_seconds = start.elapsed().as_secs_f64();

            let every = n.div_ceil(CHECKPOINTS).max(1);
            let mut state = InverseRootState::new(d);
            let mut gram = DMatrix::<f64>::identity(d, d);
            let mut max_rel_error: f64 = 0.0;
            for (i, v) in vs.iter().enumerate() {
                state.absorb(v)?;
                gram.ger(1.0, v, v, 1.0);
                if (i + 1) % every == 0 || i + 1 == n {
                    max_rel_error = max_rel_error.max(rel_frobenius(&state.gram_inverse()?, &gram));
                }
            }
            rows.push(BenchRow {
                d,
                n,
                stream_seconds,
                dense_seconds,
                max_rel_error,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_case_is_exact_to_round_off() {
        let rows = bench_linalg(&[1], &[200], 3).unwrap();
        assert!(rows[0].max_rel_error <= 1e-12);
    }
}
