use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::LossModel;
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

fn relu(t: f64) -> f64 {
    if t > 0.0 {
        t
    } else {
        0.0
    }
}

fn step(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Two-layer ReLU network `f(x) = relu(1 + W2 relu(1 + W1 x))`.
///
/// Parameters are flattened as `W1` row by row (`k x d`) followed by the `k`
/// entries of `W2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShallowNetSpec {
    pub input_dim: usize,
    pub hidden: usize,
    pub noise: f64,
    /// Generating weights; drawn standard normal when absent.
    pub weights: Option<DVector<f64>>,
}

impl Default for ShallowNetSpec {
    fn default() -> Self {
        ShallowNetSpec {
            input_dim: 4,
            hidden: 3,
            noise: 0.01,
            weights: None,
        }
    }
}

impl ShallowNetSpec {
    pub fn param_dim(&self) -> usize {
        self.hidden * self.input_dim + self.hidden
    }
}

/// Square loss of the shifted two-layer network over a simulated pool.
#[derive(Debug, Clone)]
pub struct ShallowNet {
    d: usize,
    k: usize,
    x: DMatrix<f64>,
    y: DVector<f64>,
    w_true: DVector<f64>,
}

/// Forward pass quantities for one input.
struct Forward {
    pre: DVector<f64>,
    hidden: DVector<f64>,
    out_pre: f64,
    out: f64,
}

impl ShallowNet {
    pub fn new(spec: ShallowNetSpec, n_pool: usize, seed: u64) -> Result<Self> {
        let (d, k) = (spec.input_dim, spec.hidden);
        if d == 0 || k == 0 {
            return Err(Error::InvalidParameter(format!("need d, k >= 1, got d={d}, k={k}")));
        }
        if n_pool == 0 {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if !(spec.noise >= 0.0) {
            return Err(Error::InvalidParameter(format!("noise must be non-negative, got {}", spec.noise)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let param_dim = spec.param_dim();
        let w_true = match spec.weights {
            Some(w) if w.len() == param_dim => w,
            Some(w) => {
                return Err(Error::DimensionMismatch {
                    expected: param_dim,
                    got: w.len(),
                })
            }
            None => DVector::from_fn(param_dim, |_, _| StandardNormal.sample(&mut rng)),
        };
        let x = DMatrix::from_fn(n_pool, d, |_, _| StandardNormal.sample(&mut rng));
        let mut net = ShallowNet {
            d,
            k,
            x,
            y: DVector::zeros(n_pool),
            w_true,
        };
        let y = DVector::from_fn(n_pool, |i, _| {
            let e: f64 = StandardNormal.sample(&mut rng);
            net.predict(&net.w_true, i) + spec.noise * e
        });
        net.y = y;
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn hidden(&self) -> usize {
        self.k
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn responses(&self) -> &DVector<f64> {
        &self.y
    }

    fn forward(&self, w: &DVector<f64>, i: usize) -> Forward {
        let (d, k) = (self.d, self.k);
        let mut pre = DVector::zeros(k);
        for j in 0..k {
            let mut a = 1.0;
            for l in 0..d {
                a += w[j * d + l] * self.x[(i, l)];
            }
            pre[j] = a;
        }
        let hidden = pre.map(relu);
        let mut out_pre = 1.0;
        for j in 0..k {
            out_pre += w[k * d + j] * hidden[j];
        }
        Forward {
            pre,
            hidden,
            out_pre,
            out: relu(out_pre),
        }
    }

    pub fn predict(&self, w: &DVector<f64>, i: usize) -> f64 {
        self.forward(w, i).out
    }

    /// Gradient of `f` with respect to the parameters.
    fn output_gradient(&self, w: &DVector<f64>, fw: &Forward, i: usize) -> DVector<f64> {
        let (d, k) = (self.d, self.k);
        let mut g = DVector::zeros(k * d + k);
        let gate = step(fw.out_pre);
        if gate == 0.0 {
            return g;
        }
        for j in 0..k {
            g[k * d + j] = fw.hidden[j];
            let back = w[k * d + j] * step(fw.pre[j]);
            for l in 0..d {
                g[j * d + l] = back * self.x[(i, l)];
            }
        }
        g
    }

    /// Smallest distance of any pre-activation at sample `i` from its kink.
    pub fn kink_margin(&self, w: &DVector<f64>, i: usize) -> f64 {
        let fw = self.forward(w, i);
        fw.pre.iter().fold(fw.out_pre.abs(), |m, a| m.min(a.abs()))
    }
}

impl LossModel for ShallowNet {
    fn name(&self) -> &str {
        "shallow-nn"
    }

    fn dim(&self) -> usize {
        self.k * self.d + self.k
    }

    fn pool_size(&self) -> usize {
        self.x.nrows()
    }

    fn sample_loss(&self, theta: &DVector<f64>, i: usize) -> f64 {
        let r = self.y[i] - self.predict(theta, i);
        0.5 * r * r
    }

    fn sample_gradient(&self, theta: &DVector<f64>, i: usize) -> DVector<f64> {
        let fw = self.forward(theta, i);
        let r = fw.out - self.y[i];
        self.output_gradient(theta, &fw, i) * r
    }

    /// Almost-everywhere Hessian: `grad f grad f^T + r * d^2 f`, where the
    /// only non-zero second derivatives of `f` are the `W2_j, W1_jl` cross terms.
    fn hessian(&self, theta: &DVector<f64>) -> Result<SymMatrix> {
        let (d, k, p) = (self.d, self.k, self.dim());
        let n = self.pool_size();
        let mut h = DMatrix::zeros(p, p);
        for i in 0..n {
            let fw = self.forward(theta, i);
            let g = self.output_gradient(theta, &fw, i);
            h.ger(1.0, &g, &g, 1.0);
            if fw.out_pre > 0.0 {
                let r = fw.out - self.y[i];
                for j in 0..k {
                    if fw.pre[j] > 0.0 {
                        for l in 0..d {
                            let v = r * self.x[(i, l)];
                            h[(k * d + j, j * d + l)] += v;
                            h[(j * d + l, k * d + j)] += v;
                        }
                    }
                }
            }
        }
        Ok(SymMatrix::symmetrize(h / n as f64))
    }

    /// The generating weights.
    fn minimizer(&self) -> Option<&DVector<f64>> {
        Some(&self.w_true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::central_difference;

    fn net() -> ShallowNet {
        ShallowNet::new(ShallowNetSpec::default(), 40, 2).unwrap()
    }

    #[test]
    fn zero_weights_give_constant_output() {
        let m = net();
        let w = DVector::zeros(m.dim());
        for i in 0..5 {
            assert_eq!(m.predict(&w, i), 1.0);
        }
        // dL/dW2_j = (f - y) * relu(1) = f - y.
        let g = m.sample_gradient(&w, 0);
        let r = 1.0 - m.responses()[0];
        for j in 0..3 {
            assert!((g[12 + j] - r).abs() < 1e-15);
        }
        assert!(g.rows(0, 12).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences_away_from_kinks() {
        let m = net();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut checked = 0;
        while checked < 20 {
            let w = DVector::from_fn(m.dim(), |_, _| StandardNormal.sample(&mut rng));
            for i in 0..m.pool_size() {
                if m.kink_margin(&w, i) < 1e-3 {
                    continue;
                }
                let fd = central_difference(|t| m.sample_loss(t, i), &w, 1e-5);
                let g = m.sample_gradient(&w, i);
                assert!((fd - &g).amax() <= 1e-5 * g.amax().max(1.0));
                checked += 1;
            }
        }
    }

    #[test]
    fn hessian_matches_gradient_differences_at_smooth_point() {
        let m = net();
        let w = m.minimizer().unwrap() * 0.9;
        let smooth = (0..m.pool_size()).all(|i| m.kink_margin(&w, i) > 1e-3);
        assert!(smooth);
        let h = m.hessian(&w).unwrap().into_inner();
        for j in 0..m.dim() {
            let col = central_difference(|t| m.population_gradient(t)[j], &w, 1e-6);
            assert!((col - h.column(j)).amax() < 1e-5);
        }
    }
}
