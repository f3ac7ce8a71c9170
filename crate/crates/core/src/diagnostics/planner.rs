use crate::error::{Error, Result};

/// Iteration count and minibatch size from a convergence guarantee.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerOutput {
    pub iterations: u64,
    pub batch: u64,
    /// `batch * iterations`.
    pub total_samples: u64,
    /// Unrounded formula values.
    pub iterations_raw: f64,
    pub batch_raw: f64,
    pub inputs: PlannerInputs,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlannerInputs {
    pub eps: f64,
    pub delta: Option<f64>,
    pub gap: f64,
    pub alpha: Option<f64>,
    pub gamma: f64,
    pub dim: usize,
    pub vmax: f64,
}

/// Ceiling that ignores representation error: values within a relative
/// `1e-12` of an integer round to it (so `16 / 0.1` plans 160, not 161).
pub fn stable_ceil(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-12 * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// Strongly convex case: `T = (gamma/alpha) log(2 gap / eps)` and
/// `n = 4 p vmax / (alpha eps)`.
pub fn plan_strongly_convex(eps: f64, gap: f64, alpha: f64, gamma: f64, dim: usize, vmax: f64) -> Result<PlannerOutput> {
    positive("eps", eps)?;
    positive("gap", gap)?;
    positive("alpha", alpha)?;
    positive("gamma", gamma)?;
    positive("vmax", vmax)?;
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    let t_raw = gamma / alpha * (2.0 * gap / eps).ln();
    let (iterations, note) = if t_raw <= 0.0 {
        (1, Some(format!("eps >= 2 * gap; the formula gives {t_raw}, using one iteration")))
    } else {
        (stable_ceil(t_raw) as u64, None)
    };
    let n_raw = 4.0 * dim as f64 * vmax / (alpha * eps);
    let batch = (stable_ceil(n_raw) as u64).max(1);
    Ok(PlannerOutput {
        iterations,
        batch,
        total_samples: iterations * batch,
        iterations_raw: t_raw,
        batch_raw: n_raw,
        inputs: PlannerInputs {
            eps,
            delta: None,
            gap,
            alpha: Some(alpha),
            gamma,
            dim,
            vmax,
        },
        note,
    })
}

/// Non-convex case: `T = (2 gamma gap + p delta^2) / eps^2 * max(vmax, 1)` and
/// `n = T / delta^2`.
pub fn plan_nonconvex(eps: f64, delta: f64, gap: f64, gamma: f64, dim: usize, vmax: f64) -> Result<PlannerOutput> {
    positive("eps", eps)?;
    positive("delta", delta)?;
    positive("gap", gap)?;
    positive("gamma", gamma)?;
    positive("vmax", vmax)?;
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    let d2 = delta * delta;
    let t_raw = (2.0 * gamma * gap + dim as f64 * d2) / (eps * eps) * vmax.max(1.0);
    let n_raw = t_raw / d2;
    let iterations = stable_ceil(t_raw) as u64;
    let batch = stable_ceil(n_raw) as u64;
    Ok(PlannerOutput {
        iterations,
        batch,
        total_samples: iterations * batch,
        iterations_raw: t_raw,
        batch_raw: n_raw,
        inputs: PlannerInputs {
            eps,
            delta: Some(delta),
            gap,
            alpha: None,
            gamma,
            dim,
            vmax,
        },
        note: None,
    })
}
