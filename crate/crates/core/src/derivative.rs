//! Numerical differentiation of the measured image point.

use serde::{Deserialize, Serialize};

use crate::dynamics::Vec2;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DerivativeMethod {
    /// Second-order central difference; second-order one-sided stencils at the ends.
    #[default]
    Central,
    /// First-order backward difference. Causal except at the first sample,
    /// which reuses the first available difference.
    Backward,
}

impl DerivativeMethod {
    pub fn min_samples(&self) -> usize {
        match self {
            DerivativeMethod::Central => 3,
            DerivativeMethod::Backward => 2,
        }
    }
}

/// Differentiates a uniformly sampled series with step `dt`.
pub fn differentiate(values: &[Vec2], dt: f64, method: DerivativeMethod) -> Result<Vec<Vec2>> {
    let n = values.len();
    if n < method.min_samples() {
        return Err(Error::InsufficientSamples { needed: method.min_samples(), got: n });
    }
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let out = match method {
        DerivativeMethod::Central => (0..n)
            .map(|k| {
                if k == 0 {
                    (values[1] * 4.0 - values[0] * 3.0 - values[2]) / (2.0 * dt)
                } else if k == n - 1 {
                    (values[n - 1] * 3.0 - values[n - 2] * 4.0 + values[n - 3]) / (2.0 * dt)
                } else {
                    (values[k + 1] - values[k - 1]) / (2.0 * dt)
                }
            })
            .collect(),
        DerivativeMethod::Backward => (0..n)
            .map(|k| {
                let k = k.max(1);
                (values[k] - values[k - 1]) / dt
            })
            .collect(),
    };
    Ok(out)
}

/// Like [`differentiate`], but checks that `times` are uniformly spaced and
/// takes the step from them.
pub fn differentiate_timed(times: &[f64], values: &[Vec2], method: DerivativeMethod) -> Result<Vec<Vec2>> {
    if times.len() != values.len() {
        return Err(Error::Config("times and values differ in length".into()));
    }
    if times.len() < method.min_samples() {
        return Err(Error::InsufficientSamples { needed: method.min_samples(), got: times.len() });
    }
    let dt = uniform_step(times)?;
    differentiate(values, dt, method)
}

/// Returns the common step of a uniform time grid.
pub fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: times.len() });
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::NonUniformSpacing { index: 1 });
    }
    for (k, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt {
            return Err(Error::NonUniformSpacing { index: k + 1 });
        }
    }
    Ok(dt)
}
