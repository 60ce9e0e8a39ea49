//! Ground-truth trajectory generation.

use serde::{Deserialize, Serialize};

use crate::dynamics::{state_rhs, CameraInput, EuclideanPoint, FeatureState, StateBounds, Vec2};
use crate::error::{Error, Result};
use crate::integrate::{rk4_step, step_count};

/// Camera motion as a function of time and (optionally) the image point the
/// camera controller sees.
///
/// `s_feedback` is held constant over an integration step; profiles that do
/// not use feedback ignore it.
pub trait InputProfile: Sync {
    fn input(&self, t: f64, s_feedback: &Vec2) -> CameraInput;

    /// Whether the profile reads `s_feedback`.
    fn uses_feedback(&self) -> bool {
        false
    }
}

impl<F> InputProfile for F
where
    F: Fn(f64) -> CameraInput + Sync,
{
    fn input(&self, t: f64, _s_feedback: &Vec2) -> CameraInput {
        self(t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthSample {
    pub state: FeatureState,
    /// Input applied from this sample to the next; `input.t` is the sample time.
    pub input: CameraInput,
}

impl TruthSample {
    pub fn t(&self) -> f64 {
        self.input.t
    }
}

/// Sampled truth, uniform step `dt`, first sample at `t = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub samples: Vec<TruthSample>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(TruthSample::t)
    }
}

/// Integrates the perspective dynamics with fixed-step RK4 and returns every
/// sample including `t = 0`.
pub fn simulate_truth(
    m0: &EuclideanPoint,
    profile: &dyn InputProfile,
    dt: f64,
    horizon: f64,
    bounds: &StateBounds,
) -> Result<Trajectory> {
    simulate_truth_with_feedback(m0, profile, dt, horizon, bounds, |_, s| *s)
}

/// Like [`simulate_truth`], but the profile's feedback point at sample `k` is
/// `feedback(k, s_true_k)`; this is how measured (noisy) feedback enters.
pub fn simulate_truth_with_feedback<G>(
    m0: &EuclideanPoint,
    profile: &dyn InputProfile,
    dt: f64,
    horizon: f64,
    bounds: &StateBounds,
    mut feedback: G,
) -> Result<Trajectory>
where
    G: FnMut(usize, &Vec2) -> Vec2,
{
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    if !(horizon >= dt) {
        return Err(Error::Config(format!("horizon {horizon} shorter than dt {dt}")));
    }
    bounds.validate()?;
    let n = step_count(dt, horizon);
    let mut q = m0.to_feature()?.to_vector();
    let mut samples = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = k as f64 * dt;
        let state = FeatureState::from_vector(&q);
        bounds.check(t, &state)?;
        let fb = feedback(k, &state.s());
        let input = profile.input(t, &fb);
        if !input.is_finite() {
            return Err(Error::OutOfBounds { t, what: "non-finite camera input".into() });
        }
        samples.push(TruthSample { state, input });
        if k == n {
            break;
        }
        q = rk4_step(t, &q, dt, |tau, y| state_rhs(y, &profile.input(tau, &fb)));
    }
    Ok(Trajectory { dt, samples })
}
