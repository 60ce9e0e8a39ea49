use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{with_current, ClSums, DepthObserver, ObserverKind};
use crate::dynamics::{f_m, f_u, omega_row, ChiProjection, Vec2, Vec3};
use crate::error::{Error, Result};
use crate::excitation::{HistoryStack, StackEntry};
use crate::integrate::rk4_step;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullOrderGains {
    /// Diagonal of the image-point gain `H`.
    pub h: [f64; 2],
    pub gamma: f64,
    pub k_cl: f64,
}

impl FullOrderGains {
    pub fn validate(&self) -> Result<()> {
        if self.h.iter().all(|&h| h > 0.0) && self.gamma > 0.0 && self.k_cl > 0.0 {
            Ok(())
        } else {
            Err(Error::Config(format!("full-order gains must be positive: {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullOrderState {
    pub s_hat: Vec2,
    pub chi_hat: f64,
}

/// Observer vector field for `(s_hat, chi_hat)` with the measurement frozen.
///
/// `cl` holds the concurrent-learning sums over all `M` entries.
pub fn full_order_rhs(q: &Vec3, current: &StackEntry, cl: &ClSums, gains: &FullOrderGains) -> Vec3 {
    let s = &current.s;
    let u = &current.input;
    let s_hat = Vec2::new(q[0], q[1]);
    let chi_hat = q[2];
    let xi = s - s_hat;
    let row = omega_row(s, &u.v);
    let s_hat_dot = f_m(s, &u.omega) + row * chi_hat + Vec2::new(gains.h[0] * xi[0], gains.h[1] * xi[1]);
    let chi_hat_dot =
        f_u(s, chi_hat, u) + gains.gamma * row.dot(&xi) + gains.k_cl * gains.gamma * cl.correction(chi_hat);
    Vec3::new(s_hat_dot[0], s_hat_dot[1], chi_hat_dot)
}

/// One RK4 step of the full-order observer followed by projection of `chi_hat`.
pub fn full_order_step(
    state: &FullOrderState,
    current: &StackEntry,
    hist: &HistoryStack,
    gains: &FullOrderGains,
    projection: &ChiProjection,
    dt: f64,
) -> Result<FullOrderState> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let cl = ClSums::over(with_current(hist, current))?;
    let q0: Vector3<f64> = Vec3::new(state.s_hat[0], state.s_hat[1], state.chi_hat);
    let q = rk4_step(current.t, &q0, dt, |_, q| full_order_rhs(q, current, &cl, gains));
    Ok(FullOrderState { s_hat: Vec2::new(q[0], q[1]), chi_hat: projection.apply(q[2]) })
}

#[derive(Clone, Debug)]
pub struct FullOrderObserver {
    pub state: FullOrderState,
    pub gains: FullOrderGains,
    pub projection: ChiProjection,
}

impl FullOrderObserver {
    pub fn new(s_hat0: Vec2, chi_hat0: f64, gains: FullOrderGains, projection: ChiProjection) -> Result<Self> {
        gains.validate()?;
        let state = FullOrderState { s_hat: s_hat0, chi_hat: projection.apply(chi_hat0) };
        Ok(Self { state, gains, projection })
    }
}

impl DepthObserver for FullOrderObserver {
    fn kind(&self) -> ObserverKind {
        ObserverKind::Full
    }

    fn chi_hat(&self) -> f64 {
        self.state.chi_hat
    }

    fn s_hat(&self) -> Option<Vec2> {
        Some(self.state.s_hat)
    }

    fn output(&mut self, _current: &StackEntry, _hist: &HistoryStack) -> Result<f64> {
        Ok(self.state.chi_hat)
    }

    fn advance(&mut self, current: &StackEntry, hist: &HistoryStack, dt: f64) -> Result<()> {
        self.state = full_order_step(&self.state, current, hist, &self.gains, &self.projection, dt)?;
        Ok(())
    }
}
