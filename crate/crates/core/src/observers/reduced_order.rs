use serde::{Deserialize, Serialize};

use super::{with_current, ClSums, DepthObserver, ObserverKind};
use crate::dynamics::{f_m, f_u, ChiProjection};
use crate::error::{Error, Result};
use crate::excitation::{HistoryStack, StackEntry};
use crate::integrate::rk4_scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReducedMode {
    /// `chi_hat = kappa + gamma`, no image-point derivatives needed.
    #[default]
    Integral,
    /// `chi_hat` integrated directly from stacked image-point derivatives.
    Differential,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedOrderState {
    pub mode: ReducedMode,
    pub k_bar: f64,
    /// Internal state. In differential mode it equals `chi_hat`.
    pub kappa: f64,
    /// Output-injection term; always zero in differential mode.
    pub gamma_val: f64,
    pub chi_hat: f64,
}

/// `gamma = -K_bar * sum_j theta_j^T v_j`.
pub fn gamma_value<'a, I>(entries: I, k_bar: f64) -> f64
where
    I: IntoIterator<Item = &'a StackEntry>,
{
    -k_bar * entries.into_iter().map(|e| e.theta().dot(e.v())).sum::<f64>()
}

/// Sums for the integral-mode `kappa` dynamics:
/// `sum_j (theta_j^T v_dot_j - Omega_j f_m_j)` and `sum_j Omega_j Omega_j^T`.
fn integral_sums<'a, I>(entries: I) -> (f64, f64)
where
    I: IntoIterator<Item = &'a StackEntry>,
{
    entries.into_iter().fold((0.0, 0.0), |(c, b), e| {
        let drift = e.theta().dot(&e.input.v_dot) - e.omega_row().dot(&f_m(&e.s, &e.input.omega));
        (c + drift, b + e.info())
    })
}

fn check(state: &ReducedOrderState, mode: ReducedMode, dt: f64) -> Result<()> {
    if state.mode != mode {
        return Err(Error::Config(format!("observer state is in {:?} mode", state.mode)));
    }
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    if !(state.k_bar > 0.0) {
        return Err(Error::Config(format!("K_bar must be positive, got {}", state.k_bar)));
    }
    Ok(())
}

/// One RK4 step of `kappa`. `gamma` is held at its value for the current
/// stack and measurement; the returned `chi_hat` uses the same `gamma` and is
/// refreshed at the next sample.
pub fn reduced_order_step_integral(
    state: &ReducedOrderState,
    current: &StackEntry,
    hist: &HistoryStack,
    projection: &ChiProjection,
    dt: f64,
) -> Result<ReducedOrderState> {
    check(state, ReducedMode::Integral, dt)?;
    let k_bar = state.k_bar;
    let gamma = gamma_value(with_current(hist, current), k_bar);
    let (c, b) = integral_sums(with_current(hist, current));
    let (s, u) = (&current.s, &current.input);
    let kappa = rk4_scalar(current.t, state.kappa, dt, |_, kappa| {
        let chi_hat = projection.apply(kappa + gamma);
        f_u(s, chi_hat, u) + k_bar * (c - b * chi_hat)
    });
    Ok(ReducedOrderState { kappa, gamma_val: gamma, chi_hat: projection.apply(kappa + gamma), ..*state })
}

pub fn reduced_order_step_differential(
    state: &ReducedOrderState,
    current: &StackEntry,
    hist: &HistoryStack,
    projection: &ChiProjection,
    dt: f64,
) -> Result<ReducedOrderState> {
    check(state, ReducedMode::Differential, dt)?;
    let k_bar = state.k_bar;
    let cl = ClSums::over(with_current(hist, current))?;
    let (s, u) = (&current.s, &current.input);
    let chi = rk4_scalar(current.t, state.chi_hat, dt, |_, chi| f_u(s, chi, u) + k_bar * cl.correction(chi));
    let chi_hat = projection.apply(chi);
    Ok(ReducedOrderState { kappa: chi_hat, gamma_val: 0.0, chi_hat, ..*state })
}

#[derive(Clone, Debug)]
pub struct ReducedOrderObserver {
    pub state: ReducedOrderState,
    pub projection: ChiProjection,
    /// `kappa` is initialized from `chi_hat0` at the first output, once `gamma_0` is known.
    initialized: bool,
}

impl ReducedOrderObserver {
    pub fn new(chi_hat0: f64, k_bar: f64, mode: ReducedMode, projection: ChiProjection) -> Result<Self> {
        if !(k_bar > 0.0) || !k_bar.is_finite() {
            return Err(Error::Config(format!("K_bar must be positive, got {k_bar}")));
        }
        let chi_hat = projection.apply(chi_hat0);
        let state = ReducedOrderState { mode, k_bar, kappa: chi_hat, gamma_val: 0.0, chi_hat };
        Ok(Self { state, projection, initialized: mode == ReducedMode::Differential })
    }

    /// Starts from an explicit `kappa_0` instead of `chi_hat_0` (integral mode).
    pub fn with_kappa(kappa0: f64, k_bar: f64, projection: ChiProjection) -> Result<Self> {
        let mut obs = Self::new(kappa0, k_bar, ReducedMode::Integral, projection)?;
        obs.state.kappa = kappa0;
        obs.initialized = true;
        Ok(obs)
    }
}

impl DepthObserver for ReducedOrderObserver {
    fn kind(&self) -> ObserverKind {
        match self.state.mode {
            ReducedMode::Integral => ObserverKind::ReducedIntegral,
            ReducedMode::Differential => ObserverKind::ReducedDifferential,
        }
    }

    fn chi_hat(&self) -> f64 {
        self.state.chi_hat
    }

    fn output(&mut self, current: &StackEntry, hist: &HistoryStack) -> Result<f64> {
        if self.state.mode == ReducedMode::Integral {
            let gamma = gamma_value(with_current(hist, current), self.state.k_bar);
            if !self.initialized {
                self.state.kappa = self.state.chi_hat - gamma;
                self.initialized = true;
            }
            self.state.gamma_val = gamma;
            self.state.chi_hat = self.projection.apply(self.state.kappa + gamma);
        }
        Ok(self.state.chi_hat)
    }

    fn advance(&mut self, current: &StackEntry, hist: &HistoryStack, dt: f64) -> Result<()> {
        self.state = match self.state.mode {
            ReducedMode::Integral => reduced_order_step_integral(&self.state, current, hist, &self.projection, dt)?,
            ReducedMode::Differential => {
                reduced_order_step_differential(&self.state, current, hist, &self.projection, dt)?
            }
        };
        Ok(())
    }

    fn stack_jump(&self, current: &StackEntry, old: &HistoryStack, new: &HistoryStack) -> Option<f64> {
        match self.state.mode {
            ReducedMode::Integral => {
                let k = self.state.k_bar;
                Some(gamma_value(with_current(new, current), k) - gamma_value(with_current(old, current), k))
            }
            ReducedMode::Differential => None,
        }
    }
}
