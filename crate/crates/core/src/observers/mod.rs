//! Depth observers driven by image-point and camera-velocity measurements.
//!
//! Every observer is stepped with zero-order-hold measurements: the current
//! sample and the history stack are frozen over one RK4 step. The history
//! stack handed to an observer holds samples strictly older than the current
//! one; the current sample is the `M`-th term of the concurrent-learning sums.

mod diagnostics;
mod full_order;
mod least_squares;
mod reduced_order;

use serde::{Deserialize, Serialize};

pub use diagnostics::{
    check_gain_condition_full, check_gain_condition_reduced, estimate_lipschitz_g, g_term, lipschitz_over_box,
    lipschitz_over_samples, ultimate_bound_full_complete, ultimate_bound_reduced_complete, GainCheck, LipschitzBox,
    LipschitzSample, ReducedBound,
};
pub use full_order::{full_order_rhs, full_order_step, FullOrderGains, FullOrderObserver, FullOrderState};
pub use least_squares::{ls_baseline, LsEstimate, LsObserver, DEFAULT_TOL_SV};
pub use reduced_order::{
    gamma_value, reduced_order_step_differential, reduced_order_step_integral, ReducedMode, ReducedOrderObserver,
    ReducedOrderState,
};

use crate::dynamics::{f_m, Vec2};
use crate::error::{Error, Result};
use crate::excitation::{HistoryStack, StackEntry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObserverKind {
    #[serde(rename = "full")]
    Full,
    #[serde(rename = "reduced", alias = "reduced_integral")]
    ReducedIntegral,
    #[serde(rename = "reduced-diff", alias = "reduced_differential")]
    ReducedDifferential,
    #[serde(rename = "ls", alias = "ls_baseline")]
    LeastSquares,
}

impl ObserverKind {
    pub const ALL: [ObserverKind; 4] = [
        ObserverKind::Full,
        ObserverKind::ReducedIntegral,
        ObserverKind::ReducedDifferential,
        ObserverKind::LeastSquares,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ObserverKind::Full => "full",
            ObserverKind::ReducedIntegral => "reduced",
            ObserverKind::ReducedDifferential => "reduced-diff",
            ObserverKind::LeastSquares => "ls",
        }
    }

    /// Whether the observer consumes numerical image-point derivatives.
    pub fn needs_derivative(&self) -> bool {
        !matches!(self, ObserverKind::ReducedIntegral)
    }
}

impl std::str::FromStr for ObserverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(ObserverKind::Full),
            "reduced" | "reduced_integral" => Ok(ObserverKind::ReducedIntegral),
            "reduced-diff" | "reduced_differential" => Ok(ObserverKind::ReducedDifferential),
            "ls" | "ls_baseline" => Ok(ObserverKind::LeastSquares),
            other => Err(Error::Config(format!("unknown observer `{other}`"))),
        }
    }
}

impl std::fmt::Display for ObserverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The concurrent-learning sum `sum_j Omega_j (s_dot_j - f_m_j - Omega_j^T chi)`
/// is affine in `chi`; this holds its two coefficients.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ClSums {
    /// `sum_j Omega_j (s_dot_j - f_m_j)`
    pub drive: f64,
    /// `sum_j Omega_j Omega_j^T`
    pub info: f64,
}

impl ClSums {
    pub fn over<'a, I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a StackEntry>,
    {
        let mut acc = ClSums::default();
        for (j, e) in entries.into_iter().enumerate() {
            let sd =
                e.s_dot_bar.ok_or_else(|| Error::MalformedStack(format!("entry {j} has no image-point derivative")))?;
            let row = e.omega_row();
            acc.drive += row.dot(&(sd - f_m(&e.s, &e.input.omega)));
            acc.info += e.info();
        }
        Ok(acc)
    }

    pub fn correction(&self, chi_hat: f64) -> f64 {
        self.drive - self.info * chi_hat
    }
}

/// The `M` entries of the concurrent-learning sums: stored entries then the current sample.
pub(crate) fn with_current<'a>(
    hist: &'a HistoryStack,
    current: &'a StackEntry,
) -> impl Iterator<Item = &'a StackEntry> + Clone {
    hist.entries().iter().chain(std::iter::once(current))
}

/// Common stepping interface for the observers.
pub trait DepthObserver: Send {
    fn kind(&self) -> ObserverKind;

    fn chi_hat(&self) -> f64;

    fn s_hat(&self) -> Option<Vec2> {
        None
    }

    /// Produces the estimate at the current sample time.
    fn output(&mut self, current: &StackEntry, hist: &HistoryStack) -> Result<f64>;

    /// Integrates from the current sample to the next one.
    fn advance(&mut self, current: &StackEntry, hist: &HistoryStack, dt: f64) -> Result<()>;

    /// Jump in the estimate caused by replacing `old` with `new`, if the
    /// observer's output depends on stack contents directly.
    fn stack_jump(&self, _current: &StackEntry, _old: &HistoryStack, _new: &HistoryStack) -> Option<f64> {
        None
    }
}
