use super::{DepthObserver, ObserverKind};
use crate::dynamics::{f_m, omega_row, CameraInput, ChiProjection, Vec2};
use crate::error::{Error, Result};
use crate::excitation::{HistoryStack, StackEntry};

/// Below this `|Omega|` the pseudo-inverse is dominated by measurement noise.
pub const DEFAULT_TOL_SV: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LsEstimate {
    Estimate(f64),
    IllConditioned,
}

impl LsEstimate {
    pub fn value(&self) -> Option<f64> {
        match *self {
            LsEstimate::Estimate(v) => Some(v),
            LsEstimate::IllConditioned => None,
        }
    }
}

/// Pointwise least-squares inverse depth `(Omega^T)^+ (s_dot - f_m)`.
pub fn ls_baseline(s: &Vec2, u: &CameraInput, s_dot_bar: &Vec2, tol_sv: f64) -> LsEstimate {
    let row = omega_row(s, &u.v);
    let norm2 = row.norm_squared();
    if !(norm2.sqrt() >= tol_sv) {
        return LsEstimate::IllConditioned;
    }
    LsEstimate::Estimate(row.dot(&(s_dot_bar - f_m(s, &u.omega))) / norm2)
}

/// Least-squares baseline wrapped as an observer. Ill-conditioned samples
/// hold the previous estimate.
#[derive(Clone, Debug)]
pub struct LsObserver {
    pub chi_hat: f64,
    pub tol_sv: f64,
    pub projection: ChiProjection,
    pub ill_conditioned: usize,
}

impl LsObserver {
    pub fn new(chi_hat0: f64, tol_sv: f64, projection: ChiProjection) -> Result<Self> {
        if !(tol_sv >= 0.0) {
            return Err(Error::Config(format!("tol_sv must be >= 0, got {tol_sv}")));
        }
        Ok(Self { chi_hat: projection.apply(chi_hat0), tol_sv, projection, ill_conditioned: 0 })
    }
}

impl DepthObserver for LsObserver {
    fn kind(&self) -> ObserverKind {
        ObserverKind::LeastSquares
    }

    fn chi_hat(&self) -> f64 {
        self.chi_hat
    }

    fn output(&mut self, current: &StackEntry, _hist: &HistoryStack) -> Result<f64> {
        let sd = current
            .s_dot_bar
            .ok_or_else(|| Error::MalformedStack("least-squares sample has no image-point derivative".into()))?;
        match ls_baseline(&current.s, &current.input, &sd, self.tol_sv) {
            LsEstimate::Estimate(v) => self.chi_hat = self.projection.apply(v),
            LsEstimate::IllConditioned => self.ill_conditioned += 1,
        }
        Ok(self.chi_hat)
    }

    fn advance(&mut self, _current: &StackEntry, _hist: &HistoryStack, _dt: f64) -> Result<()> {
        Ok(())
    }
}
