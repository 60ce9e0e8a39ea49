//! Perspective dynamics of a static feature point seen by a moving camera.
//!
//! The state is the normalized image point `s = (x, y)` and the inverse depth
//! `chi = 1 / Z`. With camera linear velocity `v` and angular velocity `omega`
//! expressed in the camera frame:
//!
//! ```text
//! s_dot   = f_m(s, omega) + Omega(s, v)^T chi
//! chi_dot = f_u(s, chi, u)
//! ```

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;

/// Image-plane coordinates plus inverse depth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureState {
    pub x: f64,
    pub y: f64,
    /// Inverse depth, 1/m.
    pub chi: f64,
}

impl FeatureState {
    pub fn new(x: f64, y: f64, chi: f64) -> Self {
        Self { x, y, chi }
    }

    pub fn s(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn depth(&self) -> f64 {
        1.0 / self.chi
    }

    pub fn to_vector(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.chi)
    }

    pub fn from_vector(q: &Vec3) -> Self {
        Self::new(q[0], q[1], q[2])
    }
}

/// Camera-frame Euclidean coordinates of the feature point, in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EuclideanPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EuclideanPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Projects onto the normalized image plane. Requires `Z > 0`.
    pub fn to_feature(&self) -> Result<FeatureState> {
        if !(self.z > 0.0) || !self.x.is_finite() || !self.y.is_finite() || !self.z.is_finite() {
            return Err(Error::Config(format!(
                "feature point must be finite with Z > 0, got ({}, {}, {})",
                self.x, self.y, self.z
            )));
        }
        Ok(FeatureState::new(self.x / self.z, self.y / self.z, 1.0 / self.z))
    }
}

/// Camera velocities and linear acceleration at time `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraInput {
    pub t: f64,
    /// Linear velocity, m/s.
    pub v: Vec3,
    /// Angular velocity, rad/s.
    pub omega: Vec3,
    /// Linear acceleration, m/s^2.
    pub v_dot: Vec3,
}

impl CameraInput {
    pub fn new(t: f64, v: Vec3, omega: Vec3, v_dot: Vec3) -> Self {
        Self { t, v, omega, v_dot }
    }

    pub fn at_rest(t: f64) -> Self {
        Self::new(t, Vec3::zeros(), Vec3::zeros(), Vec3::zeros())
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.v.iter().chain(self.omega.iter()).chain(self.v_dot.iter()).all(|c| c.is_finite())
    }
}

/// Rotational part of the image-point motion.
pub fn f_m(s: &Vec2, omega: &Vec3) -> Vec2 {
    let (x, y) = (s[0], s[1]);
    Vec2::new(
        x * y * omega[0] - (1.0 + x * x) * omega[1] + y * omega[2],
        (1.0 + y * y) * omega[0] - x * y * omega[1] - x * omega[2],
    )
}

/// The 1x2 regressor `Omega(s, v) = [x v_Z - v_X, y v_Z - v_Y]`, returned as a 2-vector.
pub fn omega_row(s: &Vec2, v: &Vec3) -> Vec2 {
    Vec2::new(s[0] * v[2] - v[0], s[1] * v[2] - v[1])
}

/// `Omega Omega^T`, the instantaneous excitation.
pub fn excitation(s: &Vec2, v: &Vec3) -> f64 {
    omega_row(s, v).norm_squared()
}

/// Inverse-depth drift `v_Z chi^2 + (y w_X - x w_Y) chi`.
pub fn f_u(s: &Vec2, chi: f64, u: &CameraInput) -> f64 {
    u.v[2] * chi * chi + (s[1] * u.omega[0] - s[0] * u.omega[1]) * chi
}

/// Time derivative of the full state `(x, y, chi)`.
pub fn state_rhs(q: &Vec3, u: &CameraInput) -> Vec3 {
    let s = Vec2::new(q[0], q[1]);
    let chi = q[2];
    let s_dot = f_m(&s, &u.omega) + omega_row(&s, &u.v) * chi;
    Vec3::new(s_dot[0], s_dot[1], f_u(&s, chi, u))
}

/// Exact image-point velocity given the true inverse depth.
pub fn s_dot(s: &Vec2, chi: f64, u: &CameraInput) -> Vec2 {
    f_m(s, &u.omega) + omega_row(s, &u.v) * chi
}

/// Admissible set for the true state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateBounds {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub chi_lo: f64,
    /// Focal length in meters; the upper inverse-depth bound is `1 / focal_length`.
    pub focal_length: f64,
}

impl Default for StateBounds {
    fn default() -> Self {
        Self { x: [-4.0, 4.0], y: [-4.0, 4.0], chi_lo: 0.01, focal_length: 0.01 }
    }
}

impl StateBounds {
    pub fn chi_hi(&self) -> f64 {
        1.0 / self.focal_length
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.x[0] < self.x[1]
            && self.y[0] < self.y[1]
            && self.chi_lo > 0.0
            && self.focal_length > 0.0
            && self.chi_lo < self.chi_hi();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("inconsistent state bounds {self:?}")))
        }
    }

    pub fn check(&self, t: f64, q: &FeatureState) -> Result<()> {
        if !(q.x >= self.x[0] && q.x <= self.x[1]) {
            return Err(Error::OutOfBounds { t, what: format!("x = {} outside {:?}", q.x, self.x) });
        }
        if !(q.y >= self.y[0] && q.y <= self.y[1]) {
            return Err(Error::OutOfBounds { t, what: format!("y = {} outside {:?}", q.y, self.y) });
        }
        if !(q.chi > self.chi_lo && q.chi <= self.chi_hi()) {
            return Err(Error::OutOfBounds {
                t,
                what: format!("chi = {} outside ({}, {}]", q.chi, self.chi_lo, self.chi_hi()),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMode {
    #[default]
    Hard,
    Soft,
}

/// Keeps the inverse-depth estimate inside `[lo, hi]`.
///
/// `Hard` is a clamp. `Soft` is the identity on `[lo + band, hi - band]` and a
/// C1 tanh saturation inside the band, so the output never reaches the bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiProjection {
    pub lo: f64,
    pub hi: f64,
    pub mode: ProjectionMode,
    pub band: f64,
}

impl ChiProjection {
    pub fn hard(lo: f64, hi: f64) -> Self {
        Self { lo, hi, mode: ProjectionMode::Hard, band: 0.0 }
    }

    pub fn soft(lo: f64, hi: f64, band: f64) -> Self {
        Self { lo, hi, mode: ProjectionMode::Soft, band }
    }

    pub fn from_bounds(bounds: &StateBounds, mode: ProjectionMode) -> Self {
        let (lo, hi) = (bounds.chi_lo, bounds.chi_hi());
        match mode {
            ProjectionMode::Hard => Self::hard(lo, hi),
            ProjectionMode::Soft => Self::soft(lo, hi, 0.01 * (hi - lo)),
        }
    }

    pub fn apply(&self, chi_hat: f64) -> f64 {
        match self.mode {
            ProjectionMode::Hard => chi_hat.clamp(self.lo, self.hi),
            ProjectionMode::Soft => {
                let w = self.band.min(0.5 * (self.hi - self.lo));
                if w <= 0.0 {
                    return chi_hat.clamp(self.lo, self.hi);
                }
                let upper = self.hi - w;
                let lower = self.lo + w;
                if chi_hat > upper {
                    upper + w * ((chi_hat - upper) / w).tanh()
                } else if chi_hat < lower {
                    lower - w * ((lower - chi_hat) / w).tanh()
                } else {
                    chi_hat
                }
            }
        }
    }
}
