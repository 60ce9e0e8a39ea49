use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::{CameraInput, Vec2, Vec3};
use crate::error::{Error, Result};
use crate::truth::InputProfile;

/// Camera motion of a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileSpec {
    /// `v = (0.3, 0.2 cos(pi t / 4), -0.3)`, `omega = (0, -pi / 30, 0)`.
    Sim1,
    /// [`ProfileSpec::Sim1`] outside `pe_violation`; inside it the camera
    /// translates along the ray through the (measured) feature point with
    /// `v = cos(pi t / 4) (x, y, 1) / 10` and `omega = 0`, so `Omega = 0`.
    Sim2 {
        pe_violation: [f64; 2],
    },
    Constant {
        v: [f64; 3],
        omega: [f64; 3],
    },
    /// Rows of `[t, vx, vy, vz, wx, wy, wz, ax, ay, az]`, linearly
    /// interpolated and held constant outside the table.
    Tabulated {
        rows: Vec<[f64; 10]>,
    },
}

impl ProfileSpec {
    pub fn sim2_default() -> Self {
        ProfileSpec::Sim2 { pe_violation: [31.0, 38.0] }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProfileSpec::Sim2 { pe_violation: [a, b] } if !(a < b) => {
                Err(Error::Config(format!("pe_violation window [{a}, {b}] is empty")))
            }
            ProfileSpec::Constant { v, omega } if v.iter().chain(omega).any(|c| !c.is_finite()) => {
                Err(Error::Config("constant profile has non-finite velocity".into()))
            }
            ProfileSpec::Tabulated { rows } => {
                if rows.is_empty() {
                    return Err(Error::Config("tabulated profile has no rows".into()));
                }
                if rows.iter().flatten().any(|c| !c.is_finite()) {
                    return Err(Error::Config("tabulated profile has non-finite entries".into()));
                }
                if let Some(k) = rows.windows(2).position(|w| !(w[1][0] > w[0][0])) {
                    return Err(Error::Config(format!("tabulated profile times not increasing at row {}", k + 1)));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Whether `t` is inside the PE-violation segment (closed interval).
    pub fn in_pe_violation(&self, t: f64) -> bool {
        matches!(self, ProfileSpec::Sim2 { pe_violation: [a, b] } if t >= *a && t <= *b)
    }
}

fn sim1(t: f64) -> CameraInput {
    let w = PI / 4.0;
    CameraInput::new(
        t,
        Vec3::new(0.3, 0.2 * (w * t).cos(), -0.3),
        Vec3::new(0.0, -PI / 30.0, 0.0),
        Vec3::new(0.0, -0.2 * w * (w * t).sin(), 0.0),
    )
}

impl InputProfile for ProfileSpec {
    fn input(&self, t: f64, s: &Vec2) -> CameraInput {
        match self {
            ProfileSpec::Sim1 => sim1(t),
            ProfileSpec::Sim2 { .. } if self.in_pe_violation(t) => {
                let w = PI / 4.0;
                let ray = Vec3::new(s[0], s[1], 1.0) / 10.0;
                // The feedback point is held over a step, so only c1 varies.
                CameraInput::new(t, ray * (w * t).cos(), Vec3::zeros(), ray * (-w * (w * t).sin()))
            }
            ProfileSpec::Sim2 { .. } => sim1(t),
            ProfileSpec::Constant { v, omega } => CameraInput::new(t, (*v).into(), (*omega).into(), Vec3::zeros()),
            ProfileSpec::Tabulated { rows } => tabulated(rows, t),
        }
    }

    fn uses_feedback(&self) -> bool {
        matches!(self, ProfileSpec::Sim2 { .. })
    }
}

fn tabulated(rows: &[[f64; 10]], t: f64) -> CameraInput {
    let from_row = |r: &[f64; 10]| {
        CameraInput::new(t, Vec3::new(r[1], r[2], r[3]), Vec3::new(r[4], r[5], r[6]), Vec3::new(r[7], r[8], r[9]))
    };
    let k = rows.partition_point(|r| r[0] <= t);
    if k == 0 {
        return from_row(&rows[0]);
    }
    if k == rows.len() {
        return from_row(&rows[rows.len() - 1]);
    }
    let (a, b) = (&rows[k - 1], &rows[k]);
    let w = (t - a[0]) / (b[0] - a[0]);
    let mut r = [0.0; 10];
    for i in 1..10 {
        r[i] = a[i] + w * (b[i] - a[i]);
    }
    from_row(&r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::excitation;

    #[test]
    fn sim1_velocity_values() {
        let u = ProfileSpec::Sim1.input(4.0, &Vec2::zeros());
        assert!((u.v[1] + 0.2).abs() < 1e-15);
        assert_eq!(u.v[0], 0.3);
        assert_eq!(u.omega[1], -PI / 30.0);
    }

    #[test]
    fn sim2_violation_zeroes_excitation() {
        let p = ProfileSpec::sim2_default();
        for &t in &[31.0, 33.3, 37.99, 38.0] {
            let s = Vec2::new(1.7, -0.4);
            let u = p.input(t, &s);
            assert!(excitation(&s, &u.v) < 1e-30, "t = {t}");
            assert_eq!(u.omega, Vec3::zeros());
        }
        assert!(excitation(&Vec2::new(1.7, -0.4), &p.input(38.1, &Vec2::new(1.7, -0.4)).v) > 0.0);
    }

    #[test]
    fn sim2_acceleration_matches_finite_difference() {
        let p = ProfileSpec::sim2_default();
        let s = Vec2::new(0.5, 0.2);
        let h = 1e-6;
        let fd = (p.input(34.0 + h, &s).v - p.input(34.0 - h, &s).v) / (2.0 * h);
        assert!((fd - p.input(34.0, &s).v_dot).norm() < 1e-8);
    }

    #[test]
    fn tabulated_interpolates_and_clamps() {
        let p = ProfileSpec::Tabulated {
            rows: vec![
                [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                [2.0, 1.0, 2.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            ],
        };
        assert_eq!(p.input(1.0, &Vec2::zeros()).v, Vec3::new(0.5, 1.0, 1.5));
        assert_eq!(p.input(5.0, &Vec2::zeros()).v, Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(p.input(-1.0, &Vec2::zeros()).v, Vec3::zeros());
    }

    #[test]
    fn bad_tables_rejected() {
        let row = [0.0; 10];
        assert!(ProfileSpec::Tabulated { rows: vec![row, row] }.validate().is_err());
        assert!(ProfileSpec::Sim2 { pe_violation: [5.0, 5.0] }.validate().is_err());
    }
}
