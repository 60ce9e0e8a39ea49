//! Measurement noise: additive white Gaussian noise on the image point at a
//! per-channel SNR, and zero-mean Gaussian noise on the measured velocities.
//!
//! Noise is drawn up front as a table of standard normals (two state channels
//! then six velocity channels per sample) from a seeded ChaCha stream, and then
//! scaled. Drawing first keeps [`add_noise`] and the feedback simulation in the
//! scenario runner on the exact same realization.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dynamics::{CameraInput, Vec2, Vec3};
use crate::error::{Error, Result};

/// Signal-to-noise ratio in dB, or `off`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Snr(pub Option<f64>);

impl Snr {
    pub fn db(db: f64) -> Self {
        Snr(Some(db))
    }

    pub fn off() -> Self {
        Snr(None)
    }

    /// Noise power as a fraction of signal power.
    pub fn noise_fraction(&self) -> f64 {
        match self.0 {
            Some(db) => 10f64.powf(-db / 10.0),
            None => 0.0,
        }
    }
}

impl Serialize for Snr {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Some(db) => ser.serialize_f64(db),
            None => ser.serialize_str("off"),
        }
    }
}

impl<'de> Deserialize<'de> for Snr {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Num(db) if db.is_finite() => Ok(Snr(Some(db))),
            Raw::Int(db) => Ok(Snr(Some(db as f64))),
            Raw::Text(s) if s.eq_ignore_ascii_case("off") => Ok(Snr(None)),
            _ => Err(serde::de::Error::custom("snr must be a finite number of dB or \"off\"")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub state_snr_db: Snr,
    /// Variance of the additive noise on every linear and angular velocity component.
    pub vel_noise_var: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn off() -> Self {
        Self { state_snr_db: Snr::off(), vel_noise_var: 0.0, seed: 0 }
    }

    pub fn is_off(&self) -> bool {
        self.state_snr_db.0.is_none() && self.vel_noise_var == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.vel_noise_var >= 0.0) || !self.vel_noise_var.is_finite() {
            return Err(Error::Config(format!("vel_noise_var must be >= 0, got {}", self.vel_noise_var)));
        }
        Ok(())
    }
}

/// Per-channel noise standard deviations.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NoiseScale {
    pub state_std: [f64; 2],
    pub vel_std: f64,
}

impl NoiseScale {
    /// Noise variance = mean signal power of the clean channel times 10^(-SNR/10).
    pub fn from_clean(clean: &[Vec2], spec: &NoiseSpec) -> Self {
        let frac = spec.state_snr_db.noise_fraction();
        let n = clean.len().max(1) as f64;
        let mut state_std = [0.0; 2];
        for (c, std) in state_std.iter_mut().enumerate() {
            let power = clean.iter().map(|s| s[c] * s[c]).sum::<f64>() / n;
            *std = (power * frac).sqrt();
        }
        Self { state_std, vel_std: spec.vel_noise_var.sqrt() }
    }
}

/// Standard-normal draws, eight per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseDraws {
    draws: Vec<[f64; 8]>,
}

impl NoiseDraws {
    pub fn generate(seed: u64, len: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws = (0..len)
            .map(|_| {
                let mut d = [0.0; 8];
                for slot in d.iter_mut() {
                    *slot = StandardNormal.sample(&mut rng);
                }
                d
            })
            .collect();
        Self { draws }
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn state_noise(&self, k: usize, scale: &NoiseScale) -> Vec2 {
        let d = &self.draws[k];
        Vec2::new(scale.state_std[0] * d[0], scale.state_std[1] * d[1])
    }

    /// Returns the measured input. Acceleration is passed through unperturbed.
    pub fn perturb_input(&self, k: usize, scale: &NoiseScale, u: &CameraInput) -> CameraInput {
        if scale.vel_std == 0.0 {
            return *u;
        }
        let d = &self.draws[k];
        let sd = scale.vel_std;
        CameraInput {
            v: u.v + Vec3::new(d[2], d[3], d[4]) * sd,
            omega: u.omega + Vec3::new(d[5], d[6], d[7]) * sd,
            ..*u
        }
    }
}

/// A measured sample: image point and camera input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasuredSample {
    pub s: Vec2,
    pub input: CameraInput,
}

/// Perturbs a clean series. `spec` off returns the series unchanged; a fixed
/// seed gives bitwise-identical output.
pub fn add_noise(series: &[MeasuredSample], spec: &NoiseSpec) -> Vec<MeasuredSample> {
    if spec.is_off() {
        return series.to_vec();
    }
    let clean: Vec<Vec2> = series.iter().map(|m| m.s).collect();
    let scale = NoiseScale::from_clean(&clean, spec);
    let draws = NoiseDraws::generate(spec.seed, series.len());
    apply_noise(series, &scale, &draws)
}

pub fn apply_noise(series: &[MeasuredSample], scale: &NoiseScale, draws: &NoiseDraws) -> Vec<MeasuredSample> {
    series
        .iter()
        .enumerate()
        .map(|(k, m)| MeasuredSample {
            s: m.s + draws.state_noise(k, scale),
            input: draws.perturb_input(k, scale, &m.input),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(n: usize) -> Vec<MeasuredSample> {
        (0..n)
            .map(|k| {
                let t = k as f64 / 30.0;
                MeasuredSample {
                    s: Vec2::new(1.0 + 0.5 * t.sin(), 0.2 * t.cos()),
                    input: CameraInput::new(t, Vec3::new(0.3, 0.1, -0.3), Vec3::new(0.0, -0.1, 0.0), Vec3::zeros()),
                }
            })
            .collect()
    }

    #[test]
    fn off_is_identity() {
        let s = series(50);
        assert_eq!(add_noise(&s, &NoiseSpec::off()), s);
    }

    #[test]
    fn fixed_seed_is_bitwise_reproducible() {
        let spec = NoiseSpec { state_snr_db: Snr::db(20.0), vel_noise_var: 0.01, seed: 42 };
        let s = series(200);
        let a = add_noise(&s, &spec);
        let b = add_noise(&s, &spec);
        assert_eq!(a, b);
        let other = add_noise(&s, &NoiseSpec { seed: 43, ..spec });
        assert_ne!(a, other);
    }

    #[test]
    fn forty_db_gives_expected_noise_power() {
        let n = 20_000;
        let s = series(n);
        let spec = NoiseSpec { state_snr_db: Snr::db(40.0), vel_noise_var: 0.0, seed: 7 };
        let noisy = add_noise(&s, &spec);
        for c in 0..2 {
            let signal = s.iter().map(|m| m.s[c] * m.s[c]).sum::<f64>() / n as f64;
            let noise = s.iter().zip(&noisy).map(|(a, b)| (b.s[c] - a.s[c]).powi(2)).sum::<f64>() / n as f64;
            let expected = signal * 1e-4;
            assert!((noise / expected - 1.0).abs() < 0.05, "channel {c}: {noise} vs {expected}");
        }
    }

    #[test]
    fn velocity_noise_has_requested_variance() {
        let n = 20_000;
        let s = series(n);
        let spec = NoiseSpec { state_snr_db: Snr::off(), vel_noise_var: 0.01, seed: 3 };
        let noisy = add_noise(&s, &spec);
        let var = s.iter().zip(&noisy).map(|(a, b)| (b.input.v[0] - a.input.v[0]).powi(2)).sum::<f64>() / n as f64;
        assert!((var / 0.01 - 1.0).abs() < 0.05);
        assert!(noisy.iter().zip(&s).all(|(a, b)| a.s == b.s && a.input.v_dot == b.input.v_dot));
    }

    #[test]
    fn snr_serde_accepts_off_and_numbers() {
        #[derive(Serialize, Deserialize, PartialEq, Debug)]
        struct W {
            snr: Snr,
        }
        let off: W = toml::from_str("snr = \"off\"").unwrap();
        assert_eq!(off.snr, Snr::off());
        let db: W = toml::from_str("snr = 40").unwrap();
        assert_eq!(db.snr, Snr::db(40.0));
        let back: W = toml::from_str(&toml::to_string(&W { snr: Snr::db(20.5) }).unwrap()).unwrap();
        assert_eq!(back.snr, Snr::db(20.5));
        assert!(toml::from_str::<W>("snr = \"loud\"").is_err());
    }
}
