use std::path::Path;

use serde::{Deserialize, Serialize};

use super::profiles::ProfileSpec;
use crate::derivative::DerivativeMethod;
use crate::dynamics::{EuclideanPoint, ProjectionMode, StateBounds};
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_CONV_THRESHOLD_PCT;
use crate::noise::NoiseSpec;
use crate::observers::{FullOrderGains, ObserverKind, DEFAULT_TOL_SV};

/// Where image-point derivatives come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DerivativeSource {
    #[default]
    Central,
    Backward,
    /// Exact `s_dot` from the simulated truth (noise-free derivative, `d_bar = 0`).
    Truth,
}

impl DerivativeSource {
    pub fn method(&self) -> Option<DerivativeMethod> {
        match self {
            DerivativeSource::Central => Some(DerivativeMethod::Central),
            DerivativeSource::Backward => Some(DerivativeMethod::Backward),
            DerivativeSource::Truth => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsConfig {
    pub h: [f64; 2],
    pub gamma: f64,
    pub k_cl: f64,
    pub k_bar: f64,
}

impl GainsConfig {
    pub fn full(&self) -> FullOrderGains {
        FullOrderGains { h: self.h, gamma: self.gamma, k_cl: self.k_cl }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackConfig {
    /// `M - 1`
    pub history: usize,
    /// `N`
    pub auxiliary: usize,
    pub epsilon: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    pub s_hat: [f64; 2],
    pub chi_hat: f64,
    /// Explicit `kappa_0` for the integral reduced-order observer. When unset,
    /// `kappa_0 = chi_hat - gamma_0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// Length of the trailing steady-state window, s.
    pub steady_window_s: f64,
    pub conv_threshold_pct: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { steady_window_s: 20.0, conv_threshold_pct: DEFAULT_CONV_THRESHOLD_PCT }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Trailing window `T0` of the running PE integral, s.
    pub pe_window_s: f64,
    pub ls_tol_sv: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { pe_window_s: 1.0, ls_tol_sv: DEFAULT_TOL_SV }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSpec {
    pub runs: usize,
    pub base_seed: u64,
    /// Standard deviation of the initial image-point estimate about `init.s_hat`.
    pub s_std: f64,
    /// Standard deviation of the initial inverse-depth estimate about `init.chi_hat`.
    pub chi_std: f64,
}

impl Default for MonteCarloSpec {
    fn default() -> Self {
        Self { runs: 100, base_seed: 0, s_std: 1.0, chi_std: 0.3 }
    }
}

impl MonteCarloSpec {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("montecarlo.runs must be >= 1".into()));
        }
        if !(self.s_std >= 0.0 && self.chi_std >= 0.0) {
            return Err(Error::Config("montecarlo spreads must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn normalize(&self, px: f64, py: f64) -> (f64, f64) {
        ((px - self.cx) / self.fx, (py - self.cy) / self.fy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayConfig {
    /// Log `x, y` columns are pixels and get normalized with `intrinsics`.
    pub pixel_units: bool,
    pub intrinsics: Intrinsics,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self { pixel_units: false, intrinsics: Intrinsics { fx: 407.1, fy: 407.1, cx: 323.4, cy: 205.6 } }
    }
}

/// Complete, serializable description of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub observer: ObserverKind,
    pub dt: f64,
    pub horizon: f64,
    #[serde(default)]
    pub derivative: DerivativeSource,
    #[serde(default)]
    pub projection: ProjectionMode,
    pub m0: EuclideanPoint,
    pub profile: ProfileSpec,
    pub noise: NoiseSpec,
    pub gains: GainsConfig,
    pub stacks: StackConfig,
    pub init: InitConfig,
    #[serde(default)]
    pub bounds: StateBounds,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub montecarlo: MonteCarloSpec,
    #[serde(default)]
    pub replay: ReplayConfig,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.horizon >= self.dt) || !self.horizon.is_finite() {
            return bad(format!("horizon {} must be >= dt {}", self.horizon, self.dt));
        }
        if self.stacks.history == 0 || self.stacks.auxiliary < self.stacks.history {
            return bad(format!(
                "stack sizes need 1 <= history <= auxiliary, got ({}, {})",
                self.stacks.history, self.stacks.auxiliary
            ));
        }
        if !(self.stacks.epsilon >= 0.0) {
            return bad(format!("stacks.epsilon must be >= 0, got {}", self.stacks.epsilon));
        }
        match self.observer {
            ObserverKind::Full => self.gains.full().validate()?,
            ObserverKind::ReducedIntegral | ObserverKind::ReducedDifferential if !(self.gains.k_bar > 0.0) => {
                return bad(format!("gains.k_bar must be positive, got {}", self.gains.k_bar));
            }
            _ => {}
        }
        if !self.init.s_hat.iter().all(|c| c.is_finite()) || !self.init.chi_hat.is_finite() {
            return bad("init values must be finite".into());
        }
        if !(self.metrics.conv_threshold_pct > 0.0) || !(self.metrics.steady_window_s > 0.0) {
            return bad("metrics threshold and window must be positive".into());
        }
        if !(self.diagnostics.pe_window_s > 0.0) {
            return bad("diagnostics.pe_window_s must be positive".into());
        }
        self.noise.validate()?;
        self.bounds.validate()?;
        self.profile.validate()?;
        self.m0.to_feature()?;
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Applies `key=value` overrides with dotted keys, e.g. `noise.state_snr_db=off`.
    /// Values are parsed as TOML and fall back to plain strings.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut root = toml::Table::try_from(self)?;
        for o in overrides {
            let o = o.as_ref();
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not of the form key=value")))?;
            set_dotted(&mut root, key.trim(), parse_value(value.trim()))?;
        }
        let cfg: ScenarioConfig = root.try_into().map_err(|e: toml::de::Error| {
            let msg = e.message().to_string();
            match unknown_field(&msg) {
                Some(field) => {
                    let full = overrides
                        .iter()
                        .map(|o| o.as_ref().split_once('=').map_or("", |(k, _)| k.trim()).to_string())
                        .find(|k| k.rsplit('.').next() == Some(field))
                        .unwrap_or_else(|| field.to_string());
                    Error::UnknownKey(full)
                }
                None => Error::Config(msg),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_dotted(root: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::UnknownKey(key.to_string()));
    }
    let mut table = root;
    for p in &parts[..parts.len() - 1] {
        table = match table.get_mut(*p) {
            Some(toml::Value::Table(t)) => t,
            _ => return Err(Error::UnknownKey(key.to_string())),
        };
    }
    // New leaves are allowed here; unknown ones are rejected on deserialization.
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn unknown_field(msg: &str) -> Option<&str> {
    let rest = msg.strip_prefix("unknown field `")?;
    rest.split('`').next()
}
