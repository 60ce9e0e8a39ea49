//! Built-in scenarios and the end-to-end run pipeline:
//! truth, noise, differentiation, observer and stacks, metrics.

mod config;
mod montecarlo;
mod profiles;
mod replay;

use serde::{Deserialize, Serialize};

pub use config::{
    DerivativeSource, DiagnosticsConfig, GainsConfig, InitConfig, Intrinsics, MetricsConfig, MonteCarloSpec,
    ReplayConfig, ScenarioConfig, StackConfig,
};
pub use montecarlo::{perturbed_init, run_monte_carlo, run_seed, MonteCarloReport, MonteCarloRun};
pub use profiles::ProfileSpec;
pub use replay::{replay_log, replay_records, LogRecord};

use crate::derivative::differentiate;
use crate::dynamics::{
    excitation, s_dot, CameraInput, ChiProjection, EuclideanPoint, ProjectionMode, StateBounds, Vec2,
};
use crate::error::{Error, Result};
use crate::excitation::{StackEntry, StackPair};
use crate::metrics::{DepthSeries, MetricsReport, Window};
use crate::noise::{MeasuredSample, NoiseDraws, NoiseScale, NoiseSpec, Snr};
use crate::observers::{
    check_gain_condition_full, check_gain_condition_reduced, g_term, DepthObserver, FullOrderObserver, LsObserver,
    ObserverKind, ReducedMode, ReducedOrderObserver,
};
use crate::truth::{simulate_truth, simulate_truth_with_feedback, InputProfile, TruthSample};

const SIM1_GAINS: GainsConfig = GainsConfig { h: [10.0, 10.0], gamma: 5.0, k_cl: 0.15, k_bar: 0.75 };

/// Simulation 1: persistently exciting motion, full-order observer.
pub fn scenario_sim1() -> ScenarioConfig {
    ScenarioConfig {
        name: "sim1".into(),
        observer: ObserverKind::Full,
        dt: 1.0 / 30.0,
        horizon: 50.0,
        derivative: DerivativeSource::Central,
        projection: ProjectionMode::Hard,
        m0: EuclideanPoint::new(2.5, 0.5, 3.0),
        profile: ProfileSpec::Sim1,
        noise: NoiseSpec { state_snr_db: Snr::db(40.0), vel_noise_var: 0.01, seed: 1 },
        gains: SIM1_GAINS,
        stacks: StackConfig { history: 3, auxiliary: 5, epsilon: 0.5 },
        init: InitConfig { s_hat: [10.0, 5.0], chi_hat: 3.0, kappa: None },
        bounds: StateBounds::default(),
        metrics: MetricsConfig::default(),
        diagnostics: DiagnosticsConfig::default(),
        montecarlo: MonteCarloSpec::default(),
        replay: ReplayConfig::default(),
    }
}

/// Simulation 2: excitation is switched off over `[31, 38]` s, reduced-order observer.
pub fn scenario_sim2() -> ScenarioConfig {
    ScenarioConfig {
        name: "sim2".into(),
        observer: ObserverKind::ReducedIntegral,
        m0: EuclideanPoint::new(1.0, 1.0, 1.0),
        profile: ProfileSpec::sim2_default(),
        noise: NoiseSpec { state_snr_db: Snr::db(20.0), vel_noise_var: 0.01, seed: 2 },
        gains: GainsConfig { k_bar: 2e-3, ..SIM1_GAINS },
        stacks: StackConfig { history: 120, auxiliary: 150, epsilon: 20.0 },
        init: InitConfig { s_hat: [1.0, 1.0], chi_hat: 0.08, kappa: None },
        montecarlo: MonteCarloSpec { runs: 25, ..MonteCarloSpec::default() },
        ..scenario_sim1()
    }
}

/// Defaults for replaying a logged experiment. `m0`, `profile` and `noise` are unused.
pub fn scenario_replay() -> ScenarioConfig {
    ScenarioConfig {
        name: "replay".into(),
        m0: EuclideanPoint::new(0.0, 0.0, 1.0),
        profile: ProfileSpec::Constant { v: [0.0; 3], omega: [0.0; 3] },
        noise: NoiseSpec::off(),
        stacks: StackConfig { history: 120, auxiliary: 150, epsilon: 0.03 },
        init: InitConfig { s_hat: [1.0, 1.0], chi_hat: 2.5, kappa: None },
        ..scenario_sim1()
    }
}

pub fn builtin(name: &str) -> Option<ScenarioConfig> {
    match name {
        "sim1" => Some(scenario_sim1()),
        "sim2" => Some(scenario_sim2()),
        "replay" => Some(scenario_replay()),
        _ => None,
    }
}

/// Measurement series ready to be fed to an observer.
#[derive(Clone, Debug, PartialEq)]
pub struct Prepared {
    pub dt: f64,
    pub times: Vec<f64>,
    pub measured: Vec<MeasuredSample>,
    pub s_dot_bar: Vec<Vec2>,
    /// Simulated truth, when the data came from a simulation.
    pub truth: Option<Vec<TruthSample>>,
    /// True inverse depth per sample, when known.
    pub chi_true: Option<Vec<f64>>,
    /// Exact image-point derivative along the truth, when known.
    pub s_dot_true: Option<Vec<Vec2>>,
}

/// Simulates truth, applies noise and differentiates the measured image point.
pub fn prepare_measurements(cfg: &ScenarioConfig) -> Result<Prepared> {
    cfg.validate()?;
    let profile = &cfg.profile;
    let n = crate::integrate::step_count(cfg.dt, cfg.horizon) + 1;
    let draws = NoiseDraws::generate(cfg.noise.seed, n);
    let noisy = !cfg.noise.is_off();

    let (truth, scale) = if profile.uses_feedback() && cfg.noise.state_snr_db.0.is_some() {
        // The controller sees the measured point: size the noise from a clean
        // pilot run, then rerun with the noisy feedback.
        let pilot = simulate_truth(&cfg.m0, profile, cfg.dt, cfg.horizon, &cfg.bounds)?;
        let clean: Vec<Vec2> = pilot.samples.iter().map(|p| p.state.s()).collect();
        let scale = NoiseScale::from_clean(&clean, &cfg.noise);
        let traj = simulate_truth_with_feedback(&cfg.m0, profile, cfg.dt, cfg.horizon, &cfg.bounds, |k, s| {
            s + draws.state_noise(k, &scale)
        })?;
        (traj, scale)
    } else {
        let traj = simulate_truth(&cfg.m0, profile, cfg.dt, cfg.horizon, &cfg.bounds)?;
        let clean: Vec<Vec2> = traj.samples.iter().map(|p| p.state.s()).collect();
        (traj, NoiseScale::from_clean(&clean, &cfg.noise))
    };

    let measured: Vec<MeasuredSample> = truth
        .samples
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let clean = MeasuredSample { s: p.state.s(), input: p.input };
            if noisy {
                MeasuredSample {
                    s: clean.s + draws.state_noise(k, &scale),
                    input: draws.perturb_input(k, &scale, &p.input),
                }
            } else {
                clean
            }
        })
        .collect();
    let s_dot_true: Vec<Vec2> = truth.samples.iter().map(|p| s_dot(&p.state.s(), p.state.chi, &p.input)).collect();
    let s_dot_bar = match cfg.derivative.method() {
        Some(m) => differentiate(&measured.iter().map(|m| m.s).collect::<Vec<_>>(), cfg.dt, m)?,
        None => s_dot_true.clone(),
    };
    Ok(Prepared {
        dt: cfg.dt,
        times: truth.times().collect(),
        chi_true: Some(truth.samples.iter().map(|p| p.state.chi).collect()),
        truth: Some(truth.samples),
        measured,
        s_dot_bar,
        s_dot_true: Some(s_dot_true),
    })
}

/// One row of a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStep {
    pub t: f64,
    pub s: Vec2,
    pub input: CameraInput,
    pub s_dot_bar: Vec2,
    pub chi_true: Option<f64>,
    pub s_true: Option<Vec2>,
    pub s_hat: Option<Vec2>,
    pub chi_hat: f64,
    /// `sigma1` after this sample was pushed.
    pub sigma1: f64,
    pub sigma_bar: f64,
    pub updated: bool,
    /// Jump of the integral-mode output caused by a stack replacement here.
    pub gamma_jump: Option<f64>,
    /// `Omega Omega^T` of the measured sample.
    pub info: f64,
    /// `Omega Omega^T` along the truth.
    pub info_true: Option<f64>,
    /// Trapezoidal `int Omega Omega^T` of the measured samples over the trailing window.
    pub pe_window_integral: f64,
    /// Gain condition with the current `sigma1` and the run's `L_g`.
    pub gain_check: Option<bool>,
}

impl RunStep {
    /// Inverse-depth error `chi - chi_hat`.
    pub fn z(&self) -> Option<f64> {
        self.chi_true.map(|c| c - self.chi_hat)
    }

    pub fn depth_true(&self) -> Option<f64> {
        self.chi_true.map(|c| 1.0 / c)
    }

    pub fn depth_hat(&self) -> f64 {
        1.0 / self.chi_hat
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunDiagnostics {
    /// Realized `sup |g|` along the run.
    pub l_g: f64,
    /// `max_t max_j |chi(t_j) - chi(t)|` over stored entries.
    pub chi_bar: Option<f64>,
    /// `max |s_dot_bar - s_dot|`.
    pub d_bar: Option<f64>,
    pub replacements: usize,
    pub max_gamma_jump: f64,
    /// Smallest gain satisfying the condition with the final `sigma1`.
    pub required_gain: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub name: String,
    pub observer: ObserverKind,
    pub dt: f64,
    pub steps: Vec<RunStep>,
    pub metrics: Option<MetricsReport>,
    pub diagnostics: RunDiagnostics,
}

impl RunResult {
    pub fn times(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.t).collect()
    }

    pub fn horizon(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.t)
    }

    /// `(t, Z, Z_hat)` columns; `None` without truth.
    pub fn depth_columns(&self) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let truth: Option<Vec<f64>> = self.steps.iter().map(RunStep::depth_true).collect();
        Some((self.times(), truth?, self.steps.iter().map(RunStep::depth_hat).collect()))
    }

    pub fn metrics_over(&self, w: Window, threshold_pct: f64) -> Result<Option<MetricsReport>> {
        match self.depth_columns() {
            Some((t, z, zh)) => Ok(Some(MetricsReport::compute(&DepthSeries::new(&t, &z, &zh)?, w, threshold_pct)?)),
            None => Ok(None),
        }
    }
}

pub fn projection_for(cfg: &ScenarioConfig) -> ChiProjection {
    ChiProjection::from_bounds(&cfg.bounds, cfg.projection)
}

pub fn build_observer(cfg: &ScenarioConfig) -> Result<Box<dyn DepthObserver>> {
    let proj = projection_for(cfg);
    let init = &cfg.init;
    let s0 = Vec2::new(init.s_hat[0], init.s_hat[1]);
    Ok(match cfg.observer {
        ObserverKind::Full => Box::new(FullOrderObserver::new(s0, init.chi_hat, cfg.gains.full(), proj)?),
        ObserverKind::ReducedIntegral => match init.kappa {
            Some(k0) => Box::new(ReducedOrderObserver::with_kappa(k0, cfg.gains.k_bar, proj)?),
            None => Box::new(ReducedOrderObserver::new(init.chi_hat, cfg.gains.k_bar, ReducedMode::Integral, proj)?),
        },
        ObserverKind::ReducedDifferential => {
            Box::new(ReducedOrderObserver::new(init.chi_hat, cfg.gains.k_bar, ReducedMode::Differential, proj)?)
        }
        ObserverKind::LeastSquares => Box::new(LsObserver::new(init.chi_hat, cfg.diagnostics.ls_tol_sv, proj)?),
    })
}

/// Runs the configured observer over prepared measurements.
pub fn run_observer(cfg: &ScenarioConfig, data: &Prepared) -> Result<RunResult> {
    let n = data.measured.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let mut obs = build_observer(cfg)?;
    let mut stacks = StackPair::new(cfg.stacks.history, cfg.stacks.auxiliary, cfg.stacks.epsilon)?;
    let pe_lag = ((cfg.diagnostics.pe_window_s / data.dt).round() as usize).max(1);
    let integral_mode = cfg.observer == ObserverKind::ReducedIntegral;

    let mut steps = Vec::with_capacity(n);
    let mut cum_pe = Vec::with_capacity(n);
    let mut chi_bar: Option<f64> = None;
    let mut max_jump: f64 = 0.0;
    for k in 0..n {
        let t = data.times[k];
        let m = &data.measured[k];
        let chi_true = data.chi_true.as_ref().map(|c| c[k]);
        let mut entry = StackEntry::new(t, m.s, m.input).with_derivative(data.s_dot_bar[k]);
        if let Some(c) = chi_true {
            entry = entry.with_truth(c);
        }

        let chi_hat = obs.output(&entry, &stacks.history)?;
        let s_hat = obs.s_hat();
        if k + 1 < n {
            obs.advance(&entry, &stacks.history, data.times[k + 1] - t)?;
        }
        let old = integral_mode.then(|| stacks.history.clone());
        let updated = stacks.push(entry);
        let gamma_jump = match (&old, updated) {
            (Some(old), true) => obs.stack_jump(&entry, old, &stacks.history),
            _ => None,
        };
        if let Some(j) = gamma_jump {
            max_jump = max_jump.max(j.abs());
        }
        if let Some(c) = chi_true {
            let worst =
                stacks.history.entries().iter().filter_map(|e| e.chi_true).map(|cj| (cj - c).abs()).fold(0.0, f64::max);
            chi_bar = Some(chi_bar.unwrap_or(0.0).max(worst));
        }

        let info = entry.info();
        let prev = cum_pe.last().copied().unwrap_or(0.0);
        let c = if k == 0 {
            0.0
        } else {
            prev + 0.5 * (info + steps.last().map_or(0.0, |s: &RunStep| s.info)) * (t - data.times[k - 1])
        };
        cum_pe.push(c);
        let pe_window_integral = c - cum_pe[k.saturating_sub(pe_lag)];

        let truth = data.truth.as_ref().map(|tr| tr[k]);
        steps.push(RunStep {
            t,
            s: m.s,
            input: m.input,
            s_dot_bar: data.s_dot_bar[k],
            chi_true,
            s_true: truth.map(|p| p.state.s()),
            s_hat,
            chi_hat,
            sigma1: stacks.history.sigma1(),
            sigma_bar: stacks.history.sigma_bar(),
            updated,
            gamma_jump,
            info,
            info_true: truth.map(|p| excitation(&p.state.s(), &p.input.v)),
            pe_window_integral,
            gain_check: None,
        });
    }

    // Realized L_g: true state and input when simulated, measurements otherwise.
    let l_g = steps
        .iter()
        .enumerate()
        .map(|(k, st)| match (&data.truth, st.chi_true) {
            (Some(tr), Some(c)) => g_term(&tr[k].state.s(), c, st.chi_hat, &tr[k].input).abs(),
            (None, Some(c)) => g_term(&st.s, c, st.chi_hat, &st.input).abs(),
            _ => g_term(&st.s, st.chi_hat, st.chi_hat, &st.input).abs(),
        })
        .fold(0.0, f64::max);
    let check = |sigma1: f64| match cfg.observer {
        ObserverKind::Full => Some(check_gain_condition_full(cfg.gains.k_cl, cfg.gains.gamma, sigma1, l_g)),
        ObserverKind::ReducedIntegral | ObserverKind::ReducedDifferential => {
            Some(check_gain_condition_reduced(cfg.gains.k_bar, sigma1, l_g))
        }
        ObserverKind::LeastSquares => None,
    };
    for st in steps.iter_mut() {
        st.gain_check = check(st.sigma1).map(|c| c.pass);
    }
    let d_bar = data
        .s_dot_true
        .as_ref()
        .map(|sd| sd.iter().zip(&data.s_dot_bar).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max));
    let diagnostics = RunDiagnostics {
        l_g,
        chi_bar,
        d_bar,
        replacements: stacks.history.replacements(),
        max_gamma_jump: max_jump,
        required_gain: check(stacks.history.sigma1()).map(|c| c.required),
    };

    let mut result =
        RunResult { name: cfg.name.clone(), observer: cfg.observer, dt: data.dt, steps, metrics: None, diagnostics };
    let window = Window::tail(result.horizon(), cfg.metrics.steady_window_s);
    result.metrics = result.metrics_over(window, cfg.metrics.conv_threshold_pct)?;
    Ok(result)
}

/// End-to-end run of a simulated scenario. Deterministic under `cfg.noise.seed`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunResult> {
    prepare_measurements(cfg).and_then(|d| run_observer(cfg, &d)).map_err(|e| e.in_run(&cfg.name))
}
