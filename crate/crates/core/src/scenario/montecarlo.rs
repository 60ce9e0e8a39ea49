use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{InitConfig, MonteCarloSpec, ScenarioConfig};
use super::{projection_for, run_scenario};
use crate::error::Result;
use crate::metrics::{DepthSeries, ErrorAccumulator, MetricsReport, Window};

/// Seed of run `index`: a Weyl step from the base seed, so run 0 uses the base
/// seed itself. `seed_from_u64` scrambles it further.
pub fn run_seed(base_seed: u64, index: usize) -> u64 {
    base_seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Initial estimate of one run, drawn on ChaCha stream 1 of the run seed
/// (noise uses stream 0).
pub fn perturbed_init(cfg: &ScenarioConfig, mc: &MonteCarloSpec, seed: u64) -> InitConfig {
    let mut init = cfg.init;
    if mc.s_std == 0.0 && mc.chi_std == 0.0 {
        return init;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    for c in init.s_hat.iter_mut() {
        *c += mc.s_std * unit.sample(&mut rng);
    }
    let dchi = mc.chi_std * unit.sample(&mut rng);
    init.chi_hat = projection_for(cfg).apply(init.chi_hat + dchi);
    if let Some(k) = init.kappa.as_mut() {
        *k += dchi;
    }
    init
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloRun {
    pub index: usize,
    pub seed: u64,
    pub metrics: Option<MetricsReport>,
    pub errors: ErrorAccumulator,
    /// The run failed or produced a non-finite estimate.
    pub diverged: bool,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub runs: Vec<MonteCarloRun>,
    /// Pooled over every steady-state sample of every run.
    pub rmse_m: Option<f64>,
    pub mape_pct: Option<f64>,
    /// Median convergence time, counting non-converged runs as infinite.
    pub conv_time_median_s: Option<f64>,
    pub n_converged: usize,
    pub n_diverged: usize,
}

/// Independent seeded runs, executed in parallel and reduced in index order.
pub fn run_monte_carlo(cfg: &ScenarioConfig, mc: &MonteCarloSpec) -> Result<MonteCarloReport> {
    cfg.validate()?;
    mc.validate()?;
    let runs: Vec<MonteCarloRun> = (0..mc.runs).into_par_iter().map(|i| single(cfg, mc, i)).collect();

    let mut pooled = ErrorAccumulator::default();
    for r in &runs {
        pooled.merge(&r.errors);
    }
    let mut conv: Vec<f64> =
        runs.iter().map(|r| r.metrics.and_then(|m| m.conv_time_s).unwrap_or(f64::INFINITY)).collect();
    conv.sort_by(f64::total_cmp);
    let median = if conv.is_empty() {
        f64::INFINITY
    } else if conv.len() % 2 == 1 {
        conv[conv.len() / 2]
    } else {
        0.5 * (conv[conv.len() / 2 - 1] + conv[conv.len() / 2])
    };
    Ok(MonteCarloReport {
        rmse_m: pooled.rmse(),
        mape_pct: pooled.mape(),
        conv_time_median_s: median.is_finite().then_some(median),
        n_converged: conv.iter().filter(|c| c.is_finite()).count(),
        n_diverged: runs.iter().filter(|r| r.diverged).count(),
        runs,
    })
}

fn single(cfg: &ScenarioConfig, mc: &MonteCarloSpec, index: usize) -> MonteCarloRun {
    let seed = run_seed(mc.base_seed, index);
    let mut run_cfg = cfg.clone();
    run_cfg.name = format!("{}#{index}", cfg.name);
    run_cfg.noise.seed = seed;
    run_cfg.init = perturbed_init(cfg, mc, seed);
    match run_scenario(&run_cfg) {
        Ok(res) => {
            let window = res.metrics.map_or(Window::all(), |m| m.window);
            let errors = res
                .depth_columns()
                .and_then(|(t, z, zh)| DepthSeries::new(&t, &z, &zh).ok().map(|s| ErrorAccumulator::of(&s, window)))
                .unwrap_or_default();
            let diverged = res.steps.iter().any(|s| !s.chi_hat.is_finite());
            MonteCarloRun { index, seed, metrics: res.metrics, errors, diverged, failure: None }
        }
        Err(e) => MonteCarloRun {
            index,
            seed,
            metrics: None,
            errors: ErrorAccumulator::default(),
            diverged: true,
            failure: Some(e.to_string()),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseSpec;
    use crate::scenario::scenario_sim1;

    #[test]
    fn single_noiseless_run_equals_scenario_metrics() {
        let cfg = ScenarioConfig { horizon: 8.0, noise: NoiseSpec::off(), ..scenario_sim1() };
        let mc = MonteCarloSpec { runs: 1, base_seed: 0, s_std: 0.0, chi_std: 0.0 };
        let rep = run_monte_carlo(&cfg, &mc).unwrap();
        let single = run_scenario(&cfg).unwrap().metrics.unwrap();
        assert_eq!(rep.rmse_m, Some(single.rmse_m));
        assert!((rep.mape_pct.unwrap() - single.mape_pct).abs() < 1e-12);
        assert_eq!(rep.conv_time_median_s, single.conv_time_s);
    }

    #[test]
    fn batches_are_reproducible_and_seeds_distinct() {
        let cfg = ScenarioConfig { horizon: 3.0, ..scenario_sim1() };
        let mc = MonteCarloSpec { runs: 4, base_seed: 9, ..MonteCarloSpec::default() };
        let a = run_monte_carlo(&cfg, &mc).unwrap();
        assert_eq!(a, run_monte_carlo(&cfg, &mc).unwrap());
        let mut seeds: Vec<u64> = a.runs.iter().map(|r| r.seed).collect();
        seeds.dedup();
        assert_eq!(seeds.len(), 4);
        assert_eq!(a.runs[0].seed, 9);
    }

    #[test]
    fn failed_runs_are_counted() {
        // A tiny focal length bound forces the truth out of bounds immediately.
        let mut cfg = ScenarioConfig { horizon: 2.0, ..scenario_sim1() };
        cfg.bounds.x = [-0.1, 0.1];
        let rep = run_monte_carlo(&cfg, &MonteCarloSpec { runs: 2, ..MonteCarloSpec::default() }).unwrap();
        assert_eq!(rep.n_diverged, 2);
        assert!(rep.runs.iter().all(|r| r.failure.is_some()));
    }
}
