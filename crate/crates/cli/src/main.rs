use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use cldepth::excitation::pe_integral;
use cldepth::figures::{export_figure_data, FIGURE_IDS};
use cldepth::io::{self, Table};
use cldepth::observers::{check_gain_condition_full, check_gain_condition_reduced, ObserverKind};
use cldepth::scenario::{
    builtin, replay_log, run_monte_carlo, run_scenario, scenario_replay, ProfileSpec, RunResult, ScenarioConfig,
};

#[derive(Parser)]
#[command(name = "cldepth", version, about = "Concurrent-learning depth observer simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its time series, metrics and diagnostics.
    Simulate(Common),
    /// Run a seeded batch with perturbed initial estimates.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Run an observer over a recorded measurement log.
    Replay {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Write the data behind one figure panel (or `all`).
    Export {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        figure: String,
        /// Additional observers overlaid on the same data.
        #[arg(long = "compare")]
        compare: Vec<ObserverKind>,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Report excitation, stack and gain-condition diagnostics.
    Diagnose {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        log: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Built-in scenario: sim1, sim2 or replay.
    #[arg(long, conflicts_with = "config")]
    scenario: Option<String>,
    /// Scenario TOML file, or a manifest written by an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set noise.state_snr_db=off`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    observer: Option<ObserverKind>,
    /// Noise seed, or the base seed of a Monte Carlo batch.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(cldepth::Error),
    Output(String),
}

impl From<cldepth::Error> for CliError {
    fn from(e: cldepth::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_usage() => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Output(m) => f.write_str(m),
            CliError::Core(e) => {
                write!(f, "{e}")?;
                let mut src = std::error::Error::source(e);
                while let Some(s) = src {
                    write!(f, ": {s}")?;
                    src = s.source();
                }
                Ok(())
            }
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// `println!` that tolerates a closed stdout (e.g. piped into `head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

/// Resolved inputs of one invocation.
struct Loaded {
    cfg: ScenarioConfig,
    /// Log recorded in a manifest given as `--config`.
    manifest_log: Option<PathBuf>,
}

fn load(common: &Common, default: Option<fn() -> ScenarioConfig>) -> CliResult<Loaded> {
    let mut manifest_log = None;
    let base = match (&common.scenario, &common.config) {
        (Some(name), None) => builtin(name).ok_or_else(|| {
            CliError::Usage(format!(
                "unknown scenario `{name}` (built-ins: sim1, sim2, replay); use --config for others"
            ))
        })?,
        (None, Some(path)) if path.extension().is_some_and(|e| e == "json") => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            let manifest: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: not a manifest: {e}", path.display())))?;
            let toml = manifest["config"]
                .as_str()
                .ok_or_else(|| CliError::Usage(format!("{}: manifest has no config", path.display())))?;
            manifest_log = manifest["log"].as_str().map(PathBuf::from);
            ScenarioConfig::from_toml(toml)?
        }
        (None, Some(path)) => ScenarioConfig::load(path).map_err(|e| match e {
            cldepth::Error::Io(io) => CliError::Usage(format!("{}: {io}", path.display())),
            other => CliError::Core(other),
        })?,
        (None, None) => match default {
            Some(f) => f(),
            None => return Err(CliError::Usage("one of --scenario or --config is required".into())),
        },
        (Some(_), Some(_)) => unreachable!("clap rejects --scenario with --config"),
    };
    let mut cfg = base.with_overrides(&common.set)?;
    if let Some(obs) = common.observer {
        cfg.observer = obs;
    }
    cfg.validate()?;
    Ok(Loaded { cfg, manifest_log })
}

fn resolve_log(flag: &Option<PathBuf>, loaded: &Loaded) -> Option<PathBuf> {
    flag.clone().or_else(|| loaded.manifest_log.clone())
}

/// Runs the scenario, or replays `log` when one is given.
fn execute(cfg: &ScenarioConfig, log: Option<&Path>) -> CliResult<RunResult> {
    match log {
        Some(path) => Ok(replay_log(path, cfg)?),
        None if cfg.name == "replay" => Err(CliError::Usage("the replay scenario needs --log".into())),
        None => Ok(run_scenario(cfg)?),
    }
}

/// Collects written artifacts and their hashes for the manifest.
struct Outputs {
    dir: PathBuf,
    artifacts: BTreeMap<String, String>,
}

impl Outputs {
    fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), artifacts: BTreeMap::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.artifacts.insert(name.to_string(), hex::encode(Sha256::digest(bytes)));
        say!("wrote {}", self.dir.join(name).display());
        Ok(())
    }

    fn table(&mut self, name: &str, t: &Table) -> CliResult<()> {
        self.write(name, &t.to_bytes()?)
    }

    fn manifest(self, command: &str, cfg: &ScenarioConfig, log: Option<&Path>) -> CliResult<()> {
        let mut artifacts = self.artifacts;
        if let Some(p) = log {
            let bytes = fs::read(p)?;
            artifacts.insert(format!("input:{}", p.display()), hex::encode(Sha256::digest(&bytes)));
        }
        let manifest = serde_json::json!({
            "command": command,
            "scenario": cfg.name,
            "seed": cfg.noise.seed,
            "montecarlo_base_seed": cfg.montecarlo.base_seed,
            "log": log.map(|p| p.display().to_string()),
            "config": cfg.to_toml()?,
            "artifacts": artifacts,
        });
        let path = self.dir.join(format!("{}_{command}_manifest.json", cfg.name));
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Output(e.to_string()))?;
        fs::write(&path, text + "\n")?;
        say!("wrote {}", path.display());
        Ok(())
    }
}

fn write_run(out: &mut Outputs, run: &RunResult, name: &str) -> CliResult<()> {
    out.table(&format!("{name}_run.csv"), &io::run_table(run))?;
    out.write(&format!("{name}_metrics.txt"), io::metrics_summary(run.metrics.as_ref(), 0).as_bytes())?;
    out.table(&format!("{name}_diagnostics.csv"), &io::diagnostics_table(run))?;
    Ok(())
}

fn print_metrics(run: &RunResult) {
    match &run.metrics {
        Some(m) => say!(
            "{} [{}]: rmse {:.4} m, mape {:.2} %, convergence {}",
            run.name,
            run.observer,
            m.rmse_m,
            m.mape_pct,
            m.conv_time_s.map_or("none".to_string(), |t| format!("{t:.2} s"))
        ),
        None => say!("{} [{}]: no ground truth, metrics skipped", run.name, run.observer),
    }
}

fn simulate(common: &Common) -> CliResult<()> {
    let mut loaded = load(common, None)?;
    if let Some(seed) = common.seed {
        loaded.cfg.noise.seed = seed;
    }
    let cfg = &loaded.cfg;
    let run = execute(cfg, None)?;
    print_metrics(&run);
    let mut out = Outputs::new(&common.out)?;
    write_run(&mut out, &run, &cfg.name)?;
    out.manifest("simulate", cfg, None)
}

fn montecarlo(common: &Common, runs: Option<usize>) -> CliResult<()> {
    let mut loaded = load(common, None)?;
    if let Some(n) = runs {
        loaded.cfg.montecarlo.runs = n;
    }
    if let Some(seed) = common.seed {
        loaded.cfg.montecarlo.base_seed = seed;
    }
    let cfg = &loaded.cfg;
    let rep = run_monte_carlo(cfg, &cfg.montecarlo)?;
    say!(
        "{} [{}] x{}: rmse {} m, mape {} %, median convergence {}, diverged {}",
        cfg.name,
        cfg.observer,
        rep.runs.len(),
        rep.rmse_m.map_or("none".into(), |v| format!("{v:.4}")),
        rep.mape_pct.map_or("none".into(), |v| format!("{v:.2}")),
        rep.conv_time_median_s.map_or("none".into(), |v| format!("{v:.2} s")),
        rep.n_diverged
    );
    let mut out = Outputs::new(&common.out)?;
    out.table(&format!("{}_montecarlo.csv", cfg.name), &io::monte_carlo_table(&rep))?;
    out.write(&format!("{}_metrics.txt", cfg.name), io::monte_carlo_summary(&rep).as_bytes())?;
    out.manifest("montecarlo", cfg, None)
}

fn replay(common: &Common, log: &Option<PathBuf>) -> CliResult<()> {
    let loaded = load(common, Some(scenario_replay))?;
    let log = resolve_log(log, &loaded).ok_or_else(|| CliError::Usage("replay needs --log".into()))?;
    let cfg = &loaded.cfg;
    let run = execute(cfg, Some(&log))?;
    print_metrics(&run);
    let mut out = Outputs::new(&common.out)?;
    write_run(&mut out, &run, &cfg.name)?;
    out.manifest("replay", cfg, Some(&log))
}

fn export(common: &Common, figure: &str, compare: &[ObserverKind], log: &Option<PathBuf>) -> CliResult<()> {
    let ids: Vec<&str> = if figure == "all" { FIGURE_IDS.to_vec() } else { vec![figure] };
    if let Some(bad) = ids.iter().find(|id| !FIGURE_IDS.contains(id)) {
        return Err(CliError::Core(cldepth::Error::UnknownFigure(bad.to_string())));
    }
    let mut loaded = load(common, None)?;
    if let Some(seed) = common.seed {
        loaded.cfg.noise.seed = seed;
    }
    let log = resolve_log(log, &loaded);
    let cfg = &loaded.cfg;
    let mut runs = vec![execute(cfg, log.as_deref())?];
    for &kind in compare.iter().filter(|k| **k != cfg.observer) {
        runs.push(execute(&ScenarioConfig { observer: kind, ..cfg.clone() }, log.as_deref())?);
    }
    let refs: Vec<&RunResult> = runs.iter().collect();
    let mut out = Outputs::new(&common.out)?;
    for id in ids {
        let table = match export_figure_data(&refs, id) {
            Ok(t) => t,
            // Panels whose channels this run lacks are skipped under `all`.
            Err(e) if figure == "all" => {
                eprintln!("skipping {id}: {e}");
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        out.table(&format!("{}_fig{id}.csv", cfg.name), &table)?;
    }
    out.manifest("export", cfg, log.as_deref())
}

fn diagnose(common: &Common, log: &Option<PathBuf>) -> CliResult<()> {
    let mut loaded = load(common, None)?;
    if let Some(seed) = common.seed {
        loaded.cfg.noise.seed = seed;
    }
    let log = resolve_log(log, &loaded);
    let cfg = &loaded.cfg;
    let run = execute(cfg, log.as_deref())?;
    let report = diagnose_report(cfg, &run)?;
    let _ = std::io::Write::write_all(&mut std::io::stdout(), report.as_bytes());
    let mut out = Outputs::new(&common.out)?;
    out.write(&format!("{}_diagnose.txt", cfg.name), report.as_bytes())?;
    out.table(&format!("{}_diagnostics.csv", cfg.name), &io::diagnostics_table(&run))?;
    out.manifest("diagnose", cfg, log.as_deref())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("n/a".to_string(), |v| format!("{v:.6e}"))
}

fn diagnose_report(cfg: &ScenarioConfig, run: &RunResult) -> CliResult<String> {
    use std::fmt::Write;
    let t = run.times();
    let info: Vec<f64> = run.steps.iter().map(|s| s.info).collect();
    let horizon = run.horizon();
    let width = cfg.diagnostics.pe_window_s;
    let mut r = String::new();
    let d = &run.diagnostics;

    writeln!(r, "scenario {} observer {} horizon {horizon} s", run.name, run.observer).ok();
    writeln!(r, "pe_integral total [0, {horizon}] = {:.6e}", pe_integral(&t, &info, 0.0, horizon)?).ok();
    if let ProfileSpec::Sim2 { pe_violation: [a, b] } = cfg.profile {
        let measured = pe_integral(&t, &info, a, b)?;
        write!(r, "pe_violation_window [{a}, {b}] integral = {measured:.6e}").ok();
        if let Some(true_info) = run.steps.iter().map(|s| s.info_true).collect::<Option<Vec<f64>>>() {
            write!(r, " (noise-free {:.6e})", pe_integral(&t, &true_info, a, b)?).ok();
        }
        writeln!(r).ok();
    }
    writeln!(r, "pe_integral over {width} s windows:").ok();
    let mut t0 = t[0];
    while t0 + width <= horizon + 1e-9 {
        let t1 = (t0 + width).min(horizon);
        writeln!(r, "  [{t0:.3}, {t1:.3}] {:.6e}", pe_integral(&t, &info, t0, t1)?).ok();
        t0 += width;
    }

    let first_update = run.steps.iter().position(|s| s.updated);
    let sigma1_min = first_update.map(|k| run.steps[k..].iter().map(|s| s.sigma1).fold(f64::INFINITY, f64::min));
    let last = run.steps.last().expect("runs have samples");
    writeln!(
        r,
        "stack: replacements {} first_update {} sigma1_min_after_fill {} sigma1_final {:.6e} sigma_bar_final {:.6e} epsilon {}",
        d.replacements,
        first_update.map_or("never".to_string(), |k| format!("{:.3} s", run.steps[k].t)),
        fmt_opt(sigma1_min),
        last.sigma1,
        last.sigma_bar,
        cfg.stacks.epsilon
    )
    .ok();
    writeln!(r, "L_g = {:.6e}", d.l_g).ok();
    writeln!(r, "chi_bar = {}", fmt_opt(d.chi_bar)).ok();
    writeln!(r, "d_bar = {}", fmt_opt(d.d_bar)).ok();

    let sigma1 = sigma1_min.unwrap_or(0.0);
    let gain = match cfg.observer {
        ObserverKind::Full => {
            Some(("K_CL", cfg.gains.k_cl, check_gain_condition_full(cfg.gains.k_cl, cfg.gains.gamma, sigma1, d.l_g)))
        }
        ObserverKind::ReducedIntegral | ObserverKind::ReducedDifferential => {
            Some(("K_bar", cfg.gains.k_bar, check_gain_condition_reduced(cfg.gains.k_bar, sigma1, d.l_g)))
        }
        ObserverKind::LeastSquares => None,
    };
    match gain {
        Some((name, value, c)) => writeln!(
            r,
            "gain_condition {}: {name} = {value} required > {:.6e} (margin {:.6e})",
            if c.pass { "PASS" } else { "FAIL" },
            c.required,
            c.margin
        )
        .ok(),
        None => writeln!(r, "gain_condition n/a for {}", run.observer).ok(),
    };
    Ok(r)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Montecarlo { common, runs } => montecarlo(common, *runs),
        Command::Replay { common, log } => replay(common, log),
        Command::Export { common, figure, compare, log } => export(common, figure, compare, log),
        Command::Diagnose { common, log } => diagnose(common, log),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
