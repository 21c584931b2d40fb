//! `tsm`: equilibrium, scenario, sweep and verification runs for the
//! two-sided cloud data market model.

mod config;
mod error;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tsm_core::sweep::{figure_preset, MetricSet, SweepAxis, PRESET_MODE};
use tsm_core::verify::{run_verify, VerifySpec};
use tsm_core::{
    run_scenario, run_sweep, sample_population, stackelberg_solve, PopulationSpec, Scenario,
    SweepSpec, TwoSidedMode,
};

use crate::config::{ParamsConfig, RunConfig};
use crate::error::{CliError, EXIT_INFEASIBLE, EXIT_INVALID, EXIT_OK, EXIT_VERIFY};

#[derive(Parser)]
#[command(name = "tsm", version, about = "Two-sided cloud data market simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed of the provider population.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output CSV path (standard output when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// How the two-sided model picks price and share.
    #[arg(long, global = true, value_parser = parse_mode)]
    mode: Option<TwoSidedMode>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one provider/platform game.
    Equilibrium {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        params: ParamFlags,
    },
    /// Run business models over a sampled population.
    Scenario {
        #[command(flatten)]
        common: Common,
        /// Comma-separated scenarios: two_sided, fifty_fifty, pay_as_you_go.
        #[arg(long, value_delimiter = ',', value_parser = parse_scenario)]
        scenario: Option<Vec<Scenario>>,
        /// Population size.
        #[arg(long)]
        n_providers: Option<usize>,
    },
    /// Aggregate a parameter sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Figure preset, fig4 to fig15.
        #[arg(long)]
        preset: Option<String>,
        /// Swept parameter: alpha_beta_product, phi, gamma or k1.
        #[arg(long, value_parser = parse_axis)]
        axis: Option<SweepAxis>,
        /// Comma-separated scenarios: two_sided, fifty_fifty, pay_as_you_go.
        #[arg(long, value_delimiter = ',', value_parser = parse_scenario)]
        scenario: Option<Vec<Scenario>>,
        /// Comma-separated subsidizing-factor levels.
        #[arg(long, value_delimiter = ',')]
        phi_levels: Option<Vec<f64>>,
        /// Population size.
        #[arg(long)]
        n_providers: Option<usize>,
    },
    /// Check solver properties over random feasible draws.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Feasible draws to check (default 500).
        #[arg(long)]
        draws: Option<usize>,
        /// Population draws to try before giving up on feasibility.
        #[arg(long)]
        max_attempts: Option<u64>,
        /// Brute-force oracle grid size.
        #[arg(long)]
        grid_n: Option<usize>,
        /// Skip the brute-force oracle comparison.
        #[arg(long)]
        skip_oracle: bool,
    },
}

#[derive(Args, Clone, Default)]
struct ParamFlags {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    psi: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    k1: Option<f64>,
    #[arg(long)]
    k2: Option<f64>,
    #[arg(long)]
    f_c: Option<f64>,
    #[arg(long)]
    f_s: Option<f64>,
    #[arg(long)]
    p_s: Option<f64>,
}

impl From<ParamFlags> for ParamsConfig {
    fn from(f: ParamFlags) -> Self {
        ParamsConfig {
            alpha: f.alpha,
            beta: f.beta,
            gamma: f.gamma,
            psi: f.psi,
            phi: f.phi,
            k1: f.k1,
            k2: f.k2,
            f_c: f.f_c,
            f_s: f.f_s,
            p_s: f.p_s,
        }
    }
}

fn parse_mode(s: &str) -> Result<TwoSidedMode, String> {
    s.parse().map_err(|e: tsm_core::ModelError| e.to_string())
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse().map_err(|e: tsm_core::ModelError| e.to_string())
}

fn parse_axis(s: &str) -> Result<SweepAxis, String> {
    s.parse().map_err(|e: tsm_core::ModelError| e.to_string())
}

/// Sizes the global worker pool from `TSM_THREADS` (unset or 0: automatic).
fn configure_threads() -> Result<usize, CliError> {
    let n = match std::env::var("TSM_THREADS") {
        Err(_) => 0,
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::invalid(format!("TSM_THREADS must be a non-negative integer, got `{v}`")))?,
    };
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::invalid(format!("cannot start {n} worker threads: {e}")))?;
    }
    Ok(rayon::current_num_threads())
}

fn population_spec(cfg: &RunConfig, common: &Common, n: Option<usize>) -> PopulationSpec {
    let mut spec = cfg.population.clone().unwrap_or_default();
    if let Some(seed) = common.seed.or(cfg.seed) {
        spec.seed = seed;
    }
    if let Some(n) = n {
        spec.n_providers = n;
    }
    spec
}

/// Runs `write` against the output file, or standard output.
fn emit<F>(path: Option<&Path>, write: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> csv::Result<()>,
{
    match path {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::io(path, e))?;
            let mut w = BufWriter::new(file);
            write(&mut w).map_err(|e| CliError::io(path, e))?;
            w.flush().map_err(|e| CliError::io(path, e))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock).map_err(|e| CliError::invalid(format!("stdout: {e}")))
        }
    }
}

fn out_path(cfg: &RunConfig, common: &Common) -> Option<PathBuf> {
    common.out.clone().or_else(|| cfg.out.clone())
}

fn cmd_equilibrium(common: Common, flags: ParamFlags) -> Result<u8, CliError> {
    let cfg = config::load(common.config.as_deref())?;
    let params = cfg
        .params
        .clone()
        .unwrap_or_default()
        .merged(flags.into())
        .resolve()?;
    let res = stackelberg_solve(&params)?;
    emit(None, |w| output::write_equilibrium(w, &params, &res))?;
    if let Some(path) = out_path(&cfg, &common) {
        emit(Some(&path), |w| output::write_equilibrium(w, &params, &res))?;
    }
    if res.is_feasible() {
        Ok(EXIT_OK)
    } else {
        eprintln!("infeasible: {}", res.feasibility);
        Ok(EXIT_INFEASIBLE)
    }
}

fn cmd_scenario(
    common: Common,
    scenarios: Option<Vec<Scenario>>,
    n: Option<usize>,
    threads: usize,
) -> Result<u8, CliError> {
    let cfg = config::load(common.config.as_deref())?;
    let spec = population_spec(&cfg, &common, n);
    let mode = common.mode.or(cfg.mode).unwrap_or_default();
    let scenarios = scenarios
        .or(cfg.scenarios.clone())
        .unwrap_or_else(|| Scenario::ALL.to_vec());
    if scenarios.is_empty() {
        return Err(CliError::invalid("scenario set is empty"));
    }
    let population = sample_population(&spec)?;
    let mut records = Vec::new();
    for &s in &scenarios {
        let mut run = run_scenario(s, &population, mode)?;
        run.sort_by_key(|r| r.provider_id);
        records.extend(run);
    }
    eprintln!(
        "scenario: seed={} n_providers={} mode={mode} threads={threads}",
        spec.seed, spec.n_providers
    );
    emit(out_path(&cfg, &common).as_deref(), |w| output::write_scenarios(w, &records))?;
    Ok(EXIT_OK)
}

struct SweepArgs {
    preset: Option<String>,
    axis: Option<SweepAxis>,
    scenarios: Option<Vec<Scenario>>,
    phi_levels: Option<Vec<f64>>,
    n: Option<usize>,
}

fn cmd_sweep(common: Common, args: SweepArgs, threads: usize) -> Result<u8, CliError> {
    let cfg = config::load(common.config.as_deref())?;
    let sweep_cfg = cfg.sweep.clone().unwrap_or_default();
    let population = population_spec(&cfg, &common, args.n);

    let (mut spec, metrics, label) = match args.preset.or(sweep_cfg.preset.clone()) {
        Some(name) => {
            let preset = figure_preset(&name)?;
            (preset.spec, preset.metrics, format!("preset={name}"))
        }
        None => {
            let axis = args.axis.or(sweep_cfg.axis).ok_or_else(|| {
                CliError::invalid("sweep needs --axis or --preset")
            })?;
            let grid = sweep_cfg.grid.clone().unwrap_or_else(|| default_grid(axis));
            let mut spec = SweepSpec::new(axis, grid);
            spec.mode = PRESET_MODE;
            (spec, MetricSet::ALL, format!("axis={axis}"))
        }
    };
    if let Some(grid) = sweep_cfg.grid {
        spec.grid = grid;
    }
    if let Some(levels) = args.phi_levels.or(sweep_cfg.phi_levels) {
        spec.phi_levels = levels;
    }
    if let Some(s) = args.scenarios.or(cfg.scenarios.clone()) {
        spec.scenarios = s;
    }
    if let Some(mode) = common.mode.or(cfg.mode) {
        spec.mode = mode;
    }
    spec.population = population;

    let series: Vec<_> = run_sweep(&spec)?.iter().map(|s| metrics.filter(s)).collect();
    eprintln!(
        "sweep: {label} seed={} n_providers={} mode={} statistic=mean_over_feasible threads={threads}",
        spec.population.seed, spec.population.n_providers, spec.mode
    );
    emit(out_path(&cfg, &common).as_deref(), |w| output::write_sweep(w, &series))?;
    Ok(EXIT_OK)
}

fn default_grid(axis: SweepAxis) -> Vec<f64> {
    match axis {
        SweepAxis::AlphaBetaProduct => tsm_core::sweep::externality_grid(),
        SweepAxis::Phi => tsm_core::sweep::phi_grid(),
        SweepAxis::Gamma => tsm_core::sweep::gamma_grid(),
        SweepAxis::K1 => tsm_core::sweep::k1_grid(),
    }
}

struct VerifyArgs {
    draws: Option<usize>,
    max_attempts: Option<u64>,
    grid_n: Option<usize>,
    skip_oracle: bool,
}

fn cmd_verify(common: Common, args: VerifyArgs, threads: usize) -> Result<u8, CliError> {
    let cfg = config::load(common.config.as_deref())?;
    let mut spec = VerifySpec {
        population: population_spec(&cfg, &common, None),
        ..VerifySpec::default()
    };
    if let Some(v) = &cfg.verify {
        v.apply(&mut spec);
    }
    if let Some(v) = args.draws {
        spec.draws = v;
    }
    if let Some(v) = args.max_attempts {
        spec.max_attempts = v;
    }
    if let Some(v) = args.grid_n {
        spec.grid_n = v;
    }
    spec.skip_oracle |= args.skip_oracle;

    let report = run_verify(&spec)?;
    let mut lines = vec![format!(
        "verify: seed={} attempts={} feasible_draws={} feasible_fraction={} threads={threads}",
        spec.population.seed,
        report.attempts,
        report.feasible_draws,
        report.feasible_fraction()
    )];
    if report.region_empty {
        lines.push(format!(
            "region empty: no feasible draw in {} attempts",
            report.attempts
        ));
    } else if report.feasible_draws < spec.draws {
        lines.push(format!(
            "note: only {} of {} requested feasible draws found",
            report.feasible_draws, spec.draws
        ));
    }
    for p in &report.properties {
        lines.push(format!(
            "{} {}: checked={} failed={} worst={} tolerance={}",
            if p.passed() { "PASS" } else { "FAIL" },
            p.name,
            p.checked,
            p.failed,
            output::num(p.worst),
            output::num(p.tolerance)
        ));
    }
    let text = lines.join("\n") + "\n";
    print!("{text}");
    if let Some(path) = out_path(&cfg, &common) {
        std::fs::write(&path, &text).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(if report.passed() { EXIT_OK } else { EXIT_VERIFY })
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let threads = configure_threads()?;
    match cli.command {
        Command::Equilibrium { common, params } => cmd_equilibrium(common, params),
        Command::Scenario {
            common,
            scenario,
            n_providers,
        } => cmd_scenario(common, scenario, n_providers, threads),
        Command::Sweep {
            common,
            preset,
            axis,
            scenario,
            phi_levels,
            n_providers,
        } => cmd_sweep(
            common,
            SweepArgs {
                preset,
                axis,
                scenarios: scenario,
                phi_levels,
                n: n_providers,
            },
            threads,
        ),
        Command::Verify {
            common,
            draws,
            max_attempts,
            grid_n,
            skip_oracle,
        } => cmd_verify(
            common,
            VerifyArgs {
                draws,
                max_attempts,
                grid_n,
                skip_oracle,
            },
            threads,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INVALID } else { EXIT_OK });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
