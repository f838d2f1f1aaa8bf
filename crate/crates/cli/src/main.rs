//! `trapkit` — command-line driver for the poverty-trap modeling toolkit.
//!
//! One binary, subcommand style: `simulate` integrates a trajectory,
//! `analyze` finds and classifies equilibria and labels a basin grid,
//! `sweep` runs a one-parameter bifurcation study, `abm` runs replicated
//! agent-based scenario batches, `intervene` searches for the cheapest
//! state or parameter intervention, and `export-config` writes the
//! annotated built-in baseline for editing.
//!
//! Every numeric setting lives in the TOML config; flags override
//! individual fields. Each command writes its artifacts atomically to
//! `--out` together with a `run_manifest.json` recording the command line,
//! the config hash, the seed, and the produced files. Reruns with the same
//! config and seed reproduce every data file byte for byte at any worker
//! count; only the manifest carries a timestamp.
//!
//! Exit codes: 0 success, 2 config/usage error, 3 numerical failure,
//! 4 infeasible intervention, 1 I/O failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use trapkit::abm::{self, DamageScenario, Mechanism, WorldConfig};
use trapkit::analysis::{
    cumulative_income_gini, food_insecurity, innovator_observations, intervention_type1,
    intervention_type23, tercile_report, InterventionPlan,
};
use trapkit::bifurcation::{detect_tipping, sweep};
use trapkit::config::{sha256_hex, SimConfig, ANNOTATED_BASELINE};
use trapkit::equilibria::{compute_basins, find_equilibria};
use trapkit::integrate::integrate;
use trapkit::model::StateVector;
use trapkit::{csvio, svg, Result, TrapError};

/// Social-ecological poverty-trap modeling toolkit.
#[derive(Parser)]
#[command(name = "trapkit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

/// Flags shared by every subcommand.
#[derive(Args)]
struct Common {
    /// TOML config file; omitted = built-in baseline.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed override for every stochastic component.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts and the run manifest.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for grids, sweeps, and replicate batches.
    #[arg(long, global = true, env = "TRAPKIT_WORKERS")]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and write it as CSV.
    Simulate {
        /// Initial state KA:KS:KI (default: config [simulate] state0).
        #[arg(long)]
        state: Option<String>,
        /// End time (default: config [simulate] t_end).
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Find, classify, and export equilibria and a labeled basin grid.
    Analyze {
        /// Basin grid resolution NA:NS:NI (default: config [basins]).
        #[arg(long)]
        grid: Option<String>,
    },
    /// One-parameter bifurcation sweep with regime and tipping detection.
    Sweep {
        /// Sweep spec PARAM:LO:HI:N, e.g. d1:0.1:1.5:151.
        #[arg(long)]
        sweep: String,
    },
    /// Replicated agent-based scenario batch with summary and terciles.
    Abm {
        /// Environmental damage scenario (default: config [abm]).
        #[arg(long, value_enum)]
        scenario: Option<ScenarioArg>,
        /// Innovation funding mechanism (default: config [abm]).
        #[arg(long, value_enum)]
        mechanism: Option<MechanismArg>,
        /// Independent replicates with derived seeds.
        #[arg(long, default_value_t = 1)]
        replicates: usize,
        /// Steps per replicate (default: config [abm]).
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Search for the cheapest state (type 1) or parameter (type 2/3) move.
    Intervene {
        /// Current state KA:KS:KI for a type-1 plan.
        #[arg(long)]
        state: Option<String>,
        /// Parameter bounds NAME:LO:HI for a type-2/3 plan.
        #[arg(long)]
        param: Option<String>,
    },
    /// Write the annotated built-in baseline config for editing.
    ExportConfig,
}

/// `--scenario` values.
#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Low,
    High,
}

/// `--mechanism` values.
#[derive(Clone, Copy, ValueEnum)]
enum MechanismArg {
    Endogenous,
    Exogenous,
}

/// Run record written next to every output set.
#[derive(Serialize)]
struct RunManifest {
    command: String,
    config_path: Option<String>,
    config_sha256: String,
    seed: u64,
    tool_version: String,
    timestamp: String,
    workers: usize,
    outputs: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

// The stable exit-code contract; clap usage errors exit 2 on their own.
fn exit_code(err: &TrapError) -> u8 {
    match err {
        TrapError::Config(_) | TrapError::Domain(_) => 2,
        TrapError::Convergence(_)
        | TrapError::Singular(_)
        | TrapError::Analysis(_)
        | TrapError::Sequencing(_) => 3,
        TrapError::Infeasible(_) => 4,
        TrapError::Io(_) => 1,
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let common = &cli.common;
    if let Some(n) = common.workers {
        if n == 0 {
            return Err(TrapError::Config("--workers must be positive".into()));
        }
        // Ignore the error on repeated initialization (tests call run twice).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    let (mut cfg, config_bytes) = match &common.config {
        Some(path) => (SimConfig::load(path)?, fs::read(path)?),
        None => (SimConfig::default(), ANNOTATED_BASELINE.as_bytes().to_vec()),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
        cfg.abm.seed = seed;
    }

    fs::create_dir_all(&common.out)?;
    let mut outputs: Vec<String> = Vec::new();

    let status = match &cli.command {
        Command::Simulate { state, t_end } => {
            cmd_simulate(&cfg, state.as_deref(), *t_end, &common.out, &mut outputs)?
        }
        Command::Analyze { grid } => cmd_analyze(&cfg, grid.as_deref(), &common.out, &mut outputs)?,
        Command::Sweep { sweep } => cmd_sweep(&cfg, sweep, &common.out, &mut outputs)?,
        Command::Abm { scenario, mechanism, replicates, steps } => cmd_abm(
            &cfg,
            *scenario,
            *mechanism,
            *replicates,
            *steps,
            &common.out,
            &mut outputs,
        )?,
        Command::Intervene { state, param } => {
            cmd_intervene(&cfg, state.as_deref(), param.as_deref(), &common.out, &mut outputs)?
        }
        Command::ExportConfig => {
            emit(&common.out, "config.toml", ANNOTATED_BASELINE.as_bytes(), &mut outputs)?;
            println!("wrote {}", common.out.join("config.toml").display());
            ExitCode::SUCCESS
        }
    };

    let manifest = RunManifest {
        command: std::env::args().collect::<Vec<_>>().join(" "),
        config_path: common.config.as_ref().map(|p| p.display().to_string()),
        config_sha256: sha256_hex(&config_bytes),
        seed: cfg.seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: chrono::Utc::now().to_rfc3339(),
        workers: common.workers.unwrap_or_else(rayon::current_num_threads),
        outputs: outputs.clone(),
    };
    let json = serde_json::to_vec_pretty(&manifest)
        .map_err(|e| TrapError::Analysis(format!("manifest serialization failed: {e}")))?;
    write_atomic(&common.out.join("run_manifest.json"), &json)?;

    Ok(status)
}

/// Writes bytes to `dir/name` atomically and records the file name.
fn emit(dir: &Path, name: &str, bytes: &[u8], outputs: &mut Vec<String>) -> Result<()> {
    write_atomic(&dir.join(name), bytes)?;
    outputs.push(name.to_string());
    Ok(())
}

// Write-to-temp + rename so a crash never leaves a half-written artifact.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Parses "A:B:C" into three floats.
fn parse_triple(text: &str, what: &str) -> Result<[f64; 3]> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(TrapError::Config(format!("{what} must have three ':'-separated fields")));
    }
    let mut out = [0.0; 3];
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse::<f64>()
            .map_err(|_| TrapError::Config(format!("{what}: '{part}' is not a number")))?;
    }
    Ok(out)
}

fn parse_state(text: &str) -> Result<StateVector> {
    let v = StateVector::from_array(parse_triple(text, "--state KA:KS:KI")?);
    trapkit::model::check_state(v)?;
    Ok(v)
}

fn cmd_simulate(
    cfg: &SimConfig,
    state: Option<&str>,
    t_end: Option<f64>,
    out: &Path,
    outputs: &mut Vec<String>,
) -> Result<ExitCode> {
    let state0 = match state {
        Some(text) => parse_state(text)?,
        None => StateVector::from_array(cfg.simulate.state0),
    };
    let t_end = t_end.unwrap_or(cfg.simulate.t_end);
    let traj = integrate(state0, &cfg.params, 0.0, t_end, &cfg.integration)?;

    let mut csv = Vec::new();
    csvio::write_trajectory(&mut csv, &traj)?;
    emit(out, "trajectory.csv", &csv, outputs)?;

    let end = traj.final_state();
    println!(
        "trajectory.csv: {} points over t in [0, {t_end}]; final state ({}, {}, {})",
        traj.len(),
        end.k_a,
        end.k_s,
        end.k_i
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_analyze(
    cfg: &SimConfig,
    grid: Option<&str>,
    out: &Path,
    outputs: &mut Vec<String>,
) -> Result<ExitCode> {
    let sbox = cfg.search.search_box(&cfg.params)?;
    let eqs = find_equilibria(&cfg.params, &sbox, cfg.search.n_starts, cfg.seed)?;

    let mut spec = cfg.basins.spec(&cfg.params, &cfg.search)?;
    if let Some(text) = grid {
        let [na, ns, ni] = parse_triple(text, "--grid NA:NS:NI")?;
        for (name, v) in [("NA", na), ("NS", ns), ("NI", ni)] {
            if v.fract() != 0.0 || v < 2.0 {
                return Err(TrapError::Config(format!(
                    "--grid {name} must be an integer >= 2, got {v}"
                )));
            }
        }
        spec.resolution = [na as usize, ns as usize, ni as usize];
    }
    let grid = compute_basins(&cfg.params, &spec, &cfg.integration, cfg.seed)?;

    let mut csv = Vec::new();
    csvio::write_equilibria(&mut csv, &eqs)?;
    emit(out, "equilibria.csv", &csv, outputs)?;
    let mut csv = Vec::new();
    csvio::write_basins(&mut csv, &grid)?;
    emit(out, "basins.csv", &csv, outputs)?;
    emit(out, "basins.svg", svg::basin_svg(&grid).as_bytes(), outputs)?;

    for eq in &eqs {
        println!(
            "equilibrium ({:.6}, {:.6}, {:.6})  {}  {}",
            eq.state.k_a,
            eq.state.k_s,
            eq.state.k_i,
            eq.class.name(),
            eq.label.name()
        );
    }
    let fractions = grid.fractions();
    for (i, eq) in grid.equilibria.iter().enumerate() {
        if eq.is_attractor() {
            println!(
                "basin of {} attractor at k_a = {:.4}: {:.1}% of grid nodes",
                eq.label.name(),
                eq.state.k_a,
                100.0 * fractions[i]
            );
        }
    }
    if grid.unresolved_fraction() > 0.0 {
        println!("unresolved nodes: {:.2}%", 100.0 * grid.unresolved_fraction());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(
    cfg: &SimConfig,
    spec: &str,
    out: &Path,
    outputs: &mut Vec<String>,
) -> Result<ExitCode> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 4 {
        return Err(TrapError::Config("--sweep must be PARAM:LO:HI:N".into()));
    }
    let name = parts[0].trim();
    let lo: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| TrapError::Config(format!("--sweep LO: '{}' is not a number", parts[1])))?;
    let hi: f64 = parts[2]
        .trim()
        .parse()
        .map_err(|_| TrapError::Config(format!("--sweep HI: '{}' is not a number", parts[2])))?;
    let n: usize = parts[3]
        .trim()
        .parse()
        .map_err(|_| TrapError::Config(format!("--sweep N: '{}' is not a count", parts[3])))?;

    let branch = sweep(&cfg.params, name, lo, hi, n, cfg.seed)?;
    let report = detect_tipping(&branch)?;

    let mut csv = Vec::new();
    csvio::write_branch(&mut csv, &branch)?;
    emit(out, "branch.csv", &csv, outputs)?;
    let mut csv = Vec::new();
    csvio::write_regimes(&mut csv, &report)?;
    emit(out, "regimes.csv", &csv, outputs)?;
    let mut csv = Vec::new();
    csvio::write_tipping(&mut csv, &report)?;
    emit(out, "tipping.csv", &csv, outputs)?;
    emit(out, "branch.svg", svg::branch_svg(&branch, Some(&report)).as_bytes(), outputs)?;

    for span in &report.regimes {
        println!("{name} in [{:.6}, {:.6}]: {}", span.lo, span.hi, span.regime.name());
    }
    for tp in &report.tipping_points {
        println!(
            "tipping {} at {name} = {:.6} (bracket [{:.6}, {:.6}])",
            tp.kind.name(),
            tp.value,
            tp.bracket.0,
            tp.bracket.1
        );
    }
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_abm(
    cfg: &SimConfig,
    scenario: Option<ScenarioArg>,
    mechanism: Option<MechanismArg>,
    replicates: usize,
    steps: Option<usize>,
    out: &Path,
    outputs: &mut Vec<String>,
) -> Result<ExitCode> {
    if replicates == 0 {
        return Err(TrapError::Config("--replicates must be positive".into()));
    }
    let mut world_cfg: WorldConfig = cfg.abm;
    if let Some(s) = scenario {
        world_cfg.env_damage = match s {
            ScenarioArg::Low => DamageScenario::Low,
            ScenarioArg::High => DamageScenario::High,
        };
    }
    if let Some(m) = mechanism {
        world_cfg.mechanism = match m {
            MechanismArg::Endogenous => Mechanism::Endogenous,
            MechanismArg::Exogenous => Mechanism::Exogenous,
        };
    }
    if let Some(s) = steps {
        world_cfg.steps = s;
    }
    world_cfg.validate()?;

    let runs = abm::run_batch(&world_cfg, replicates)?;

    let mut summary = String::from(
        "replicate,seed,gini_cumulative_income,food_insecurity,mean_soil,\
         innovations,adopter_fraction\r\n",
    );
    for (r, run) in runs.iter().enumerate() {
        let mut csv = Vec::new();
        csvio::write_abm(&mut csv, run)?;
        emit(out, &format!("abm_rep_{r:03}.csv"), &csv, outputs)?;

        let world = &run.world;
        let adopters = world.producers.iter().filter(|p| !p.adopted.is_empty()).count();
        summary.push_str(&format!(
            "{r},{},{},{},{},{},{}\r\n",
            abm::replicate_seed(world_cfg.seed, r),
            cumulative_income_gini(run)?,
            food_insecurity(world)?,
            abm::mean_soil(world),
            world.innovations.len(),
            adopters as f64 / world.producers.len() as f64
        ));
    }
    emit(out, "summary.csv", summary.as_bytes(), outputs)?;

    let obs: Vec<_> = runs.iter().flat_map(|r| innovator_observations(&r.world)).collect();
    match tercile_report(&obs) {
        Ok(report) => {
            let mut csv = Vec::new();
            csvio::write_terciles(&mut csv, &report)?;
            emit(out, "terciles.csv", &csv, outputs)?;
            emit(out, "terciles.svg", svg::tercile_svg(&report).as_bytes(), outputs)?;
        }
        // A batch with no (or degenerate) innovation activity has no tercile
        // story to tell; the batch itself still succeeded.
        Err(err) => println!("terciles skipped: {err}"),
    }

    let mean_soil =
        runs.iter().map(|r| abm::mean_soil(&r.world)).sum::<f64>() / replicates as f64;
    println!(
        "{replicates} replicate(s), {} steps, {:?}/{:?}: mean final soil {mean_soil:.4}",
        world_cfg.steps, world_cfg.mechanism, world_cfg.env_damage
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_intervene(
    cfg: &SimConfig,
    state: Option<&str>,
    param: Option<&str>,
    out: &Path,
    outputs: &mut Vec<String>,
) -> Result<ExitCode> {
    let plan = match (state, param) {
        (Some(text), None) => {
            let state = parse_state(text)?;
            let spec = cfg.basins.spec(&cfg.params, &cfg.search)?;
            let grid = compute_basins(&cfg.params, &spec, &cfg.integration, cfg.seed)?;
            intervention_type1(state, &grid, &cfg.params, &cfg.integration)?
        }
        (None, Some(text)) => {
            let parts: Vec<&str> = text.split(':').collect();
            if parts.len() != 3 {
                return Err(TrapError::Config("--param must be NAME:LO:HI".into()));
            }
            let name = parts[0].trim();
            let lo: f64 = parts[1].trim().parse().map_err(|_| {
                TrapError::Config(format!("--param LO: '{}' is not a number", parts[1]))
            })?;
            let hi: f64 = parts[2].trim().parse().map_err(|_| {
                TrapError::Config(format!("--param HI: '{}' is not a number", parts[2]))
            })?;
            intervention_type23(&cfg.params, name, (lo, hi), &cfg.integration, cfg.seed)?
        }
        _ => {
            return Err(TrapError::Config(
                "intervene needs exactly one of --state KA:KS:KI or --param NAME:LO:HI".into(),
            ))
        }
    };

    let json = serde_json::to_vec_pretty(&plan)
        .map_err(|e| TrapError::Analysis(format!("plan serialization failed: {e}")))?;
    emit(out, "intervention.json", &json, outputs)?;

    match &plan {
        InterventionPlan::Type1 { perturbation, target, attractor } => {
            println!(
                "type-1 plan: add ({}, {}, {}) to reach ({}, {}, {}), converging to the \
                 well-being attractor at k_a = {:.4}",
                perturbation.k_a,
                perturbation.k_s,
                perturbation.k_i,
                target.k_a,
                target.k_s,
                target.k_i,
                attractor.k_a
            );
            Ok(ExitCode::SUCCESS)
        }
        InterventionPlan::Type2 { param, from, to, fraction_before, fraction_after } => {
            println!(
                "type-2 plan: {param} {from} -> {to}; well-being basin fraction \
                 {fraction_before:.4} -> {fraction_after:.4}"
            );
            Ok(ExitCode::SUCCESS)
        }
        InterventionPlan::Type3 { param, from, to, boundary, regime_after } => {
            println!(
                "type-3 plan: {param} {from} -> {to} (regime boundary at {boundary:.6}, \
                 new regime {})",
                regime_after.name()
            );
            Ok(ExitCode::SUCCESS)
        }
        InterventionPlan::Infeasible { reason } => {
            println!("infeasible: {reason}");
            Ok(ExitCode::from(4))
        }
    }
}
