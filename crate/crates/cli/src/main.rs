//! `nlftl`: run the particle scheme, the Godunov solver and the diagnostics
//! on builtin or file-configured scenarios.
//!
//! Exit status: 0 on success, 1 on I/O failure, 2 on an invariant
//! violation, 3 on a configuration or usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nlftl::scenarios::{
    builtin_scenario, emit_compare, emit_convergence, emit_entropy_audit, emit_godunov,
    emit_particles, run_compare, run_convergence, run_entropy_audit, run_godunov, run_particles,
    AuditMode, ScenarioConfig, BUILTIN_NAMES,
};
use nlftl::Error;

#[derive(Parser)]
#[command(
    name = "nlftl",
    version,
    about = "Nonlocal follow-the-leader particles and a Godunov reference solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the particle system and write trajectory, density and metrics.
    Particles(RunArgs),
    /// Run the Godunov finite-volume solver.
    Godunov(RunArgs),
    /// Run both methods and tabulate L1 and W1 distances between them.
    Compare(RunArgs),
    /// Particle error against a fine Godunov reference over a list of N.
    Converge(RunArgs),
    /// Evaluate the entropy residual over constants, test functions and horizons.
    EntropyAudit(AuditArgs),
    /// Inspect the builtin scenarios.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Subcommand)]
enum ScenarioAction {
    /// Print the builtin scenario names with their mass and support.
    List,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config overlaid on the selected scenario.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Builtin scenario name (see `nlftl scenario list`).
    #[arg(long, value_name = "NAME")]
    scenario: Option<String>,
    /// Output root; files land in OUT/<scenario>/<method>/.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Number of particle cells.
    #[arg(long)]
    n: Option<usize>,
    /// Godunov cell count (the reference grid for `converge`).
    #[arg(long)]
    cells: Option<usize>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Accepted for scripts that insist; nothing here draws random numbers.
    #[arg(long)]
    seedless: bool,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Audit the time-constant initial profile instead of an evolving run.
    #[arg(long)]
    frozen: bool,
}

fn load(args: &RunArgs) -> Result<ScenarioConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            ScenarioConfig::from_json_str_on(&text, args.scenario.as_deref())?
        }
        None => builtin_scenario(args.scenario.as_deref().unwrap_or("single-step"))?,
    };
    if let Some(n) = args.n {
        cfg.particles = n;
    }
    if let Some(t) = args.t_end {
        cfg.t_end = t;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.to_string_lossy().into_owned();
    }
    Ok(cfg)
}

fn finish(cfg: &ScenarioConfig) -> Result<PathBuf, Error> {
    cfg.validate()?;
    Ok(PathBuf::from(&cfg.output_dir))
}

fn report(dir: &Path) {
    println!("wrote {}", dir.display());
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Particles(args) => {
            let cfg = load(&args)?;
            reject_cells(&args, "particles")?;
            let out = finish(&cfg)?;
            let outcome = run_particles(&cfg)?;
            let s = &outcome.run.stats;
            println!(
                "{}: N = {}, {} steps ({} rejected), min gap {:.6e} (critical {:.6e})",
                cfg.name,
                cfg.particles,
                s.accepted_steps,
                s.rejected_steps,
                s.min_gap,
                outcome.initial.critical_gap()
            );
            report(&emit_particles(&out, &cfg, &outcome)?);
        }
        Command::Godunov(args) => {
            let mut cfg = load(&args)?;
            if let Some(j) = args.cells {
                cfg.grid.cells = j;
            }
            let out = finish(&cfg)?;
            let r = run_godunov(&cfg)?;
            println!(
                "{}: J = {}, {} steps, mass drift {:.3e} (clamped {:.3e})",
                cfg.name,
                cfg.grid.cells,
                r.stats.steps,
                r.stats.mass_drift(),
                r.stats.clamp_total
            );
            report(&emit_godunov(&out, &cfg, &r)?);
        }
        Command::Compare(args) => {
            let mut cfg = load(&args)?;
            if let Some(j) = args.cells {
                cfg.grid.cells = j;
            }
            let out = finish(&cfg)?;
            let r = run_compare(&cfg)?;
            if let Some(last) = r.rows.last() {
                println!(
                    "{}: t = {}, L1 = {:.6e}, W1 = {:.6e}",
                    cfg.name, last.t, last.l1, last.w1
                );
            }
            report(&emit_compare(&out, &cfg, &r)?);
        }
        Command::Converge(args) => {
            let mut cfg = load(&args)?;
            if args.n.is_some() {
                return Err(Error::Config(
                    "converge takes its particle counts from convergence.particles in the config"
                        .into(),
                ));
            }
            if let Some(j) = args.cells {
                cfg.convergence.reference_cells = j;
            }
            let out = finish(&cfg)?;
            let table = run_convergence(
                &cfg,
                &cfg.convergence.particles,
                cfg.convergence.reference_cells,
            )?;
            println!("{}: reference J = {}", cfg.name, table.reference_cells);
            for row in &table.rows {
                match row.ratio {
                    Some(q) => {
                        println!("  N = {:>5}  e = {:.6e}  ratio = {q:.4}", row.n, row.error)
                    }
                    None => println!("  N = {:>5}  e = {:.6e}", row.n, row.error),
                }
            }
            report(&emit_convergence(&out, &cfg, &table)?);
        }
        Command::EntropyAudit(args) => {
            let mut cfg = load(&args.run)?;
            if let Some(j) = args.run.cells {
                cfg.grid.cells = j;
            }
            if args.frozen {
                cfg.entropy.mode = AuditMode::Frozen;
            }
            let out = finish(&cfg)?;
            let r = run_entropy_audit(&cfg)?;
            let flagged = r.flagged().count();
            println!(
                "{} ({}): {} residuals, {flagged} flagged",
                cfg.name,
                r.mode.as_str(),
                r.entries.len()
            );
            if let Some(t) = r.first_flagged_horizon() {
                println!("  first flagged horizon T = {t}");
            }
            report(&emit_entropy_audit(&out, &cfg, &r)?);
        }
        Command::Scenario {
            action: ScenarioAction::List,
        } => {
            for name in BUILTIN_NAMES {
                let profile = builtin_scenario(name)?.initial_profile()?;
                let (lo, hi) = profile.support().unwrap_or((0.0, 0.0));
                println!(
                    "{name:<16} mass {:.6}  support [{lo}, {hi}]",
                    profile.mass()
                );
            }
        }
    }
    Ok(())
}

fn reject_cells(args: &RunArgs, command: &str) -> Result<(), Error> {
    match args.cells {
        Some(_) => Err(Error::Config(format!(
            "--cells has no meaning for {command}"
        ))),
        None => Ok(()),
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Invariant(_) => 2,
        Error::Config(_) | Error::Domain(_) | Error::Json(_) => 3,
        Error::Io { .. } => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
